#include "potloc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "potloc/errors.hpp"
#include "potloc/postprocess.hpp"

namespace potloc {

namespace {

constexpr double kClampLo = 1e-7;
constexpr double kClampHi = 1.0 - 1e-7;

// Clamp applied to every score before it enters a logarithm; dq is the
// pass-through derivative (zero when the clamp is active).
struct Clamped {
  double q;
  double dq;
};
Clamped clamp_score(double p) {
  if (p < kClampLo) return {kClampLo, 0.0};
  if (p > kClampHi) return {kClampHi, 0.0};
  return {p, 1.0};
}

// -(1-q)^g log q and its derivative in q; the positive-label focal term.
void focal_pos(double q, double gamma, double& val, double& dval) {
  const double lg = std::log(q);
  const double w = gamma == 0 ? 1.0 : std::pow(1.0 - q, gamma);
  const double dw = gamma == 0 ? 0.0 : -gamma * std::pow(1.0 - q, gamma - 1);
  val = -w * lg;
  dval = -(dw * lg + w / q);
}

// -q^g log(1-q) and its derivative in q; the negative-label focal term.
void focal_neg(double q, double gamma, double& val, double& dval) {
  const double lg = std::log(1.0 - q);
  const double w = gamma == 0 ? 1.0 : std::pow(q, gamma);
  const double dw = gamma == 0 ? 0.0 : gamma * std::pow(q, gamma - 1);
  val = -w * lg;
  dval = -(dw * lg - w / (1.0 - q));
}

// Indices of the k largest entries of an action-class column, ties resolved
// toward earlier positions.
std::vector<int> top_k_indices(const ScoreSequence& p, int column, int k) {
  std::vector<int> idx(p.length());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return p.values.at(a, column) > p.values.at(b, column);
  });
  idx.resize(k);
  return idx;
}

}  // namespace

LogitTable make_logit_table(int video_length, int num_classes,
                            const PyramidSpec& pyramid) {
  if (video_length < 1) throw DataError("video length must be >= 1");
  if (pyramid.sigma < 2 && pyramid.levels > 0)
    throw ConfigError("pyramid sigma must be >= 2");
  LogitTable table;
  table.sigma = pyramid.sigma;
  int len = video_length;
  table.levels.emplace_back(len, num_classes + 1);
  for (int l = 1; l <= pyramid.levels; ++l) {
    len = (len + pyramid.sigma - 1) / pyramid.sigma;  // ceil
    table.levels.emplace_back(len, num_classes + 1);
  }
  return table;
}

std::vector<ScoreSequence> scores_from_logits(const LogitTable& table) {
  std::vector<ScoreSequence> out;
  out.reserve(table.levels.size());
  for (const auto& lvl : table.levels) {
    ScoreSequence seq;
    seq.values = Mat(lvl.rows, lvl.cols);
    for (size_t i = 0; i < lvl.data.size(); ++i)
      seq.values.data[i] = 1.0 / (1.0 + std::exp(-lvl.data[i]));
    out.push_back(std::move(seq));
  }
  return out;
}

int effective_top_k(int top_k_config, int length) {
  if (length < 1) throw DataError("empty sequence");
  if (top_k_config <= 0) return std::max(1, length / 8);
  if (top_k_config > length)
    throw ConfigError("top_k=" + std::to_string(top_k_config) +
                      " exceeds sequence length " + std::to_string(length));
  return top_k_config;
}

std::vector<double> video_level_scores(const ScoreSequence& p, int k) {
  if (k < 1 || k > p.length())
    throw ConfigError("top-k out of range for length " +
                      std::to_string(p.length()));
  std::vector<double> scores(p.num_classes());
  for (int c = 0; c < p.num_classes(); ++c) {
    double sum = 0;
    for (int t : top_k_indices(p, c, k)) sum += p.values.at(t, c);
    scores[c] = sum / k;
  }
  return scores;
}

std::vector<double> video_level_scores(
    const std::vector<ScoreSequence>& levels, int top_k_config) {
  if (levels.empty()) throw DataError("no levels");
  std::vector<double> acc(levels[0].num_classes(), 0.0);
  for (const auto& lvl : levels) {
    auto per = video_level_scores(lvl, effective_top_k(top_k_config,
                                                       lvl.length()));
    for (size_t c = 0; c < acc.size(); ++c) acc[c] += per[c];
  }
  for (auto& v : acc) v /= static_cast<double>(levels.size());
  return acc;
}

MilLoss mil_loss(const std::vector<double>& video_scores,
                 const VideoLabel& label) {
  MilLoss out;
  out.grad.assign(video_scores.size(), 0.0);
  for (size_t c = 0; c < video_scores.size(); ++c) {
    auto [q, dq] = clamp_score(video_scores[c]);
    if (label.presence[c]) {
      out.value -= std::log(q);
      out.grad[c] = -dq / q;
    } else {
      out.value -= std::log(1.0 - q);
      out.grad[c] = dq / (1.0 - q);
    }
  }
  return out;
}

SeqLoss act_focal_loss(const ScoreSequence& fused,
                       const std::vector<PointAnnotation>& points,
                       double gamma) {
  SeqLoss out;
  out.grad = Mat(fused.values.rows, fused.values.cols);
  if (points.empty()) return out;
  const int num_classes = fused.num_classes();
  const double inv_n = 1.0 / static_cast<double>(points.size());
  for (const auto& p : points) {
    for (int c = 0; c < num_classes; ++c) {
      auto [q, dq] = clamp_score(fused.values.at(p.epsilon, c));
      double v, dv;
      if (p.label[c])
        focal_pos(q, gamma, v, dv);
      else
        focal_neg(q, gamma, v, dv);
      out.value += inv_n * v;
      out.grad.at(p.epsilon, c) += inv_n * dv * dq;
    }
  }
  return out;
}

std::set<int> background_seeds(const ScoreSequence& fused, double threshold,
                               const std::set<int>& excluded) {
  std::set<int> seeds;
  for (int t = 0; t < fused.length(); ++t)
    if (fused.background(t) >= threshold && !excluded.count(t))
      seeds.insert(t);
  return seeds;
}

SeqLoss bg_loss(const ScoreSequence& fused, const std::set<int>& seeds,
                double gamma) {
  SeqLoss out;
  out.grad = Mat(fused.values.rows, fused.values.cols);
  if (seeds.empty()) return out;
  const int num_classes = fused.num_classes();
  const int c_bg = num_classes;
  const double inv_m = 1.0 / static_cast<double>(seeds.size());
  for (int t : seeds) {
    for (int c = 0; c < num_classes; ++c) {
      auto [q, dq] = clamp_score(fused.values.at(t, c));
      double v, dv;
      focal_neg(q, gamma, v, dv);
      out.value += inv_m * v;
      out.grad.at(t, c) += inv_m * dv * dq;
    }
    auto [b, db] = clamp_score(fused.values.at(t, c_bg));
    double v, dv;
    focal_pos(b, gamma, v, dv);
    out.value += inv_m * v;
    out.grad.at(t, c_bg) += inv_m * dv * db;
  }
  return out;
}

SampledPositives sample_pseudo_labels(const std::vector<PseudoLabel>& labels,
                                      int num_classes,
                                      const std::vector<int>& level_lengths,
                                      int sigma, int radius, RadiusMode mode) {
  SampledPositives out;
  out.levels.resize(level_lengths.size());
  double scale = 1;
  for (size_t l = 0; l < level_lengths.size(); ++l, scale *= sigma) {
    std::set<std::pair<int, int>> taken;  // (position, class)
    const int len = level_lengths[l];
    const int r = mode == RadiusMode::kLevelGrid
                      ? radius
                      : static_cast<int>(radius * scale);
    for (const auto& pl : labels) {
      if (pl.label < 0 || pl.label >= num_classes)
        throw DataError("pseudo-label class out of range");
      const int center =
          static_cast<int>(std::floor(pl.point / scale + 0.5));
      int lo = std::max(static_cast<int>(std::ceil(pl.start / scale)),
                        center - r);
      int hi = std::min(static_cast<int>(std::floor(pl.end / scale)),
                        center + r);
      lo = std::max(lo, 0);
      hi = std::min(hi, len - 1);
      for (int t = lo; t <= hi; ++t) taken.insert({t, pl.label});
    }
    for (const auto& [t, cls] : taken) {
      SampledPositives::Item item;
      item.position = t;
      item.label.assign(num_classes, 0);
      item.label[cls] = 1;
      out.levels[l].push_back(std::move(item));
    }
  }
  return out;
}

MultiSeqLoss enhanced_act_loss(const std::vector<ScoreSequence>& fused_levels,
                               const SampledPositives& sampled, double gamma) {
  MultiSeqLoss out;
  out.grads.reserve(fused_levels.size());
  for (const auto& lvl : fused_levels)
    out.grads.emplace_back(lvl.values.rows, lvl.values.cols);
  const int total = sampled.total_count();
  if (total == 0) return out;
  const double inv_m = 1.0 / total;
  for (size_t l = 0; l < fused_levels.size(); ++l) {
    const auto& seq = fused_levels[l];
    const int num_classes = seq.num_classes();
    for (const auto& item : sampled.levels[l]) {
      for (int c = 0; c < num_classes; ++c) {
        auto [q, dq] = clamp_score(seq.values.at(item.position, c));
        double v, dv;
        if (item.label[c])
          focal_pos(q, gamma, v, dv);
        else
          focal_neg(q, gamma, v, dv);
        out.value += inv_m * v;
        out.grads[l].at(item.position, c) += inv_m * dv * dq;
      }
    }
  }
  return out;
}

MultiSeqLoss enhanced_bg_loss(const std::vector<ScoreSequence>& fused_levels,
                              const SampledPositives& sampled,
                              double threshold, double gamma) {
  MultiSeqLoss out;
  out.grads.reserve(fused_levels.size());
  for (const auto& lvl : fused_levels)
    out.grads.emplace_back(lvl.values.rows, lvl.values.cols);

  std::vector<SeqLoss> per_level(fused_levels.size());
  int active_levels = 0;
  for (size_t l = 0; l < fused_levels.size(); ++l) {
    auto seeds = background_seeds(fused_levels[l], threshold,
                                  sampled.positions(static_cast<int>(l)));
    if (seeds.empty()) continue;
    per_level[l] = bg_loss(fused_levels[l], seeds, gamma);
    ++active_levels;
  }
  if (active_levels == 0) return out;
  const double inv = 1.0 / active_levels;
  for (size_t l = 0; l < fused_levels.size(); ++l) {
    if (per_level[l].grad.rows == 0) continue;
    out.value += inv * per_level[l].value;
    for (size_t i = 0; i < per_level[l].grad.data.size(); ++i)
      out.grads[l].data[i] += inv * per_level[l].grad.data[i];
  }
  return out;
}

namespace {

// Backpropagates a gradient in fused scores to a gradient in raw scores:
// fused[t,c] = p[t,c] * (1 - b_t) for action columns, background unchanged.
void add_fusion_backward(const ScoreSequence& raw, const Mat& dfused,
                         Mat& draw) {
  const int c_bg = raw.values.cols - 1;
  for (int t = 0; t < raw.values.rows; ++t) {
    const double b = raw.values.at(t, c_bg);
    double bg_term = dfused.at(t, c_bg);
    for (int c = 0; c < c_bg; ++c) {
      draw.at(t, c) += dfused.at(t, c) * (1.0 - b);
      bg_term -= dfused.at(t, c) * raw.values.at(t, c);
    }
    draw.at(t, c_bg) += bg_term;
  }
}

VideoLabel label_from_points(const std::vector<PointAnnotation>& points,
                             int num_classes) {
  VideoLabel label;
  label.presence.assign(num_classes, 0);
  for (const auto& p : points) {
    int c = p.class_index();
    if (c >= 0 && c < num_classes) label.presence[c] = 1;
  }
  return label;
}

VideoLabel label_from_pseudo(const std::vector<PseudoLabel>& pls,
                             int num_classes) {
  VideoLabel label;
  label.presence.assign(num_classes, 0);
  for (const auto& pl : pls)
    if (pl.label >= 0 && pl.label < num_classes) label.presence[pl.label] = 1;
  return label;
}

// Distributes the MIL gradient (over video scores) back onto the score
// matrices through the top-k means.
void add_mil_backward(const std::vector<ScoreSequence>& levels,
                      const std::vector<double>& dscores, int top_k_config,
                      double weight, std::vector<Mat>& draw) {
  const double level_share = 1.0 / static_cast<double>(levels.size());
  for (size_t l = 0; l < levels.size(); ++l) {
    const auto& p = levels[l];
    const int k = effective_top_k(top_k_config, p.length());
    for (int c = 0; c < p.num_classes(); ++c) {
      const double g = weight * dscores[c] * level_share / k;
      for (int t : top_k_indices(p, c, k)) draw[l].at(t, c) += g;
    }
  }
}

}  // namespace

TotalLoss total_loss(const LogitTable& logits, const Supervision& supervision,
                     const LossWeights& weights) {
  const int num_levels = static_cast<int>(logits.levels.size());
  if (num_levels == 0) throw DataError("empty logit table");
  const int num_classes = logits.num_classes();

  const auto scores = scores_from_logits(logits);
  std::vector<ScoreSequence> fused;
  fused.reserve(scores.size());
  for (const auto& s : scores) fused.push_back(fuse_scores(s));

  // Gradients are accumulated in raw-score space, then pushed through the
  // sigmoid at the end.
  std::vector<Mat> draw;
  draw.reserve(scores.size());
  for (const auto& s : scores)
    draw.emplace_back(s.values.rows, s.values.cols);

  TotalLoss out;

  if (std::holds_alternative<std::vector<PointAnnotation>>(supervision)) {
    const auto& points = std::get<std::vector<PointAnnotation>>(supervision);
    if (num_levels != 1)
      throw ConfigError("point supervision expects a single-level table");

    const int k = effective_top_k(weights.top_k, scores[0].length());
    const auto vs = video_level_scores(scores[0], k);
    const auto mil = mil_loss(vs, label_from_points(points, num_classes));
    out.mil = mil.value;
    add_mil_backward({scores[0]}, mil.grad, k, weights.lambda_mil, draw);

    const auto act = act_focal_loss(fused[0], points, weights.gamma);
    out.act = act.value;

    const auto seeds = background_seeds(fused[0], weights.bg_threshold, {});
    const auto bg = bg_loss(fused[0], seeds, weights.gamma);
    out.bg = bg.value;

    Mat dfused(fused[0].values.rows, fused[0].values.cols);
    for (size_t i = 0; i < dfused.data.size(); ++i)
      dfused.data[i] = weights.lambda_act * act.grad.data[i] +
                       weights.lambda_bg * bg.grad.data[i];
    add_fusion_backward(scores[0], dfused, draw[0]);
  } else {
    const auto& pls = std::get<std::vector<PseudoLabel>>(supervision);

    std::vector<int> lengths;
    for (const auto& lvl : logits.levels) lengths.push_back(lvl.rows);
    const auto sampled =
        sample_pseudo_labels(pls, num_classes, lengths, logits.sigma,
                             weights.radius, weights.radius_mode);

    const auto vs = video_level_scores(scores, weights.top_k);
    const auto mil = mil_loss(vs, label_from_pseudo(pls, num_classes));
    out.mil = mil.value;
    add_mil_backward(scores, mil.grad, weights.top_k, weights.lambda_mil,
                     draw);

    const auto act = enhanced_act_loss(fused, sampled, weights.gamma);
    out.act = act.value;
    const auto bg =
        enhanced_bg_loss(fused, sampled, weights.bg_threshold, weights.gamma);
    out.bg = bg.value;

    for (int l = 0; l < num_levels; ++l) {
      Mat dfused(fused[l].values.rows, fused[l].values.cols);
      for (size_t i = 0; i < dfused.data.size(); ++i)
        dfused.data[i] = weights.lambda_act * act.grads[l].data[i] +
                         weights.lambda_bg * bg.grads[l].data[i];
      add_fusion_backward(scores[l], dfused, draw[l]);
    }
  }

  out.value = weights.lambda_mil * out.mil + weights.lambda_act * out.act +
              weights.lambda_bg * out.bg;

  // Sigmoid backward: dL/dz = dL/dp * p * (1 - p).
  out.grad.reserve(num_levels);
  for (int l = 0; l < num_levels; ++l) {
    Mat g(draw[l].rows, draw[l].cols);
    for (size_t i = 0; i < g.data.size(); ++i) {
      const double p = scores[l].values.data[i];
      g.data[i] = draw[l].data[i] * p * (1.0 - p);
    }
    out.grad.push_back(std::move(g));
  }
  return out;
}

LogitTable fit_logits(const VideoRecord& video, const Supervision& supervision,
                      const LossWeights& weights, const PyramidSpec& pyramid,
                      const TrainConfig& train) {
  if (train.steps < 1) throw ConfigError("train.steps must be >= 1");
  int num_classes = 0;
  if (std::holds_alternative<std::vector<PointAnnotation>>(supervision)) {
    for (const auto& p : std::get<std::vector<PointAnnotation>>(supervision))
      num_classes = std::max(num_classes, static_cast<int>(p.label.size()));
  } else {
    for (const auto& pl : std::get<std::vector<PseudoLabel>>(supervision))
      num_classes = std::max(num_classes, pl.label + 1);
  }
  if (num_classes == 0) throw DataError("supervision carries no classes");

  LogitTable table = make_logit_table(video.length, num_classes, pyramid);
  std::vector<Mat> velocity;
  for (const auto& lvl : table.levels)
    velocity.emplace_back(lvl.rows, lvl.cols);

  for (int step = 0; step < train.steps; ++step) {
    const auto loss = total_loss(table, supervision, weights);
    if (!std::isfinite(loss.value))
      throw DataError("non-finite loss at step " + std::to_string(step) +
                      " for video '" + video.id + "'");
    for (size_t l = 0; l < table.levels.size(); ++l) {
      auto& z = table.levels[l];
      for (size_t i = 0; i < z.data.size(); ++i) {
        velocity[l].data[i] = train.momentum * velocity[l].data[i] -
                              train.learning_rate * loss.grad[l].data[i];
        z.data[i] += velocity[l].data[i];
      }
    }
  }
  return table;
}

}  // namespace potloc
