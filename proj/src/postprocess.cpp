#include "potloc/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include "potloc/errors.hpp"
#include "potloc/metrics.hpp"

namespace potloc {

ScoreSequence fuse_scores(const ScoreSequence& p) {
  ScoreSequence fused = p;
  const int c_bg = p.values.cols - 1;
  for (int t = 0; t < p.values.rows; ++t) {
    const double actionness = 1.0 - p.values.at(t, c_bg);
    for (int c = 0; c < c_bg; ++c) fused.values.at(t, c) *= actionness;
  }
  return fused;
}

std::vector<std::pair<int, int>> segment_candidates(
    const std::vector<double>& scores, double threshold) {
  std::vector<std::pair<int, int>> segments;
  int start = -1;
  for (int t = 0; t < static_cast<int>(scores.size()); ++t) {
    if (scores[t] >= threshold) {
      if (start < 0) start = t;
    } else if (start >= 0) {
      segments.emplace_back(start, t - 1);
      start = -1;
    }
  }
  if (start >= 0)
    segments.emplace_back(start, static_cast<int>(scores.size()) - 1);
  return segments;
}

double oic_score(const std::vector<double>& scores,
                 std::pair<int, int> segment, double outer_fraction) {
  const auto [lo, hi] = segment;
  const int t_max = static_cast<int>(scores.size()) - 1;
  double inner = 0;
  for (int t = lo; t <= hi; ++t) inner += scores[t];
  inner /= (hi - lo + 1);

  const int flank =
      std::max(1L, std::lround(outer_fraction * (hi - lo + 1)));
  double outer_sum = 0;
  int outer_n = 0;
  for (int t = std::max(0, lo - flank); t <= lo - 1; ++t) {
    outer_sum += scores[t];
    ++outer_n;
  }
  for (int t = hi + 1; t <= std::min(t_max, hi + flank); ++t) {
    outer_sum += scores[t];
    ++outer_n;
  }
  if (outer_n == 0) return inner;
  return inner - outer_sum / outer_n;
}

std::vector<Proposal> temporal_nms(std::vector<Proposal> proposals,
                                   double tiou_threshold) {
  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const Proposal& a, const Proposal& b) {
                     if (a.confidence != b.confidence)
                       return a.confidence > b.confidence;
                     if (a.start != b.start) return a.start < b.start;
                     return a.end < b.end;
                   });
  std::vector<Proposal> kept;
  for (const auto& cand : proposals) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (k.label != cand.label) continue;
      if (tiou(k.start, k.end, cand.start, cand.end) >= tiou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

std::vector<Proposal> generate_proposals(
    const std::vector<ScoreSequence>& levels,
    const std::vector<double>& video_scores, int sigma, int video_length,
    const ProposalConfig& config) {
  if (levels.empty()) throw DataError("generate_proposals: no score levels");
  const int num_classes = levels[0].num_classes();

  std::vector<ScoreSequence> fused;
  fused.reserve(levels.size());
  for (const auto& lvl : levels) fused.push_back(fuse_scores(lvl));

  std::vector<Proposal> pool;
  for (int c = 0; c < num_classes; ++c) {
    if (video_scores[c] < config.video_class_threshold) continue;
    double scale = 1;
    for (size_t l = 0; l < fused.size(); ++l, scale *= sigma) {
      const auto& seq = fused[l];
      std::vector<double> track(seq.length());
      for (int t = 0; t < seq.length(); ++t) track[t] = seq.values.at(t, c);
      for (double thr : config.snippet_thresholds) {
        for (auto seg : segment_candidates(track, thr)) {
          double oic = oic_score(track, seg, config.oic_outer_fraction);
          // Inclusive level-l index range [a, b] occupies level-0 time
          // [a*scale, (b+1)*scale), clipped to the video.
          double start = seg.first * scale;
          double end =
              std::min((seg.second + 1) * scale,
                       static_cast<double>(video_length));
          if (start >= end) continue;
          pool.push_back({start, end, c, std::max(0.0, oic)});
        }
      }
    }
  }
  return temporal_nms(std::move(pool), config.nms_tiou);
}

}  // namespace potloc
