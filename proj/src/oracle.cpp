#include "potloc/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace potloc::oracle {

namespace {

struct Candidate {
  double start, end, confidence;
  int label;
};

bool contains(const Candidate& c, const PointAnnotation& p) {
  return c.label == p.class_index() && c.start <= p.epsilon &&
         p.epsilon <= c.end;
}

// Candidates sorted so that the winner is first: by confidence descending,
// then start ascending, then end ascending.
void sort_candidates(std::vector<Candidate>& cands) {
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
}

}  // namespace

std::vector<std::vector<PseudoLabel>> pseudo_labels(
    const std::vector<std::vector<Proposal>>& proposals_per_video,
    const std::vector<std::vector<PointAnnotation>>& points_per_video,
    const std::vector<int>& video_lengths, const RefinementConfig& config) {
  const size_t num_videos = points_per_video.size();

  // Stage 1: proposals containing exactly one matching point.
  std::vector<std::vector<Candidate>> seeds(num_videos);
  for (size_t v = 0; v < num_videos; ++v) {
    for (const auto& prop : proposals_per_video[v]) {
      Candidate c{prop.start, prop.end, prop.confidence, prop.label};
      int hits = 0;
      for (const auto& p : points_per_video[v])
        if (contains(c, p)) ++hits;
      if (hits == 1) seeds[v].push_back(c);
    }
  }

  // Stage 2: per-class mean seed duration, plus the overall mean.
  std::vector<double> class_sum, overall;
  std::vector<int> class_n;
  for (const auto& vs : seeds)
    for (const auto& s : vs) {
      if (s.label >= static_cast<int>(class_sum.size())) {
        class_sum.resize(s.label + 1, 0.0);
        class_n.resize(s.label + 1, 0);
      }
      class_sum[s.label] += s.end - s.start;
      class_n[s.label] += 1;
      overall.push_back(s.end - s.start);
    }
  auto radius_for = [&](int cls) {
    if (cls >= 0 && cls < static_cast<int>(class_n.size()) && class_n[cls] > 0)
      return class_sum[cls] / class_n[cls] / 2.0;
    if (!overall.empty()) {
      double sum = 0;
      for (double d : overall) sum += d;
      return sum / overall.size() / 2.0;
    }
    return config.default_duration / 2.0;
  };

  // Stage 3: one pseudo-label per point.
  std::vector<std::vector<PseudoLabel>> result(num_videos);
  for (size_t v = 0; v < num_videos; ++v) {
    for (const auto& p : points_per_video[v]) {
      const int cls = p.class_index();

      std::vector<Candidate> covering;
      for (const auto& s : seeds[v])
        if (contains(s, p)) covering.push_back(s);
      if (!covering.empty()) {
        sort_candidates(covering);
        result[v].push_back(
            {p.epsilon, covering[0].start, covering[0].end, cls});
        continue;
      }

      const double radius = radius_for(cls);
      std::vector<Candidate> raw;
      for (const auto& prop : proposals_per_video[v]) {
        Candidate c{prop.start, prop.end, prop.confidence, prop.label};
        if (contains(c, p)) raw.push_back(c);
      }
      if (!raw.empty()) {
        sort_candidates(raw);
        result[v].push_back({p.epsilon,
                             std::max(raw[0].start, p.epsilon - radius),
                             std::min(raw[0].end, p.epsilon + radius), cls});
      } else {
        result[v].push_back(
            {p.epsilon, std::max(0.0, p.epsilon - radius),
             std::min(static_cast<double>(video_lengths[v]),
                      p.epsilon + radius),
             cls});
      }
    }
  }
  return result;
}

double average_precision(const std::vector<RankedInterval>& detections,
                         const std::vector<RankedInterval>& ground_truth,
                         double tiou_threshold) {
  if (ground_truth.empty()) return 0;

  std::vector<RankedInterval> ranked = detections;
  std::sort(ranked.begin(), ranked.end(),
            [](const RankedInterval& a, const RankedInterval& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.start < b.start;
            });

  std::vector<bool> used(ground_truth.size(), false);
  std::vector<double> prec, rec;
  int tp = 0, fp = 0;
  for (const auto& d : ranked) {
    double best_overlap = -1;
    int best = -1;
    for (size_t g = 0; g < ground_truth.size(); ++g) {
      if (used[g]) continue;
      const auto& gt = ground_truth[g];
      if (gt.group != d.group) continue;
      const double inter =
          std::min(d.end, gt.end) - std::max(d.start, gt.start);
      const double uni = (d.end - d.start) + (gt.end - gt.start) -
                         std::max(0.0, inter);
      const double overlap = inter > 0 && uni > 0 ? inter / uni : 0;
      if (overlap >= tiou_threshold && overlap > best_overlap) {
        best_overlap = overlap;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[best] = true;
      ++tp;
    } else {
      ++fp;
    }
    prec.push_back(static_cast<double>(tp) / (tp + fp));
    rec.push_back(static_cast<double>(tp) / ground_truth.size());
  }

  // Area under the stepwise precision-recall curve.
  double ap = 0;
  double prev_recall = 0;
  for (size_t i = 0; i < prec.size(); ++i) {
    ap += (rec[i] - prev_recall) * prec[i];
    prev_recall = rec[i];
  }
  return ap;
}

}  // namespace potloc::oracle
