#pragma once

#include <vector>

#include "potloc/types.hpp"

namespace potloc {

// Per-class duration statistics gathered from the singleton-seed set.
struct ClassDurationStats {
  std::vector<double> mean_duration;  // meaningful only where count > 0
  std::vector<int> count;
  double global_mean = 0;  // over all seeds regardless of class
  int global_count = 0;

  bool has_class(int c) const {
    return c >= 0 && c < static_cast<int>(count.size()) && count[c] > 0;
  }
};

struct RefinementConfig {
  // Used when a point's class has no duration statistic at all.
  double default_duration = 16.0;
};

// True iff the labels match and start <= epsilon <= end (both ends inclusive).
bool point_in_proposal(const Proposal& proposal, const PointAnnotation& point);

// A seed candidate: a proposal that contained exactly one annotated point,
// paired with that point and the proposal's confidence.
struct SeededLabel {
  PseudoLabel label;
  double confidence = 0;
};

// Proposals containing exactly one point (by point_in_proposal) become seed
// candidates; proposals covering zero or several points are dropped.
std::vector<SeededLabel> seed_singleton_proposals(
    const std::vector<Proposal>& proposals,
    const std::vector<PointAnnotation>& points);

ClassDurationStats class_mean_durations(const std::vector<SeededLabel>& seeds,
                                        int num_classes);

// Refines per-video proposals into exactly one pseudo-label per annotated
// point. Output is aligned with the input: result[v][i] belongs to
// points_per_video[v][i]. Duration statistics are gathered once from the
// singleton seeds across all videos and never updated afterwards.
std::vector<std::vector<PseudoLabel>> generate_pseudo_labels(
    const std::vector<std::vector<Proposal>>& proposals_per_video,
    const std::vector<std::vector<PointAnnotation>>& points_per_video,
    const std::vector<int>& video_lengths, const RefinementConfig& config);

}  // namespace potloc
