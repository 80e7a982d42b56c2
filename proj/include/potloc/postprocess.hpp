#pragma once

#include <utility>
#include <vector>

#include "potloc/types.hpp"

namespace potloc {

struct ProposalConfig {
  double video_class_threshold = 0.5;
  std::vector<double> snippet_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5,
                                            0.6, 0.7, 0.8, 0.9};
  double nms_tiou = 0.6;
  double oic_outer_fraction = 0.25;
};

// Multiplies each action score by the class-agnostic score (complement of
// the background probability); the background column passes through.
ScoreSequence fuse_scores(const ScoreSequence& p);

// Maximal runs of consecutive indices with score >= threshold, as inclusive
// integer index ranges, sorted and disjoint.
std::vector<std::pair<int, int>> segment_candidates(
    const std::vector<double>& scores, double threshold);

// Inner mean minus the mean over the two flanking regions, each of length
// max(1, round(outer_fraction * segment_length)) clipped to the video; the
// inner mean alone when both flanks vanish.
double oic_score(const std::vector<double>& scores,
                 std::pair<int, int> segment, double outer_fraction);

// Greedy class-wise suppression by descending confidence; kept proposals of
// one class are pairwise below the tIoU threshold. Output is ordered by
// descending confidence.
std::vector<Proposal> temporal_nms(std::vector<Proposal> proposals,
                                   double tiou_threshold);

// Full pipeline for one video: for every class whose video-level score passes
// the threshold, segment the fused per-level class tracks at each snippet
// threshold, score segments by outer-inner contrast, map them to level-0 time
// (scale sigma^level, clipped to the video), pool everything and suppress.
std::vector<Proposal> generate_proposals(
    const std::vector<ScoreSequence>& levels,
    const std::vector<double>& video_scores, int sigma, int video_length,
    const ProposalConfig& config);

}  // namespace potloc
