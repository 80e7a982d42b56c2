#pragma once

#include <vector>

#include "potloc/metrics.hpp"
#include "potloc/pseudolabel.hpp"
#include "potloc/types.hpp"

// Naive, obviously-correct re-implementations used by the verification
// suites. They deliberately share no code with the production paths they
// check.
namespace potloc::oracle {

// Step-by-step refinement: collect singleton proposals, average their
// durations per class, then resolve every point independently.
std::vector<std::vector<PseudoLabel>> pseudo_labels(
    const std::vector<std::vector<Proposal>>& proposals_per_video,
    const std::vector<std::vector<PointAnnotation>>& points_per_video,
    const std::vector<int>& video_lengths, const RefinementConfig& config);

// Ranked-list average precision computed through the explicit
// precision-recall curve.
double average_precision(const std::vector<RankedInterval>& detections,
                         const std::vector<RankedInterval>& ground_truth,
                         double tiou_threshold);

}  // namespace potloc::oracle
