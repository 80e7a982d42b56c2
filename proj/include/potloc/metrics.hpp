#pragma once

#include <string>
#include <vector>

#include "potloc/jsonl.hpp"
#include "potloc/mat.hpp"
#include "potloc/types.hpp"

namespace potloc {

struct EvalConfig {
  std::vector<double> tiou_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  // Default is exact all-points AP; the 11-point interpolation is kept for
  // comparison with older toolkits.
  bool eleven_point = false;
};

// Temporal IoU of two half-open real intervals; 0 when disjoint.
double tiou(double start_a, double end_a, double start_b, double end_b);

// A detection or ground-truth interval for one class; `group` keeps matching
// within a single video when lists are pooled across videos.
struct RankedInterval {
  double start = 0;
  double end = 0;
  double score = 0;
  int group = 0;
};

// All-points average precision with greedy rank-order matching: a detection
// is a true positive iff it overlaps an unmatched ground-truth interval of
// the same group with tIoU >= threshold (best-tIoU one is taken). Detections
// are ranked by descending score, ties broken by earlier start.
double average_precision(std::vector<RankedInterval> detections,
                         const std::vector<RankedInterval>& ground_truth,
                         double tiou_threshold, bool eleven_point = false);

struct EvalReport {
  std::vector<double> tiou_thresholds;
  std::vector<int> class_ids;  // classes present in the ground truth
  Mat ap;                      // class x threshold
  std::vector<double> map_at_tiou;
  double average_map = 0;
};

EvalReport evaluate(const std::vector<DetectionRecord>& detections,
                    const std::vector<VideoRecord>& ground_truth_videos,
                    const EvalConfig& config);

std::string report_to_json(const EvalReport& report,
                           double baseline_average_map = -1);
std::string report_to_table(const EvalReport& report);

}  // namespace potloc
