#include "potloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "potloc/jsonl.hpp"

namespace potloc {

double tiou(double start_a, double end_a, double start_b, double end_b) {
  double inter =
      std::min(end_a, end_b) - std::max(start_a, start_b);
  if (inter <= 0) return 0;
  double uni = (end_a - start_a) + (end_b - start_b) - inter;
  return uni > 0 ? inter / uni : 0;
}

double average_precision(std::vector<RankedInterval> detections,
                         const std::vector<RankedInterval>& ground_truth,
                         double tiou_threshold, bool eleven_point) {
  if (ground_truth.empty()) return 0;
  std::stable_sort(detections.begin(), detections.end(),
                   [](const RankedInterval& a, const RankedInterval& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.start < b.start;
                   });

  std::vector<bool> matched(ground_truth.size(), false);
  const double n_gt = static_cast<double>(ground_truth.size());
  int tp = 0;
  std::vector<double> precision_at_tp;  // precision at each TP rank
  std::vector<double> recall_at_tp;
  for (size_t rank = 0; rank < detections.size(); ++rank) {
    const auto& d = detections[rank];
    double best = 0;
    int best_idx = -1;
    for (size_t g = 0; g < ground_truth.size(); ++g) {
      if (matched[g] || ground_truth[g].group != d.group) continue;
      double ov = tiou(d.start, d.end, ground_truth[g].start,
                       ground_truth[g].end);
      if (ov >= tiou_threshold && ov > best) {
        best = ov;
        best_idx = static_cast<int>(g);
      }
    }
    if (best_idx >= 0) {
      matched[best_idx] = true;
      ++tp;
      precision_at_tp.push_back(static_cast<double>(tp) /
                                static_cast<double>(rank + 1));
      recall_at_tp.push_back(tp / n_gt);
    }
  }

  if (!eleven_point) {
    double sum = 0;
    for (double p : precision_at_tp) sum += p;
    return sum / n_gt;
  }

  // 11-point interpolated AP: mean of max precision at recall >= r.
  double sum = 0;
  for (int i = 0; i <= 10; ++i) {
    double r = i / 10.0;
    double best = 0;
    for (size_t k = 0; k < precision_at_tp.size(); ++k)
      if (recall_at_tp[k] >= r) best = std::max(best, precision_at_tp[k]);
    sum += best;
  }
  return sum / 11.0;
}

EvalReport evaluate(const std::vector<DetectionRecord>& detections,
                    const std::vector<VideoRecord>& ground_truth_videos,
                    const EvalConfig& config) {
  // Stable video -> group index mapping.
  std::map<std::string, int> group_of;
  for (const auto& v : ground_truth_videos)
    group_of.emplace(v.id, static_cast<int>(group_of.size()));

  std::map<int, std::vector<RankedInterval>> gt_by_class;
  for (const auto& v : ground_truth_videos) {
    if (!v.ground_truth) continue;
    for (const auto& g : *v.ground_truth)
      gt_by_class[g.label].push_back(
          {g.start, g.end, 1.0, group_of.at(v.id)});
  }
  std::map<int, std::vector<RankedInterval>> det_by_class;
  for (const auto& d : detections) {
    auto it = group_of.find(d.video_id);
    if (it == group_of.end()) continue;  // detection in an unknown video
    det_by_class[d.detection.label].push_back(
        {d.detection.start, d.detection.end, d.detection.score, it->second});
  }

  EvalReport report;
  report.tiou_thresholds = config.tiou_thresholds;
  for (const auto& [cls, _] : gt_by_class) report.class_ids.push_back(cls);
  const int n_cls = static_cast<int>(report.class_ids.size());
  const int n_thr = static_cast<int>(config.tiou_thresholds.size());
  report.ap = Mat(n_cls, n_thr);

#pragma omp parallel for collapse(2) schedule(dynamic)
  for (int ci = 0; ci < n_cls; ++ci) {
    for (int ti = 0; ti < n_thr; ++ti) {
      int cls = report.class_ids[ci];
      auto det_it = det_by_class.find(cls);
      static const std::vector<RankedInterval> kEmpty;
      const auto& dets = det_it == det_by_class.end() ? kEmpty : det_it->second;
      report.ap.at(ci, ti) =
          average_precision(dets, gt_by_class.at(cls),
                            config.tiou_thresholds[ti], config.eleven_point);
    }
  }

  report.map_at_tiou.assign(n_thr, 0.0);
  for (int ti = 0; ti < n_thr; ++ti) {
    double sum = 0;
    for (int ci = 0; ci < n_cls; ++ci) sum += report.ap.at(ci, ti);
    report.map_at_tiou[ti] = n_cls > 0 ? sum / n_cls : 0;
  }
  double total = 0;
  for (double m : report.map_at_tiou) total += m;
  report.average_map = n_thr > 0 ? total / n_thr : 0;
  return report;
}

std::string report_to_json(const EvalReport& report,
                           double baseline_average_map) {
  std::string out = "{\n  \"tiou_thresholds\": [";
  for (size_t i = 0; i < report.tiou_thresholds.size(); ++i) {
    if (i) out += ", ";
    out += format_real(report.tiou_thresholds[i]);
  }
  out += "],\n  \"class_ids\": [";
  for (size_t i = 0; i < report.class_ids.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(report.class_ids[i]);
  }
  out += "],\n  \"ap\": [";
  for (int ci = 0; ci < report.ap.rows; ++ci) {
    if (ci) out += ", ";
    out += '[';
    for (int ti = 0; ti < report.ap.cols; ++ti) {
      if (ti) out += ", ";
      out += format_real(report.ap.at(ci, ti));
    }
    out += ']';
  }
  out += "],\n  \"map_at_tiou\": [";
  for (size_t i = 0; i < report.map_at_tiou.size(); ++i) {
    if (i) out += ", ";
    out += format_real(report.map_at_tiou[i]);
  }
  out += "],\n  \"average_map\": " + format_real(report.average_map);
  if (baseline_average_map >= 0) {
    out += ",\n  \"baseline_average_map\": " + format_real(baseline_average_map);
    out += ",\n  \"delta_average_map\": " +
           format_real(report.average_map - baseline_average_map);
  }
  out += "\n}\n";
  return out;
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream os;
  os << "tIoU     ";
  for (double t : report.tiou_thresholds) {
    os.width(8);
    os << t;
  }
  os << "\n";
  for (int ci = 0; ci < report.ap.rows; ++ci) {
    os << "class " << report.class_ids[ci] << "  ";
    for (int ti = 0; ti < report.ap.cols; ++ti) {
      os.width(8);
      os.precision(4);
      os << std::fixed << report.ap.at(ci, ti);
      os.unsetf(std::ios_base::fixed);
    }
    os << "\n";
  }
  os << "mAP      ";
  for (double m : report.map_at_tiou) {
    os.width(8);
    os.precision(4);
    os << std::fixed << m;
    os.unsetf(std::ios_base::fixed);
  }
  os << "\naverage mAP: ";
  os.precision(6);
  os << report.average_map << "\n";
  return os.str();
}

}  // namespace potloc
