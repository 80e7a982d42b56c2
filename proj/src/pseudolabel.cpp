#include "potloc/pseudolabel.hpp"

#include <algorithm>
#include <cmath>

#include "potloc/errors.hpp"

namespace potloc {

bool point_in_proposal(const Proposal& proposal, const PointAnnotation& point) {
  return proposal.label == point.class_index() &&
         proposal.start <= point.epsilon && point.epsilon <= proposal.end;
}

std::vector<SeededLabel> seed_singleton_proposals(
    const std::vector<Proposal>& proposals,
    const std::vector<PointAnnotation>& points) {
  std::vector<SeededLabel> seeds;
  for (const auto& prop : proposals) {
    int contained = 0;
    const PointAnnotation* hit = nullptr;
    for (const auto& p : points) {
      if (point_in_proposal(prop, p)) {
        ++contained;
        hit = &p;
        if (contained > 1) break;
      }
    }
    if (contained == 1)
      seeds.push_back({{hit->epsilon, prop.start, prop.end, prop.label},
                       prop.confidence});
  }
  return seeds;
}

ClassDurationStats class_mean_durations(const std::vector<SeededLabel>& seeds,
                                        int num_classes) {
  ClassDurationStats stats;
  stats.mean_duration.assign(num_classes, 0.0);
  stats.count.assign(num_classes, 0);
  std::vector<double> sums(num_classes, 0.0);
  double total = 0;
  for (const auto& s : seeds) {
    double d = s.label.end - s.label.start;
    if (s.label.label >= 0 && s.label.label < num_classes) {
      sums[s.label.label] += d;
      ++stats.count[s.label.label];
    }
    total += d;
    ++stats.global_count;
  }
  for (int c = 0; c < num_classes; ++c)
    if (stats.count[c] > 0) stats.mean_duration[c] = sums[c] / stats.count[c];
  if (stats.global_count > 0) stats.global_mean = total / stats.global_count;
  return stats;
}

namespace {

// Deterministic winner among candidates: highest confidence, ties broken by
// smaller start, then smaller end.
bool better(double cs_a, double s_a, double e_a, double cs_b, double s_b,
            double e_b) {
  if (cs_a != cs_b) return cs_a > cs_b;
  if (s_a != s_b) return s_a < s_b;
  return e_a < e_b;
}

double truncation_radius(const ClassDurationStats& stats, int cls,
                         const RefinementConfig& config) {
  if (stats.has_class(cls)) return stats.mean_duration[cls] / 2.0;
  if (stats.global_count > 0) return stats.global_mean / 2.0;
  return config.default_duration / 2.0;
}

}  // namespace

std::vector<std::vector<PseudoLabel>> generate_pseudo_labels(
    const std::vector<std::vector<Proposal>>& proposals_per_video,
    const std::vector<std::vector<PointAnnotation>>& points_per_video,
    const std::vector<int>& video_lengths, const RefinementConfig& config) {
  if (config.default_duration <= 0)
    throw ConfigError("refine.default_duration must be > 0");
  if (proposals_per_video.size() != points_per_video.size() ||
      video_lengths.size() != points_per_video.size())
    throw DataError("per-video inputs have mismatched sizes");

  const int num_videos = static_cast<int>(points_per_video.size());

  // Pass 1: singleton seeds per video. A singleton seed's interval contains
  // exactly one point, so seeds never compete across points.
  std::vector<std::vector<SeededLabel>> seeds(num_videos);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < num_videos; ++v)
    seeds[v] =
        seed_singleton_proposals(proposals_per_video[v], points_per_video[v]);

  int num_classes = 0;
  for (const auto& pts : points_per_video)
    for (const auto& p : pts)
      num_classes = std::max(num_classes, static_cast<int>(p.label.size()));

  std::vector<SeededLabel> all_seeds;
  for (const auto& vs : seeds)
    all_seeds.insert(all_seeds.end(), vs.begin(), vs.end());
  ClassDurationStats stats = class_mean_durations(all_seeds, num_classes);

  // Pass 2: one pseudo-label per point. Covered points keep their best seed;
  // uncovered points fall back to the best covering raw proposal truncated
  // around the point, or to a synthetic interval of the mean duration.
  std::vector<std::vector<PseudoLabel>> out(num_videos);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < num_videos; ++v) {
    const auto& points = points_per_video[v];
    out[v].resize(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
      const PointAnnotation& p = points[i];
      const int cls = p.class_index();

      const SeededLabel* best_seed = nullptr;
      for (const auto& s : seeds[v]) {
        Proposal as_prop{s.label.start, s.label.end, s.label.label, 0};
        if (!point_in_proposal(as_prop, p)) continue;
        if (!best_seed ||
            better(s.confidence, s.label.start, s.label.end,
                   best_seed->confidence, best_seed->label.start,
                   best_seed->label.end))
          best_seed = &s;
      }
      if (best_seed) {
        out[v][i] = {p.epsilon, best_seed->label.start, best_seed->label.end,
                     cls};
        continue;
      }

      const double delta = truncation_radius(stats, cls, config);
      const Proposal* best_raw = nullptr;
      for (const auto& prop : proposals_per_video[v]) {
        if (!point_in_proposal(prop, p)) continue;
        if (!best_raw ||
            better(prop.confidence, prop.start, prop.end, best_raw->confidence,
                   best_raw->start, best_raw->end))
          best_raw = &prop;
      }
      if (best_raw) {
        out[v][i] = {p.epsilon, std::max(best_raw->start, p.epsilon - delta),
                     std::min(best_raw->end, p.epsilon + delta), cls};
      } else {
        // No proposal of this class covers the point anywhere: emit a
        // mean-duration interval centered on it, clipped to the video.
        double lo = std::max(0.0, p.epsilon - delta);
        double hi = std::min(static_cast<double>(video_lengths[v]),
                             p.epsilon + delta);
        out[v][i] = {p.epsilon, lo, hi, cls};
      }
    }
  }
  return out;
}

}  // namespace potloc
