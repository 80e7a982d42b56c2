#include "potloc/types.hpp"

#include <cmath>

namespace potloc {

namespace {

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::vector<std::string> validate_dataset(
    const std::vector<VideoRecord>& videos) {
  std::vector<std::string> violations;
  auto add = [&](const std::string& id, const std::string& what) {
    violations.push_back("video '" + id + "': " + what);
  };

  for (const auto& v : videos) {
    if (v.length <= 0) add(v.id, "non-positive length");
    size_t label_len = 0;
    for (size_t i = 0; i < v.points.size(); ++i) {
      const auto& p = v.points[i];
      if (p.epsilon < 0 || p.epsilon >= v.length)
        add(v.id, "point " + std::to_string(i) + " out of range (epsilon=" +
                      std::to_string(p.epsilon) + ", T=" +
                      std::to_string(v.length) + ")");
      if (p.class_index() < 0)
        add(v.id, "point " + std::to_string(i) + " label not one-hot");
      if (i == 0) label_len = p.label.size();
      if (p.label.size() != label_len)
        add(v.id, "point " + std::to_string(i) + " label length differs");
    }
    if (v.features) {
      if (v.features->rows != v.length)
        add(v.id, "feature rows do not match length");
    }
    if (v.ground_truth) {
      for (size_t i = 0; i < v.ground_truth->size(); ++i) {
        const auto& g = (*v.ground_truth)[i];
        if (!(g.start < g.end) || g.start < 0 || g.end > v.length ||
            !finite(g.start) || !finite(g.end))
          add(v.id, "ground-truth interval " + std::to_string(i) +
                        " out of range or empty");
      }
    }
  }
  return violations;
}

VideoLabel derive_video_labels(const VideoRecord& video, int num_classes) {
  VideoLabel out;
  out.presence.assign(static_cast<size_t>(num_classes), 0);
  for (const auto& p : video.points) {
    int c = p.class_index();
    if (c >= 0 && c < num_classes) out.presence[c] = 1;
  }
  return out;
}

}  // namespace potloc
