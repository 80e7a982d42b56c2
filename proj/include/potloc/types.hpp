#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "potloc/mat.hpp"

namespace potloc {

// One action category out of num_classes.
struct ClassId {
  int index = 0;
  int num_classes = 1;
  friend bool operator==(const ClassId&, const ClassId&) = default;
};

// A single annotated snippet: the only supervision given per action instance.
struct PointAnnotation {
  int epsilon = 0;             // snippet index
  std::vector<uint8_t> label;  // one-hot over classes

  // Index of the set bit, or -1 if the vector is not one-hot.
  int class_index() const {
    int idx = -1;
    for (size_t c = 0; c < label.size(); ++c) {
      if (label[c] == 0) continue;
      if (label[c] != 1 || idx >= 0) return -1;
      idx = static_cast<int>(c);
    }
    return idx;
  }
  friend bool operator==(const PointAnnotation&,
                         const PointAnnotation&) = default;
};

// Scored candidate interval [start, end) in snippet units.
struct Proposal {
  double start = 0;
  double end = 0;
  int label = 0;
  double confidence = 0;
  friend bool operator==(const Proposal&, const Proposal&) = default;
};

// Refined interval around an annotated point; the self-training supervision.
struct PseudoLabel {
  int point = 0;
  double start = 0;
  double end = 0;
  int label = 0;
  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

// Detection emitted at inference time.
struct Detection {
  double start = 0;
  double end = 0;
  int label = 0;
  double score = 0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

// T x (C+1) per-snippet probabilities; the last column is background.
struct ScoreSequence {
  Mat values;

  ScoreSequence() = default;
  ScoreSequence(int length, int num_classes)
      : values(length, num_classes + 1) {}

  int length() const { return values.rows; }
  int num_classes() const { return values.cols - 1; }
  double background(int t) const { return values.at(t, values.cols - 1); }
  friend bool operator==(const ScoreSequence&, const ScoreSequence&) = default;
};

struct GtInterval {
  double start = 0;
  double end = 0;
  int label = 0;
  friend bool operator==(const GtInterval&, const GtInterval&) = default;
};

struct VideoRecord {
  std::string id;
  int length = 0;                // T, in snippets
  std::optional<Mat> features;   // T x D_in
  std::vector<PointAnnotation> points;
  // Present only for synthetic/eval data; training stages must not read it.
  std::optional<std::vector<GtInterval>> ground_truth;
  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

// Per-video class presence derived from the annotated points.
struct VideoLabel {
  std::vector<uint8_t> presence;
  friend bool operator==(const VideoLabel&, const VideoLabel&) = default;
};

// Returns human-readable descriptions of every invariant violation found;
// empty means the dataset is well formed.
std::vector<std::string> validate_dataset(const std::vector<VideoRecord>& videos);

VideoLabel derive_video_labels(const VideoRecord& video, int num_classes);

}  // namespace potloc
