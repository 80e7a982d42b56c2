#pragma once

#include <string>
#include <vector>

#include "potloc/types.hpp"

namespace potloc {

// Line-delimited JSON dataset files, one record per line, UTF-8. Writers are
// atomic (temp file + rename) and serialize reals with 17 significant digits
// so a write/read round trip reproduces every record bit-exactly.

struct PointRecord {
  std::string video_id;
  PointAnnotation point;
  friend bool operator==(const PointRecord&, const PointRecord&) = default;
};

struct ProposalRecord {
  std::string video_id;
  Proposal proposal;
  friend bool operator==(const ProposalRecord&,
                         const ProposalRecord&) = default;
};

struct PseudoLabelRecord {
  std::string video_id;
  PseudoLabel label;
  friend bool operator==(const PseudoLabelRecord&,
                         const PseudoLabelRecord&) = default;
};

struct DetectionRecord {
  std::string video_id;
  Detection detection;
  friend bool operator==(const DetectionRecord&,
                         const DetectionRecord&) = default;
};

// One trained score sequence for one pyramid level of one video.
struct ScoreRecord {
  std::string video_id;
  int level = 0;
  int sigma = 1;
  ScoreSequence scores;
  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

std::vector<VideoRecord> read_videos(const std::string& path);
void write_videos(const std::string& path, const std::vector<VideoRecord>& v);

std::vector<PointRecord> read_points(const std::string& path);
void write_points(const std::string& path, const std::vector<PointRecord>& v);

std::vector<ProposalRecord> read_proposals(const std::string& path);
void write_proposals(const std::string& path,
                     const std::vector<ProposalRecord>& v);

std::vector<PseudoLabelRecord> read_pseudo_labels(const std::string& path);
void write_pseudo_labels(const std::string& path,
                         const std::vector<PseudoLabelRecord>& v);

std::vector<DetectionRecord> read_detections(const std::string& path);
void write_detections(const std::string& path,
                      const std::vector<DetectionRecord>& v);

std::vector<ScoreRecord> read_scores(const std::string& path);
void write_scores(const std::string& path, const std::vector<ScoreRecord>& v);

// Writes arbitrary text atomically (temp file + rename).
void write_text_atomic(const std::string& path, const std::string& text);

// Formats a real with 17 significant digits (round-trip exact).
std::string format_real(double v);

}  // namespace potloc
