#pragma once

#include <string>
#include <vector>

#include "potloc/config.hpp"
#include "potloc/jsonl.hpp"
#include "potloc/metrics.hpp"

namespace potloc {

// Conventional file layout of one experiment directory.
struct PipelinePaths {
  std::string dir;

  std::string videos() const { return dir + "/videos.jsonl"; }
  std::string points() const { return dir + "/points.jsonl"; }
  std::string proposals() const { return dir + "/proposals.jsonl"; }
  std::string pseudo_labels() const { return dir + "/pseudolabels.jsonl"; }
  std::string scores_base() const { return dir + "/scores_base.jsonl"; }
  std::string scores_potloc() const { return dir + "/scores_potloc.jsonl"; }
  std::string detections() const { return dir + "/detections.jsonl"; }
  std::string detections_base() const { return dir + "/detections_base.jsonl"; }
  std::string synth_manifest() const { return dir + "/synth_manifest.json"; }
  std::string report() const { return dir + "/report.json"; }
};

void run_synth(const PipelineConfig& config, const PipelinePaths& paths);

// Fits per-video logit tables against the point annotations (single level)
// and writes the resulting score sequences.
void run_train_base(const PipelineConfig& config, const PipelinePaths& paths);

// Turns the base-stage scores into scored proposals.
void run_propose(const PipelineConfig& config, const PipelinePaths& paths);

void run_pseudolabel(const PipelineConfig& config, const PipelinePaths& paths);

// Fits the multi-level tables against the pseudo-labels with the enhanced
// losses and writes per-level scores.
void run_train_potloc(const PipelineConfig& config, const PipelinePaths& paths);

// Detections from a score file (any level count).
void run_infer(const PipelineConfig& config, const std::string& scores_path,
               const std::string& videos_path, const std::string& out_path);

struct EvalOutcome {
  EvalReport report;
  double baseline_average_map = -1;  // < 0 when no baseline was given
};
EvalOutcome run_eval(const PipelineConfig& config,
                     const std::string& detections_path,
                     const std::string& videos_path,
                     const std::string& report_path,
                     const std::string& baseline_detections_path = "");

}  // namespace potloc
