#pragma once

#include <string>
#include <vector>

#include "potloc/backbone.hpp"
#include "potloc/losses.hpp"
#include "potloc/metrics.hpp"
#include "potloc/postprocess.hpp"
#include "potloc/pseudolabel.hpp"
#include "potloc/synth.hpp"

namespace potloc {

inline constexpr int kConfigSchemaVersion = 1;

// One flat configuration file covering every stage, with per-stage sections.
struct PipelineConfig {
  SynthConfig synth;
  RefinementConfig refine;
  ProposalConfig proposal;
  LossWeights losses;
  TrainConfig train;
  BackboneConfig backbone;
  EvalConfig eval;
};

// Parses the supported TOML subset: [section] headers, key = value pairs
// with integers, floats, booleans, quoted strings, and single-line arrays.
// Unknown sections or keys are configuration errors that name the offender.
PipelineConfig parse_pipeline_config(const std::string& toml_text);

PipelineConfig load_pipeline_config(const std::string& path);

// Applies one "section.key=value" override.
void apply_override(PipelineConfig& config, const std::string& assignment);

// Canonical form: every section and key in schema order. Feeding the dump
// back through the parser reproduces the configuration exactly.
std::string dump_canonical(const PipelineConfig& config);

// Range checks shared by all stages; throws ConfigError.
void validate_pipeline_config(const PipelineConfig& config);

}  // namespace potloc
