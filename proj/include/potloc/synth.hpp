#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "potloc/types.hpp"

namespace potloc {

struct SynthConfig {
  uint64_t seed = 7;
  int num_videos = 8;
  int min_length = 120;
  int max_length = 240;
  int num_classes = 3;
  int min_actions = 1;
  int max_actions = 4;
  // Class c draws durations around class_duration_means[c] when provided,
  // otherwise around duration_mean; spread is a relative half-width.
  double duration_mean = 20.0;
  double duration_spread = 0.3;
  std::vector<double> class_duration_means;
  int feature_dim = 16;
  double feature_noise = 0.1;
  // Proposal corruption knobs; all zero reproduces the ground truth with
  // confidence 1.
  double jitter = 0.0;
  double drop_rate = 0.0;
  double duplicate_rate = 0.0;
  double confidence_noise = 0.0;

  void validate() const;
};

// Deterministic dataset with planted, disjoint action instances separated by
// at least one background snippet, linearly separable per-class feature
// signatures, and exactly one annotated point per instance.
std::vector<VideoRecord> gen_dataset(const SynthConfig& config);

// Jittered/dropped/duplicated copies of the ground-truth intervals with noisy
// confidences; always emits valid intervals clipped to the video.
std::vector<std::vector<Proposal>> perturb_to_noisy_proposals(
    const std::vector<VideoRecord>& videos, const SynthConfig& config);

std::string synth_manifest_json(const SynthConfig& config);

}  // namespace potloc
