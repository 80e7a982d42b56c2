#pragma once

#include <cstdint>
#include <set>
#include <variant>
#include <vector>

#include "potloc/types.hpp"

namespace potloc {

// How the sampling radius scales with pyramid level: a fixed radius in
// level-grid units keeps the positive count per pseudo-label roughly constant
// across levels; the scaled variant multiplies the radius by sigma^level.
enum class RadiusMode { kLevelGrid, kScaledLevelGrid };

struct LossWeights {
  double lambda_mil = 1.0;
  double lambda_act = 1.0;
  double lambda_bg = 1.0;
  double gamma = 2.0;     // focusing parameter
  int top_k = 0;          // 0 selects the max(1, length/8) rule
  double bg_threshold = 0.5;
  int radius = 2;         // pseudo-label sampling radius, in grid positions
  RadiusMode radius_mode = RadiusMode::kLevelGrid;
};

struct PyramidSpec {
  int sigma = 2;
  int levels = 0;  // number of downsampled levels below level 0
};

struct TrainConfig {
  int steps = 300;
  double learning_rate = 0.05;
  double momentum = 0.0;
  uint64_t seed = 1;
};

// Unconstrained per-level logit tables; sigmoid of each entry yields the
// per-level score sequences. This is the trainable object of the desk-scale
// optimizer.
struct LogitTable {
  std::vector<Mat> levels;  // each T_l x (C+1)
  int sigma = 2;

  int num_classes() const {
    return levels.empty() ? 0 : levels[0].cols - 1;
  }
};

LogitTable make_logit_table(int video_length, int num_classes,
                            const PyramidSpec& pyramid);

// Sigmoid of every logit entry, per level.
std::vector<ScoreSequence> scores_from_logits(const LogitTable& table);

// Resolves the configured top-k against a level length; throws when a fixed
// k exceeds the length.
int effective_top_k(int top_k_config, int length);

// Mean of the top-k entries of each action-class column.
std::vector<double> video_level_scores(const ScoreSequence& p, int k);
// Per-level top-k means averaged over levels (k resolved per level).
std::vector<double> video_level_scores(const std::vector<ScoreSequence>& levels,
                                       int top_k_config);

struct MilLoss {
  double value = 0;
  std::vector<double> grad;  // d value / d video_scores
};
MilLoss mil_loss(const std::vector<double>& video_scores,
                 const VideoLabel& label);

// Loss over one score matrix with its gradient.
struct SeqLoss {
  double value = 0;
  Mat grad;
};
// Snippet-level focal loss at the annotated points of a fused sequence.
SeqLoss act_focal_loss(const ScoreSequence& fused,
                       const std::vector<PointAnnotation>& points,
                       double gamma);

// Positions whose background probability reaches the threshold, minus the
// excluded set.
std::set<int> background_seeds(const ScoreSequence& fused, double threshold,
                               const std::set<int>& excluded);

// Focal loss pushing the background channel up and action channels down at
// the seed positions.
SeqLoss bg_loss(const ScoreSequence& fused, const std::set<int>& seeds,
                double gamma);

// Positive training positions per pyramid level, deduplicated by
// (position, class).
struct SampledPositives {
  struct Item {
    int position = 0;
    std::vector<uint8_t> label;  // one-hot
  };
  std::vector<std::vector<Item>> levels;

  int total_count() const {
    int n = 0;
    for (const auto& l : levels) n += static_cast<int>(l.size());
    return n;
  }
  std::set<int> positions(int level) const {
    std::set<int> s;
    for (const auto& it : levels[level]) s.insert(it.position);
    return s;
  }
};

// Projects each pseudo-label onto every level and samples an interval of the
// configured radius around the projected point, kept inside the projected
// boundaries and the level.
SampledPositives sample_pseudo_labels(const std::vector<PseudoLabel>& labels,
                                      int num_classes,
                                      const std::vector<int>& level_lengths,
                                      int sigma, int radius,
                                      RadiusMode mode = RadiusMode::kLevelGrid);

struct MultiSeqLoss {
  double value = 0;
  std::vector<Mat> grads;
};
// Focal loss over all sampled positions of all levels, normalized by the
// total positive count.
MultiSeqLoss enhanced_act_loss(const std::vector<ScoreSequence>& fused_levels,
                               const SampledPositives& sampled, double gamma);
// Per-level background loss with sampled positions excluded from the seeds,
// averaged over levels that have any seeds.
MultiSeqLoss enhanced_bg_loss(const std::vector<ScoreSequence>& fused_levels,
                              const SampledPositives& sampled,
                              double threshold, double gamma);

// Point supervision selects the base losses (single-level table); pseudo-label
// supervision selects the enhanced multi-level losses.
using Supervision =
    std::variant<std::vector<PointAnnotation>, std::vector<PseudoLabel>>;

struct TotalLoss {
  double value = 0;
  double mil = 0, act = 0, bg = 0;  // unweighted components
  std::vector<Mat> grad;            // d value / d logits, per level
};
TotalLoss total_loss(const LogitTable& logits, const Supervision& supervision,
                     const LossWeights& weights);

// Plain gradient descent (optional fixed momentum) from zero-initialized
// logits; deterministic given the configuration.
LogitTable fit_logits(const VideoRecord& video, const Supervision& supervision,
                      const LossWeights& weights, const PyramidSpec& pyramid,
                      const TrainConfig& train);

}  // namespace potloc
