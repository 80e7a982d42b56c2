#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "potloc/mat.hpp"
#include "potloc/types.hpp"

namespace potloc {

struct BackboneConfig {
  int input_dim = 16;
  int dim = 32;       // embedding width D
  int dim_qk = 32;    // query/key projection width
  int dim_v = 32;     // value projection width
  int heads = 4;
  int window = 9;     // odd attention window
  int sigma = 2;      // downsampling ratio between levels
  int levels = 4;     // downsampled levels below level 0
  double mlp_ratio = 4.0;
  int num_classes = 3;
  uint64_t seed = 11;

  void validate() const;
};

// Named flat tensor; weights are stored this way so the archive writer can
// enumerate them uniformly.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    data.assign(n, 0.0);
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct ConvLayer {
  Tensor weight;  // [out, in, kernel]
  Tensor bias;    // [out]
};

struct LayerNormParams {
  Tensor gain;  // [dim]
  Tensor bias;  // [dim]
};

struct AttentionWeights {
  Tensor wq;  // [dim, dim_qk]
  Tensor wk;  // [dim, dim_qk]
  Tensor wv;  // [dim, dim_v]
  Tensor wo;  // [dim_v, dim]
  Tensor bo;  // [dim]
};

struct MlpWeights {
  Tensor w1;  // [dim, hidden]
  Tensor b1;  // [hidden]
  Tensor w2;  // [hidden, dim]
  Tensor b2;  // [dim]
};

struct BlockWeights {
  LayerNormParams ln1, ln2;
  AttentionWeights attn;
  MlpWeights mlp;
};

struct BackboneWeights {
  ConvLayer stem1, stem2;
  LayerNormParams stem_ln1, stem_ln2;
  std::vector<BlockWeights> blocks;   // one per pyramid level (levels + 1)
  std::vector<Tensor> down_kernels;   // depthwise [dim, 3], one per downsample
  ConvLayer dec1, dec2;               // shared decoder
  LayerNormParams dec_ln;
  friend bool operator==(const BackboneWeights&,
                         const BackboneWeights&) = default;
};

// Seeded uniform init scaled by 1/sqrt(fan-in); layer-norm gains start at 1.
BackboneWeights init_backbone_weights(const BackboneConfig& config);

// Dense 1D convolution, kernel 3, zero padding, length preserved.
Mat conv1d(const Mat& input, const ConvLayer& layer);
Mat layer_norm(const Mat& input, const LayerNormParams& params);

// Two convolution + norm + ReLU stages lifting input features to width dim.
Mat embed(const Mat& features, const BackboneConfig& config,
          const BackboneWeights& weights);

// Local multi-head self-attention: position t attends to the window
// [t-(w-1)/2, t+(w-1)/2] clipped to the sequence. When row_weight_sums is
// given it receives the per-row sum of attention weights of head 0.
Mat windowed_attention(const Mat& z, const AttentionWeights& weights,
                       int window, int heads,
                       std::vector<double>* row_weight_sums = nullptr);

// Pre-normalized residual attention followed by a pre-normalized residual
// GELU MLP.
Mat transformer_block(const Mat& z, const BlockWeights& weights, int window,
                      int heads);

// Depthwise kernel-3 strided convolution; output length ceil(T / sigma).
Mat downsample(const Mat& z, const Tensor& kernel, int sigma);

// Shared decoder head: conv + norm + ReLU + conv + sigmoid.
ScoreSequence decode(const Mat& z, const BackboneWeights& weights);

struct PyramidOutput {
  std::vector<Mat> features;           // Z^0 .. Z^L
  std::vector<ScoreSequence> scores;   // P_0 .. P_L
};
PyramidOutput forward_pyramid(const Mat& features,
                              const BackboneWeights& weights,
                              const BackboneConfig& config);

// Flat binary tensor archive (little-endian float32) plus a JSON manifest
// carrying names, shapes, offsets, and the configuration.
void save_weights(const BackboneWeights& weights, const BackboneConfig& config,
                  const std::string& manifest_path,
                  const std::string& data_path);
BackboneWeights load_weights(const std::string& manifest_path,
                             BackboneConfig* config_out = nullptr);

}  // namespace potloc
