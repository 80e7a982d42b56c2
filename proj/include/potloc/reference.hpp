#pragma once

#include "potloc/backbone.hpp"
#include "potloc/mat.hpp"

// Plain single-threaded transliterations of the parallel kernels. Tests
// compare the OpenMP paths against these, and the benchmark tool measures
// both sides. They intentionally share no code with the main kernels.
namespace potloc::ref {

// Full (unmasked) self-attention over the whole sequence.
Mat dense_attention(const Mat& z, const AttentionWeights& weights, int heads);

// Windowed self-attention, same semantics as the parallel kernel.
Mat windowed_attention(const Mat& z, const AttentionWeights& weights,
                       int window, int heads);

Mat conv1d(const Mat& input, const ConvLayer& layer);

Mat downsample(const Mat& z, const Tensor& kernel, int sigma);

Mat layer_norm(const Mat& input, const LayerNormParams& params);

}  // namespace potloc::ref
