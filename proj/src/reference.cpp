#include "potloc/reference.hpp"

#include <cmath>
#include <vector>

namespace potloc::ref {

namespace {

Mat project(const Mat& z, const Tensor& w) {
  Mat out(z.rows, w.shape[1]);
  for (int t = 0; t < z.rows; ++t)
    for (int c = 0; c < w.shape[1]; ++c) {
      double acc = 0;
      for (int i = 0; i < w.shape[0]; ++i)
        acc += z.at(t, i) * w.data[static_cast<size_t>(i) * w.shape[1] + c];
      out.at(t, c) = acc;
    }
  return out;
}

Mat attention_impl(const Mat& z, const AttentionWeights& weights, int heads,
                   int lo_of_t(int, int, int), int hi_of_t(int, int, int),
                   int half) {
  const int t_len = z.rows;
  const int dqh = weights.wq.shape[1] / heads;
  const int dvh = weights.wv.shape[1] / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dqh));

  Mat q = project(z, weights.wq);
  Mat k = project(z, weights.wk);
  Mat v = project(z, weights.wv);

  Mat concat(t_len, weights.wv.shape[1]);
  for (int t = 0; t < t_len; ++t) {
    const int lo = lo_of_t(t, t_len, half);
    const int hi = hi_of_t(t, t_len, half);
    for (int h = 0; h < heads; ++h) {
      std::vector<double> e(hi - lo + 1);
      double peak = -1e300;
      for (int u = lo; u <= hi; ++u) {
        double dot = 0;
        for (int d = 0; d < dqh; ++d)
          dot += q.at(t, h * dqh + d) * k.at(u, h * dqh + d);
        e[u - lo] = dot * scale;
        if (e[u - lo] > peak) peak = e[u - lo];
      }
      double denom = 0;
      for (auto& x : e) {
        x = std::exp(x - peak);
        denom += x;
      }
      for (int u = lo; u <= hi; ++u)
        for (int d = 0; d < dvh; ++d)
          concat.at(t, h * dvh + d) += e[u - lo] / denom * v.at(u, h * dvh + d);
    }
  }

  Mat out = project(concat, weights.wo);
  for (int t = 0; t < t_len; ++t)
    for (int d = 0; d < out.cols; ++d) out.at(t, d) += weights.bo.data[d];
  return out;
}

}  // namespace

Mat dense_attention(const Mat& z, const AttentionWeights& weights, int heads) {
  return attention_impl(
      z, weights, heads, [](int, int, int) { return 0; },
      [](int, int t_len, int) { return t_len - 1; }, 0);
}

Mat windowed_attention(const Mat& z, const AttentionWeights& weights,
                       int window, int heads) {
  return attention_impl(
      z, weights, heads,
      [](int t, int, int half) { return t - half < 0 ? 0 : t - half; },
      [](int t, int t_len, int half) {
        return t + half > t_len - 1 ? t_len - 1 : t + half;
      },
      (window - 1) / 2);
}

Mat conv1d(const Mat& input, const ConvLayer& layer) {
  const int out_ch = layer.weight.shape[0];
  const int in_ch = layer.weight.shape[1];
  Mat out(input.rows, out_ch);
  for (int t = 0; t < input.rows; ++t)
    for (int o = 0; o < out_ch; ++o) {
      double acc = layer.bias.data[o];
      for (int i = 0; i < in_ch; ++i)
        for (int k = 0; k < 3; ++k) {
          const int src = t + k - 1;
          if (src >= 0 && src < input.rows)
            acc += input.at(src, i) *
                   layer.weight.data[(static_cast<size_t>(o) * in_ch + i) * 3 + k];
        }
      out.at(t, o) = acc;
    }
  return out;
}

Mat downsample(const Mat& z, const Tensor& kernel, int sigma) {
  const int t_out = (z.rows + sigma - 1) / sigma;
  Mat out(t_out, z.cols);
  for (int t = 0; t < t_out; ++t)
    for (int ch = 0; ch < z.cols; ++ch) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) {
        const int src = t * sigma + k - 1;
        if (src >= 0 && src < z.rows)
          acc += z.at(src, ch) * kernel.data[static_cast<size_t>(ch) * 3 + k];
      }
      out.at(t, ch) = acc;
    }
  return out;
}

Mat layer_norm(const Mat& input, const LayerNormParams& params) {
  Mat out(input.rows, input.cols);
  for (int t = 0; t < input.rows; ++t) {
    double mean = 0, var = 0;
    for (int d = 0; d < input.cols; ++d) mean += input.at(t, d);
    mean /= input.cols;
    for (int d = 0; d < input.cols; ++d) {
      const double c = input.at(t, d) - mean;
      var += c * c;
    }
    var /= input.cols;
    for (int d = 0; d < input.cols; ++d)
      out.at(t, d) = (input.at(t, d) - mean) / std::sqrt(var + 1e-5) *
                         params.gain.data[d] +
                     params.bias.data[d];
  }
  return out;
}

}  // namespace potloc::ref
