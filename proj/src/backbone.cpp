#include "potloc/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "json.hpp"
#include "potloc/errors.hpp"
#include "potloc/rng.hpp"

namespace potloc {

void BackboneConfig::validate() const {
  if (window < 1 || window % 2 == 0)
    throw ConfigError("backbone.window must be odd and >= 1");
  if (sigma < 2) throw ConfigError("backbone.sigma must be >= 2");
  if (levels < 0) throw ConfigError("backbone.levels must be >= 0");
  if (heads < 1) throw ConfigError("backbone.heads must be >= 1");
  if (dim % heads != 0 || dim_qk % heads != 0 || dim_v % heads != 0)
    throw ConfigError("backbone widths must be divisible by heads");
  if (input_dim < 1 || dim < 1 || num_classes < 1)
    throw ConfigError("backbone dimensions must be positive");
  if (mlp_ratio <= 0) throw ConfigError("backbone.mlp_ratio must be > 0");
}

namespace {

int mlp_hidden(const BackboneConfig& c) {
  return std::max(1, static_cast<int>(std::lround(c.mlp_ratio * c.dim)));
}

BackboneWeights make_shapes(const BackboneConfig& c) {
  BackboneWeights w;
  w.stem1 = {Tensor({c.dim, c.input_dim, 3}), Tensor({c.dim})};
  w.stem_ln1 = {Tensor({c.dim}), Tensor({c.dim})};
  w.stem2 = {Tensor({c.dim, c.dim, 3}), Tensor({c.dim})};
  w.stem_ln2 = {Tensor({c.dim}), Tensor({c.dim})};
  w.blocks.resize(c.levels + 1);
  for (auto& b : w.blocks) {
    b.ln1 = {Tensor({c.dim}), Tensor({c.dim})};
    b.ln2 = {Tensor({c.dim}), Tensor({c.dim})};
    b.attn = {Tensor({c.dim, c.dim_qk}), Tensor({c.dim, c.dim_qk}),
              Tensor({c.dim, c.dim_v}), Tensor({c.dim_v, c.dim}),
              Tensor({c.dim})};
    const int hidden = mlp_hidden(c);
    b.mlp = {Tensor({c.dim, hidden}), Tensor({hidden}),
             Tensor({hidden, c.dim}), Tensor({c.dim})};
  }
  w.down_kernels.assign(c.levels, Tensor({c.dim, 3}));
  w.dec1 = {Tensor({c.dim, c.dim, 3}), Tensor({c.dim})};
  w.dec_ln = {Tensor({c.dim}), Tensor({c.dim})};
  w.dec2 = {Tensor({c.num_classes + 1, c.dim, 3}),
            Tensor({c.num_classes + 1})};
  return w;
}

template <typename W, typename Fn>
void visit_tensors(W& w, Fn&& fn) {
  fn("stem1.weight", w.stem1.weight);
  fn("stem1.bias", w.stem1.bias);
  fn("stem_ln1.gain", w.stem_ln1.gain);
  fn("stem_ln1.bias", w.stem_ln1.bias);
  fn("stem2.weight", w.stem2.weight);
  fn("stem2.bias", w.stem2.bias);
  fn("stem_ln2.gain", w.stem_ln2.gain);
  fn("stem_ln2.bias", w.stem_ln2.bias);
  for (size_t l = 0; l < w.blocks.size(); ++l) {
    auto& b = w.blocks[l];
    const std::string p = "block" + std::to_string(l) + ".";
    fn(p + "ln1.gain", b.ln1.gain);
    fn(p + "ln1.bias", b.ln1.bias);
    fn(p + "attn.wq", b.attn.wq);
    fn(p + "attn.wk", b.attn.wk);
    fn(p + "attn.wv", b.attn.wv);
    fn(p + "attn.wo", b.attn.wo);
    fn(p + "attn.bo", b.attn.bo);
    fn(p + "ln2.gain", b.ln2.gain);
    fn(p + "ln2.bias", b.ln2.bias);
    fn(p + "mlp.w1", b.mlp.w1);
    fn(p + "mlp.b1", b.mlp.b1);
    fn(p + "mlp.w2", b.mlp.w2);
    fn(p + "mlp.b2", b.mlp.b2);
  }
  for (size_t l = 0; l < w.down_kernels.size(); ++l)
    fn("down" + std::to_string(l + 1) + ".kernel", w.down_kernels[l]);
  fn("dec1.weight", w.dec1.weight);
  fn("dec1.bias", w.dec1.bias);
  fn("dec_ln.gain", w.dec_ln.gain);
  fn("dec_ln.bias", w.dec_ln.bias);
  fn("dec2.weight", w.dec2.weight);
  fn("dec2.bias", w.dec2.bias);
}

// Fan-in per tensor role: first shape dim is the output for conv kernels
// ([out, in, k]) and the input for projection matrices ([in, out]).
int fan_in_of(const std::string& name, const Tensor& t) {
  if (t.shape.size() == 3) return t.shape[1] * t.shape[2];
  if (t.shape.size() == 2) {
    if (name.find("kernel") != std::string::npos) return t.shape[1];
    return t.shape[0];
  }
  return 1;
}

}  // namespace

BackboneWeights init_backbone_weights(const BackboneConfig& config) {
  config.validate();
  BackboneWeights w = make_shapes(config);
  uint64_t stream = 0;
  visit_tensors(w, [&](const std::string& name, Tensor& t) {
    ++stream;
    const bool is_bias = name.ends_with(".bias") || name.ends_with(".bo") ||
                         name.ends_with(".b1") || name.ends_with(".b2");
    const bool is_gain = name.ends_with(".gain");
    if (is_gain) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
      return;
    }
    if (is_bias) return;  // zeros
    Rng rng(config.seed, stream);
    const double bound = 1.0 / std::sqrt(static_cast<double>(
                                   std::max(1, fan_in_of(name, t))));
    for (auto& v : t.data) v = rng.next_range(-bound, bound);
  });
  return w;
}

Mat conv1d(const Mat& input, const ConvLayer& layer) {
  const int out_ch = layer.weight.shape[0];
  const int in_ch = layer.weight.shape[1];
  if (input.cols != in_ch)
    throw DataError("conv1d: input width " + std::to_string(input.cols) +
                    " does not match kernel fan-in " + std::to_string(in_ch));
  const int t_len = input.rows;
  Mat out(t_len, out_ch);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < t_len; ++t) {
    for (int o = 0; o < out_ch; ++o) {
      double acc = layer.bias.data[o];
      for (int k = 0; k < 3; ++k) {
        const int src = t + k - 1;
        if (src < 0 || src >= t_len) continue;
        const double* in_row = input.row(src);
        const double* w = &layer.weight.data[(static_cast<size_t>(o) * in_ch) * 3 + k];
        for (int i = 0; i < in_ch; ++i) acc += in_row[i] * w[static_cast<size_t>(i) * 3];
      }
      out.at(t, o) = acc;
    }
  }
  return out;
}

Mat layer_norm(const Mat& input, const LayerNormParams& params) {
  constexpr double kEps = 1e-5;
  Mat out(input.rows, input.cols);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < input.rows; ++t) {
    const double* row = input.row(t);
    double mean = 0;
    for (int d = 0; d < input.cols; ++d) mean += row[d];
    mean /= input.cols;
    double var = 0;
    for (int d = 0; d < input.cols; ++d)
      var += (row[d] - mean) * (row[d] - mean);
    var /= input.cols;
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (int d = 0; d < input.cols; ++d)
      out.at(t, d) = (row[d] - mean) * inv * params.gain.data[d] +
                     params.bias.data[d];
  }
  return out;
}

namespace {

Mat relu(Mat m) {
  for (auto& v : m.data) v = std::max(0.0, v);
  return m;
}

// x * Phi(x), the exact Gaussian form.
double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

Mat matmul(const Mat& a, const Tensor& w) {
  const int rows = a.rows, inner = w.shape[0], cols = w.shape[1];
  Mat out(rows, cols);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* arow = a.row(r);
    double* orow = out.row(r);
    for (int i = 0; i < inner; ++i) {
      const double av = arow[i];
      const double* wrow = &w.data[static_cast<size_t>(i) * cols];
      for (int c = 0; c < cols; ++c) orow[c] += av * wrow[c];
    }
  }
  return out;
}

}  // namespace

Mat embed(const Mat& features, const BackboneConfig& config,
          const BackboneWeights& weights) {
  if (features.cols != config.input_dim)
    throw DataError("embed: feature width does not match input_dim");
  Mat z = relu(layer_norm(conv1d(features, weights.stem1), weights.stem_ln1));
  return relu(layer_norm(conv1d(z, weights.stem2), weights.stem_ln2));
}

Mat windowed_attention(const Mat& z, const AttentionWeights& weights,
                       int window, int heads,
                       std::vector<double>* row_weight_sums) {
  const int t_len = z.rows;
  const int dim_qk = weights.wq.shape[1];
  const int dim_v = weights.wv.shape[1];
  const int dqh = dim_qk / heads;
  const int dvh = dim_v / heads;
  const int half = (window - 1) / 2;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dqh));

  const Mat q = matmul(z, weights.wq);
  const Mat k = matmul(z, weights.wk);
  const Mat v = matmul(z, weights.wv);

  if (row_weight_sums)
    row_weight_sums->assign(static_cast<size_t>(t_len) * heads, 0.0);

  Mat concat(t_len, dim_v);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < t_len; ++t) {
    const int lo = std::max(0, t - half);
    const int hi = std::min(t_len - 1, t + half);
    std::vector<double> logits(hi - lo + 1);
    for (int h = 0; h < heads; ++h) {
      const int q_off = h * dqh;
      const int v_off = h * dvh;
      double peak = -1e300;
      for (int u = lo; u <= hi; ++u) {
        double dot = 0;
        for (int d = 0; d < dqh; ++d)
          dot += q.at(t, q_off + d) * k.at(u, q_off + d);
        logits[u - lo] = dot * scale;
        peak = std::max(peak, logits[u - lo]);
      }
      double denom = 0;
      for (auto& lg : logits) {
        lg = std::exp(lg - peak);
        denom += lg;
      }
      double check = 0;
      for (int u = lo; u <= hi; ++u) {
        const double wgt = logits[u - lo] / denom;
        check += wgt;
        for (int d = 0; d < dvh; ++d)
          concat.at(t, v_off + d) += wgt * v.at(u, v_off + d);
      }
      if (row_weight_sums)
        (*row_weight_sums)[static_cast<size_t>(t) * heads + h] = check;
    }
  }

  Mat out = matmul(concat, weights.wo);
  for (int t = 0; t < t_len; ++t)
    for (int d = 0; d < out.cols; ++d) out.at(t, d) += weights.bo.data[d];
  return out;
}

Mat transformer_block(const Mat& z, const BlockWeights& weights, int window,
                      int heads) {
  Mat attn_out =
      windowed_attention(layer_norm(z, weights.ln1), weights.attn, window,
                         heads);
  Mat mid(z.rows, z.cols);
  for (size_t i = 0; i < mid.data.size(); ++i)
    mid.data[i] = z.data[i] + attn_out.data[i];

  Mat h = matmul(layer_norm(mid, weights.ln2), weights.mlp.w1);
  for (int t = 0; t < h.rows; ++t)
    for (int d = 0; d < h.cols; ++d)
      h.at(t, d) = gelu(h.at(t, d) + weights.mlp.b1.data[d]);
  Mat mlp_out = matmul(h, weights.mlp.w2);
  Mat out(z.rows, z.cols);
  for (int t = 0; t < out.rows; ++t)
    for (int d = 0; d < out.cols; ++d)
      out.at(t, d) = mid.at(t, d) + mlp_out.at(t, d) + weights.mlp.b2.data[d];
  return out;
}

Mat downsample(const Mat& z, const Tensor& kernel, int sigma) {
  if (sigma < 2) throw ConfigError("downsample sigma must be >= 2");
  const int t_out = (z.rows + sigma - 1) / sigma;
  Mat out(t_out, z.cols);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < t_out; ++t) {
    for (int ch = 0; ch < z.cols; ++ch) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) {
        const int src = t * sigma + k - 1;
        if (src < 0 || src >= z.rows) continue;
        acc += z.at(src, ch) * kernel.data[static_cast<size_t>(ch) * 3 + k];
      }
      out.at(t, ch) = acc;
    }
  }
  return out;
}

ScoreSequence decode(const Mat& z, const BackboneWeights& weights) {
  Mat h = relu(layer_norm(conv1d(z, weights.dec1), weights.dec_ln));
  Mat logits = conv1d(h, weights.dec2);
  ScoreSequence seq;
  seq.values = Mat(logits.rows, logits.cols);
  for (size_t i = 0; i < logits.data.size(); ++i)
    seq.values.data[i] = 1.0 / (1.0 + std::exp(-logits.data[i]));
  return seq;
}

PyramidOutput forward_pyramid(const Mat& features,
                              const BackboneWeights& weights,
                              const BackboneConfig& config) {
  config.validate();
  PyramidOutput out;
  Mat z = embed(features, config, weights);
  z = transformer_block(z, weights.blocks[0], config.window, config.heads);
  out.features.push_back(z);
  for (int l = 1; l <= config.levels; ++l) {
    z = downsample(z, weights.down_kernels[l - 1], config.sigma);
    z = transformer_block(z, weights.blocks[l], config.window, config.heads);
    out.features.push_back(z);
  }
  for (const auto& level : out.features)
    out.scores.push_back(decode(level, weights));
  return out;
}

void save_weights(const BackboneWeights& weights, const BackboneConfig& config,
                  const std::string& manifest_path,
                  const std::string& data_path) {
  nlohmann::json manifest;
  manifest["format"] = "potloc-tensors";
  manifest["version"] = 1;
  manifest["dtype"] = "float32";
  manifest["byte_order"] = "little";
  manifest["data_file"] = std::filesystem::path(data_path).filename().string();
  manifest["config"] = {
      {"input_dim", config.input_dim}, {"dim", config.dim},
      {"dim_qk", config.dim_qk},       {"dim_v", config.dim_v},
      {"heads", config.heads},         {"window", config.window},
      {"sigma", config.sigma},         {"levels", config.levels},
      {"mlp_ratio", config.mlp_ratio}, {"num_classes", config.num_classes},
      {"seed", config.seed}};

  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  visit_tensors(weights, [&](const std::string& name, const Tensor& t) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t.shape;
    entry["offset"] = blob.size();
    entry["count"] = t.data.size();
    tensors.push_back(entry);
    for (double v : t.data) {
      const float f = static_cast<float>(v);
      uint32_t bits;
      std::memcpy(&bits, &f, sizeof(bits));
      // little-endian byte order, explicitly
      blob.push_back(static_cast<char>(bits & 0xff));
      blob.push_back(static_cast<char>((bits >> 8) & 0xff));
      blob.push_back(static_cast<char>((bits >> 16) & 0xff));
      blob.push_back(static_cast<char>((bits >> 24) & 0xff));
    }
  });
  manifest["tensors"] = tensors;

  std::ofstream bin(data_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw DataError("cannot write '" + data_path + "'");
  bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) throw DataError("cannot write '" + manifest_path + "'");
  mf << manifest.dump(2) << "\n";
}

BackboneWeights load_weights(const std::string& manifest_path,
                             BackboneConfig* config_out) {
  std::ifstream mf(manifest_path);
  if (!mf) throw DataError("cannot open '" + manifest_path + "'");
  nlohmann::json manifest = nlohmann::json::parse(mf, nullptr, false);
  if (manifest.is_discarded())
    throw DataError("invalid manifest '" + manifest_path + "'");

  BackboneConfig config;
  const auto& jc = manifest.at("config");
  config.input_dim = jc.at("input_dim");
  config.dim = jc.at("dim");
  config.dim_qk = jc.at("dim_qk");
  config.dim_v = jc.at("dim_v");
  config.heads = jc.at("heads");
  config.window = jc.at("window");
  config.sigma = jc.at("sigma");
  config.levels = jc.at("levels");
  config.mlp_ratio = jc.at("mlp_ratio");
  config.num_classes = jc.at("num_classes");
  config.seed = jc.at("seed");
  if (config_out) *config_out = config;

  const auto data_path =
      std::filesystem::path(manifest_path).parent_path() /
      manifest.at("data_file").get<std::string>();
  std::ifstream bin(data_path, std::ios::binary);
  if (!bin) throw DataError("cannot open '" + data_path.string() + "'");
  std::string blob((std::istreambuf_iterator<char>(bin)),
                   std::istreambuf_iterator<char>());

  std::map<std::string, const nlohmann::json*> entries;
  for (const auto& e : manifest.at("tensors"))
    entries[e.at("name").get<std::string>()] = &e;

  BackboneWeights w = make_shapes(config);
  visit_tensors(w, [&](const std::string& name, Tensor& t) {
    auto it = entries.find(name);
    if (it == entries.end())
      throw DataError("manifest missing tensor '" + name + "'");
    const auto& e = *it->second;
    const size_t offset = e.at("offset");
    const size_t count = e.at("count");
    if (count != t.data.size() ||
        e.at("shape").get<std::vector<int>>() != t.shape)
      throw DataError("tensor '" + name + "' has unexpected shape");
    if (offset + count * 4 > blob.size())
      throw DataError("tensor '" + name + "' overruns the archive");
    for (size_t i = 0; i < count; ++i) {
      const size_t base = offset + i * 4;
      uint32_t bits = static_cast<uint8_t>(blob[base]) |
                      (static_cast<uint8_t>(blob[base + 1]) << 8) |
                      (static_cast<uint8_t>(blob[base + 2]) << 16) |
                      (static_cast<uint32_t>(
                           static_cast<uint8_t>(blob[base + 3]))
                       << 24);
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      t.data[i] = static_cast<double>(f);
    }
  });
  return w;
}

}  // namespace potloc
