#include "potloc/synth.hpp"

#include <algorithm>
#include <cmath>

#include "potloc/errors.hpp"
#include "potloc/jsonl.hpp"
#include "potloc/rng.hpp"

namespace potloc {

void SynthConfig::validate() const {
  if (num_videos < 1) throw ConfigError("synth.num_videos must be >= 1");
  if (min_length < 4 || max_length < min_length)
    throw ConfigError("synth length range is empty or too small");
  if (num_classes < 1) throw ConfigError("synth.num_classes must be >= 1");
  if (min_actions < 1 || max_actions < min_actions)
    throw ConfigError("synth action count range is empty");
  if (duration_mean <= 0) throw ConfigError("synth.duration_mean must be > 0");
  if (duration_spread < 0 || duration_spread >= 1)
    throw ConfigError("synth.duration_spread must be in [0, 1)");
  if (!class_duration_means.empty() &&
      static_cast<int>(class_duration_means.size()) != num_classes)
    throw ConfigError("synth.class_duration_means must have one entry per class");
  for (double m : class_duration_means)
    if (m <= 0) throw ConfigError("synth class durations must be > 0");
  if (feature_dim < 0) throw ConfigError("synth.feature_dim must be >= 0");
  for (double p : {drop_rate, duplicate_rate})
    if (p < 0 || p > 1) throw ConfigError("synth rates must be in [0, 1]");
  if (jitter < 0 || feature_noise < 0 || confidence_noise < 0)
    throw ConfigError("synth noise levels must be >= 0");
}

namespace {

double class_mean(const SynthConfig& c, int cls) {
  return c.class_duration_means.empty() ? c.duration_mean
                                        : c.class_duration_means[cls];
}

std::string video_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "v%04d", index);
  return buf;
}

// Places n disjoint integer intervals of the given lengths into [0, T] with
// at least one free snippet between consecutive instances. Returns false when
// they cannot fit.
bool place_instances(Rng& rng, int video_len, const std::vector<int>& lengths,
                     std::vector<int>& starts) {
  const int n = static_cast<int>(lengths.size());
  int occupied = 0;
  for (int len : lengths) occupied += len;
  const int slack = video_len - occupied - (n - 1);
  if (slack < 0) return false;

  // Split the slack into n+1 gaps proportionally to uniform draws.
  std::vector<double> u(n + 1);
  double total = 0;
  for (auto& x : u) {
    x = rng.next_double() + 1e-9;
    total += x;
  }
  starts.clear();
  int cursor = 0;
  int used = 0;
  for (int i = 0; i < n; ++i) {
    const int gap = std::min(slack - used,
                             static_cast<int>(std::floor(u[i] / total * slack)));
    used += gap;
    cursor += gap + (i > 0 ? 1 : 0);
    starts.push_back(cursor);
    cursor += lengths[i];
  }
  return true;
}

}  // namespace

std::vector<VideoRecord> gen_dataset(const SynthConfig& config) {
  config.validate();
  std::vector<VideoRecord> videos(config.num_videos);
  std::vector<std::string> failures(config.num_videos);

#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < config.num_videos; ++v) {
    Rng rng(config.seed, static_cast<uint64_t>(v));
    VideoRecord rec;
    rec.id = video_id(v);
    rec.length = static_cast<int>(
        rng.next_int(config.min_length, config.max_length));

    const int n_actions = static_cast<int>(
        rng.next_int(config.min_actions, config.max_actions));
    std::vector<int> classes(n_actions);
    std::vector<int> lengths(n_actions);
    for (int i = 0; i < n_actions; ++i) {
      classes[i] = static_cast<int>(rng.next_int(0, config.num_classes - 1));
      const double mean = class_mean(config, classes[i]);
      const double dur =
          mean * (1.0 + config.duration_spread * (2.0 * rng.next_double() - 1.0));
      lengths[i] = std::clamp(static_cast<int>(std::lround(dur)), 2,
                              rec.length);
    }

    std::vector<int> starts;
    if (!place_instances(rng, rec.length, lengths, starts)) {
      failures[v] = "cannot place " + std::to_string(n_actions) +
                    " instances into video of length " +
                    std::to_string(rec.length);
      continue;
    }

    std::vector<GtInterval> gt;
    for (int i = 0; i < n_actions; ++i)
      gt.push_back({static_cast<double>(starts[i]),
                    static_cast<double>(starts[i] + lengths[i]), classes[i]});
    rec.ground_truth = gt;

    for (int i = 0; i < n_actions; ++i) {
      PointAnnotation p;
      p.epsilon = static_cast<int>(
          rng.next_int(starts[i], starts[i] + lengths[i] - 1));
      p.label.assign(config.num_classes, 0);
      p.label[classes[i]] = 1;
      rec.points.push_back(p);
    }

    if (config.feature_dim > 0) {
      Rng frng(config.seed, (1ull << 32) + static_cast<uint64_t>(v));
      Mat feats(rec.length, config.feature_dim);
      std::vector<int> class_of_snippet(rec.length, -1);
      for (int i = 0; i < n_actions; ++i)
        for (int t = starts[i]; t < starts[i] + lengths[i]; ++t)
          class_of_snippet[t] = classes[i];
      for (int t = 0; t < rec.length; ++t) {
        const int cls = class_of_snippet[t];
        for (int d = 0; d < config.feature_dim; ++d) {
          double base = 0;
          if (cls >= 0 && d == cls % config.feature_dim) base = 2.0;
          if (cls < 0 && d == config.num_classes % config.feature_dim)
            base = 1.0;  // background signature
          feats.at(t, d) = base + config.feature_noise * frng.next_normal();
        }
      }
      rec.features = std::move(feats);
    }
    videos[v] = std::move(rec);
  }

  for (int v = 0; v < config.num_videos; ++v)
    if (!failures[v].empty())
      throw DataError("synth: video " + video_id(v) + ": " + failures[v]);
  return videos;
}

std::vector<std::vector<Proposal>> perturb_to_noisy_proposals(
    const std::vector<VideoRecord>& videos, const SynthConfig& config) {
  config.validate();
  std::vector<std::vector<Proposal>> out(videos.size());

#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < static_cast<int>(videos.size()); ++v) {
    const auto& video = videos[v];
    if (!video.ground_truth) continue;
    Rng rng(config.seed, (2ull << 32) + static_cast<uint64_t>(v));
    const double t_max = static_cast<double>(video.length);

    auto emit = [&](const GtInterval& g) {
      double s = g.start + config.jitter * (2.0 * rng.next_double() - 1.0);
      double e = g.end + config.jitter * (2.0 * rng.next_double() - 1.0);
      s = std::clamp(s, 0.0, t_max - 0.5);
      e = std::clamp(e, s + 0.5, t_max);
      double conf = 1.0 - config.confidence_noise * rng.next_double();
      conf = std::clamp(conf, 0.01, 1.0);
      out[v].push_back({s, e, g.label, conf});
    };

    for (const auto& g : *video.ground_truth) {
      if (config.drop_rate > 0 && rng.next_double() < config.drop_rate)
        continue;
      emit(g);
      if (config.duplicate_rate > 0 &&
          rng.next_double() < config.duplicate_rate)
        emit(g);
    }
  }
  return out;
}

std::string synth_manifest_json(const SynthConfig& c) {
  std::string out = "{\n";
  out += "  \"schema_version\": 1,\n";
  out += "  \"seed\": " + std::to_string(c.seed) + ",\n";
  out += "  \"num_videos\": " + std::to_string(c.num_videos) + ",\n";
  out += "  \"min_length\": " + std::to_string(c.min_length) + ",\n";
  out += "  \"max_length\": " + std::to_string(c.max_length) + ",\n";
  out += "  \"num_classes\": " + std::to_string(c.num_classes) + ",\n";
  out += "  \"min_actions\": " + std::to_string(c.min_actions) + ",\n";
  out += "  \"max_actions\": " + std::to_string(c.max_actions) + ",\n";
  out += "  \"duration_mean\": " + format_real(c.duration_mean) + ",\n";
  out += "  \"duration_spread\": " + format_real(c.duration_spread) + ",\n";
  out += "  \"class_duration_means\": [";
  for (size_t i = 0; i < c.class_duration_means.size(); ++i) {
    if (i) out += ", ";
    out += format_real(c.class_duration_means[i]);
  }
  out += "],\n";
  out += "  \"feature_dim\": " + std::to_string(c.feature_dim) + ",\n";
  out += "  \"feature_noise\": " + format_real(c.feature_noise) + ",\n";
  out += "  \"jitter\": " + format_real(c.jitter) + ",\n";
  out += "  \"drop_rate\": " + format_real(c.drop_rate) + ",\n";
  out += "  \"duplicate_rate\": " + format_real(c.duplicate_rate) + ",\n";
  out += "  \"confidence_noise\": " + format_real(c.confidence_noise) + "\n";
  out += "}\n";
  return out;
}

}  // namespace potloc
