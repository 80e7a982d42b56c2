#include "potloc/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "potloc/errors.hpp"
#include "potloc/jsonl.hpp"

namespace potloc {

namespace {

struct TomlValue {
  enum Kind { kInt, kFloat, kBool, kString, kArray } kind = kInt;
  int64_t i = 0;
  double f = 0;
  bool b = false;
  std::string s;
  std::vector<TomlValue> arr;
};

// --- scanner ---------------------------------------------------------------

void strip_comment(std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\'))
      in_string = !in_string;
    else if (line[i] == '#' && !in_string) {
      line.erase(i);
      return;
    }
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

TomlValue parse_value(const std::string& raw, const std::string& where);

TomlValue parse_scalar(const std::string& text, const std::string& where) {
  TomlValue v;
  if (text == "true" || text == "false") {
    v.kind = TomlValue::kBool;
    v.b = text == "true";
    return v;
  }
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    v.kind = TomlValue::kString;
    for (size_t i = 1; i + 1 < text.size(); ++i) {
      if (text[i] == '\\' && i + 2 < text.size()) {
        ++i;
        switch (text[i]) {
          case 'n': v.s += '\n'; break;
          case 't': v.s += '\t'; break;
          case '"': v.s += '"'; break;
          case '\\': v.s += '\\'; break;
          default:
            throw ConfigError(where + ": unsupported escape in string");
        }
      } else {
        v.s += text[i];
      }
    }
    return v;
  }
  // Numeric: integer unless it carries a dot or exponent.
  char* end = nullptr;
  if (text.find_first_of(".eE") == std::string::npos ||
      (text.size() > 1 && (text[1] == 'x' || text[1] == 'X'))) {
    const long long iv = std::strtoll(text.c_str(), &end, 10);
    if (end && *end == '\0' && !text.empty()) {
      v.kind = TomlValue::kInt;
      v.i = iv;
      return v;
    }
  }
  const double fv = std::strtod(text.c_str(), &end);
  if (end && *end == '\0' && !text.empty()) {
    v.kind = TomlValue::kFloat;
    v.f = fv;
    return v;
  }
  throw ConfigError(where + ": cannot parse value '" + text + "'");
}

TomlValue parse_value(const std::string& raw, const std::string& where) {
  const std::string text = trim(raw);
  if (text.empty()) throw ConfigError(where + ": empty value");
  if (text.front() == '[') {
    if (text.back() != ']')
      throw ConfigError(where + ": unterminated array");
    TomlValue v;
    v.kind = TomlValue::kArray;
    std::string inner = text.substr(1, text.size() - 2);
    std::string item;
    int depth = 0;
    bool in_string = false;
    for (char ch : inner) {
      if (ch == '"') in_string = !in_string;
      if (!in_string) {
        if (ch == '[') ++depth;
        if (ch == ']') --depth;
        if (ch == ',' && depth == 0) {
          if (!trim(item).empty()) v.arr.push_back(parse_value(item, where));
          item.clear();
          continue;
        }
      }
      item += ch;
    }
    if (!trim(item).empty()) v.arr.push_back(parse_value(item, where));
    return v;
  }
  return parse_scalar(text, where);
}

// --- schema ----------------------------------------------------------------

struct Field {
  std::string section, key;
  std::function<void(PipelineConfig&, const TomlValue&, const std::string&)>
      set;
  std::function<std::string(const PipelineConfig&)> dump;
};

double as_real(const TomlValue& v, const std::string& where) {
  if (v.kind == TomlValue::kFloat) return v.f;
  if (v.kind == TomlValue::kInt) return static_cast<double>(v.i);
  throw ConfigError(where + ": expected a number");
}

int64_t as_int(const TomlValue& v, const std::string& where) {
  if (v.kind == TomlValue::kInt) return v.i;
  throw ConfigError(where + ": expected an integer");
}

template <typename Ref>
Field int_field(const std::string& sec, const std::string& key, Ref ref) {
  return {sec, key,
          [ref](PipelineConfig& c, const TomlValue& v, const std::string& w) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(
                as_int(v, w));
          },
          [ref](const PipelineConfig& c) {
            return std::to_string(ref(const_cast<PipelineConfig&>(c)));
          }};
}

template <typename Ref>
Field real_field(const std::string& sec, const std::string& key, Ref ref) {
  return {sec, key,
          [ref](PipelineConfig& c, const TomlValue& v, const std::string& w) {
            ref(c) = as_real(v, w);
          },
          [ref](const PipelineConfig& c) {
            return format_real(ref(const_cast<PipelineConfig&>(c)));
          }};
}

template <typename Ref>
Field bool_field(const std::string& sec, const std::string& key, Ref ref) {
  return {sec, key,
          [ref](PipelineConfig& c, const TomlValue& v, const std::string& w) {
            if (v.kind != TomlValue::kBool)
              throw ConfigError(w + ": expected true or false");
            ref(c) = v.b;
          },
          [ref](const PipelineConfig& c) {
            return ref(const_cast<PipelineConfig&>(c)) ? std::string("true")
                                                       : std::string("false");
          }};
}

template <typename Ref>
Field real_array_field(const std::string& sec, const std::string& key,
                       Ref ref) {
  return {sec, key,
          [ref](PipelineConfig& c, const TomlValue& v, const std::string& w) {
            if (v.kind != TomlValue::kArray)
              throw ConfigError(w + ": expected an array");
            auto& target = ref(c);
            target.clear();
            for (const auto& e : v.arr) target.push_back(as_real(e, w));
          },
          [ref](const PipelineConfig& c) {
            std::string out = "[";
            const auto& src = ref(const_cast<PipelineConfig&>(c));
            for (size_t i = 0; i < src.size(); ++i) {
              if (i) out += ", ";
              out += format_real(src[i]);
            }
            return out + "]";
          }};
}

Field radius_mode_field() {
  return {"losses", "radius_mode",
          [](PipelineConfig& c, const TomlValue& v, const std::string& w) {
            if (v.kind != TomlValue::kString)
              throw ConfigError(w + ": expected a string");
            if (v.s == "level-grid")
              c.losses.radius_mode = RadiusMode::kLevelGrid;
            else if (v.s == "scaled-grid")
              c.losses.radius_mode = RadiusMode::kScaledLevelGrid;
            else
              throw ConfigError(w + ": must be 'level-grid' or 'scaled-grid'");
          },
          [](const PipelineConfig& c) {
            return c.losses.radius_mode == RadiusMode::kLevelGrid
                       ? std::string("\"level-grid\"")
                       : std::string("\"scaled-grid\"");
          }};
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    auto S = [](auto member) {
      return [member](PipelineConfig& c) -> decltype(auto) {
        return std::invoke(member, c.synth);
      };
    };
    f.push_back(int_field("synth", "seed", S(&SynthConfig::seed)));
    f.push_back(int_field("synth", "num_videos", S(&SynthConfig::num_videos)));
    f.push_back(int_field("synth", "min_length", S(&SynthConfig::min_length)));
    f.push_back(int_field("synth", "max_length", S(&SynthConfig::max_length)));
    f.push_back(
        int_field("synth", "num_classes", S(&SynthConfig::num_classes)));
    f.push_back(
        int_field("synth", "min_actions", S(&SynthConfig::min_actions)));
    f.push_back(
        int_field("synth", "max_actions", S(&SynthConfig::max_actions)));
    f.push_back(
        real_field("synth", "duration_mean", S(&SynthConfig::duration_mean)));
    f.push_back(real_field("synth", "duration_spread",
                           S(&SynthConfig::duration_spread)));
    f.push_back(real_array_field("synth", "class_duration_means",
                                 S(&SynthConfig::class_duration_means)));
    f.push_back(
        int_field("synth", "feature_dim", S(&SynthConfig::feature_dim)));
    f.push_back(
        real_field("synth", "feature_noise", S(&SynthConfig::feature_noise)));
    f.push_back(real_field("synth", "jitter", S(&SynthConfig::jitter)));
    f.push_back(real_field("synth", "drop_rate", S(&SynthConfig::drop_rate)));
    f.push_back(
        real_field("synth", "duplicate_rate", S(&SynthConfig::duplicate_rate)));
    f.push_back(real_field("synth", "confidence_noise",
                           S(&SynthConfig::confidence_noise)));

    f.push_back(real_field("refine", "default_duration",
                           [](PipelineConfig& c) -> double& {
                             return c.refine.default_duration;
                           }));

    auto P = [](auto member) {
      return [member](PipelineConfig& c) -> decltype(auto) {
        return std::invoke(member, c.proposal);
      };
    };
    f.push_back(real_field("proposal", "video_class_threshold",
                           P(&ProposalConfig::video_class_threshold)));
    f.push_back(real_array_field("proposal", "snippet_thresholds",
                                 P(&ProposalConfig::snippet_thresholds)));
    f.push_back(real_field("proposal", "nms_tiou",
                           P(&ProposalConfig::nms_tiou)));
    f.push_back(real_field("proposal", "oic_outer_fraction",
                           P(&ProposalConfig::oic_outer_fraction)));

    auto L = [](auto member) {
      return [member](PipelineConfig& c) -> decltype(auto) {
        return std::invoke(member, c.losses);
      };
    };
    f.push_back(real_field("losses", "lambda_mil", L(&LossWeights::lambda_mil)));
    f.push_back(real_field("losses", "lambda_act", L(&LossWeights::lambda_act)));
    f.push_back(real_field("losses", "lambda_bg", L(&LossWeights::lambda_bg)));
    f.push_back(real_field("losses", "gamma", L(&LossWeights::gamma)));
    f.push_back(int_field("losses", "top_k", L(&LossWeights::top_k)));
    f.push_back(
        real_field("losses", "bg_threshold", L(&LossWeights::bg_threshold)));
    f.push_back(int_field("losses", "radius", L(&LossWeights::radius)));
    f.push_back(radius_mode_field());

    auto T = [](auto member) {
      return [member](PipelineConfig& c) -> decltype(auto) {
        return std::invoke(member, c.train);
      };
    };
    f.push_back(int_field("train", "steps", T(&TrainConfig::steps)));
    f.push_back(
        real_field("train", "learning_rate", T(&TrainConfig::learning_rate)));
    f.push_back(real_field("train", "momentum", T(&TrainConfig::momentum)));
    f.push_back(int_field("train", "seed", T(&TrainConfig::seed)));

    auto B = [](auto member) {
      return [member](PipelineConfig& c) -> decltype(auto) {
        return std::invoke(member, c.backbone);
      };
    };
    f.push_back(int_field("backbone", "input_dim", B(&BackboneConfig::input_dim)));
    f.push_back(int_field("backbone", "dim", B(&BackboneConfig::dim)));
    f.push_back(int_field("backbone", "dim_qk", B(&BackboneConfig::dim_qk)));
    f.push_back(int_field("backbone", "dim_v", B(&BackboneConfig::dim_v)));
    f.push_back(int_field("backbone", "heads", B(&BackboneConfig::heads)));
    f.push_back(int_field("backbone", "window", B(&BackboneConfig::window)));
    f.push_back(int_field("backbone", "sigma", B(&BackboneConfig::sigma)));
    f.push_back(int_field("backbone", "levels", B(&BackboneConfig::levels)));
    f.push_back(
        real_field("backbone", "mlp_ratio", B(&BackboneConfig::mlp_ratio)));
    f.push_back(
        int_field("backbone", "num_classes", B(&BackboneConfig::num_classes)));
    f.push_back(int_field("backbone", "seed", B(&BackboneConfig::seed)));

    auto E = [](auto member) {
      return [member](PipelineConfig& c) -> decltype(auto) {
        return std::invoke(member, c.eval);
      };
    };
    f.push_back(real_array_field("eval", "tiou_thresholds",
                                 E(&EvalConfig::tiou_thresholds)));
    f.push_back(
        bool_field("eval", "eleven_point", E(&EvalConfig::eleven_point)));
    return f;
  }();
  return fields;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : schema())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

void assign(PipelineConfig& config, const std::string& section,
            const std::string& key, const TomlValue& value,
            const std::string& where) {
  const Field* f = find_field(section, key);
  if (!f)
    throw ConfigError(where + ": unknown configuration key '" + section + "." +
                      key + "'");
  f->set(config, value, where);
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& toml_text) {
  PipelineConfig config;
  std::istringstream in(toml_text);
  std::string line, section;
  int lineno = 0;
  bool seen_section = false;
  while (std::getline(in, line)) {
    ++lineno;
    strip_comment(line);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno);
    if (text.front() == '[') {
      if (text.back() != ']')
        throw ConfigError(where + ": malformed section header");
      section = trim(text.substr(1, text.size() - 2));
      seen_section = true;
      bool known = false;
      for (const auto& f : schema()) known |= f.section == section;
      if (!known)
        throw ConfigError(where + ": unknown section '" + section + "'");
      continue;
    }
    const size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    if (!seen_section)
      throw ConfigError(where + ": key outside of any [section]");
    const std::string key = trim(text.substr(0, eq));
    assign(config, section, key, parse_value(text.substr(eq + 1), where),
           where);
  }
  return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str());
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment +
                      "' must look like section.key=value");
  const std::string path = trim(assignment.substr(0, eq));
  const size_t dot = path.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override key '" + path + "' must be section.key");
  const std::string where = "override '" + path + "'";
  assign(config, path.substr(0, dot), path.substr(dot + 1),
         parse_value(assignment.substr(eq + 1), where), where);
}

std::string dump_canonical(const PipelineConfig& config) {
  std::string out;
  std::string current;
  for (const auto& f : schema()) {
    if (f.section != current) {
      if (!out.empty()) out += "\n";
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.dump(config) + "\n";
  }
  return out;
}

void validate_pipeline_config(const PipelineConfig& config) {
  config.synth.validate();
  config.backbone.validate();
  if (config.refine.default_duration <= 0)
    throw ConfigError("refine.default_duration must be > 0");
  auto in_unit = [](double v) { return v > 0 && v < 1; };
  if (!in_unit(config.proposal.video_class_threshold))
    throw ConfigError("proposal.video_class_threshold must be in (0, 1)");
  if (config.proposal.snippet_thresholds.empty())
    throw ConfigError("proposal.snippet_thresholds must not be empty");
  for (double t : config.proposal.snippet_thresholds)
    if (!in_unit(t))
      throw ConfigError("proposal.snippet_thresholds must be in (0, 1)");
  if (config.proposal.nms_tiou <= 0 || config.proposal.nms_tiou > 1)
    throw ConfigError("proposal.nms_tiou must be in (0, 1]");
  if (config.proposal.oic_outer_fraction <= 0 ||
      config.proposal.oic_outer_fraction > 1)
    throw ConfigError("proposal.oic_outer_fraction must be in (0, 1]");
  if (config.losses.lambda_mil < 0 || config.losses.lambda_act < 0 ||
      config.losses.lambda_bg < 0)
    throw ConfigError("losses.lambda_* must be >= 0");
  if (config.losses.gamma < 0) throw ConfigError("losses.gamma must be >= 0");
  if (config.losses.radius < 0) throw ConfigError("losses.radius must be >= 0");
  if (!in_unit(config.losses.bg_threshold))
    throw ConfigError("losses.bg_threshold must be in (0, 1)");
  if (config.train.steps < 1) throw ConfigError("train.steps must be >= 1");
  if (config.train.learning_rate <= 0)
    throw ConfigError("train.learning_rate must be > 0");
  if (config.train.momentum < 0 || config.train.momentum >= 1)
    throw ConfigError("train.momentum must be in [0, 1)");
  if (config.eval.tiou_thresholds.empty())
    throw ConfigError("eval.tiou_thresholds must not be empty");
  for (double t : config.eval.tiou_thresholds)
    if (t <= 0 || t > 1)
      throw ConfigError("eval.tiou_thresholds must be in (0, 1]");
}

}  // namespace potloc
