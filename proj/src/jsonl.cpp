#include "potloc/jsonl.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "potloc/errors.hpp"

namespace potloc {

using nlohmann::json;

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

namespace {

std::string quote(const std::string& s) {
  return json(s).dump();  // handles escaping
}

// Pulls a required field out of a parsed record, with errors that point at
// the offending line and field.
class Record {
 public:
  Record(const json& j, const std::string& path, int line)
      : j_(j), path_(path), line_(line) {}

  const json& get(const std::string& field) const {
    auto it = j_.find(field);
    if (it == j_.end())
      throw ParseError(path_, line_, field, "missing");
    return *it;
  }

  double real(const std::string& field) const {
    const json& v = get(field);
    if (!v.is_number()) throw ParseError(path_, line_, field, "not a number");
    return v.get<double>();
  }

  int integer(const std::string& field) const {
    const json& v = get(field);
    if (!v.is_number_integer())
      throw ParseError(path_, line_, field, "not an integer");
    return v.get<int>();
  }

  std::string str(const std::string& field) const {
    const json& v = get(field);
    if (!v.is_string()) throw ParseError(path_, line_, field, "not a string");
    return v.get<std::string>();
  }

  bool has(const std::string& field) const { return j_.contains(field); }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }
  int line() const { return line_; }

 private:
  const json& j_;
  std::string path_;
  int line_;
};

template <typename Fn>
auto read_lines(const std::string& path, Fn parse_record)
    -> std::vector<decltype(parse_record(std::declval<Record>()))> {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<decltype(parse_record(std::declval<Record>()))> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(path, lineno, "-", "invalid JSON");
    out.push_back(parse_record(Record(j, path, lineno)));
  }
  return out;
}

void append_real_array(std::string& out, const double* v, size_t n) {
  out += '[';
  for (size_t i = 0; i < n; ++i) {
    if (i) out += ',';
    out += format_real(v[i]);
  }
  out += ']';
}

std::vector<uint8_t> parse_onehot(const Record& r, const std::string& field) {
  const json& v = r.get(field);
  if (!v.is_array()) throw ParseError(r.path(), r.line(), field, "not an array");
  std::vector<uint8_t> label;
  label.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number_integer())
      throw ParseError(r.path(), r.line(), field, "non-integer entry");
    label.push_back(static_cast<uint8_t>(e.get<int>()));
  }
  return label;
}

}  // namespace

std::vector<VideoRecord> read_videos(const std::string& path) {
  return read_lines(path, [](const Record& r) {
    VideoRecord v;
    v.id = r.str("id");
    v.length = r.integer("length");
    if (r.has("features")) {
      const json& f = r.get("features");
      if (!f.is_array())
        throw ParseError(r.path(), r.line(), "features", "not an array");
      int rows = static_cast<int>(f.size());
      int cols = rows > 0 ? static_cast<int>(f[0].size()) : 0;
      Mat m(rows, cols);
      for (int t = 0; t < rows; ++t) {
        if (!f[t].is_array() || static_cast<int>(f[t].size()) != cols)
          throw ParseError(r.path(), r.line(), "features", "ragged rows");
        for (int d = 0; d < cols; ++d) m.at(t, d) = f[t][d].get<double>();
      }
      v.features = std::move(m);
    }
    if (r.has("ground_truth")) {
      std::vector<GtInterval> gt;
      for (const auto& g : r.get("ground_truth")) {
        Record gr(g, r.path(), r.line());
        gt.push_back({gr.real("start"), gr.real("end"), gr.integer("label")});
      }
      v.ground_truth = std::move(gt);
    }
    return v;
  });
}

void write_videos(const std::string& path, const std::vector<VideoRecord>& v) {
  std::string out;
  for (const auto& rec : v) {
    out += "{\"id\":" + quote(rec.id) +
           ",\"length\":" + std::to_string(rec.length);
    if (rec.features) {
      out += ",\"features\":[";
      for (int t = 0; t < rec.features->rows; ++t) {
        if (t) out += ',';
        append_real_array(out, rec.features->row(t), rec.features->cols);
      }
      out += ']';
    }
    if (rec.ground_truth) {
      out += ",\"ground_truth\":[";
      bool first = true;
      for (const auto& g : *rec.ground_truth) {
        if (!first) out += ',';
        first = false;
        out += "{\"start\":" + format_real(g.start) +
               ",\"end\":" + format_real(g.end) +
               ",\"label\":" + std::to_string(g.label) + "}";
      }
      out += ']';
    }
    out += "}\n";
  }
  write_text_atomic(path, out);
}

std::vector<PointRecord> read_points(const std::string& path) {
  return read_lines(path, [](const Record& r) {
    PointRecord p;
    p.video_id = r.str("video_id");
    p.point.epsilon = r.integer("epsilon");
    p.point.label = parse_onehot(r, "label");
    return p;
  });
}

void write_points(const std::string& path, const std::vector<PointRecord>& v) {
  std::string out;
  for (const auto& rec : v) {
    out += "{\"video_id\":" + quote(rec.video_id) +
           ",\"epsilon\":" + std::to_string(rec.point.epsilon) + ",\"label\":[";
    for (size_t c = 0; c < rec.point.label.size(); ++c) {
      if (c) out += ',';
      out += std::to_string(static_cast<int>(rec.point.label[c]));
    }
    out += "]}\n";
  }
  write_text_atomic(path, out);
}

std::vector<ProposalRecord> read_proposals(const std::string& path) {
  return read_lines(path, [](const Record& r) {
    ProposalRecord p;
    p.video_id = r.str("video_id");
    p.proposal.start = r.real("start");
    p.proposal.end = r.real("end");
    p.proposal.label = r.integer("label");
    p.proposal.confidence = r.real("confidence");
    return p;
  });
}

void write_proposals(const std::string& path,
                     const std::vector<ProposalRecord>& v) {
  std::string out;
  for (const auto& rec : v) {
    out += "{\"video_id\":" + quote(rec.video_id) +
           ",\"start\":" + format_real(rec.proposal.start) +
           ",\"end\":" + format_real(rec.proposal.end) +
           ",\"label\":" + std::to_string(rec.proposal.label) +
           ",\"confidence\":" + format_real(rec.proposal.confidence) + "}\n";
  }
  write_text_atomic(path, out);
}

std::vector<PseudoLabelRecord> read_pseudo_labels(const std::string& path) {
  return read_lines(path, [](const Record& r) {
    PseudoLabelRecord p;
    p.video_id = r.str("video_id");
    p.label.point = r.integer("point");
    p.label.start = r.real("start");
    p.label.end = r.real("end");
    p.label.label = r.integer("label");
    return p;
  });
}

void write_pseudo_labels(const std::string& path,
                         const std::vector<PseudoLabelRecord>& v) {
  std::string out;
  for (const auto& rec : v) {
    out += "{\"video_id\":" + quote(rec.video_id) +
           ",\"point\":" + std::to_string(rec.label.point) +
           ",\"start\":" + format_real(rec.label.start) +
           ",\"end\":" + format_real(rec.label.end) +
           ",\"label\":" + std::to_string(rec.label.label) + "}\n";
  }
  write_text_atomic(path, out);
}

std::vector<DetectionRecord> read_detections(const std::string& path) {
  return read_lines(path, [](const Record& r) {
    DetectionRecord d;
    d.video_id = r.str("video_id");
    d.detection.start = r.real("start");
    d.detection.end = r.real("end");
    d.detection.label = r.integer("label");
    d.detection.score = r.real("score");
    return d;
  });
}

void write_detections(const std::string& path,
                      const std::vector<DetectionRecord>& v) {
  std::string out;
  for (const auto& rec : v) {
    out += "{\"video_id\":" + quote(rec.video_id) +
           ",\"start\":" + format_real(rec.detection.start) +
           ",\"end\":" + format_real(rec.detection.end) +
           ",\"label\":" + std::to_string(rec.detection.label) +
           ",\"score\":" + format_real(rec.detection.score) + "}\n";
  }
  write_text_atomic(path, out);
}

std::vector<ScoreRecord> read_scores(const std::string& path) {
  return read_lines(path, [](const Record& r) {
    ScoreRecord s;
    s.video_id = r.str("video_id");
    s.level = r.integer("level");
    s.sigma = r.integer("sigma");
    int rows = r.integer("rows");
    int cols = r.integer("cols");
    const json& vals = r.get("values");
    if (!vals.is_array() ||
        static_cast<int>(vals.size()) != rows * cols)
      throw ParseError(r.path(), r.line(), "values", "size mismatch");
    s.scores.values = Mat(rows, cols);
    for (int i = 0; i < rows * cols; ++i)
      s.scores.values.data[i] = vals[i].get<double>();
    return s;
  });
}

void write_scores(const std::string& path, const std::vector<ScoreRecord>& v) {
  std::string out;
  for (const auto& rec : v) {
    const Mat& m = rec.scores.values;
    out += "{\"video_id\":" + quote(rec.video_id) +
           ",\"level\":" + std::to_string(rec.level) +
           ",\"sigma\":" + std::to_string(rec.sigma) +
           ",\"rows\":" + std::to_string(m.rows) +
           ",\"cols\":" + std::to_string(m.cols) + ",\"values\":";
    append_real_array(out, m.data.data(), m.data.size());
    out += "}\n";
  }
  write_text_atomic(path, out);
}

}  // namespace potloc
