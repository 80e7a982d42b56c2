#include "potloc/pipeline.hpp"

#include <algorithm>
#include <map>

#include "potloc/errors.hpp"
#include "potloc/losses.hpp"
#include "potloc/postprocess.hpp"
#include "potloc/pseudolabel.hpp"
#include "potloc/synth.hpp"

namespace potloc {

namespace {

std::map<std::string, int> index_by_id(const std::vector<VideoRecord>& videos) {
  std::map<std::string, int> index;
  for (size_t i = 0; i < videos.size(); ++i)
    index.emplace(videos[i].id, static_cast<int>(i));
  return index;
}

std::vector<std::vector<PointAnnotation>> points_per_video(
    const std::vector<VideoRecord>& videos,
    const std::vector<PointRecord>& points) {
  auto index = index_by_id(videos);
  std::vector<std::vector<PointAnnotation>> out(videos.size());
  for (const auto& p : points) {
    auto it = index.find(p.video_id);
    if (it == index.end())
      throw DataError("points reference unknown video '" + p.video_id + "'");
    out[it->second].push_back(p.point);
  }
  return out;
}

// Scores grouped by video (file order), each group ordered by level and
// carrying a consistent sigma.
struct VideoScores {
  std::string video_id;
  int sigma = 1;
  std::vector<ScoreSequence> levels;
};

std::vector<VideoScores> group_scores(const std::vector<ScoreRecord>& records) {
  std::vector<VideoScores> out;
  std::map<std::string, size_t> index;
  for (const auto& r : records) {
    auto [it, fresh] = index.emplace(r.video_id, out.size());
    if (fresh) out.push_back({r.video_id, r.sigma, {}});
    auto& vs = out[it->second];
    if (r.sigma != vs.sigma)
      throw DataError("video '" + r.video_id + "' mixes sigma values");
    if (static_cast<int>(vs.levels.size()) != r.level)
      throw DataError("video '" + r.video_id + "' has out-of-order levels");
    vs.levels.push_back(r.scores);
  }
  return out;
}

int dataset_classes(const std::vector<std::vector<PointAnnotation>>& points) {
  int num_classes = 0;
  for (const auto& video : points)
    for (const auto& p : video)
      num_classes = std::max(num_classes, static_cast<int>(p.label.size()));
  if (num_classes == 0) throw DataError("dataset carries no annotated points");
  return num_classes;
}

// Exceptions must not escape a parallel region; the first captured message is
// rethrown afterwards.
struct ParallelErrors {
  std::vector<std::string> messages;

  explicit ParallelErrors(size_t n) : messages(n) {}
  template <typename Fn>
  void run(int slot, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      messages[slot] = e.what();
    }
  }
  void rethrow() const {
    for (const auto& m : messages)
      if (!m.empty()) throw DataError(m);
  }
};

void write_score_table(std::vector<ScoreRecord>& out, const std::string& id,
                       const LogitTable& table) {
  const auto scores = scores_from_logits(table);
  for (size_t l = 0; l < scores.size(); ++l)
    out.push_back(
        {id, static_cast<int>(l), table.sigma, scores[l]});
}

}  // namespace

void run_synth(const PipelineConfig& config, const PipelinePaths& paths) {
  const auto videos = gen_dataset(config.synth);
  const auto violations = validate_dataset(videos);
  if (!violations.empty())
    throw DataError("generated dataset is invalid: " + violations.front());

  write_videos(paths.videos(), videos);
  std::vector<PointRecord> points;
  for (const auto& v : videos)
    for (const auto& p : v.points) points.push_back({v.id, p});
  write_points(paths.points(), points);
  write_text_atomic(paths.synth_manifest(), synth_manifest_json(config.synth));
}

void run_train_base(const PipelineConfig& config, const PipelinePaths& paths) {
  const auto videos = read_videos(paths.videos());
  const auto points = points_per_video(videos, read_points(paths.points()));
  dataset_classes(points);  // fail early on an unannotated dataset

  const int n = static_cast<int>(videos.size());
  std::vector<std::vector<ScoreRecord>> per_video(n);
  ParallelErrors errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < n; ++v) {
    errors.run(v, [&, v] {
      if (points[v].empty()) return;  // nothing to supervise with
      const auto table =
          fit_logits(videos[v], points[v], config.losses,
                     {config.backbone.sigma, 0}, config.train);
      write_score_table(per_video[v], videos[v].id, table);
    });
  }
  errors.rethrow();

  std::vector<ScoreRecord> records;
  for (auto& group : per_video)
    records.insert(records.end(), group.begin(), group.end());
  write_scores(paths.scores_base(), records);
}

void run_propose(const PipelineConfig& config, const PipelinePaths& paths) {
  const auto grouped = group_scores(read_scores(paths.scores_base()));
  const int n = static_cast<int>(grouped.size());
  std::vector<std::vector<ProposalRecord>> per_video(n);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < n; ++v) {
    const auto& vs = grouped[v];
    const auto video_scores =
        video_level_scores(vs.levels, config.losses.top_k);
    const auto proposals =
        generate_proposals(vs.levels, video_scores, vs.sigma,
                           vs.levels[0].length(), config.proposal);
    for (const auto& p : proposals)
      per_video[v].push_back({vs.video_id, p});
  }
  std::vector<ProposalRecord> records;
  for (auto& group : per_video)
    records.insert(records.end(), group.begin(), group.end());
  write_proposals(paths.proposals(), records);
}

void run_pseudolabel(const PipelineConfig& config, const PipelinePaths& paths) {
  const auto videos = read_videos(paths.videos());
  const auto points = points_per_video(videos, read_points(paths.points()));

  auto index = index_by_id(videos);
  std::vector<std::vector<Proposal>> proposals(videos.size());
  for (const auto& rec : read_proposals(paths.proposals())) {
    auto it = index.find(rec.video_id);
    if (it == index.end())
      throw DataError("proposals reference unknown video '" + rec.video_id +
                      "'");
    proposals[it->second].push_back(rec.proposal);
  }
  std::vector<int> lengths;
  for (const auto& v : videos) lengths.push_back(v.length);

  const auto labels =
      generate_pseudo_labels(proposals, points, lengths, config.refine);

  std::vector<PseudoLabelRecord> records;
  for (size_t v = 0; v < videos.size(); ++v)
    for (const auto& pl : labels[v]) records.push_back({videos[v].id, pl});
  write_pseudo_labels(paths.pseudo_labels(), records);
}

void run_train_potloc(const PipelineConfig& config,
                      const PipelinePaths& paths) {
  const auto videos = read_videos(paths.videos());
  auto index = index_by_id(videos);
  std::vector<std::vector<PseudoLabel>> labels(videos.size());
  for (const auto& rec : read_pseudo_labels(paths.pseudo_labels())) {
    auto it = index.find(rec.video_id);
    if (it == index.end())
      throw DataError("pseudo-labels reference unknown video '" +
                      rec.video_id + "'");
    labels[it->second].push_back(rec.label);
  }

  const int n = static_cast<int>(videos.size());
  std::vector<std::vector<ScoreRecord>> per_video(n);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < n; ++v) {
    if (labels[v].empty()) continue;
    const auto table = fit_logits(
        videos[v], labels[v], config.losses,
        {config.backbone.sigma, config.backbone.levels}, config.train);
    write_score_table(per_video[v], videos[v].id, table);
  }

  std::vector<ScoreRecord> records;
  for (auto& group : per_video)
    records.insert(records.end(), group.begin(), group.end());
  write_scores(paths.scores_potloc(), records);
}

void run_infer(const PipelineConfig& config, const std::string& scores_path,
               const std::string& videos_path, const std::string& out_path) {
  const auto videos = read_videos(videos_path);
  auto index = index_by_id(videos);
  const auto grouped = group_scores(read_scores(scores_path));

  const int n = static_cast<int>(grouped.size());
  std::vector<std::vector<DetectionRecord>> per_video(n);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < n; ++v) {
    const auto& vs = grouped[v];
    const auto video_scores =
        video_level_scores(vs.levels, config.losses.top_k);
    const auto proposals =
        generate_proposals(vs.levels, video_scores, vs.sigma,
                           vs.levels[0].length(), config.proposal);
    for (const auto& p : proposals)
      per_video[v].push_back(
          {vs.video_id, {p.start, p.end, p.label, p.confidence}});
  }
  for (const auto& vs : grouped)
    if (!index.count(vs.video_id))
      throw DataError("scores reference unknown video '" + vs.video_id + "'");

  std::vector<DetectionRecord> records;
  for (auto& group : per_video)
    records.insert(records.end(), group.begin(), group.end());
  write_detections(out_path, records);
}

EvalOutcome run_eval(const PipelineConfig& config,
                     const std::string& detections_path,
                     const std::string& videos_path,
                     const std::string& report_path,
                     const std::string& baseline_detections_path) {
  const auto videos = read_videos(videos_path);
  const auto detections = read_detections(detections_path);

  EvalOutcome outcome;
  outcome.report = evaluate(detections, videos, config.eval);
  if (!baseline_detections_path.empty()) {
    const auto baseline = read_detections(baseline_detections_path);
    outcome.baseline_average_map =
        evaluate(baseline, videos, config.eval).average_map;
  }
  write_text_atomic(report_path,
                    report_to_json(outcome.report, outcome.baseline_average_map));
  return outcome;
}

}  // namespace potloc
