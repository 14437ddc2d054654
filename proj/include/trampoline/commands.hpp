#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trampoline/classifier.hpp"
#include "trampoline/config.hpp"
#include "trampoline/dataset.hpp"
#include "trampoline/evaluation.hpp"
#include "trampoline/frame_io.hpp"
#include "trampoline/generator.hpp"
#include "trampoline/io.hpp"
#include "trampoline/pipeline.hpp"
#include "trampoline/pose.hpp"
#include "trampoline/render.hpp"

namespace tramp::cmd {

namespace fs = std::filesystem;

inline PipelineConfig config_or_default(const std::optional<fs::path>& path) {
  return path ? load_config(*path) : PipelineConfig{};
}

struct ExtractArgs {
  fs::path frames;
  fs::path out;
  std::string id;  // defaults to the output directory name
  std::optional<int> line;
  std::optional<fs::path> config;
  double fps = 30.0;  // PNG directories only; raw streams carry their own
  bool crops = true;
};

/// Body extraction and segmentation. A trampoline line adjusted by the user
/// in an earlier run (stored in out/routine.json) is reused unless --line is
/// given. Returns the extraction; the caller maps a segmentation failure to
/// its exit code after the files are written.
inline RoutineExtraction extract(const ExtractArgs& a) {
  const PipelineConfig cfg = config_or_default(a.config);
  const auto src = open_frames(a.frames, a.fps);
  ExtractOptions opt;
  opt.id = a.id.empty() ? a.out.filename().string() : a.id;
  if (opt.id.empty()) opt.id = "routine";
  if (a.line) {
    opt.line = set_trampoline_line(*a.line);
  } else if (fs::exists(a.out / "routine.json")) {
    const auto prev = read_json_file(a.out / "routine.json");
    if (prev.contains("trampoline_line")) {
      const TrampolineLine l = line_from_json(prev["trampoline_line"]);
      if (l.source == LineSource::UserAdjusted) opt.line = l;
    }
  }
  if (a.crops) {
    fs::remove_all(a.out / "crops");
    opt.crops_dir = a.out / "crops";
  }
  RoutineExtraction r = extract_routine(*src, cfg, opt);
  r.source = a.frames.string();
  write_extraction(a.out, r, cfg);
  return r;
}

struct FeaturesArgs {
  fs::path poses;
  fs::path segments;
  fs::path out;
  std::optional<fs::path> origins;  // crops/origins.json, for crop-coordinate poses
  std::optional<fs::path> config;
  std::string label;
};

/// Writes one trajectory file per routine jump, named by segment index.
/// Returns the number written.
inline std::size_t features(const FeaturesArgs& a) {
  const PipelineConfig cfg = config_or_default(a.config);
  PoseSequence poses = load_pose_sequence(a.poses.string());
  if (poses.coords == CoordFrame::Crop) {
    CropOrigins origins;
    if (a.origins) {
      for (const auto& [k, v] : read_json_file(*a.origins).items())
        origins[std::stoi(k)] = {v.at(0).get<double>(), v.at(1).get<double>()};
    }
    poses = to_full_frame(poses, origins);
  }
  const nlohmann::json segdoc = read_json_file(a.segments);
  const auto segments = segments_from_json(segdoc);
  const std::string routine_id = segdoc.value("routine_id", std::string("routine"));
  const auto trajs = routine_features(poses, segments, cfg, routine_id);
  fs::create_directories(a.out);
  std::size_t written = 0;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    if (!trajs[k]) continue;
    FeatureTrajectory t = *trajs[k];
    t.label = a.label;
    write_json_atomic(a.out / (std::to_string(k) + ".json"), to_json(t));
    ++written;
  }
  return written;
}

inline nlohmann::json classify(const fs::path& features_file, const fs::path& refs_file) {
  const FeatureTrajectory f = trajectory_from_json(read_json_file(features_file));
  const ReferenceSet refs = load_reference_set(refs_file);
  if (refs.empty()) throw InputError("reference set " + refs_file.string() + " is empty");
  return to_json(tramp::classify(f, refs));
}

/// Labelled trajectories under `dir` (recursively, *.json with a "label").
inline std::vector<LabelledTrajectory> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<LabelledTrajectory> out;
  for (const auto& p : files) {
    const auto j = read_json_file(p);
    if (!j.is_object() || !j.contains("angles")) continue;
    FeatureTrajectory t = trajectory_from_json(j);
    if (t.label.empty()) throw InputError(p.string() + " has no label");
    out.push_back({parse_code(t.label), std::move(t)});
  }
  if (out.empty()) throw InputError("no labelled trajectories in " + dir.string());
  return out;
}

struct EvaluateArgs {
  fs::path dataset;
  fs::path out;
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

/// Runs the protocol and writes report.json plus both confusion CSVs.
inline nlohmann::json evaluate(const EvaluateArgs& a) {
  PipelineConfig cfg = config_or_default(a.config);
  if (a.seed) cfg.evaluation.seed = *a.seed;
  if (a.threads) cfg.evaluation.threads = *a.threads;
  const auto data = load_dataset(a.dataset);
  const EvaluationResult r = run_evaluation(data, cfg.evaluation);
  fs::create_directories(a.out);
  const fs::path csv = a.out / "confusion.csv";
  export_confusion(r.confusion, csv);
  nlohmann::json report = evaluation_report(r, cfg.evaluation, csv.filename().string());
  write_json_atomic(a.out / "report.json", report);
  return report;
}

struct GenerateArgs {
  std::vector<std::string> codes;
  std::vector<fs::path> model_files;  // user-defined skill models
  bool routine = false;
  int dataset_per_skill = 0;  // > 0: labelled feature dataset of the built-in skills
  bool render = false;
  std::uint64_t seed = 1;
  double fps = 30.0;
  NoiseSpec noise;
  fs::path out;
};

inline const SkillMotionModel& model_for(const std::vector<SkillMotionModel>& custom, const SkillCode& code) {
  for (const auto& m : custom)
    if (m.code == code) return m;
  return builtin_model(code);
}

/// Writes pose streams (and optionally rendered frames or a feature dataset).
/// Returns the paths written, for reporting.
inline std::vector<fs::path> generate(const GenerateArgs& a) {
  std::vector<SkillMotionModel> custom;
  for (const auto& p : a.model_files) custom.push_back(motion_model_from_json(read_json_file(p)));
  NoiseSpec noise = a.noise;
  noise.seed = a.seed;
  fs::create_directories(a.out);
  std::vector<fs::path> written;

  if (a.dataset_per_skill > 0) {
    DatasetSpec spec;
    spec.per_skill = a.dataset_per_skill;
    spec.fps = a.fps;
    spec.noise = noise;
    for (const auto& e : generate_dataset(spec)) {
      const fs::path p = a.out / e.code.str() / (e.trajectory.skill_ref + ".json");
      write_json_atomic(p, to_json(e.trajectory));
      written.push_back(p);
    }
    return written;
  }

  std::vector<SkillCode> codes;
  for (const auto& c : a.codes) codes.push_back(parse_code(c));
  if (codes.empty()) throw InputError("no skill codes given");

  if (a.routine) {
    const GeneratedRoutine r = generate_routine(codes, a.fps, noise);
    const fs::path poses = a.out / "poses.jsonl";
    save_pose_sequence(poses.string(), r.poses);
    written.push_back(poses);
    nlohmann::json truth = nlohmann::json::array();
    for (std::size_t k = 0; k < r.truth.size(); ++k)
      truth.push_back({{"start", r.truth[k].start_frame},
                       {"end", r.truth[k].end_frame},
                       {"apex", r.truth[k].apex_frame},
                       {"is_routine_jump", r.truth[k].is_routine_jump},
                       {"airborne", {r.airborne[k].first, r.airborne[k].second}},
                       {"code", r.codes[k].str()}});
    write_json_atomic(a.out / "truth.json",
                      {{"fps", a.fps}, {"line_row", r.scene.line_row}, {"shoulder_span", r.shoulder_span}, {"segments", truth}});
    written.push_back(a.out / "truth.json");
    if (a.render) {
      const fs::path dir = a.out / "frames";
      fs::create_directories(dir);
      const Frame bg = render_background(r.scene);
      char name[32];
      for (std::size_t i = 0; i < r.poses.size(); ++i) {
        std::snprintf(name, sizeof name, "%06zu.png", i);
        write_png(dir / name, render_frame(bg, r.poses.frames[i].pose, r.scene.body_height, static_cast<int>(i)));
      }
      written.push_back(dir);
    }
    return written;
  }

  SplitMix64 seeds(a.seed);
  for (const auto& c : codes) {
    NoiseSpec n = noise;
    n.seed = seeds.next();
    const GeneratedSkill g = generate_skill(model_for(custom, c), a.fps, n);
    const fs::path p = a.out / (c.str() + ".jsonl");
    save_pose_sequence(p.string(), g.poses);
    written.push_back(p);
  }
  return written;
}

}  // namespace tramp::cmd
