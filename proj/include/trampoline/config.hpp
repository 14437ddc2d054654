#pragma once

#include <filesystem>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "trampoline/body_extraction.hpp"
#include "trampoline/error.hpp"
#include "trampoline/evaluation.hpp"
#include "trampoline/io.hpp"
#include "trampoline/pose.hpp"
#include "trampoline/segmentation.hpp"

namespace tramp {

struct BackgroundParams {
  double learning_rate = 0.01;
  double threshold = 25.0;
  int bootstrap_frames = 25;  // frames sampled for the median initialisation; 0 = first frame only
};

struct CropParams {
  int blur_radius = 7;
  double darken = 0.4;
};

/// Every tunable of the pipeline, with its default.
struct PipelineConfig {
  BackgroundParams background;
  MorphologyParams morphology;
  TrampolineDetectParams trampoline;
  double contact_margin = 5.0;
  CropParams crop;
  MinimaParams minima;
  double apex_threshold = 0.5;
  double confidence_floor = kDefaultConfidenceFloor;
  int pose_smooth_window = 5;
  EvalConfig evaluation;
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {
      {"background",
       {{"learning_rate", c.background.learning_rate},
        {"threshold", c.background.threshold},
        {"bootstrap_frames", c.background.bootstrap_frames}}},
      {"morphology",
       {{"kernel_w", c.morphology.kernel_w},
        {"kernel_h", c.morphology.kernel_h},
        {"erode_iterations", c.morphology.erode_iterations},
        {"dilate_iterations", c.morphology.dilate_iterations}}},
      {"trampoline",
       {{"hue_lo", c.trampoline.hue_lo},
        {"hue_hi", c.trampoline.hue_hi},
        {"saturation_floor", c.trampoline.saturation_floor},
        {"row_coverage", c.trampoline.row_coverage},
        {"contact_margin", c.contact_margin}}},
      {"crop", {{"blur_radius", c.crop.blur_radius}, {"darken", c.crop.darken}}},
      {"segmentation",
       {{"smooth_window", c.minima.smooth_window},
        {"min_separation", c.minima.min_separation},
        {"min_prominence", c.minima.min_prominence},
        {"apex_threshold", c.apex_threshold}}},
      {"pose", {{"confidence_floor", c.confidence_floor}, {"smooth_window", c.pose_smooth_window}}},
      {"evaluation", to_json(c.evaluation)},
  };
}

namespace detail {

// Reads the keys present in `j` into `fields`, rejecting unknown keys so a
// misspelt option fails loudly.
template <typename F>
void read_section(const nlohmann::json& root, const char* name, F&& fields) {
  if (!root.contains(name)) return;
  const auto& j = root.at(name);
  if (!j.is_object()) throw InputError(std::string("config section '") + name + "' must be an object");
  std::set<std::string> used;
  auto get = [&](const char* key, auto& target) {
    used.insert(key);
    if (j.contains(key)) target = j.at(key).get<std::decay_t<decltype(target)>>();
  };
  fields(get);
  for (const auto& [k, v] : j.items())
    if (!used.count(k)) throw InputError("unknown config key '" + std::string(name) + "." + k + "'");
}

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  static const std::set<std::string> sections{"background", "morphology", "trampoline", "crop",
                                              "segmentation", "pose", "evaluation"};
  for (const auto& [k, v] : j.items())
    if (!sections.count(k)) throw InputError("unknown config section '" + k + "'");
  PipelineConfig c;
  try {
    detail::read_section(j, "background", [&](auto get) {
      get("learning_rate", c.background.learning_rate);
      get("threshold", c.background.threshold);
      get("bootstrap_frames", c.background.bootstrap_frames);
    });
    detail::read_section(j, "morphology", [&](auto get) {
      get("kernel_w", c.morphology.kernel_w);
      get("kernel_h", c.morphology.kernel_h);
      get("erode_iterations", c.morphology.erode_iterations);
      get("dilate_iterations", c.morphology.dilate_iterations);
    });
    detail::read_section(j, "trampoline", [&](auto get) {
      get("hue_lo", c.trampoline.hue_lo);
      get("hue_hi", c.trampoline.hue_hi);
      get("saturation_floor", c.trampoline.saturation_floor);
      get("row_coverage", c.trampoline.row_coverage);
      get("contact_margin", c.contact_margin);
    });
    detail::read_section(j, "crop", [&](auto get) {
      get("blur_radius", c.crop.blur_radius);
      get("darken", c.crop.darken);
    });
    detail::read_section(j, "segmentation", [&](auto get) {
      get("smooth_window", c.minima.smooth_window);
      get("min_separation", c.minima.min_separation);
      get("min_prominence", c.minima.min_prominence);
      get("apex_threshold", c.apex_threshold);
    });
    detail::read_section(j, "pose", [&](auto get) {
      get("confidence_floor", c.confidence_floor);
      get("smooth_window", c.pose_smooth_window);
    });
    detail::read_section(j, "evaluation", [&](auto get) {
      get("references_per_skill", c.evaluation.references_per_skill);
      get("tests_per_skill", c.evaluation.tests_per_skill);
      get("subset_size", c.evaluation.subset_size);
      get("iterations", c.evaluation.iterations);
      get("min_examples", c.evaluation.min_examples);
      get("seed", c.evaluation.seed);
      get("threads", c.evaluation.threads);
    });
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config value has the wrong type: ") + e.what());
  }
  if (!(c.background.learning_rate > 0 && c.background.learning_rate <= 1))
    throw InputError("background.learning_rate must be in (0, 1]");
  if (c.background.bootstrap_frames < 0) throw InputError("background.bootstrap_frames must be >= 0");
  if (c.morphology.kernel_w <= 0 || c.morphology.kernel_h <= 0 || c.morphology.erode_iterations < 0 ||
      c.morphology.dilate_iterations < 0)
    throw InputError("morphology parameters must be non-negative with a positive kernel");
  if (c.crop.blur_radius < 0 || c.crop.darken < 0) throw InputError("crop parameters must be non-negative");
  if (c.pose_smooth_window < 1 || c.pose_smooth_window % 2 == 0) throw InputError("pose.smooth_window must be odd");
  c.evaluation.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

}  // namespace tramp
