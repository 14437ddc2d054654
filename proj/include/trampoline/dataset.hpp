#pragma once

#include <cstdint>
#include <vector>

#include "trampoline/evaluation.hpp"
#include "trampoline/features.hpp"
#include "trampoline/generator.hpp"
#include "trampoline/pose.hpp"
#include "trampoline/rng.hpp"

namespace tramp {

struct DatasetSpec {
  int per_skill = 20;
  double fps = 30.0;
  NoiseSpec noise;  // noise.seed seeds the whole dataset
  int smooth_window = 5;
};

/// Feature trajectory of the airborne part of one generated skill.
inline FeatureTrajectory skill_features(const GeneratedSkill& g, int smooth_window = 5) {
  const PoseSequence smoothed = smooth_poses(g.poses, smooth_window);
  PoseSequence air;
  air.fps = smoothed.fps;
  air.coords = smoothed.coords;
  air.frames.assign(smoothed.frames.begin() + static_cast<std::ptrdiff_t>(g.airborne_first),
                    smoothed.frames.begin() + static_cast<std::ptrdiff_t>(g.airborne_last) + 1);
  return extract_features(air, g.shoulder_span);
}

/// `per_skill` noisy examples of every built-in skill, in catalog order.
inline std::vector<LabelledTrajectory> generate_dataset(const DatasetSpec& spec,
                                                        const std::vector<SkillMotionModel>& models = builtin_models()) {
  if (spec.per_skill <= 0) throw InputError("per_skill must be positive");
  SplitMix64 seeds(spec.noise.seed);
  std::vector<LabelledTrajectory> out;
  out.reserve(models.size() * static_cast<std::size_t>(spec.per_skill));
  for (const auto& m : models) {
    for (int i = 0; i < spec.per_skill; ++i) {
      NoiseSpec n = spec.noise;
      n.seed = seeds.next();
      FeatureTrajectory f = skill_features(generate_skill(m, spec.fps, n), spec.smooth_window);
      f.label = m.code.str();
      f.skill_ref = m.code.str() + "-" + std::to_string(i);
      out.push_back({m.code, std::move(f)});
    }
  }
  return out;
}

}  // namespace tramp
