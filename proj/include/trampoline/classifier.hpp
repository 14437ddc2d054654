#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trampoline/catalog.hpp"
#include "trampoline/error.hpp"
#include "trampoline/features.hpp"
#include "trampoline/io.hpp"

namespace tramp {

/// Linear resampling of every column onto `target_T` uniformly spaced
/// points. Endpoints are copied exactly, and a trajectory already of length
/// `target_T` comes back unchanged.
inline FeatureTrajectory resample(const FeatureTrajectory& traj, std::size_t target_T) {
  const std::size_t T = traj.length();
  if (target_T < 2 || T < 2) throw InputError("resampling needs at least 2 points on both sides");
  FeatureTrajectory out = traj;
  if (target_T == T) return out;
  out.rows.assign(target_T, FeatureVector{});
  const double span_src = static_cast<double>(T - 1);
  const double span_dst = static_cast<double>(target_T - 1);
  for (std::size_t k = 0; k < target_T; ++k) {
    const double pos = static_cast<double>(k) * span_src / span_dst;
    auto i = static_cast<std::size_t>(pos);
    if (i >= T - 1) {
      out.rows[k] = traj.rows[T - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i);
    for (int c = 0; c < kFeatureCount; ++c) {
      const double a = traj.rows[i][c], b = traj.rows[i + 1][c];
      out.rows[k][c] = a + frac * (b - a);
    }
  }
  return out;
}

/// Mean squared angle difference over all T x 12 cells, in degrees squared.
inline double mse(const FeatureTrajectory& observed, const FeatureTrajectory& reference) {
  const std::size_t T = observed.length();
  if (T == 0 || reference.length() != T) throw InputError("mse needs trajectories of identical, non-zero length");
  double sum = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (int i = 0; i < kFeatureCount; ++i) {
      const double d = observed.rows[t][i] - reference.rows[t][i];
      sum += d * d;
    }
  }
  return sum / (static_cast<double>(T) * kFeatureCount);
}

struct Provenance {
  std::string routine_id;
  std::string athlete_id;
  std::string created_at;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ReferenceSkill {
  std::string id;
  SkillCode code;
  FeatureTrajectory trajectory;
  Provenance provenance;
};

struct ReferenceSet {
  static constexpr int kFormatVersion = 1;
  int version = kFormatVersion;
  std::vector<ReferenceSkill> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  /// Appends an entry; an empty id is replaced by the next free "ref-NNNN".
  ReferenceSkill& add(ReferenceSkill r) {
    if (r.trajectory.length() < 2) throw InputError("reference trajectory needs at least 2 rows");
    if (r.id.empty()) r.id = next_id();
    if (find(r.id) != nullptr) throw InputError("duplicate reference id " + r.id);
    entries.push_back(std::move(r));
    return entries.back();
  }

  const ReferenceSkill* find(const std::string& id) const {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const ReferenceSkill& e) { return e.id == id; });
    return it == entries.end() ? nullptr : &*it;
  }

  bool remove(const std::string& id) {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const ReferenceSkill& e) { return e.id == id; });
    if (it == entries.end()) return false;
    entries.erase(it);
    return true;
  }

  std::string next_id() const {
    for (std::size_t n = entries.size() + 1;; ++n) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "ref-%04zu", n);
      if (find(buf) == nullptr) return buf;
    }
  }
};

struct RankedMatch {
  std::string reference_id;
  SkillCode code;
  double mse = 0.0;
};

struct ClassificationResult {
  SkillCode best;
  double best_mse = 0.0;
  std::vector<RankedMatch> ranked;
};

/// 1-nearest-neighbour under mse() after resampling each reference to the
/// observed length. Equal errors keep reference-set order.
inline ClassificationResult classify(const FeatureTrajectory& observed, const ReferenceSet& refs) {
  if (refs.empty()) throw InputError("reference set is empty");
  if (observed.length() < 2) throw InputError("observed trajectory needs at least 2 rows");
  ClassificationResult res;
  res.ranked.reserve(refs.size());
  for (const auto& r : refs.entries) {
    res.ranked.push_back({r.id, r.code, mse(observed, resample(r.trajectory, observed.length()))});
  }
  std::stable_sort(res.ranked.begin(), res.ranked.end(),
                   [](const RankedMatch& a, const RankedMatch& b) { return a.mse < b.mse; });
  res.best = res.ranked.front().code;
  res.best_mse = res.ranked.front().mse;
  return res;
}

inline nlohmann::json to_json(const ClassificationResult& r) {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& m : r.ranked) ranked.push_back({{"reference_id", m.reference_id}, {"code", m.code.str()}, {"mse", m.mse}});
  return {{"best", r.best.str()},
          {"best_mse", r.best_mse},
          {"tariff", lookup_tariff(r.best)},
          {"ranked", std::move(ranked)}};
}

inline nlohmann::json to_json(const ReferenceSkill& r) {
  return {{"id", r.id},
          {"code", r.code.str()},
          {"trajectory", to_json(r.trajectory)},
          {"provenance",
           {{"routine_id", r.provenance.routine_id},
            {"athlete_id", r.provenance.athlete_id},
            {"created_at", r.provenance.created_at}}}};
}

inline nlohmann::json to_json(const ReferenceSet& s) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : s.entries) entries.push_back(to_json(e));
  return {{"version", s.version}, {"entries", std::move(entries)}};
}

inline ReferenceSet reference_set_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
    throw InputError("reference set needs an 'entries' array");
  ReferenceSet s;
  s.version = j.value("version", ReferenceSet::kFormatVersion);
  if (s.version != ReferenceSet::kFormatVersion)
    throw InputError("unsupported reference set version " + std::to_string(s.version));
  for (const auto& e : j["entries"]) try {
    ReferenceSkill r;
    r.id = e.value("id", std::string{});
    r.code = parse_code(e.at("code").get<std::string>());
    r.trajectory = trajectory_from_json(e.at("trajectory"));
    if (e.contains("provenance")) {
      const auto& p = e["provenance"];
      r.provenance = {p.value("routine_id", std::string{}), p.value("athlete_id", std::string{}),
                      p.value("created_at", std::string{})};
    }
    s.add(std::move(r));
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("malformed reference entry: ") + ex.what());
  }
  return s;
}

inline ReferenceSet load_reference_set(const std::filesystem::path& path) {
  return reference_set_from_json(read_json_file(path));
}

inline void save_reference_set(const std::filesystem::path& path, const ReferenceSet& s) {
  write_json_atomic(path, to_json(s));
}

}  // namespace tramp
