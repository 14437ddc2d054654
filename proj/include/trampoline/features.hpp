#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trampoline/error.hpp"
#include "trampoline/pose.hpp"
#include "trampoline/raster.hpp"

namespace tramp {

/// Column order of a feature trajectory.
enum class Feature : int {
  RightElbow = 0,
  LeftElbow,
  RightShoulder,
  LeftShoulder,
  RightHip,
  LeftHip,
  RightKnee,
  LeftKnee,
  RightLeg,
  LeftLeg,
  Torso,
  Twist,
};

inline constexpr int kFeatureCount = 12;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames{
    "r_elbow", "l_elbow", "r_shoulder", "l_shoulder", "r_hip", "l_hip",
    "r_knee",  "l_knee",  "r_leg",      "l_leg",      "torso", "twist"};

using FeatureVector = std::array<double, kFeatureCount>;

enum class Side { Right, Left };

class DegenerateGeometryError : public InputError {
public:
  using InputError::InputError;
};

inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

/// Interior angle at `b` between rays b->a and b->c, in [0, 180] degrees.
inline double joint_angle(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 u = a - b, v = c - b;
  if (norm(u) < 1e-6 || norm(v) < 1e-6) throw DegenerateGeometryError("coincident points in joint angle");
  return std::atan2(std::abs(cross(u, v)), dot(u, v)) * kRadToDeg;
}

namespace detail {
// (-180, 180]
inline double half_open(double deg) { return deg <= -180.0 ? deg + 360.0 : deg; }
}  // namespace detail

/// Signed angle of pelvis->thorax from image-up; clockwise on screen
/// (towards +x from up) is positive.
inline double torso_angle(const Pose2D& pose) {
  const Vec2 d = pose[Joint::Thorax].pos() - pose[Joint::Pelvis].pos();
  if (norm(d) < 1e-6) throw DegenerateGeometryError("pelvis and thorax coincide");
  return detail::half_open(std::atan2(d.x, -d.y) * kRadToDeg);
}

/// Signed angle of hip->ankle from image-down, same rotation sense as
/// torso_angle, so a rigid rotation of the body moves both by the same amount.
inline double leg_angle(const Pose2D& pose, Side side) {
  const Joint hip = side == Side::Right ? Joint::RHip : Joint::LHip;
  const Joint ankle = side == Side::Right ? Joint::RAnkle : Joint::LAnkle;
  const Vec2 d = pose[ankle].pos() - pose[hip].pos();
  if (norm(d) < 1e-6) throw DegenerateGeometryError("hip and ankle coincide");
  return detail::half_open(std::atan2(-d.x, d.y) * kRadToDeg);
}

/// Removes +/-360 jumps so consecutive differences are at most 180 in size.
inline std::vector<double> unwrap(std::span<const double> series) {
  if (series.empty()) throw InputError("unwrap needs at least one sample");
  std::vector<double> out(series.size());
  out[0] = series[0];
  double turns = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    double d = series[i] + 360.0 * turns - out[i - 1];
    while (d > 180.0) {
      turns -= 1.0;
      d -= 360.0;
    }
    while (d < -180.0) {
      turns += 1.0;
      d += 360.0;
    }
    out[i] = series[i] + 360.0 * turns;
  }
  return out;
}

inline double shoulder_separation(const Pose2D& pose) {
  return norm(pose[Joint::RShoulder].pos() - pose[Joint::LShoulder].pos());
}

/// Largest shoulder separation over a (routine-wide) sequence, counting only
/// frames where both shoulders clear the confidence floor.
inline double routine_shoulder_span(const PoseSequence& seq, double confidence_floor = kDefaultConfidenceFloor) {
  double best = 0.0;
  for (const auto& f : seq.frames) {
    const auto& p = f.pose;
    if (p[Joint::RShoulder].confidence < confidence_floor || p[Joint::LShoulder].confidence < confidence_floor) continue;
    best = std::max(best, shoulder_separation(p));
  }
  return best;
}

/// Twist from projected shoulder separation normalised by `sep_max`:
/// arccos gives [0, 90]; when the right shoulder is image-left of the left
/// one the athlete faces the other way and the value is mirrored to
/// [90, 180].
inline double twist_angle(const Pose2D& pose, double sep_max) {
  if (!(sep_max > 0.0)) throw PipelineError("shoulder separation never resolved (sep_max is zero)");
  const double ratio = std::clamp(shoulder_separation(pose) / sep_max, 0.0, 1.0);
  const double phi = std::acos(ratio) * kRadToDeg;
  return pose[Joint::RShoulder].x < pose[Joint::LShoulder].x ? 180.0 - phi : phi;
}

/// Twist for every frame. Without an explicit normaliser the maximum
/// separation over `seq` is used, so pass the whole routine.
inline std::vector<double> twist_trajectory(const PoseSequence& seq, std::optional<double> sep_max = std::nullopt) {
  const double span = sep_max.value_or(routine_shoulder_span(seq, 0.0));
  if (!(span > 0.0)) throw PipelineError("shoulder separation never resolved (sep_max is zero)");
  std::vector<double> out;
  out.reserve(seq.size());
  for (const auto& f : seq.frames) out.push_back(twist_angle(f.pose, span));
  return out;
}

/// T x 12 matrix of feature angles in degrees.
struct FeatureTrajectory {
  std::string skill_ref;
  double fps = 30.0;
  std::vector<FeatureVector> rows;
  std::string label;  // skill code when known, otherwise empty

  std::size_t length() const { return rows.size(); }
  double at(std::size_t t, int i) const { return rows[t][i]; }
  std::vector<double> column(int i) const {
    std::vector<double> c(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) c[t] = rows[t][i];
    return c;
  }
  friend bool operator==(const FeatureTrajectory&, const FeatureTrajectory&) = default;
};

inline nlohmann::json to_json(const FeatureTrajectory& f) {
  nlohmann::json angles = nlohmann::json::array();
  for (const auto& r : f.rows) angles.push_back(r);
  nlohmann::json j{{"skill_ref", f.skill_ref}, {"fps", f.fps}, {"angles", std::move(angles)}};
  if (!f.label.empty()) j["label"] = f.label;
  return j;
}

inline FeatureTrajectory trajectory_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("angles") || !j["angles"].is_array())
    throw InputError("feature trajectory needs an 'angles' array");
  FeatureTrajectory f;
  f.skill_ref = j.value("skill_ref", std::string{});
  f.fps = j.value("fps", 30.0);
  f.label = j.value("label", std::string{});
  for (const auto& row : j["angles"]) {
    if (!row.is_array() || row.size() != kFeatureCount)
      throw InputError("each trajectory row must hold 12 angles");
    FeatureVector v{};
    for (int i = 0; i < kFeatureCount; ++i) {
      if (!row[i].is_number()) throw InputError("trajectory angles must be numbers");
      v[i] = row[i].get<double>();
      if (!std::isfinite(v[i])) throw InputError("trajectory angles must be finite");
    }
    f.rows.push_back(v);
  }
  if (f.rows.size() < 2) throw InputError("feature trajectory needs at least 2 rows");
  return f;
}

namespace detail {

// Linear interpolation over NaN gaps; ends copy the nearest value. Returns
// false when every entry is NaN.
inline bool fill_gaps(std::vector<double>& v) {
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isnan(v[i])) ok.push_back(i);
  if (ok.empty()) return false;
  for (std::size_t i = 0; i < ok.front(); ++i) v[i] = v[ok.front()];
  for (std::size_t i = ok.back() + 1; i < v.size(); ++i) v[i] = v[ok.back()];
  for (std::size_t k = 0; k + 1 < ok.size(); ++k) {
    const std::size_t a = ok[k], b = ok[k + 1];
    for (std::size_t i = a + 1; i < b; ++i)
      v[i] = v[a] + (v[b] - v[a]) * static_cast<double>(i - a) / static_cast<double>(b - a);
  }
  return true;
}

template <class F>
double angle_or_nan(const Pose2D& p, double floor, std::initializer_list<Joint> needed, F&& f) {
  for (Joint j : needed)
    if (p[j].confidence < floor) return std::numeric_limits<double>::quiet_NaN();
  try {
    return f();
  } catch (const DegenerateGeometryError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace detail

/// All 12 angles for each frame of one skill segment. Frames where an
/// angle's joints are missing (below the confidence floor) or degenerate are
/// filled by linear interpolation in angle space. Torso and leg angles are
/// unwrapped across the segment.
inline FeatureTrajectory extract_features(const PoseSequence& seq, double routine_sep_max,
                                          double confidence_floor = kDefaultConfidenceFloor) {
  const std::size_t T = seq.size();
  if (T < 2) throw InputError("segment too short for feature extraction (need T >= 2)");
  if (!(routine_sep_max > 0.0)) throw PipelineError("shoulder separation never resolved (sep_max is zero)");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<std::vector<double>, kFeatureCount> cols;
  for (auto& c : cols) c.assign(T, nan);

  using J = Joint;
  for (std::size_t t = 0; t < T; ++t) {
    const Pose2D& p = seq.frames[t].pose;
    auto pos = [&](J j) { return p[j].pos(); };
    auto put = [&](Feature f, std::initializer_list<Joint> needed, auto&& fn) {
      cols[static_cast<int>(f)][t] = detail::angle_or_nan(p, confidence_floor, needed, fn);
    };
    put(Feature::RightElbow, {J::RShoulder, J::RElbow, J::RWrist},
        [&] { return joint_angle(pos(J::RShoulder), pos(J::RElbow), pos(J::RWrist)); });
    put(Feature::LeftElbow, {J::LShoulder, J::LElbow, J::LWrist},
        [&] { return joint_angle(pos(J::LShoulder), pos(J::LElbow), pos(J::LWrist)); });
    put(Feature::RightShoulder, {J::RElbow, J::RShoulder, J::RHip},
        [&] { return joint_angle(pos(J::RElbow), pos(J::RShoulder), pos(J::RHip)); });
    put(Feature::LeftShoulder, {J::LElbow, J::LShoulder, J::LHip},
        [&] { return joint_angle(pos(J::LElbow), pos(J::LShoulder), pos(J::LHip)); });
    put(Feature::RightHip, {J::RShoulder, J::RHip, J::RKnee},
        [&] { return joint_angle(pos(J::RShoulder), pos(J::RHip), pos(J::RKnee)); });
    put(Feature::LeftHip, {J::LShoulder, J::LHip, J::LKnee},
        [&] { return joint_angle(pos(J::LShoulder), pos(J::LHip), pos(J::LKnee)); });
    put(Feature::RightKnee, {J::RHip, J::RKnee, J::RAnkle},
        [&] { return joint_angle(pos(J::RHip), pos(J::RKnee), pos(J::RAnkle)); });
    put(Feature::LeftKnee, {J::LHip, J::LKnee, J::LAnkle},
        [&] { return joint_angle(pos(J::LHip), pos(J::LKnee), pos(J::LAnkle)); });
    put(Feature::RightLeg, {J::RHip, J::RAnkle}, [&] { return leg_angle(p, Side::Right); });
    put(Feature::LeftLeg, {J::LHip, J::LAnkle}, [&] { return leg_angle(p, Side::Left); });
    put(Feature::Torso, {J::Pelvis, J::Thorax}, [&] { return torso_angle(p); });
    put(Feature::Twist, {J::RShoulder, J::LShoulder}, [&] { return twist_angle(p, routine_sep_max); });
  }

  for (Feature f : {Feature::RightLeg, Feature::LeftLeg, Feature::Torso}) {
    auto& c = cols[static_cast<int>(f)];
    std::vector<double> present;
    for (double v : c)
      if (!std::isnan(v)) present.push_back(v);
    if (present.empty()) continue;
    const std::vector<double> un = unwrap(present);
    std::size_t k = 0;
    for (double& v : c)
      if (!std::isnan(v)) v = un[k++];
  }

  for (int i = 0; i < kFeatureCount; ++i) {
    if (!detail::fill_gaps(cols[i]))
      throw PipelineError(std::string("joints for feature '") + kFeatureNames[i] + "' are missing in every frame");
  }

  FeatureTrajectory out;
  out.fps = seq.fps;
  out.rows.resize(T);
  for (std::size_t t = 0; t < T; ++t)
    for (int i = 0; i < kFeatureCount; ++i) out.rows[t][i] = cols[i][t];
  return out;
}

}  // namespace tramp
