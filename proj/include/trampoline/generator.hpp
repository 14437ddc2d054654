#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trampoline/catalog.hpp"
#include "trampoline/error.hpp"
#include "trampoline/pose.hpp"
#include "trampoline/rng.hpp"
#include "trampoline/segmentation.hpp"

namespace tramp {

/// Articulation of the stick body at one instant. Angles in degrees.
struct BodyState {
  double somersault = 0;     // rotation in the image plane, clockwise on screen; 0 = upright
  double twist = 0;          // rotation about the longitudinal axis; 0 = side-on, facing image-left
  double hip_flex = 0;       // 0 = legs in line with the torso
  double hip_abduction = 0;  // per-leg sideways spread (straddle)
  double knee_flex = 0;
  double shoulder_elev = 0;  // 0 = arms down by the sides, 180 = overhead
  double elbow_flex = 0;

  static constexpr int kFields = 7;
  double& field(int i) {
    switch (i) {
      case 0: return somersault;
      case 1: return twist;
      case 2: return hip_flex;
      case 3: return hip_abduction;
      case 4: return knee_flex;
      case 5: return shoulder_elev;
      default: return elbow_flex;
    }
  }
  double field(int i) const { return const_cast<BodyState*>(this)->field(i); }
};

struct KeyFrame {
  double phase = 0;  // position within the flight, [0, 1]
  BodyState state;
};

/// Parametric motion of one skill: a parabolic flight between two bed
/// contacts, with the body articulation key-framed over the flight.
struct SkillMotionModel {
  SkillCode code;
  double flight_time = 1.4;   // seconds in the air
  double contact_time = 0.3;  // seconds on the bed per contact
  double apex_fraction = 1.0;  // flight height relative to a full routine jump
  Position takeoff = Position::Feet;
  Position landing = Position::Feet;
  std::vector<KeyFrame> program;  // phases ascending, first 0 and last 1

  void validate() const {
    if (!(flight_time > 0) || !(contact_time > 0)) throw InputError("skill model durations must be positive");
    if (!(apex_fraction > 0)) throw InputError("skill model apex must be positive");
    if (program.size() < 2 || program.front().phase != 0.0 || program.back().phase != 1.0)
      throw InputError("skill program must start at phase 0 and end at phase 1");
    for (std::size_t i = 1; i < program.size(); ++i)
      if (!(program[i].phase > program[i - 1].phase)) throw InputError("skill program phases must increase");
  }
};

struct NoiseSpec {
  double keypoint_sigma = 0.0;  // pixels, per joint coordinate per frame
  double angle_sigma = 0.0;     // degrees, per key-frame target per example
  double timing_sigma = 0.0;    // frames, on the flight duration
  std::uint64_t seed = 0;
};

/// Camera-side layout shared by generated skills and routines.
struct SceneGeometry {
  int width = 896;
  int height = 504;
  int line_row = 440;          // trampoline bed top
  double body_height = 110.0;  // pixels, head top to ankle when standing
  double centre_x = 448.0;
  double flight_height = 250.0;  // pelvis rise above standing for a full jump
  double bed_depression = 25.0;  // pelvis drop at mid-contact
};

/// Segment lengths as fractions of standing height (Winter's anthropometric
/// table).
struct BodyProportions {
  double torso = 0.288;  // pelvis to thorax
  double neck = 0.070;
  double head = 0.110;
  double shoulder_width = 0.259;
  double hip_width = 0.191;
  double thigh = 0.245;
  double shank = 0.246;
  double upper_arm = 0.186;
  double forearm = 0.146;
  double ankle_height = 0.039;
};

namespace gen {

inline constexpr double kDeg = std::numbers::pi / 180.0;

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
};

inline BodyState position_state(Position p) {
  BodyState s;
  switch (p) {
    case Position::Feet: break;
    case Position::Seat:
      s.somersault = 10;
      s.hip_flex = 90;
      s.shoulder_elev = 30;
      break;
    case Position::Back:
      s.somersault = 90;
      s.hip_flex = 50;
      s.shoulder_elev = 20;
      break;
    case Position::Front:
      s.somersault = -90;
      s.hip_flex = 10;
      s.shoulder_elev = 150;
      s.elbow_flex = 90;
      break;
  }
  return s;
}

/// Pelvis height above the bed line when resting in a position, in body heights.
inline double rest_pelvis_height(Position p, const BodyProportions& b) {
  switch (p) {
    case Position::Feet: return b.ankle_height + b.thigh + b.shank;
    case Position::Seat: return 0.06;
    case Position::Back:
    case Position::Front: return 0.10;
  }
  return 0.0;
}

inline double smoothstep(double w) { return w * w * (3.0 - 2.0 * w); }

inline BodyState sample_program(const std::vector<KeyFrame>& prog, double phase) {
  if (phase <= prog.front().phase) return prog.front().state;
  if (phase >= prog.back().phase) return prog.back().state;
  std::size_t k = 1;
  while (prog[k].phase < phase) ++k;
  const KeyFrame& a = prog[k - 1];
  const KeyFrame& b = prog[k];
  const double w = smoothstep((phase - a.phase) / (b.phase - a.phase));
  BodyState s;
  for (int i = 0; i < BodyState::kFields; ++i) s.field(i) = a.state.field(i) + w * (b.state.field(i) - a.state.field(i));
  return s;
}

}  // namespace gen

/// 16 MPII joints of the stick body with its pelvis at `pelvis` (image
/// pixels), orthographically projected onto the image plane.
inline Pose2D pose_from_state(const BodyState& s, Vec2 pelvis, double height, const BodyProportions& b = {}) {
  using gen::Vec3;
  using gen::kDeg;
  const double th = s.somersault * kDeg, tw = s.twist * kDeg;
  // Image-aligned axes, y down, z away from the camera.
  const Vec3 up{std::sin(th), -std::cos(th), 0};
  const Vec3 fwd0{-std::cos(th), -std::sin(th), 0};
  const Vec3 right0{0, 0, 1};
  const Vec3 fwd = std::cos(tw) * fwd0 + std::sin(tw) * right0;
  const Vec3 right = std::cos(tw) * right0 - std::sin(tw) * fwd0;
  const Vec3 down = -1.0 * up;

  auto sag = [&](double angle_from_down) {
    return std::cos(angle_from_down * kDeg) * down + std::sin(angle_from_down * kDeg) * fwd;
  };
  const Vec3 P{pelvis.x, pelvis.y, 0};
  const Vec3 thorax = P + (b.torso * height) * up;
  const Vec3 neck = thorax + (b.neck * height) * up;
  const Vec3 head = neck + (b.head * height) * up;

  Pose2D pose;
  auto put = [&](Joint j, Vec3 v) { pose[j] = Keypoint{v.x, v.y, 1.0}; };
  put(Joint::Pelvis, P);
  put(Joint::Thorax, thorax);
  put(Joint::UpperNeck, neck);
  put(Joint::HeadTop, head);

  const double ab = s.hip_abduction * kDeg;
  for (int side : {+1, -1}) {
    const bool r = side > 0;
    const Vec3 lateral = static_cast<double>(side) * right;
    const Vec3 hip = P + (0.5 * b.hip_width * height * side) * right;
    const Vec3 thigh = std::cos(ab) * sag(s.hip_flex) + std::sin(ab) * lateral;
    const Vec3 shin = std::cos(ab) * sag(s.hip_flex - s.knee_flex) + std::sin(ab) * lateral;
    const Vec3 knee = hip + (b.thigh * height) * thigh;
    const Vec3 ankle = knee + (b.shank * height) * shin;
    put(r ? Joint::RHip : Joint::LHip, hip);
    put(r ? Joint::RKnee : Joint::LKnee, knee);
    put(r ? Joint::RAnkle : Joint::LAnkle, ankle);

    const Vec3 shoulder = thorax + (0.5 * b.shoulder_width * height * side) * right;
    const Vec3 elbow = shoulder + (b.upper_arm * height) * sag(s.shoulder_elev);
    const Vec3 wrist = elbow + (b.forearm * height) * sag(s.shoulder_elev + s.elbow_flex);
    put(r ? Joint::RShoulder : Joint::LShoulder, shoulder);
    put(r ? Joint::RElbow : Joint::LElbow, elbow);
    put(r ? Joint::RWrist : Joint::LWrist, wrist);
  }
  return pose;
}

inline Vec2 pose_centroid(const Pose2D& p) {
  Vec2 c{};
  for (const auto& k : p.joints) c = c + k.pos();
  return (1.0 / kJointCount) * c;
}

namespace gen {

inline KeyFrame kf(double phase, BodyState s) { return {phase, s}; }

inline BodyState with(BodyState s, double hip, double knee, double shoulder, double elbow = 0, double abduction = 0) {
  s.hip_flex = hip;
  s.knee_flex = knee;
  s.shoulder_elev = shoulder;
  s.elbow_flex = elbow;
  s.hip_abduction = abduction;
  return s;
}

inline BodyState rot(BodyState s, double somersault, double twist = 0) {
  s.somersault = somersault;
  s.twist = twist;
  return s;
}

inline SkillMotionModel make(const char* code, std::vector<KeyFrame> program) {
  SkillMotionModel m;
  m.code = parse_code(code);
  const SkillRecord& rec = lookup_skill(m.code);
  m.takeoff = rec.takeoff;
  m.landing = rec.landing;
  m.program = std::move(program);
  return m;
}

// Shaped straight jumps: stand, hold the shape through mid-flight, stand.
inline SkillMotionModel shaped_jump(const char* code, BodyState shape) {
  const BodyState stand = position_state(Position::Feet);
  return make(code, {kf(0, stand), kf(0.3, shape), kf(0.6, shape), kf(0.92, stand), kf(1, stand)});
}

}  // namespace gen

/// Models for the 20 skills that take part in classification.
inline std::vector<SkillMotionModel> builtin_models() {
  using namespace gen;
  const BodyState F = position_state(Position::Feet);
  const BodyState S = position_state(Position::Seat);
  const BodyState B = position_state(Position::Back);
  const BodyState arms_up = with(F, 0, 0, 160);
  std::vector<SkillMotionModel> m;

  m.push_back(make("F0F", {kf(0, F), kf(1, F)}));
  m.push_back(shaped_jump("FTF", rot(with(F, 120, 135, 60, 30), -5)));
  m.push_back(shaped_jump("FPF", rot(with(F, 130, 0, 95), -15)));
  m.push_back(shaped_jump("FSF", rot(with(F, 112, 0, 85, 0, 40), -10)));

  m.push_back(make("F1F", {kf(0, F), kf(0.15, arms_up), kf(0.85, rot(arms_up, 0, 180)), kf(1, rot(F, 0, 180))}));
  m.push_back(make("F2F", {kf(0, F), kf(0.12, arms_up), kf(0.88, rot(arms_up, 0, 360)), kf(1, rot(F, 0, 360))}));

  m.push_back(make("F0S", {kf(0, F), kf(0.35, with(F, 20, 0, 40)), kf(0.75, S), kf(1, S)}));
  m.push_back(make("F1S", {kf(0, F), kf(0.15, arms_up), kf(0.55, rot(arms_up, 0, 180)), kf(0.85, rot(S, -S.somersault, 180)),
                           kf(1, rot(S, -S.somersault, 180))}));
  m.push_back(make("S1S", {kf(0, S), kf(0.3, rot(arms_up, 0, 0)), kf(0.65, rot(arms_up, 0, 180)),
                           kf(0.85, rot(S, -S.somersault, 180)), kf(1, rot(S, -S.somersault, 180))}));
  m.push_back(make("S0F", {kf(0, S), kf(0.45, with(F, 15, 0, 60)), kf(0.85, F), kf(1, F)}));
  m.push_back(make("S1F", {kf(0, S), kf(0.3, arms_up), kf(0.8, rot(arms_up, 0, 180)), kf(1, rot(F, 0, 180))}));

  m.push_back(make("F0B", {kf(0, F), kf(0.4, rot(with(F, 20, 0, 60), 30)), kf(0.8, B), kf(1, B)}));
  m.push_back(make("B1F", {kf(0, B), kf(0.35, rot(with(F, 30, 0, 90), 45, 30)), kf(0.8, rot(arms_up, 0, 180)),
                           kf(1, rot(F, 0, 180))}));

  // Front somersaults rotate counter-clockwise on screen (negative).
  const BodyState tuck = with(F, 125, 130, 70, 40);
  const BodyState pike = with(F, 135, 0, 100);
  m.push_back(make("BRIt", {kf(0, F), kf(0.25, rot(tuck, -90)), kf(0.55, rot(tuck, -240)),
                            kf(0.85, rot(F, -340, 180)), kf(1, rot(F, -360, 180))}));
  m.push_back(make("BRIp", {kf(0, F), kf(0.25, rot(pike, -90)), kf(0.55, rot(pike, -240)),
                            kf(0.85, rot(F, -340, 180)), kf(1, rot(F, -360, 180))}));
  m.push_back(make("CDI", {kf(0, F), kf(0.2, rot(with(F, 30, 0, 120), -45)), kf(0.55, rot(with(F, 90, 60, 90), -170)),
                           kf(0.85, rot(with(F, 50, 0, 40), -250)), kf(1, rot(B, -270))}));

  // Back somersaults rotate clockwise (positive).
  const BodyState straight = with(F, 0, 0, 10);
  m.push_back(make("BSSt", {kf(0, F), kf(0.25, rot(tuck, 90)), kf(0.6, rot(tuck, 270)), kf(0.88, rot(F, 350)),
                            kf(1, rot(F, 360))}));
  m.push_back(make("BSSp", {kf(0, F), kf(0.25, rot(pike, 90)), kf(0.6, rot(pike, 270)), kf(0.88, rot(F, 350)),
                            kf(1, rot(F, 360))}));
  m.push_back(make("BSSs", {kf(0, F), kf(0.25, rot(straight, 90)), kf(0.6, rot(straight, 270)),
                            kf(0.88, rot(F, 350)), kf(1, rot(F, 360))}));
  m.push_back(make("BSTt", {kf(0, F), kf(0.25, rot(tuck, 90)), kf(0.6, rot(tuck, 270)),
                            kf(0.9, rot(S, 360 + S.somersault)), kf(1, rot(S, 360 + S.somersault))}));
  return m;
}

inline const SkillMotionModel& builtin_model(const SkillCode& code) {
  static const std::vector<SkillMotionModel> models = builtin_models();
  auto it = std::find_if(models.begin(), models.end(), [&](const SkillMotionModel& m) { return m.code == code; });
  if (it == models.end()) throw InputError("no built-in motion model for " + code.str());
  return *it;
}

struct GeneratedSkill {
  PoseSequence poses;
  CentroidTrack track;
  std::vector<bool> contact;
  std::size_t airborne_first = 0;
  std::size_t airborne_last = 0;
  double shoulder_span = 0;  // routine-level normaliser for the twist feature
};

namespace gen {

// One bounce from mid-contact to mid-contact, sampled at `frames`+1 instants.
// Frame indices in the sequence start at `first_index`. `mirror` makes the
// athlete face image-right.
struct BounceSampler {
  const SceneGeometry& scene;
  const BodyProportions& body;

  struct Sample {
    Pose2D pose;
    bool contact;
  };

  std::vector<Sample> run(const SkillMotionModel& m, const std::vector<KeyFrame>& program, std::size_t frames,
                          bool mirror) const {
    const double H = scene.body_height;
    const double line = scene.line_row;
    const double total = m.contact_time + m.flight_time;
    const double half = 0.5 * m.contact_time;
    const double y_take = line - rest_pelvis_height(m.takeoff, body) * H;
    const double y_land = line - rest_pelvis_height(m.landing, body) * H;
    const double rise = scene.flight_height * m.apex_fraction;
    const double depth = scene.bed_depression;

    std::vector<Sample> out;
    out.reserve(frames + 1);
    for (std::size_t k = 0; k <= frames; ++k) {
      const double t = total * static_cast<double>(k) / static_cast<double>(frames);
      double y;
      BodyState s;
      bool contact;
      if (t < half) {
        const double w = t / half;  // 0 at mid-contact, 1 at take-off
        y = y_take + depth * std::cos(0.5 * std::numbers::pi * w);
        s = program.front().state;
        contact = true;
      } else if (t > half + m.flight_time) {
        const double w = (t - half - m.flight_time) / half;  // 0 at landing, 1 at mid-contact
        y = y_land + depth * std::sin(0.5 * std::numbers::pi * w);
        s = program.back().state;
        contact = true;
      } else {
        const double u = (t - half) / m.flight_time;
        y = y_take + (y_land - y_take) * u - rise * 4.0 * u * (1.0 - u);
        s = sample_program(program, u);
        contact = false;
      }
      if (mirror) {
        s.somersault = -s.somersault;
        s.twist += 180.0;
      }
      out.push_back({pose_from_state(s, {scene.centre_x, y}, H, body), contact});
    }
    return out;
  }
};

inline std::vector<KeyFrame> jitter_program(const std::vector<KeyFrame>& prog, double sigma, SplitMix64& rng) {
  std::vector<KeyFrame> out = prog;
  for (auto& k : out) {
    for (int i = 0; i < BodyState::kFields; ++i) k.state.field(i) += rng.normal(sigma);
    k.state.hip_abduction = std::max(0.0, k.state.hip_abduction);
    k.state.knee_flex = std::max(0.0, k.state.knee_flex);
    k.state.elbow_flex = std::max(0.0, k.state.elbow_flex);
  }
  return out;
}

inline void add_keypoint_noise(Pose2D& p, double sigma, SplitMix64& rng) {
  for (auto& k : p.joints) {
    k.x += rng.normal(sigma);
    k.y += rng.normal(sigma);
  }
}

inline double jittered_flight(const SkillMotionModel& m, double fps, const NoiseSpec& noise, SplitMix64& rng) {
  const double dt = rng.normal(noise.timing_sigma) / fps;
  return std::max(0.25 * m.flight_time, m.flight_time + dt);
}

}  // namespace gen

/// Shoulder width in pixels, i.e. the projected separation when the chest or
/// back faces the camera.
inline double scene_shoulder_span(const SceneGeometry& scene, const BodyProportions& body = {}) {
  return body.shoulder_width * scene.body_height;
}

/// One skill from mid-contact to mid-contact. Frame indices start at 0.
inline GeneratedSkill generate_skill(const SkillMotionModel& model, double fps, const NoiseSpec& noise,
                                     const SceneGeometry& scene = {}, const BodyProportions& body = {}) {
  if (!(fps > 0)) throw InputError("fps must be positive");
  model.validate();
  SplitMix64 rng(noise.seed);
  SkillMotionModel m = model;
  m.flight_time = gen::jittered_flight(model, fps, noise, rng);
  const std::vector<KeyFrame> program = gen::jitter_program(model.program, noise.angle_sigma, rng);
  const auto frames = static_cast<std::size_t>(std::max(2.0, std::round((m.contact_time + m.flight_time) * fps)));

  const auto samples = gen::BounceSampler{scene, body}.run(m, program, frames, false);
  GeneratedSkill g;
  g.poses.fps = fps;
  g.track.fps = fps;
  g.track.reference_row = scene.line_row;
  bool seen_air = false;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    Pose2D p = samples[k].pose;
    gen::add_keypoint_noise(p, noise.keypoint_sigma, rng);
    g.poses.frames.push_back({static_cast<int>(k), p, std::nullopt});
    g.track.samples.push_back(pose_centroid(p));
    g.contact.push_back(samples[k].contact);
    if (!samples[k].contact) {
      if (!seen_air) g.airborne_first = k;
      seen_air = true;
      g.airborne_last = k;
    }
  }
  if (!seen_air) throw InputError("skill model has no airborne frame at this frame rate");
  g.shoulder_span = scene_shoulder_span(scene, body);
  return g;
}

struct RoutineOptions {
  int in_bounces = 3;
  int out_bounces = 1;
  double bounce_apex_fraction = 0.3;  // height of in/out-bounces relative to a full jump
  double lead_seconds = 0.0;          // standing still before and after; 0 starts and ends mid-contact
};

struct GeneratedRoutine {
  PoseSequence poses;
  CentroidTrack track;
  std::vector<bool> contact;
  std::vector<BounceSegment> truth;  // ground-truth segments and in/out flags
  std::vector<std::pair<std::size_t, std::size_t>> airborne;
  std::vector<SkillCode> codes;  // one per segment
  double shoulder_span = 0;
  SceneGeometry scene;
};

/// A full routine: standing lead-in, in-bounces, the given skills, out-bounces
/// and a standing lead-out, all on one trampoline line.
inline GeneratedRoutine generate_routine(const std::vector<SkillCode>& codes, double fps, const NoiseSpec& noise,
                                         const RoutineOptions& opt = {}, const SceneGeometry& scene = {},
                                         const BodyProportions& body = {}) {
  if (codes.empty()) throw InputError("a routine needs at least one skill");
  if (!(fps > 0)) throw InputError("fps must be positive");
  SplitMix64 rng(noise.seed);

  std::vector<SkillMotionModel> plan;
  std::vector<bool> routine_flag;
  SkillMotionModel bounce = builtin_model(parse_code("F0F"));
  bounce.apex_fraction = opt.bounce_apex_fraction;
  bounce.flight_time *= std::sqrt(opt.bounce_apex_fraction);
  for (int i = 0; i < opt.in_bounces; ++i) {
    plan.push_back(bounce);
    routine_flag.push_back(false);
  }
  for (const auto& c : codes) {
    plan.push_back(builtin_model(c));
    routine_flag.push_back(true);
  }
  for (int i = 0; i < opt.out_bounces; ++i) {
    plan.push_back(bounce);
    routine_flag.push_back(false);
  }
  for (std::size_t i = 1; i < plan.size(); ++i)
    if (plan[i].takeoff != plan[i - 1].landing)
      throw InputError("skill " + plan[i].code.str() + " cannot follow " + plan[i - 1].code.str());

  GeneratedRoutine r;
  r.scene = scene;
  r.poses.fps = fps;
  r.track.fps = fps;
  r.track.reference_row = scene.line_row;
  r.shoulder_span = scene_shoulder_span(scene, body);
  const gen::BounceSampler sampler{scene, body};
  const double H = scene.body_height;

  auto emit = [&](const Pose2D& clean, bool contact) {
    Pose2D p = clean;
    gen::add_keypoint_noise(p, noise.keypoint_sigma, rng);
    const int idx = static_cast<int>(r.poses.frames.size());
    r.poses.frames.push_back({idx, p, std::nullopt});
    r.track.samples.push_back(pose_centroid(p));
    r.contact.push_back(contact);
  };

  // Lead-in: standing, then sinking into the first contact.
  const auto lead = static_cast<std::size_t>(std::round(opt.lead_seconds * fps));
  const double y_stand = scene.line_row - gen::rest_pelvis_height(Position::Feet, body) * H;
  const BodyState stand = gen::position_state(Position::Feet);
  for (std::size_t k = 0; k < lead; ++k) emit(pose_from_state(stand, {scene.centre_x, y_stand}, H, body), false);
  const std::size_t half_contact =
      lead == 0 ? 0 : static_cast<std::size_t>(std::max(1.0, std::round(0.5 * plan.front().contact_time * fps)));
  for (std::size_t k = 0; k < half_contact; ++k) {
    const double w = static_cast<double>(k) / static_cast<double>(half_contact);
    emit(pose_from_state(stand, {scene.centre_x, y_stand + scene.bed_depression * std::sin(0.5 * std::numbers::pi * w)}, H, body),
         true);
  }

  bool mirror = false;
  for (std::size_t s = 0; s < plan.size(); ++s) {
    SkillMotionModel m = plan[s];
    m.flight_time = gen::jittered_flight(plan[s], fps, noise, rng);
    const std::vector<KeyFrame> program = gen::jitter_program(m.program, noise.angle_sigma, rng);
    const auto frames = static_cast<std::size_t>(std::max(2.0, std::round((m.contact_time + m.flight_time) * fps)));
    const auto samples = sampler.run(m, program, frames, mirror);

    BounceSegment seg;
    seg.start_frame = r.poses.frames.size();
    seg.end_frame = seg.start_frame + frames;
    seg.is_routine_jump = routine_flag[s];
    std::size_t air_first = 0, air_last = 0;
    bool seen = false;
    // The shared boundary sample belongs to the previous segment's end,
    // except for the very first segment.
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (k == samples.size() - 1 && s + 1 < plan.size()) break;
      emit(samples[k].pose, samples[k].contact);
      if (!samples[k].contact) {
        if (!seen) air_first = seg.start_frame + k;
        seen = true;
        air_last = seg.start_frame + k;
      }
    }
    // Apex: highest clean pelvis point, reported against the line.
    std::size_t apex = seg.start_frame + 1;
    double best = 1e300;
    for (std::size_t k = 1; k < samples.size(); ++k) {
      const double y = pose_centroid(samples[k].pose).y;
      if (y < best) {
        best = y;
        apex = seg.start_frame + k;
      }
    }
    seg.apex_frame = apex;
    seg.apex_height = std::max(0.0, scene.line_row - best);
    r.truth.push_back(seg);
    r.airborne.emplace_back(air_first, air_last);
    r.codes.push_back(m.code);
    // An odd number of half twists leaves the athlete facing the other way.
    const int halves = static_cast<int>(std::lround(program.back().state.twist / 180.0));
    if (halves % 2 != 0) mirror = !mirror;
  }

  // Lead-out: rising out of the last contact, then standing.
  const BodyState last = gen::position_state(plan.back().landing);
  const double y_last = scene.line_row - gen::rest_pelvis_height(plan.back().landing, body) * H;
  BodyState end_state = last;
  if (mirror) {
    end_state.somersault = -end_state.somersault;
    end_state.twist += 180.0;
  }
  for (std::size_t k = 1; k <= half_contact; ++k) {
    const double w = static_cast<double>(k) / static_cast<double>(half_contact);
    emit(pose_from_state(end_state, {scene.centre_x, y_last + scene.bed_depression * std::cos(0.5 * std::numbers::pi * w)}, H,
                         body),
         k < half_contact);
  }
  for (std::size_t k = 0; k < lead; ++k) emit(pose_from_state(end_state, {scene.centre_x, y_last}, H, body), false);
  return r;
}

inline nlohmann::json to_json(const BodyState& s) {
  return {{"somersault", s.somersault}, {"twist", s.twist},         {"hip_flex", s.hip_flex},
          {"hip_abduction", s.hip_abduction}, {"knee_flex", s.knee_flex}, {"shoulder_elev", s.shoulder_elev},
          {"elbow_flex", s.elbow_flex}};
}

inline nlohmann::json to_json(const SkillMotionModel& m) {
  nlohmann::json prog = nlohmann::json::array();
  for (const auto& k : m.program) prog.push_back({{"phase", k.phase}, {"state", to_json(k.state)}});
  return {{"code", m.code.str()},
          {"flight_time", m.flight_time},
          {"contact_time", m.contact_time},
          {"apex_fraction", m.apex_fraction},
          {"takeoff", to_string(m.takeoff)},
          {"landing", to_string(m.landing)},
          {"program", std::move(prog)}};
}

inline SkillMotionModel motion_model_from_json(const nlohmann::json& j) {
  auto position = [](const std::string& s) {
    if (s == "feet") return Position::Feet;
    if (s == "seat") return Position::Seat;
    if (s == "front") return Position::Front;
    if (s == "back") return Position::Back;
    throw InputError("unknown position " + s);
  };
  try {
    SkillMotionModel m;
    m.code = parse_code(j.at("code").get<std::string>());
    m.flight_time = j.value("flight_time", m.flight_time);
    m.contact_time = j.value("contact_time", m.contact_time);
    m.apex_fraction = j.value("apex_fraction", m.apex_fraction);
    m.takeoff = position(j.value("takeoff", std::string("feet")));
    m.landing = position(j.value("landing", std::string("feet")));
    for (const auto& k : j.at("program")) {
      KeyFrame f;
      f.phase = k.at("phase").get<double>();
      const auto& s = k.at("state");
      f.state.somersault = s.value("somersault", 0.0);
      f.state.twist = s.value("twist", 0.0);
      f.state.hip_flex = s.value("hip_flex", 0.0);
      f.state.hip_abduction = s.value("hip_abduction", 0.0);
      f.state.knee_flex = s.value("knee_flex", 0.0);
      f.state.shoulder_elev = s.value("shoulder_elev", 0.0);
      f.state.elbow_flex = s.value("elbow_flex", 0.0);
      m.program.push_back(f);
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed skill model: ") + e.what());
  }
}

}  // namespace tramp
