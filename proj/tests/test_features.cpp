#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_util.hpp"
#include "trampoline/features.hpp"
#include "trampoline/generator.hpp"

using namespace tramp;

namespace {

constexpr double kTol = 1e-6;

PoseSequence transformed(const PoseSequence& s, double scale, Vec2 shift) {
  PoseSequence out = s;
  for (auto& f : out.frames)
    for (auto& k : f.pose.joints) {
      k.x = scale * k.x + shift.x;
      k.y = scale * k.y + shift.y;
    }
  return out;
}

// Reflect about a vertical axis and swap the left/right joint labels.
PoseSequence mirrored(const PoseSequence& s) {
  PoseSequence out = s;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int j = 0; j < kJointCount; ++j) {
      Keypoint k = s.frames[i].pose.joints[kMirrorJoint[j]];
      k.x = -k.x;
      out.frames[i].pose.joints[j] = k;
    }
  return out;
}

Pose2D pose_with(std::initializer_list<std::pair<Joint, Vec2>> pts) {
  Pose2D p;
  for (int j = 0; j < kJointCount; ++j) p.joints[j] = {double(j), double(3 * j), 1.0};
  for (auto [j, v] : pts) p[j] = {v.x, v.y, 1.0};
  return p;
}

}  // namespace

TEST(JointAngle, Examples) {
  EXPECT_NEAR(joint_angle({0, 0}, {1, 0}, {2, 0}), 180.0, kTol);
  EXPECT_NEAR(joint_angle({0, 0}, {1, 0}, {1, 1}), 90.0, kTol);
  EXPECT_NEAR(joint_angle({2, 0}, {1, 0}, {3, 0}), 0.0, kTol);
  EXPECT_NEAR(joint_angle({1, 1}, {0, 0}, {1, 0}), 45.0, kTol);
  EXPECT_THROW(joint_angle({1, 1}, {1, 1}, {2, 0}), DegenerateGeometryError);
}

TEST(JointAngle, MatchesArccosOracle) {
  std::mt19937 rng(71);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    const Vec2 p = a - b, q = c - b;
    const double want = std::acos(std::clamp(dot(p, q) / (norm(p) * norm(q)), -1.0, 1.0)) * 180.0 / std::numbers::pi;
    EXPECT_NEAR(joint_angle(a, b, c), want, 1e-6);
    EXPECT_NEAR(joint_angle(a, b, c), joint_angle(c, b, a), 1e-12);
  }
}

TEST(TorsoAngle, Examples) {
  EXPECT_NEAR(torso_angle(pose_with({{Joint::Pelvis, {50, 50}}, {Joint::Thorax, {50, 20}}})), 0.0, kTol);
  EXPECT_NEAR(torso_angle(pose_with({{Joint::Pelvis, {50, 50}}, {Joint::Thorax, {80, 50}}})), 90.0, kTol);
  EXPECT_NEAR(torso_angle(pose_with({{Joint::Pelvis, {50, 50}}, {Joint::Thorax, {20, 50}}})), -90.0, kTol);
  EXPECT_NEAR(torso_angle(pose_with({{Joint::Pelvis, {50, 50}}, {Joint::Thorax, {50, 90}}})), 180.0, kTol);
}

TEST(LegAngle, Examples) {
  EXPECT_NEAR(leg_angle(pose_with({{Joint::RHip, {50, 50}}, {Joint::RAnkle, {50, 100}}}), Side::Right), 0.0, kTol);
  EXPECT_NEAR(leg_angle(pose_with({{Joint::LHip, {50, 50}}, {Joint::LAnkle, {90, 50}}}), Side::Left), -90.0, kTol);
  EXPECT_NEAR(leg_angle(pose_with({{Joint::LHip, {50, 50}}, {Joint::LAnkle, {10, 50}}}), Side::Left), 90.0, kTol);
}

TEST(Angles, RigidRotationMovesTorsoAndLegsEqually) {
  std::mt19937 rng(73);
  std::uniform_real_distribution<double> ang(-170, 170);
  for (int i = 0; i < 100; ++i) {
    const Pose2D p = testutil::random_pose(rng, 100, 300);
    const double a = ang(rng) * std::numbers::pi / 180;
    Pose2D q = p;
    for (auto& k : q.joints) {
      const double x = k.x - 200, y = k.y - 200;
      // clockwise on screen (image y down)
      k.x = 200 + x * std::cos(a) - y * std::sin(a);
      k.y = 200 + x * std::sin(a) + y * std::cos(a);
    }
    auto diff = [](double u, double v) { return std::remainder(u - v, 360.0); };
    const double d = a * 180 / std::numbers::pi;
    EXPECT_NEAR(diff(torso_angle(q), torso_angle(p)), d, 1e-6);
    EXPECT_NEAR(diff(leg_angle(q, Side::Right), leg_angle(p, Side::Right)), d, 1e-6);
  }
}

TEST(Unwrap, Examples) {
  const std::vector<double> a{170, -170};
  EXPECT_EQ(unwrap(a), (std::vector<double>{170, 190}));
  const std::vector<double> b{-170, 170, -170};
  EXPECT_EQ(unwrap(b), (std::vector<double>{-170, -190, -170}));
  const std::vector<double> c{0, 90, 180, -90, 0};
  EXPECT_EQ(unwrap(c), (std::vector<double>{0, 90, 180, 270, 360}));
  EXPECT_THROW(unwrap(std::vector<double>{}), InputError);
}

TEST(Unwrap, DiffersByWholeTurnsWithSmallSteps) {
  std::mt19937 rng(79);
  std::uniform_real_distribution<double> u(-179.9, 180);
  std::vector<double> v(200);
  for (auto& x : v) x = u(rng);
  const auto w = unwrap(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(std::remainder(w[i] - v[i], 360.0), 0.0, 1e-9);
    if (i > 0) { EXPECT_LE(std::abs(w[i] - w[i - 1]), 180.0); }
  }
}

TEST(Twist, Examples) {
  const double span = 40;
  EXPECT_NEAR(twist_angle(pose_with({{Joint::RShoulder, {120, 50}}, {Joint::LShoulder, {80, 50}}}), span), 0.0, kTol);
  EXPECT_NEAR(twist_angle(pose_with({{Joint::RShoulder, {100, 50}}, {Joint::LShoulder, {100, 50}}}), span), 90.0, kTol);
  EXPECT_NEAR(twist_angle(pose_with({{Joint::RShoulder, {80, 50}}, {Joint::LShoulder, {120, 50}}}), span), 180.0, kTol);
  EXPECT_NEAR(twist_angle(pose_with({{Joint::RShoulder, {110, 50}}, {Joint::LShoulder, {90, 50}}}), span), 60.0, kTol);
  EXPECT_THROW(twist_angle(Pose2D{}, 0.0), PipelineError);
}

TEST(Twist, RangeAndRoutineNormaliser) {
  std::mt19937 rng(83);
  const auto s = testutil::random_sequence(rng, 30);
  const auto tw = twist_trajectory(s);
  double lo = 1e9;
  for (double v : tw) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 180.0);
    lo = std::min(lo, std::min(v, 180.0 - v));
  }
  EXPECT_NEAR(lo, 0.0, 1e-9);  // the widest frame is side-on by construction
}

TEST(Features, StraightStandingPosture) {
  PoseSequence s;
  for (int i = 0; i < 3; ++i) s.frames.push_back({i, pose_from_state({}, {200, 300}, 110), std::nullopt});
  const auto f = extract_features(s, 30);
  for (auto i : {Feature::RightElbow, Feature::LeftElbow, Feature::RightKnee, Feature::LeftKnee, Feature::RightHip,
                 Feature::LeftHip})
    EXPECT_NEAR(f.at(0, int(i)), 180.0, 1e-6) << kFeatureNames[int(i)];
  EXPECT_NEAR(f.at(0, int(Feature::RightShoulder)), 0.0, 1e-6);
  EXPECT_NEAR(f.at(0, int(Feature::Torso)), 0.0, 1e-6);
  EXPECT_NEAR(f.at(0, int(Feature::RightLeg)), 0.0, 1e-6);
}

TEST(Features, TuckJumpFlexesHipsAndKnees) {
  const auto g = generate_skill(builtin_model(parse_code("FTF")), 30, NoiseSpec{});
  const auto f = extract_features(g.poses, g.shoulder_span);
  for (auto i : {Feature::RightHip, Feature::LeftHip, Feature::RightKnee, Feature::LeftKnee}) {
    const auto c = f.column(int(i));
    EXPECT_LE(*std::min_element(c.begin(), c.end()), 90.0) << kFeatureNames[int(i)];
  }
}

TEST(Features, BackSomersaultTorsoTurnsOnce) {
  const auto g = generate_skill(builtin_model(parse_code("BSSt")), 30, NoiseSpec{});
  const auto c = extract_features(g.poses, g.shoulder_span).column(int(Feature::Torso));
  EXPECT_NEAR(std::abs(c.back() - c.front()), 360.0, 5.0);
}

TEST(Features, InvariantToTranslationAndScale) {
  std::mt19937 rng(89);
  std::uniform_real_distribution<double> sc(0.3, 4), sh(-500, 500);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = testutil::random_sequence(rng, 12);
    const double k = sc(rng);
    const auto t = transformed(s, k, {sh(rng), sh(rng)});
    const auto a = extract_features(s, routine_shoulder_span(s));
    const auto b = extract_features(t, routine_shoulder_span(t));
    for (std::size_t r = 0; r < a.length(); ++r)
      for (int i = 0; i < kFeatureCount; ++i) EXPECT_NEAR(a.at(r, i), b.at(r, i), 1e-6) << trial;
  }
}

TEST(Features, MirrorSwapsSidesAndNegatesSignedAngles) {
  std::mt19937 rng(97);
  const std::array<std::pair<Feature, Feature>, 5> pairs{{{Feature::RightElbow, Feature::LeftElbow},
                                                          {Feature::RightShoulder, Feature::LeftShoulder},
                                                          {Feature::RightHip, Feature::LeftHip},
                                                          {Feature::RightKnee, Feature::LeftKnee},
                                                          {Feature::RightLeg, Feature::LeftLeg}}};
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = testutil::random_sequence(rng, 10);
    const auto m = mirrored(s);
    const auto a = extract_features(s, routine_shoulder_span(s));
    const auto b = extract_features(m, routine_shoulder_span(m));
    for (std::size_t r = 0; r < a.length(); ++r) {
      for (auto [R, L] : pairs) {
        const double sign = R == Feature::RightLeg ? -1.0 : 1.0;
        EXPECT_NEAR(b.at(r, int(R)), sign * a.at(r, int(L)), 1e-6);
        EXPECT_NEAR(b.at(r, int(L)), sign * a.at(r, int(R)), 1e-6);
      }
      EXPECT_NEAR(b.at(r, int(Feature::Torso)), -a.at(r, int(Feature::Torso)), 1e-6);
      EXPECT_NEAR(b.at(r, int(Feature::Twist)), a.at(r, int(Feature::Twist)), 1e-6);
    }
  }
}

TEST(Features, MissingJointIsInterpolated) {
  PoseSequence s;
  for (int i = 0; i < 5; ++i) {
    BodyState st;
    st.elbow_flex = 20.0 * i;
    st.shoulder_elev = 60;
    st.twist = 90;
    s.frames.push_back({i, pose_from_state(st, {200, 300}, 110), std::nullopt});
  }
  s.frames[2].pose[Joint::RWrist].confidence = 0.0;
  const auto f = extract_features(s, 30);
  const int e = int(Feature::RightElbow);
  EXPECT_NEAR(f.at(2, e), 0.5 * (f.at(1, e) + f.at(3, e)), 1e-9);
}

TEST(Features, Errors) {
  PoseSequence one;
  one.frames.push_back({0, pose_from_state({}, {0, 0}, 100), std::nullopt});
  EXPECT_THROW(extract_features(one, 10), InputError);
  one.frames.push_back({1, pose_from_state({}, {0, 0}, 100), std::nullopt});
  EXPECT_THROW(extract_features(one, 0.0), PipelineError);
  for (auto& f : one.frames) f.pose[Joint::Thorax].confidence = 0;
  EXPECT_THROW(extract_features(one, 10), PipelineError);
}

TEST(Features, JsonRoundTrip) {
  FeatureTrajectory t;
  t.skill_ref = "r1:4";
  t.label = "BRIt";
  t.rows = {FeatureVector{}, FeatureVector{}};
  t.rows[1][11] = 123.25;
  EXPECT_EQ(trajectory_from_json(to_json(t)), t);
  EXPECT_THROW(trajectory_from_json(nlohmann::json::object()), InputError);
  EXPECT_THROW(trajectory_from_json({{"angles", {{1, 2, 3}}}}), InputError);
}
