#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "trampoline/pose.hpp"

using namespace tramp;

namespace {

std::string frame_line(int frame, int joints = 16, double x = 1.5) {
  nlohmann::json j = nlohmann::json::array();
  for (int i = 0; i < joints; ++i) j.push_back({x + i, 2.0 * i, 0.9});
  return nlohmann::json{{"frame", frame}, {"joints", j}}.dump();
}

PoseSequence parse(const std::string& text) {
  std::istringstream in(text);
  return read_pose_stream(in);
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(PoseStream, TwoLines) {
  const auto s = parse(frame_line(0) + "\n" + frame_line(1) + "\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.frames[1].frame, 1);
  EXPECT_DOUBLE_EQ(s.frames[1].pose[Joint::LWrist].x, 16.5);
  EXPECT_DOUBLE_EQ(s.frames[0].pose[Joint::RKnee].y, 2.0);
  EXPECT_DOUBLE_EQ(s.frames[0].pose[Joint::Pelvis].confidence, 0.9);
}

TEST(PoseStream, HeaderLine) {
  const auto s = parse(R"({"fps": 25, "coords": "crop"})" "\n" + frame_line(3) + "\n");
  EXPECT_DOUBLE_EQ(s.fps, 25.0);
  EXPECT_EQ(s.coords, CoordFrame::Crop);
  ASSERT_EQ(s.size(), 1u);
}

TEST(PoseStream, WrongJointCountNamesTheLine) {
  try {
    parse(frame_line(0) + "\n" + frame_line(1, 15) + "\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(PoseStream, RepeatedFrameIndexIsAnError) {
  try {
    parse(frame_line(5) + "\n" + frame_line(5) + "\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(PoseStream, MalformedInput) {
  EXPECT_THROW(parse("{not json\n"), ParseError);
  EXPECT_THROW(parse(R"({"frame": 0, "joints": 3})" "\n"), ParseError);
  EXPECT_THROW(parse(R"({"frame": 0.5, "joints": []})" "\n"), ParseError);
  std::string bad = frame_line(0);
  bad.replace(bad.find("0.9"), 3, "1.7");
  EXPECT_THROW(parse(bad + "\n"), ParseError);
  std::string null_coord = frame_line(0);
  null_coord.replace(null_coord.find("1.5"), 3, "null");
  EXPECT_THROW(parse(null_coord + "\n"), ParseError);
}

TEST(PoseStream, RoundTripIsBitExact) {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> u(-1000, 1000), c(0, 1);
  PoseSequence s;
  s.fps = 29.97;
  for (int i = 0; i < 40; ++i) {
    PoseFrame f;
    f.frame = 3 * i + 1;
    for (auto& k : f.pose.joints) k = {u(rng), u(rng), c(rng)};
    s.frames.push_back(f);
  }
  std::stringstream io;
  write_pose_stream(io, s);
  const auto back = read_pose_stream(io);
  ASSERT_EQ(back.size(), s.size());
  EXPECT_TRUE(bit_equal(back.fps, s.fps));
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int j = 0; j < kJointCount; ++j) {
      EXPECT_TRUE(bit_equal(back.frames[i].pose.joints[j].x, s.frames[i].pose.joints[j].x));
      EXPECT_TRUE(bit_equal(back.frames[i].pose.joints[j].y, s.frames[i].pose.joints[j].y));
      EXPECT_TRUE(bit_equal(back.frames[i].pose.joints[j].confidence, s.frames[i].pose.joints[j].confidence));
    }
}

TEST(PoseStream, FileRoundTripWithOrigins) {
  testutil::TempDir dir("pose");
  PoseSequence s;
  s.coords = CoordFrame::Crop;
  for (int i = 0; i < 5; ++i) s.frames.push_back({i, Pose2D{}, Vec2{10.0 * i, 3.0}});
  save_pose_sequence((dir / "p.jsonl").string(), s);
  EXPECT_EQ(load_pose_sequence((dir / "p.jsonl").string()), s);
  EXPECT_THROW(load_pose_sequence((dir / "missing.jsonl").string()), InputError);
}

TEST(Smoothing, WindowOneIsIdentity) {
  std::mt19937 rng(47);
  const auto s = testutil::random_sequence(rng, 20);
  EXPECT_EQ(smooth_poses(s, 1), s);
}

TEST(Smoothing, ConstantPoseIsAFixedPoint) {
  std::mt19937 rng(53);
  const Pose2D p = testutil::random_pose(rng);
  PoseSequence s;
  for (int i = 0; i < 15; ++i) s.frames.push_back({i, p, std::nullopt});
  const auto out = smooth_poses(s, 5);
  for (const auto& f : out.frames)
    for (int j = 0; j < kJointCount; ++j) {
      EXPECT_NEAR(f.pose.joints[j].x, p.joints[j].x, 1e-9);
      EXPECT_NEAR(f.pose.joints[j].y, p.joints[j].y, 1e-9);
    }
}

TEST(Smoothing, LowConfidenceImpulseIsSuppressed) {
  PoseSequence s;
  for (int i = 0; i < 21; ++i) {
    Pose2D p;
    for (int j = 0; j < kJointCount; ++j) p.joints[j] = {100.0 + i, 200.0, 1.0};
    s.frames.push_back({i, p, std::nullopt});
  }
  s.frames[10].pose.joints[3] = {160.0, 250.0, 0.1};
  const auto out = smooth_poses(s, 5);
  EXPECT_NEAR(out.frames[10].pose.joints[3].x, 110.0, 2.0);
  EXPECT_NEAR(out.frames[10].pose.joints[3].y, 200.0, 2.0);
  EXPECT_DOUBLE_EQ(out.frames[10].pose.joints[3].confidence, kDefaultConfidenceFloor);
}

TEST(Smoothing, OutputIsAConvexCombinationOfTheWindow) {
  std::mt19937 rng(59);
  std::uniform_real_distribution<double> conf(0.25, 1.0);
  auto s = testutil::random_sequence(rng, 30);
  for (auto& f : s.frames)
    for (auto& k : f.pose.joints) k.confidence = conf(rng);
  const int w = 7;
  const auto out = smooth_poses(s, w);
  ASSERT_EQ(out.size(), s.size());
  for (int t = 0; t < 30; ++t)
    for (int j = 0; j < kJointCount; ++j) {
      double lo = 1e9, hi = -1e9;
      for (int k = std::max(0, t - w / 2); k <= std::min(29, t + w / 2); ++k) {
        lo = std::min(lo, s.frames[k].pose.joints[j].x);
        hi = std::max(hi, s.frames[k].pose.joints[j].x);
      }
      EXPECT_GE(out.frames[t].pose.joints[j].x, lo - 1e-9);
      EXPECT_LE(out.frames[t].pose.joints[j].x, hi + 1e-9);
    }
}

TEST(Smoothing, JointMissingEverywhereNearbyIsInterpolated) {
  PoseSequence s;
  for (int i = 0; i < 20; ++i) {
    Pose2D p;
    for (auto& k : p.joints) k = {10.0 * i, 0.0, 1.0};
    if (i >= 6 && i <= 13) p.joints[0].confidence = 0.0;
    s.frames.push_back({i, p, std::nullopt});
  }
  const auto out = smooth_poses(s, 3);
  EXPECT_NEAR(out.frames[10].pose.joints[0].x, 100.0, 2.0);
  EXPECT_DOUBLE_EQ(out.frames[10].pose.joints[0].confidence, kDefaultConfidenceFloor);
}

TEST(Smoothing, EvenWindowIsRejected) {
  EXPECT_THROW(smooth_poses(PoseSequence{}, 4), InputError);
  EXPECT_THROW(smooth_poses(PoseSequence{}, 0), InputError);
}

TEST(Coordinates, CropToFullExample) {
  PoseSequence s;
  s.coords = CoordFrame::Crop;
  Pose2D p;
  p.joints[0] = {10, 10, 1};
  s.frames.push_back({0, p, std::nullopt});
  const auto full = to_full_frame(s, CropOrigins{{0, Vec2{100, 50}}});
  EXPECT_EQ(full.coords, CoordFrame::Full);
  EXPECT_EQ(full.frames[0].pose.joints[0].x, 110);
  EXPECT_EQ(full.frames[0].pose.joints[0].y, 60);
}

TEST(Coordinates, RoundTripIsBitExactOnDyadicGrid) {
  std::mt19937 rng(61);
  std::uniform_int_distribution<int> u(-200000, 200000), o(-300, 1200);
  PoseSequence s;
  s.coords = CoordFrame::Crop;
  CropOrigins origins;
  for (int i = 0; i < 50; ++i) {
    Pose2D p;
    for (auto& k : p.joints) k = {u(rng) / 1024.0, u(rng) / 1024.0, 1.0};
    s.frames.push_back({i, p, std::nullopt});
    origins[i] = Vec2{double(o(rng)), double(o(rng))};
  }
  const auto back = to_crop_coordinates(to_full_frame(s, origins), origins);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(back.frames[i].pose, s.frames[i].pose);
}

TEST(Coordinates, RoundTripIsCloseForArbitraryValues) {
  std::mt19937 rng(67);
  auto s = testutil::random_sequence(rng, 10);
  s.coords = CoordFrame::Crop;
  CropOrigins origins;
  for (int i = 0; i < 10; ++i) origins[i] = Vec2{37.0 * i, -11.0};
  const auto back = to_crop_coordinates(to_full_frame(s, origins));
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int j = 0; j < kJointCount; ++j) EXPECT_NEAR(back.frames[i].pose.joints[j].x, s.frames[i].pose.joints[j].x, 1e-9);
}

TEST(Coordinates, MissingOriginAndEmptySequence) {
  PoseSequence s;
  s.coords = CoordFrame::Crop;
  EXPECT_TRUE(to_full_frame(s).empty());
  s.frames.push_back({4, Pose2D{}, std::nullopt});
  EXPECT_THROW(to_full_frame(s), InputError);
}
