#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trampoline/error.hpp"
#include "trampoline/raster.hpp"

namespace tramp {

/// MPII joint order; this is the wire contract of the pose stream.
enum class Joint : int {
  RAnkle = 0,
  RKnee = 1,
  RHip = 2,
  LHip = 3,
  LKnee = 4,
  LAnkle = 5,
  Pelvis = 6,
  Thorax = 7,
  UpperNeck = 8,
  HeadTop = 9,
  RWrist = 10,
  RElbow = 11,
  RShoulder = 12,
  LShoulder = 13,
  LElbow = 14,
  LWrist = 15,
};

inline constexpr int kJointCount = 16;

/// Left/right counterpart of each joint (self for the midline joints).
inline constexpr std::array<int, kJointCount> kMirrorJoint{5, 4, 3, 2, 1, 0, 6, 7, 8, 9, 15, 14, 13, 12, 11, 10};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 1.0;

  Vec2 pos() const { return {x, y}; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct Pose2D {
  std::array<Keypoint, kJointCount> joints{};

  const Keypoint& operator[](Joint j) const { return joints[static_cast<int>(j)]; }
  Keypoint& operator[](Joint j) { return joints[static_cast<int>(j)]; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

enum class CoordFrame { Full, Crop };

struct PoseFrame {
  int frame = 0;
  Pose2D pose;
  std::optional<Vec2> origin;  // crop origin in full-frame pixels, when known
  friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

struct PoseSequence {
  double fps = 30.0;
  CoordFrame coords = CoordFrame::Full;
  std::vector<PoseFrame> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  friend bool operator==(const PoseSequence&, const PoseSequence&) = default;
};

inline constexpr double kDefaultConfidenceFloor = 0.2;

/// Checks the sequence invariants; throws InputError naming the first
/// violation.
inline void validate(const PoseSequence& seq) {
  if (!(seq.fps > 0.0) || !std::isfinite(seq.fps)) throw InputError("fps must be positive");
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto& f = seq.frames[i];
    if (i > 0 && f.frame <= seq.frames[i - 1].frame)
      throw InputError("frame indices must be strictly increasing (frame " + std::to_string(f.frame) + ")");
    for (const auto& k : f.pose.joints) {
      if (!std::isfinite(k.x) || !std::isfinite(k.y))
        throw InputError("non-finite coordinate in frame " + std::to_string(f.frame));
      if (!(k.confidence >= 0.0 && k.confidence <= 1.0))
        throw InputError("confidence outside [0, 1] in frame " + std::to_string(f.frame));
    }
  }
}

namespace detail {

inline double json_number(const nlohmann::json& v, const char* what) {
  if (!v.is_number()) throw InputError(std::string(what) + " must be a number");
  return v.get<double>();
}

inline PoseFrame parse_pose_line(const nlohmann::json& j, bool want_origin) {
  if (!j.is_object() || !j.contains("frame") || !j.contains("joints"))
    throw InputError("expected an object with 'frame' and 'joints'");
  if (!j["frame"].is_number_integer()) throw InputError("'frame' must be an integer");
  PoseFrame pf;
  pf.frame = j["frame"].get<int>();
  const auto& joints = j["joints"];
  if (!joints.is_array() || joints.size() != kJointCount)
    throw InputError("expected 16 joints, got " + std::to_string(joints.is_array() ? joints.size() : 0));
  for (int i = 0; i < kJointCount; ++i) {
    const auto& e = joints[i];
    if (!e.is_array() || e.size() != 3) throw InputError("joint " + std::to_string(i) + " must be [x, y, conf]");
    pf.pose.joints[i] = {json_number(e[0], "x"), json_number(e[1], "y"), json_number(e[2], "confidence")};
  }
  if (j.contains("origin")) {
    const auto& o = j["origin"];
    if (!o.is_array() || o.size() != 2) throw InputError("'origin' must be [x, y]");
    pf.origin = Vec2{json_number(o[0], "origin x"), json_number(o[1], "origin y")};
  } else if (want_origin) {
    throw InputError("header promises per-frame origins but this frame has none");
  }
  return pf;
}

}  // namespace detail

/// Parses the JSON-lines pose stream. An optional first line
/// {"fps", "coords", "origin_per_frame"} is the header.
inline PoseSequence read_pose_stream(std::istream& in) {
  PoseSequence seq;
  bool want_origin = false;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
      if (first && j.is_object() && !j.contains("joints")) {
        if (j.contains("fps")) seq.fps = detail::json_number(j["fps"], "fps");
        if (j.contains("coords")) {
          const auto c = j["coords"].get<std::string>();
          if (c == "full") seq.coords = CoordFrame::Full;
          else if (c == "crop") seq.coords = CoordFrame::Crop;
          else throw InputError("coords must be 'full' or 'crop'");
        }
        want_origin = j.value("origin_per_frame", false);
        first = false;
        continue;
      }
      first = false;
      PoseFrame pf = detail::parse_pose_line(j, want_origin);
      PoseSequence one;
      one.fps = seq.fps > 0 ? seq.fps : 1.0;
      if (!seq.frames.empty()) one.frames.push_back(seq.frames.back());
      one.frames.push_back(pf);
      validate(one);
      seq.frames.push_back(std::move(pf));
    } catch (const ParseError&) {
      throw;
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  validate(seq);
  return seq;
}

inline PoseSequence load_pose_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pose file " + path);
  return read_pose_stream(in);
}

/// Writes the header line plus one line per frame. Doubles are printed in
/// shortest round-trip form, so write followed by read is bit-exact.
inline void write_pose_stream(std::ostream& out, const PoseSequence& seq) {
  const bool with_origin = std::any_of(seq.frames.begin(), seq.frames.end(), [](const PoseFrame& f) { return f.origin.has_value(); });
  nlohmann::json header{{"fps", seq.fps},
                        {"coords", seq.coords == CoordFrame::Full ? "full" : "crop"},
                        {"origin_per_frame", with_origin}};
  out << header.dump() << '\n';
  for (const auto& f : seq.frames) {
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& k : f.pose.joints) joints.push_back({k.x, k.y, k.confidence});
    nlohmann::json line{{"frame", f.frame}, {"joints", std::move(joints)}};
    if (with_origin) {
      const Vec2 o = f.origin.value_or(Vec2{});
      line["origin"] = {o.x, o.y};
    }
    out << line.dump() << '\n';
  }
}

inline void save_pose_sequence(const std::string& path, const PoseSequence& seq) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write pose file " + path);
  write_pose_stream(out, seq);
}

/// Confidence-weighted centred moving average per joint and coordinate.
/// Samples below `confidence_floor` are left out; a joint with no usable
/// sample in its window is linearly interpolated from the nearest smoothed
/// frames on either side and given confidence equal to the floor.
inline PoseSequence smooth_poses(const PoseSequence& seq, int window, double confidence_floor = kDefaultConfidenceFloor) {
  if (window < 1 || window % 2 == 0) throw InputError("smoothing window must be odd and >= 1");
  if (window == 1 || seq.empty()) return seq;
  const int half = window / 2;
  const int n = static_cast<int>(seq.size());
  PoseSequence out = seq;
  for (int j = 0; j < kJointCount; ++j) {
    std::vector<bool> have(n, false);
    for (int t = 0; t < n; ++t) {
      double wx = 0, wy = 0, w = 0;
      for (int k = std::max(0, t - half); k <= std::min(n - 1, t + half); ++k) {
        const Keypoint& kp = seq.frames[k].pose.joints[j];
        if (kp.confidence < confidence_floor) continue;
        wx += kp.confidence * kp.x;
        wy += kp.confidence * kp.y;
        w += kp.confidence;
      }
      if (w > 0.0) {
        Keypoint& o = out.frames[t].pose.joints[j];
        o.x = wx / w;
        o.y = wy / w;
        // a rejected detection is now a reconstruction from its neighbours
        if (o.confidence < confidence_floor) o.confidence = confidence_floor;
        have[t] = true;
      }
    }
    // Fill gaps between smoothed frames; frames before the first or after the
    // last usable sample copy the nearest one.
    int prev = -1;
    for (int t = 0; t < n; ++t) {
      if (!have[t]) continue;
      if (prev + 1 < t) {
        for (int g = prev + 1; g < t; ++g) {
          Keypoint& o = out.frames[g].pose.joints[j];
          const Keypoint& b = out.frames[t].pose.joints[j];
          if (prev < 0) {
            o.x = b.x;
            o.y = b.y;
          } else {
            const Keypoint& a = out.frames[prev].pose.joints[j];
            const double s = static_cast<double>(seq.frames[g].frame - seq.frames[prev].frame) /
                             static_cast<double>(seq.frames[t].frame - seq.frames[prev].frame);
            o.x = a.x + s * (b.x - a.x);
            o.y = a.y + s * (b.y - a.y);
          }
          o.confidence = confidence_floor;
        }
      }
      prev = t;
    }
    if (prev >= 0) {
      for (int g = prev + 1; g < n; ++g) {
        Keypoint& o = out.frames[g].pose.joints[j];
        o.x = out.frames[prev].pose.joints[j].x;
        o.y = out.frames[prev].pose.joints[j].y;
        o.confidence = confidence_floor;
      }
    }
  }
  return out;
}

/// Crop origin lookup by frame index.
using CropOrigins = std::map<int, Vec2>;

namespace detail {
inline Vec2 origin_for(const PoseFrame& f, const CropOrigins& crops) {
  if (auto it = crops.find(f.frame); it != crops.end()) return it->second;
  if (f.origin) return *f.origin;
  throw InputError("no crop origin for frame " + std::to_string(f.frame));
}
}  // namespace detail

/// Crop-local to full-frame pixels: adds each frame's crop origin. The
/// origin is kept on the frame so the conversion can be undone.
inline PoseSequence to_full_frame(const PoseSequence& seq, const CropOrigins& crops = {}) {
  if (seq.coords == CoordFrame::Full) return seq;
  PoseSequence out = seq;
  out.coords = CoordFrame::Full;
  for (auto& f : out.frames) {
    const Vec2 o = detail::origin_for(f, crops);
    for (auto& k : f.pose.joints) {
      k.x += o.x;
      k.y += o.y;
    }
    f.origin = o;
  }
  return out;
}

/// Full-frame to crop-local pixels: subtracts each frame's crop origin.
inline PoseSequence to_crop_coordinates(const PoseSequence& seq, const CropOrigins& crops = {}) {
  if (seq.coords == CoordFrame::Crop) return seq;
  PoseSequence out = seq;
  out.coords = CoordFrame::Crop;
  for (auto& f : out.frames) {
    const Vec2 o = detail::origin_for(f, crops);
    for (auto& k : f.pose.joints) {
      k.x -= o.x;
      k.y -= o.y;
    }
    f.origin = o;
  }
  return out;
}

}  // namespace tramp
