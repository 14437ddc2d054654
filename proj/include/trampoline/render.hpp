#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "trampoline/generator.hpp"
#include "trampoline/pose.hpp"
#include "trampoline/raster.hpp"

namespace tramp {

/// Flat-shaded debug rasteriser for generated poses: textured grey hall,
/// blue trampoline bed from the line down, red stick body on top.
struct RenderStyle {
  std::array<std::uint8_t, 3> body{205, 45, 40};
  std::array<std::uint8_t, 3> bed{40, 70, 200};
  std::array<std::uint8_t, 3> floor{70, 66, 60};
  int bed_thickness = 28;
  double limb_radius = 0.035;   // fractions of body height
  double torso_radius = 0.075;
  double head_radius = 0.065;
};

inline Frame render_background(const SceneGeometry& scene, const RenderStyle& style = {}) {
  Frame f(scene.width, scene.height);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      std::uint8_t* px = f.at(x, y);
      if (y >= scene.line_row && y < scene.line_row + style.bed_thickness) {
        std::copy(style.bed.begin(), style.bed.end(), px);
        continue;
      }
      if (y >= scene.line_row + style.bed_thickness) {
        std::copy(style.floor.begin(), style.floor.end(), px);
        continue;
      }
      // Wall: vertical gradient, panel seams and a fixed hash texture.
      const auto h = static_cast<std::uint32_t>(x * 73856093u ^ y * 19349663u);
      const int grain = static_cast<int>((h >> 7) % 9) - 4;
      const int seam = (x % 112 == 0 || y % 96 == 0) ? -18 : 0;
      const int base = 150 - y * 40 / scene.height + grain + seam;
      px[0] = static_cast<std::uint8_t>(std::clamp(base, 0, 255));
      px[1] = static_cast<std::uint8_t>(std::clamp(base + 2, 0, 255));
      px[2] = static_cast<std::uint8_t>(std::clamp(base - 6, 0, 255));
    }
  }
  return f;
}

namespace detail {

inline void fill_capsule(Frame& f, Vec2 a, Vec2 b, double r, const std::array<std::uint8_t, 3>& c) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
  const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
  const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  const double r2 = r * r;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      double t = len2 > 0 ? dot(p - a, d) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec2 q = p - (a + t * d);
      if (dot(q, q) <= r2) std::copy(c.begin(), c.end(), f.at(x, y));
    }
  }
}

}  // namespace detail

/// Draws the body of `pose` onto `frame` in place.
inline void render_pose(Frame& frame, const Pose2D& pose, double body_height, const RenderStyle& style = {}) {
  using J = Joint;
  auto P = [&](J j) { return pose[j].pos(); };
  const double limb = style.limb_radius * body_height;
  const auto& c = style.body;
  const Vec2 shoulders = 0.5 * (P(J::RShoulder) + P(J::LShoulder));
  const Vec2 hips = 0.5 * (P(J::RHip) + P(J::LHip));
  detail::fill_capsule(frame, hips, shoulders, style.torso_radius * body_height, c);
  detail::fill_capsule(frame, P(J::Thorax), P(J::UpperNeck), limb, c);
  const Vec2 head = 0.5 * (P(J::UpperNeck) + P(J::HeadTop));
  detail::fill_capsule(frame, head, head, style.head_radius * body_height, c);
  const std::array<std::pair<J, J>, 10> limbs{{{J::RHip, J::RKnee},
                                                {J::RKnee, J::RAnkle},
                                                {J::LHip, J::LKnee},
                                                {J::LKnee, J::LAnkle},
                                                {J::RShoulder, J::RElbow},
                                                {J::RElbow, J::RWrist},
                                                {J::LShoulder, J::LElbow},
                                                {J::LElbow, J::LWrist},
                                                {J::RShoulder, J::LShoulder},
                                                {J::RHip, J::LHip}}};
  for (const auto& [a, b] : limbs) detail::fill_capsule(frame, P(a), P(b), limb, c);
}

inline Frame render_frame(const Frame& background, const Pose2D& pose, double body_height, int index,
                          const RenderStyle& style = {}) {
  Frame f = background;
  f.index = index;
  render_pose(f, pose, body_height, style);
  return f;
}

}  // namespace tramp
