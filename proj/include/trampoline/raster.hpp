#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "trampoline/error.hpp"

namespace tramp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

using Polygon = std::vector<Vec2>;

/// Axis-aligned rectangle with inclusive pixel-centre bounds.
struct Rect {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double side() const { return std::max(width(), height()); }
  bool contains(Vec2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Row-major interleaved 8-bit image.
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;
  int index = 0;

  Frame() = default;
  Frame(int w, int h, int c = 3, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(byte_count(w, h, c), fill) {}

  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  static std::size_t byte_count(int w, int h, int c) {
    if (w <= 0 || h <= 0 || c <= 0) throw InputError("frame dimensions must be positive");
    return static_cast<std::size_t>(w) * h * c;
  }
  bool valid() const {
    return width > 0 && height > 0 && pixels.size() == static_cast<std::size_t>(width) * height * channels;
  }
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
  bool empty() const { return std::find(bits.begin(), bits.end(), 1) == bits.end(); }
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

namespace detail {

// Window of `k` cells starting at each index (anchor at the first cell).
// erode: every in-bounds cell set and the window fully inside; dilate: any set.
inline void sliding_line(const std::uint8_t* in, std::uint8_t* out, int n, std::ptrdiff_t stride, int k,
                         bool erode) {
  int run = 0;  // number of set cells in [i, i+k) clipped to n
  for (int j = 0; j < std::min(k, n); ++j) run += in[j * stride];
  for (int i = 0; i < n; ++i) {
    if (erode) {
      out[i * stride] = (i + k <= n && run == k) ? 1 : 0;
    } else {
      out[i * stride] = run > 0 ? 1 : 0;
    }
    run -= in[i * stride];
    if (i + k < n) run += in[(i + k) * stride];
  }
}

inline BinaryMask morph(const BinaryMask& mask, int kernel_w, int kernel_h, int iterations, bool erode) {
  if (kernel_w < 1 || kernel_h < 1) throw InputError("kernel dimensions must be >= 1");
  if (iterations < 0) throw InputError("iterations must be >= 0");
  if (iterations == 0 || mask.bits.empty()) return mask;
  // Repeating a box kernel anchored at its top-left n times equals a single
  // pass with the Minkowski sum of the boxes, also anchored top-left. With an
  // out-of-bounds-is-background border the two agree exactly because offsets
  // are non-negative.
  const int kw = iterations * (kernel_w - 1) + 1;
  const int kh = iterations * (kernel_h - 1) + 1;
  BinaryMask tmp(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * mask.width;
    sliding_line(mask.bits.data() + row, tmp.bits.data() + row, mask.width, 1, kw, erode);
  }
  BinaryMask out(mask.width, mask.height);
  for (int x = 0; x < mask.width; ++x) {
    sliding_line(tmp.bits.data() + x, out.bits.data() + x, mask.height, mask.width, kh, erode);
  }
  return out;
}

}  // namespace detail

/// Binary erosion with a kernel_w x kernel_h box anchored at its top-left
/// cell. Out-of-bounds neighbours count as background.
inline BinaryMask erode(const BinaryMask& mask, int kernel_w, int kernel_h, int iterations) {
  return detail::morph(mask, kernel_w, kernel_h, iterations, true);
}

/// Binary dilation over the same anchored neighbourhood as erode().
inline BinaryMask dilate(const BinaryMask& mask, int kernel_w, int kernel_h, int iterations) {
  return detail::morph(mask, kernel_w, kernel_h, iterations, false);
}

/// Largest 8-connected component. Ties go to the component whose first pixel
/// comes earliest in row-major order.
inline BinaryMask largest_component(const BinaryMask& mask) {
  const int w = mask.width, h = mask.height;
  BinaryMask out(w, h);
  if (mask.bits.empty()) return out;

  std::vector<std::int32_t> label(mask.bits.size(), -1);
  std::vector<std::size_t> stack;
  std::int32_t best_label = -1;
  std::size_t best_size = 0;
  std::int32_t next = 0;

  for (std::size_t start = 0; start < mask.bits.size(); ++start) {
    if (!mask.bits[start] || label[start] >= 0) continue;
    const std::int32_t id = next++;
    std::size_t size = 0;
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
      for (int dy = -1; dy <= 1; ++dy) {
        const int ny = py + dy;
        if (ny < 0 || ny >= h) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = px + dx;
          if (nx < 0 || nx >= w || (dx == 0 && dy == 0)) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (mask.bits[q] && label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    if (size > best_size) {  // strict: earlier component keeps ties
      best_size = size;
      best_label = id;
    }
  }
  if (best_label >= 0) {
    for (std::size_t i = 0; i < label.size(); ++i) out.bits[i] = label[i] == best_label ? 1 : 0;
  }
  return out;
}

/// Method-of-moments centroid (m10/m00, m01/m00) in pixel coordinates.
inline Vec2 centroid(const BinaryMask& mask) {
  std::int64_t m00 = 0, m10 = 0, m01 = 0;
  for (int y = 0; y < mask.height; ++y) {
    const std::uint8_t* row = mask.bits.data() + static_cast<std::size_t>(y) * mask.width;
    std::int64_t row_count = 0;
    for (int x = 0; x < mask.width; ++x) {
      if (row[x]) {
        ++row_count;
        m10 += x;
      }
    }
    m00 += row_count;
    m01 += row_count * y;
  }
  if (m00 == 0) throw InputError("centroid of an empty mask");
  return {static_cast<double>(m10) / static_cast<double>(m00), static_cast<double>(m01) / static_cast<double>(m00)};
}

/// Convex hull of the foreground pixel centres, counter-clockwise in (x, y)
/// axes (clockwise as displayed, since image y points down), without
/// collinear vertices. A single pixel yields one vertex, a collinear set two.
inline Polygon convex_hull(const BinaryMask& mask) {
  // Only the leftmost and rightmost pixel of each row can be hull vertices.
  std::vector<Vec2> pts;
  for (int y = 0; y < mask.height; ++y) {
    const std::uint8_t* row = mask.bits.data() + static_cast<std::size_t>(y) * mask.width;
    int first = -1, last = -1;
    for (int x = 0; x < mask.width; ++x) {
      if (row[x]) {
        if (first < 0) first = x;
        last = x;
      }
    }
    if (first < 0) continue;
    pts.push_back({double(first), double(y)});
    if (last != first) pts.push_back({double(last), double(y)});
  }
  if (pts.empty()) throw InputError("convex hull of an empty mask");

  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() == 1) return pts;

  // Andrew's monotone chain; coordinates are integers so the cross products
  // are exact.
  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  auto turn = [](Vec2 o, Vec2 a, Vec2 b) { return cross(a - o, b - o); };
  for (const Vec2& p : pts) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline Rect bounding_box(std::span<const Vec2> hull) {
  if (hull.empty()) throw InputError("bounding box of an empty polygon");
  Rect r{hull[0].x, hull[0].y, hull[0].x, hull[0].y};
  for (const Vec2& p : hull) {
    r.x_min = std::min(r.x_min, p.x);
    r.y_min = std::min(r.y_min, p.y);
    r.x_max = std::max(r.x_max, p.x);
    r.y_max = std::max(r.y_max, p.y);
  }
  return r;
}

/// Inside-or-on test for a counter-clockwise convex polygon (including the
/// one- and two-vertex degenerate hulls).
inline bool in_convex_polygon(std::span<const Vec2> hull, Vec2 p, double tol = 1e-9) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return norm(p - hull[0]) <= tol;
  if (hull.size() == 2) {
    const Vec2 d = hull[1] - hull[0];
    const double len = norm(d);
    if (std::abs(cross(d, p - hull[0])) > tol * len) return false;
    const double t = dot(p - hull[0], d);
    return t >= -tol * len && t <= dot(d, d) + tol * len;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 a = hull[i], b = hull[(i + 1) % hull.size()];
    if (cross(b - a, p - a) < -tol * norm(b - a)) return false;
  }
  return true;
}

}  // namespace tramp
