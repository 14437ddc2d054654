#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "trampoline/error.hpp"
#include "trampoline/raster.hpp"

namespace tramp {

/// Per-frame silhouette centroid of one routine; image y grows downward.
struct CentroidTrack {
  std::vector<Vec2> samples;
  std::vector<bool> missing;  // empty means nothing is missing
  double fps = 30.0;
  double reference_row = 0.0;  // trampoline line row; heights are measured from it

  std::size_t size() const { return samples.size(); }
  bool is_missing(std::size_t i) const { return !missing.empty() && missing[i]; }
};

struct BounceSegment {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  std::size_t apex_frame = 0;
  double apex_height = 0.0;
  bool is_routine_jump = true;
  friend bool operator==(const BounceSegment&, const BounceSegment&) = default;
};

struct MinimaParams {
  int smooth_window = 5;
  int min_separation = 10;
  // Negative: 5% of the (filled) track's vertical amplitude.
  double min_prominence = -1.0;
};

/// Linear interpolation across missing samples; leading and trailing gaps
/// take the nearest valid sample.
inline std::vector<Vec2> fill_missing(const CentroidTrack& track) {
  std::vector<Vec2> out = track.samples;
  if (!track.missing.empty() && track.missing.size() != track.samples.size())
    throw InputError("missing-frame markers do not match the sample count");
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!track.is_missing(i)) valid.push_back(i);
  if (valid.empty()) throw PipelineError("centroid track has no valid samples");
  for (std::size_t i = 0; i < valid.front(); ++i) out[i] = out[valid.front()];
  for (std::size_t i = valid.back() + 1; i < out.size(); ++i) out[i] = out[valid.back()];
  for (std::size_t k = 0; k + 1 < valid.size(); ++k) {
    const std::size_t a = valid[k], b = valid[k + 1];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
      out[i] = out[a] + t * (out[b] - out[a]);
    }
  }
  return out;
}

/// Centred moving average, window truncated at the ends.
inline std::vector<double> moving_average(std::span<const double> v, int window) {
  if (window <= 1) return {v.begin(), v.end()};
  const std::ptrdiff_t half = window / 2;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
  std::vector<double> out(v.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + (window - 1 - half));
    double s = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) s += v[k];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

namespace detail {

inline bool monotone(std::span<const double> y) {
  bool up = false, down = false;
  for (std::size_t i = 1; i < y.size(); ++i) {
    up = up || y[i] > y[i - 1];
    down = down || y[i] < y[i - 1];
  }
  return !(up && down);
}

// Indices of peaks (local maxima) of `y`. Plateaus resolve to their midpoint.
// A sequence endpoint counts when its only neighbour is strictly lower and
// the series changes direction somewhere (a monotone series has no peaks).
inline std::vector<std::size_t> local_maxima(std::span<const double> y) {
  std::vector<std::size_t> out;
  const std::size_t n = y.size();
  if (monotone(y)) return out;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && y[j + 1] == y[i]) ++j;
    const bool left_ok = i == 0 || y[i - 1] < y[i];
    const bool right_ok = j + 1 == n || y[j + 1] < y[i];
    if (left_ok && right_ok) out.push_back((i + j) / 2);
    i = j + 1;
  }
  return out;
}

// Topographic prominence: the peak's height above the higher of the two
// lowest points separating it from higher terrain on each side. A side that
// runs off the sequence without meeting a lower sample is ignored.
inline double prominence(std::span<const double> y, std::size_t peak) {
  const double h = y[peak];
  double left_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = peak; k-- > 0;) {
    if (y[k] > h) break;
    left_min = std::min(left_min, y[k]);
  }
  double right_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = peak + 1; k < y.size(); ++k) {
    if (y[k] > h) break;
    right_min = std::min(right_min, y[k]);
  }
  const double base = std::isinf(left_min) ? right_min : std::isinf(right_min) ? left_min : std::max(left_min, right_min);
  return std::isinf(base) ? 0.0 : h - base;
}

}  // namespace detail

/// Frames where the body is lowest (peaks of image y, i.e. minima of height).
inline std::vector<std::size_t> find_minima(const CentroidTrack& track, const MinimaParams& p = {}) {
  if (track.size() < 3) throw InputError("centroid track needs at least 3 samples");
  const std::vector<Vec2> filled = fill_missing(track);
  std::vector<double> y(filled.size());
  std::transform(filled.begin(), filled.end(), y.begin(), [](Vec2 v) { return v.y; });
  const std::vector<double> ys = moving_average(y, p.smooth_window);

  double min_prom = p.min_prominence;
  if (min_prom < 0.0) {
    const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
    min_prom = 0.05 * (*hi - *lo);
  }

  std::vector<std::size_t> cand;
  for (std::size_t i : detail::local_maxima(ys)) {
    const double prom = detail::prominence(ys, i);
    if (prom > 0.0 && prom >= min_prom) cand.push_back(i);
  }

  // Deepest first; drop anything closer than min_separation to a kept frame.
  std::vector<std::size_t> order = cand;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ys[a] > ys[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t c : order) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      const std::size_t d = c > k ? c - k : k - c;
      return d < static_cast<std::size_t>(std::max(p.min_separation, 0));
    });
    if (!clash) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

/// Consecutive minima become segments. Segments whose apex height above the
/// trampoline line is below `apex_threshold` times the routine's highest apex
/// are not routine jumps (in-bounces and out-bounces).
inline std::vector<BounceSegment> segment_routine(const CentroidTrack& track, std::span<const std::size_t> minima,
                                                  double apex_threshold = 0.5) {
  if (minima.size() < 2) throw PipelineError("jump segmentation failed: fewer than two minima");
  if (!std::is_sorted(minima.begin(), minima.end()) ||
      std::adjacent_find(minima.begin(), minima.end()) != minima.end())
    throw InputError("minima must be strictly ascending");
  if (minima.back() >= track.size()) throw InputError("minimum index outside the track");
  const std::vector<Vec2> filled = fill_missing(track);

  std::vector<BounceSegment> segs;
  for (std::size_t k = 0; k + 1 < minima.size(); ++k) {
    BounceSegment s;
    s.start_frame = minima[k];
    s.end_frame = minima[k + 1];
    s.apex_frame = s.start_frame + 1;
    for (std::size_t t = s.start_frame + 1; t <= s.end_frame; ++t)
      if (filled[t].y < filled[s.apex_frame].y) s.apex_frame = t;
    s.apex_height = std::max(0.0, track.reference_row - filled[s.apex_frame].y);
    segs.push_back(s);
  }
  double top = 0.0;
  for (const auto& s : segs) top = std::max(top, s.apex_height);
  for (auto& s : segs) s.is_routine_jump = s.apex_height >= apex_threshold * top;
  return segs;
}

/// Longest run of non-contact frames inside the segment (earliest on ties).
inline std::pair<std::size_t, std::size_t> airborne_range(const BounceSegment& seg, const std::vector<bool>& contact) {
  if (seg.end_frame >= contact.size()) throw InputError("contact flags do not cover the segment");
  std::size_t best_first = 0, best_len = 0;
  std::size_t run_first = 0, run_len = 0;
  for (std::size_t t = seg.start_frame; t <= seg.end_frame; ++t) {
    if (!contact[t]) {
      if (run_len == 0) run_first = t;
      ++run_len;
      if (run_len > best_len) {
        best_len = run_len;
        best_first = run_first;
      }
    } else {
      run_len = 0;
    }
  }
  if (best_len == 0) throw PipelineError("segment is in contact with the bed at every frame");
  return {best_first, best_first + best_len - 1};
}

}  // namespace tramp
