#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trampoline/error.hpp"
#include "trampoline/raster.hpp"

namespace tramp {

/// Per-pixel exponential running average of the colour channels.
class BackgroundModel {
public:
  explicit BackgroundModel(double learning_rate = 0.01) : alpha_(learning_rate) {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw InputError("learning rate must be in (0, 1]");
  }

  /// Initialise from the per-channel temporal median of a frame sample. A
  /// moving athlete covers any given pixel in well under half the frames, so
  /// the median is the empty scene.
  static BackgroundModel from_median(std::span<const Frame> sample, double learning_rate = 0.01) {
    BackgroundModel m(learning_rate);
    if (sample.empty()) return m;
    const Frame& first = sample.front();
    for (const Frame& f : sample) m.check_dims(f, first.width, first.height, first.channels);
    m.width_ = first.width;
    m.height_ = first.height;
    m.channels_ = first.channels;
    m.mean_.resize(first.pixels.size());
    std::vector<std::uint8_t> column(sample.size());
    const std::size_t mid = sample.size() / 2;
    for (std::size_t i = 0; i < m.mean_.size(); ++i) {
      for (std::size_t k = 0; k < sample.size(); ++k) column[k] = sample[k].pixels[i];
      std::nth_element(column.begin(), column.begin() + mid, column.end());
      float v = column[mid];
      if (sample.size() % 2 == 0) {
        const auto lower = *std::max_element(column.begin(), column.begin() + mid);
        v = 0.5f * (v + lower);
      }
      m.mean_[i] = v;
    }
    m.frames_seen_ = sample.size();
    return m;
  }

  /// mean <- (1 - a) mean + a pixel; the first frame initialises the mean.
  void update(const Frame& frame) { update_impl(frame, nullptr); }

  /// Same, but pixels set in `foreground` keep their current mean.
  void update(const Frame& frame, const BinaryMask& foreground) {
    if (foreground.width != frame.width || foreground.height != frame.height)
      throw InputError("foreground mask does not match frame");
    update_impl(frame, &foreground);
  }

  bool initialised() const { return frames_seen_ > 0; }
  std::size_t frames_seen() const { return frames_seen_; }
  double learning_rate() const { return alpha_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  const std::vector<float>& mean() const { return mean_; }

  /// Background estimate rounded back to an 8-bit frame.
  Frame image() const {
    if (!initialised()) throw InputError("background model is not initialised");
    Frame f(width_, height_, channels_);
    for (std::size_t i = 0; i < mean_.size(); ++i)
      f.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(mean_[i]), 0L, 255L));
    return f;
  }

private:
  void check_dims(const Frame& f, int w, int h, int c) const {
    if (!f.valid()) throw InputError("malformed frame buffer");
    if (f.width != w || f.height != h || f.channels != c)
      throw InputError("frame dimensions do not match the background model");
  }

  void update_impl(const Frame& frame, const BinaryMask* fg) {
    if (frames_seen_ == 0) {
      if (!frame.valid()) throw InputError("malformed frame buffer");
      width_ = frame.width;
      height_ = frame.height;
      channels_ = frame.channels;
      mean_.assign(frame.pixels.begin(), frame.pixels.end());
      frames_seen_ = 1;
      return;
    }
    check_dims(frame, width_, height_, channels_);
    const float a = static_cast<float>(alpha_);
    const float b = 1.0f - a;
    const std::size_t n = static_cast<std::size_t>(width_) * height_;
    for (std::size_t p = 0; p < n; ++p) {
      if (fg != nullptr && fg->bits[p]) continue;
      for (int c = 0; c < channels_; ++c) {
        const std::size_t i = p * channels_ + c;
        mean_[i] = b * mean_[i] + a * frame.pixels[i];
      }
    }
    ++frames_seen_;
  }

  double alpha_;
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> mean_;
  std::size_t frames_seen_ = 0;
};

inline BackgroundModel update_background(BackgroundModel model, const Frame& frame) {
  model.update(frame);
  return model;
}

enum class LineSource { Detected, UserAdjusted };

struct TrampolineLine {
  int top_row = 0;
  LineSource source = LineSource::Detected;
  friend bool operator==(const TrampolineLine&, const TrampolineLine&) = default;
};

inline TrampolineLine set_trampoline_line(int top_row) {
  if (top_row < 0) throw InputError("trampoline line row must be non-negative");
  return {top_row, LineSource::UserAdjusted};
}

/// Foreground where the largest per-channel deviation from the background
/// exceeds `threshold`. Rows at or below the trampoline line are cleared.
inline BinaryMask foreground_mask(const BackgroundModel& model, const Frame& frame, double threshold,
                                  std::optional<TrampolineLine> line = std::nullopt) {
  if (!model.initialised()) throw InputError("background model is not initialised");
  if (frame.width != model.width() || frame.height != model.height() || frame.channels != model.channels())
    throw InputError("frame dimensions do not match the background model");
  BinaryMask mask(frame.width, frame.height);
  const int rows = line ? std::clamp(line->top_row, 0, frame.height) : frame.height;
  const int ch = frame.channels;
  const float thr = static_cast<float>(threshold);
  const float* mean = model.mean().data();
  for (int y = 0; y < rows; ++y) {
    const std::size_t base = static_cast<std::size_t>(y) * frame.width;
    for (int x = 0; x < frame.width; ++x) {
      const std::size_t p = base + x;
      float dev = 0.0f;
      for (int c = 0; c < ch; ++c) dev = std::max(dev, std::abs(frame.pixels[p * ch + c] - mean[p * ch + c]));
      mask.bits[p] = dev > thr ? 1 : 0;
    }
  }
  return mask;
}

/// Largest foreground component with its moments centroid, hull and bounds.
/// The mask may be trimmed to a window starting at `mask_origin`.
struct Silhouette {
  BinaryMask mask;
  int mask_x0 = 0;
  int mask_y0 = 0;
  Vec2 centroid;
  Polygon hull;
  Rect bbox;

  bool contains(int x, int y) const {
    const int lx = x - mask_x0, ly = y - mask_y0;
    return mask.in_bounds(lx, ly) && mask.get(lx, ly);
  }

  /// Copy whose mask only covers the bounding box.
  Silhouette trimmed() const {
    Silhouette s;
    s.centroid = centroid;
    s.hull = hull;
    s.bbox = bbox;
    const int x0 = static_cast<int>(bbox.x_min), y0 = static_cast<int>(bbox.y_min);
    const int x1 = static_cast<int>(bbox.x_max), y1 = static_cast<int>(bbox.y_max);
    s.mask_x0 = x0;
    s.mask_y0 = y0;
    s.mask = BinaryMask(x1 - x0 + 1, y1 - y0 + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) s.mask.set(x - x0, y - y0, contains(x, y));
    return s;
  }
};

struct MorphologyParams {
  int kernel_w = 2;
  int kernel_h = 2;
  int erode_iterations = 1;
  int dilate_iterations = 10;
};

/// Erode, dilate, keep the largest component. std::nullopt is the
/// no-subject marker.
inline std::optional<Silhouette> extract_silhouette(const BinaryMask& mask, const MorphologyParams& p = {}) {
  BinaryMask m = erode(mask, p.kernel_w, p.kernel_h, p.erode_iterations);
  m = dilate(m, p.kernel_w, p.kernel_h, p.dilate_iterations);
  m = largest_component(m);
  if (m.empty()) return std::nullopt;
  Silhouette s;
  s.centroid = centroid(m);
  s.hull = convex_hull(m);
  s.bbox = bounding_box(s.hull);
  s.mask = std::move(m);
  return s;
}

struct Hsv {
  double h;  // degrees [0, 360)
  double s;  // [0, 1]
  double v;  // [0, 1]
};

inline Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == r) h = 60.0 * std::fmod((g - b) / d, 6.0);
    else if (mx == g) h = 60.0 * ((b - r) / d + 2.0);
    else h = 60.0 * ((r - g) / d + 4.0);
    if (h < 0.0) h += 360.0;
  }
  return {h, mx > 0.0 ? d / mx : 0.0, mx};
}

struct TrampolineDetectParams {
  double hue_lo = 170.0;
  double hue_hi = 260.0;
  double saturation_floor = 0.25;
  double row_coverage = 0.30;
};

/// Topmost row where at least `row_coverage` of the pixels have a hue inside
/// [hue_lo, hue_hi] (wrapping through 0 when hue_lo > hue_hi) and saturation
/// above the floor. Expects RGB channel order.
inline TrampolineLine detect_trampoline(const Frame& frame, const TrampolineDetectParams& p = {}) {
  if (frame.channels < 3) throw InputError("trampoline detection needs a colour frame");
  auto in_window = [&](double h) {
    return p.hue_lo <= p.hue_hi ? (h >= p.hue_lo && h <= p.hue_hi) : (h >= p.hue_lo || h <= p.hue_hi);
  };
  const int need = static_cast<int>(std::ceil(p.row_coverage * frame.width));
  for (int y = 0; y < frame.height; ++y) {
    int hits = 0;
    for (int x = 0; x < frame.width; ++x) {
      const std::uint8_t* px = frame.at(x, y);
      const Hsv hsv = rgb_to_hsv(px[0], px[1], px[2]);
      if (hsv.s > p.saturation_floor && in_window(hsv.h)) ++hits;
    }
    if (hits >= need && hits > 0) return {y, LineSource::Detected};
  }
  throw PipelineError("no row matches the trampoline hue window; place the line manually");
}

inline TrampolineLine detect_trampoline(const Frame& frame, double hue_lo, double hue_hi) {
  TrampolineDetectParams p;
  p.hue_lo = hue_lo;
  p.hue_hi = hue_hi;
  return detect_trampoline(frame, p);
}

/// True iff the bottom of the box reaches within `margin` rows of the bed.
inline bool contact_detect(const Rect& bbox, const TrampolineLine& line, double margin) {
  return bbox.y_max >= line.top_row - margin;
}

struct AthleteCrop {
  Frame image;
  int origin_x = 0;  // frame coordinates of the crop's top-left pixel
  int origin_y = 0;
};

inline std::pair<int, int> crop_origin(Vec2 centre, int side) {
  return {static_cast<int>(std::lround(centre.x - side / 2.0)), static_cast<int>(std::lround(centre.y - side / 2.0))};
}

/// Square crop centred on the silhouette centroid. Samples outside the frame
/// replicate the nearest edge pixel. Pixels outside the silhouette are box
/// blurred with the given radius and scaled by `darken`.
inline AthleteCrop prepare_crop(const Frame& frame, const Silhouette& sil, int side, int blur_radius, double darken) {
  if (side <= 0) throw InputError("crop side must be positive");
  if (blur_radius < 0) throw InputError("blur radius must be non-negative");
  const auto [x0, y0] = crop_origin(sil.centroid, side);
  const int ch = frame.channels;
  AthleteCrop out{Frame(side, side, ch), x0, y0};
  out.image.index = frame.index;
  std::vector<std::uint8_t> fg(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    const int sy = std::clamp(y0 + y, 0, frame.height - 1);
    for (int x = 0; x < side; ++x) {
      const int sx = std::clamp(x0 + x, 0, frame.width - 1);
      std::copy_n(frame.at(sx, sy), ch, out.image.at(x, y));
      const bool inside = (x0 + x) >= 0 && (x0 + x) < frame.width && (y0 + y) >= 0 && (y0 + y) < frame.height;
      fg[static_cast<std::size_t>(y) * side + x] = inside && sil.contains(x0 + x, y0 + y) ? 1 : 0;
    }
  }
  if (blur_radius == 0 && darken == 1.0) return out;

  // Separable box blur with replicated borders, in integer sums.
  const int r = blur_radius;
  const int win = 2 * r + 1;
  std::vector<std::uint32_t> horiz(out.image.pixels.size());
  for (int y = 0; y < side; ++y) {
    for (int c = 0; c < ch; ++c) {
      std::uint32_t sum = 0;
      for (int k = -r; k <= r; ++k) sum += out.image.at(std::clamp(k, 0, side - 1), y)[c];
      for (int x = 0; x < side; ++x) {
        horiz[(static_cast<std::size_t>(y) * side + x) * ch + c] = sum;
        sum -= out.image.at(std::clamp(x - r, 0, side - 1), y)[c];
        sum += out.image.at(std::clamp(x + r + 1, 0, side - 1), y)[c];
      }
    }
  }
  const double scale = darken / (static_cast<double>(win) * win);
  for (int x = 0; x < side; ++x) {
    for (int c = 0; c < ch; ++c) {
      auto h_at = [&](int y) { return horiz[(static_cast<std::size_t>(std::clamp(y, 0, side - 1)) * side + x) * ch + c]; };
      std::uint64_t sum = 0;
      for (int k = -r; k <= r; ++k) sum += h_at(k);
      for (int y = 0; y < side; ++y) {
        if (!fg[static_cast<std::size_t>(y) * side + x]) {
          const double v = std::round(static_cast<double>(sum) * scale);
          out.image.at(x, y)[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
        sum -= h_at(y - r);
        sum += h_at(y + r + 1);
      }
    }
  }
  return out;
}

/// Largest bounding-box side (max of width and height) over a routine.
inline double max_bbox_side(std::span<const Rect> boxes) {
  if (boxes.empty()) throw InputError("max_bbox_side needs at least one box");
  double best = 0.0;
  for (const Rect& r : boxes) best = std::max(best, r.side());
  return best;
}

inline double max_bbox_side(std::span<const Silhouette> routine) {
  if (routine.empty()) throw InputError("max_bbox_side needs at least one silhouette");
  double best = 0.0;
  for (const Silhouette& s : routine) best = std::max(best, s.bbox.side());
  return best;
}

}  // namespace tramp
