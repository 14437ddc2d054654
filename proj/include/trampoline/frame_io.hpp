#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <png.h>
#include <nlohmann/json.hpp>

#include "trampoline/error.hpp"
#include "trampoline/io.hpp"
#include "trampoline/raster.hpp"

namespace tramp {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Reads an 8-bit PNG as RGB (palette, grey and alpha are converted).
inline Frame read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw InputError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw InputError(path.string() + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  Frame frame;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("corrupt PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_bit_depth(png, info) < 8) png_set_expand(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  frame.width = static_cast<int>(png_get_image_width(png, info));
  frame.height = static_cast<int>(png_get_image_height(png, info));
  frame.channels = 3;
  frame.pixels.resize(static_cast<std::size_t>(frame.width) * frame.height * 3);
  rows.resize(frame.height);
  for (int y = 0; y < frame.height; ++y) rows[y] = frame.pixels.data() + static_cast<std::size_t>(y) * frame.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return frame;
}

/// Encodes an RGB frame as PNG bytes.
inline std::string encode_png(const Frame& frame) {
  if (!frame.valid() || frame.channels != 3) throw InputError("PNG export needs a valid RGB frame");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  std::string out;
  std::vector<png_bytep> rows(frame.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_IHDR(png, info, frame.width, frame.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 3);
  png_write_info(png, info);
  for (int y = 0; y < frame.height; ++y)
    rows[y] = const_cast<png_bytep>(frame.pixels.data() + static_cast<std::size_t>(y) * frame.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline void write_png(const std::filesystem::path& path, const Frame& frame) { write_file_atomic(path, encode_png(frame)); }

/// Random-access source of routine frames.
class FrameSource {
public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual double fps() const = 0;
  virtual Frame read(std::size_t i) const = 0;
};

/// Directory of sequentially numbered PNG images (sorted by the numeric part
/// of the file name, then by name).
class PngDirectorySource : public FrameSource {
public:
  explicit PngDirectorySource(const std::filesystem::path& dir, double fps = 30.0) : fps_(fps) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw InputError("frames directory not found: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png") files_.push_back(e.path());
    }
    if (files_.empty()) throw InputError("no PNG frames in " + dir.string());
    auto number = [](const fs::path& p) {
      const std::string s = p.stem().string();
      std::string digits;
      for (char c : s)
        if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
      return digits.empty() ? 0ULL : std::stoull(digits.substr(0, 18));
    };
    std::sort(files_.begin(), files_.end(), [&](const fs::path& a, const fs::path& b) {
      const auto na = number(a), nb = number(b);
      return na != nb ? na < nb : a.filename() < b.filename();
    });
  }
  std::size_t size() const override { return files_.size(); }
  double fps() const override { return fps_; }
  Frame read(std::size_t i) const override {
    Frame f = read_png(files_.at(i));
    f.index = static_cast<int>(i);
    return f;
  }

private:
  std::vector<std::filesystem::path> files_;
  double fps_;
};

struct RawStreamHeader {
  int width = 0;
  int height = 0;
  double fps = 30.0;
  std::size_t frame_count = 0;
};

inline nlohmann::json to_json(const RawStreamHeader& h) {
  return {{"width", h.width}, {"height", h.height}, {"fps", h.fps}, {"frame_count", h.frame_count}};
}

/// Raw 8-bit RGB planar stream (per frame: the R plane, then G, then B) with a
/// JSON sidecar {width, height, fps, frame_count}.
class RawRgbSource : public FrameSource {
public:
  RawRgbSource(const std::filesystem::path& stream, const std::filesystem::path& sidecar) : path_(stream) {
    const nlohmann::json j = read_json_file(sidecar);
    try {
      header_.width = j.at("width").get<int>();
      header_.height = j.at("height").get<int>();
      header_.fps = j.value("fps", 30.0);
      header_.frame_count = j.at("frame_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError("malformed raw-stream header " + sidecar.string() + ": " + e.what());
    }
    if (header_.width <= 0 || header_.height <= 0 || !(header_.fps > 0))
      throw InputError("raw-stream header has non-positive dimensions or fps");
    const auto need = frame_bytes() * header_.frame_count;
    std::error_code ec;
    const auto have = std::filesystem::file_size(stream, ec);
    if (ec) throw InputError("cannot open " + stream.string());
    if (have < need) throw InputError("raw stream is shorter than its header declares");
    if (header_.frame_count == 0) throw InputError("raw stream has no frames");
  }
  std::size_t size() const override { return header_.frame_count; }
  double fps() const override { return header_.fps; }
  const RawStreamHeader& header() const { return header_; }

  Frame read(std::size_t i) const override {
    if (i >= header_.frame_count) throw InputError("frame index out of range");
    std::ifstream in(path_, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(i * frame_bytes()));
    std::vector<std::uint8_t> planes(frame_bytes());
    in.read(reinterpret_cast<char*>(planes.data()), static_cast<std::streamsize>(planes.size()));
    if (!in) throw InputError("short read in raw stream");
    Frame f(header_.width, header_.height);
    f.index = static_cast<int>(i);
    const std::size_t n = static_cast<std::size_t>(header_.width) * header_.height;
    for (std::size_t p = 0; p < n; ++p)
      for (int c = 0; c < 3; ++c) f.pixels[p * 3 + c] = planes[c * n + p];
    return f;
  }

private:
  std::size_t frame_bytes() const { return static_cast<std::size_t>(header_.width) * header_.height * 3; }
  std::filesystem::path path_;
  RawStreamHeader header_;
};

/// Appends one frame to a planar raw stream.
inline void append_raw_planar(std::ostream& out, const Frame& f) {
  const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
  std::vector<std::uint8_t> planes(n * 3);
  for (std::size_t p = 0; p < n; ++p)
    for (int c = 0; c < 3; ++c) planes[c * n + p] = f.pixels[p * 3 + c];
  out.write(reinterpret_cast<const char*>(planes.data()), static_cast<std::streamsize>(planes.size()));
}

/// A directory of PNGs, or a `.rgb` stream whose sidecar shares its stem.
inline std::unique_ptr<FrameSource> open_frames(const std::filesystem::path& path, double fps = 30.0) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) return std::make_unique<PngDirectorySource>(path, fps);
  if (path.extension() == ".rgb") {
    fs::path side = path;
    side.replace_extension(".json");
    return std::make_unique<RawRgbSource>(path, side);
  }
  if (!fs::exists(path)) throw InputError("frames not found: " + path.string());
  throw InputError("frames must be a PNG directory or a .rgb stream: " + path.string());
}

}  // namespace tramp
