#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trampoline/body_extraction.hpp"
#include "trampoline/config.hpp"
#include "trampoline/features.hpp"
#include "trampoline/frame_io.hpp"
#include "trampoline/io.hpp"
#include "trampoline/pose.hpp"
#include "trampoline/segmentation.hpp"

namespace tramp {

/// What body extraction saw in one frame.
struct FrameObservation {
  bool present = false;  // false is the no-subject marker
  Vec2 centroid;
  Rect bbox;
};

struct SegmentRecord {
  BounceSegment segment;
  std::optional<std::pair<std::size_t, std::size_t>> airborne;  // absent when in contact throughout
};

/// Everything the extract stage produces for one routine, except crops.
struct RoutineExtraction {
  std::string id;
  std::string source;
  double fps = 30.0;
  int width = 0;
  int height = 0;
  TrampolineLine line;
  std::vector<FrameObservation> frames;
  std::vector<bool> contact;
  CentroidTrack track;
  std::vector<SegmentRecord> segments;
  std::string segmentation_error;  // set when segmentation failed
  int crop_side = 0;
};

/// Contact flags, track, segments and airborne ranges from the per-frame
/// observations and the current trampoline line. Frames without a subject
/// count as contact (the athlete is hidden by the bed).
inline void derive_segments(RoutineExtraction& r, const PipelineConfig& cfg) {
  r.contact.assign(r.frames.size(), true);
  r.track = CentroidTrack{};
  r.track.fps = r.fps;
  r.track.reference_row = r.line.top_row;
  r.track.missing.assign(r.frames.size(), false);
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const auto& f = r.frames[i];
    r.track.samples.push_back(f.present ? f.centroid : Vec2{});
    r.track.missing[i] = !f.present;
    if (f.present) r.contact[i] = contact_detect(f.bbox, r.line, cfg.contact_margin);
  }
  r.segments.clear();
  r.segmentation_error.clear();
  try {
    const auto minima = find_minima(r.track, cfg.minima);
    for (const auto& s : segment_routine(r.track, minima, cfg.apex_threshold)) {
      SegmentRecord rec{s, std::nullopt};
      try {
        rec.airborne = airborne_range(s, r.contact);
      } catch (const PipelineError&) {
      }
      r.segments.push_back(rec);
    }
  } catch (const Error& e) {
    r.segmentation_error = e.what();
  }
}

struct ExtractOptions {
  std::string id = "routine";
  std::optional<TrampolineLine> line;        // overrides detection
  std::optional<std::filesystem::path> crops_dir;  // write crops here when set
};

/// Body extraction and segmentation over a whole routine. The background is
/// bootstrapped from the temporal median of evenly spaced frames, then kept
/// up to date with a running average that skips the athlete's pixels.
inline RoutineExtraction extract_routine(const FrameSource& src, const PipelineConfig& cfg, const ExtractOptions& opt = {}) {
  const std::size_t n = src.size();
  if (n == 0) throw InputError("no frames to process");
  RoutineExtraction r;
  r.id = opt.id;
  r.fps = src.fps();

  std::vector<Frame> sample;
  const std::size_t want = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, cfg.background.bootstrap_frames)));
  for (std::size_t k = 0; k < want; ++k) sample.push_back(src.read(want == 1 ? 0 : k * (n - 1) / (want - 1)));
  BackgroundModel model = BackgroundModel::from_median(sample, cfg.background.learning_rate);
  r.width = model.width();
  r.height = model.height();
  r.line = opt.line ? *opt.line : detect_trampoline(model.image(), cfg.trampoline);
  if (r.line.top_row >= r.height) throw InputError("trampoline line lies below the frame");
  sample.clear();

  std::vector<Silhouette> silhouettes(n);
  r.frames.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Frame f = src.read(i);
    const BinaryMask mask = foreground_mask(model, f, cfg.background.threshold, r.line);
    const auto sil = extract_silhouette(mask, cfg.morphology);
    if (sil) {
      r.frames[i] = {true, sil->centroid, sil->bbox};
      model.update(f, sil->mask);
      if (opt.crops_dir) silhouettes[i] = sil->trimmed();
    } else {
      model.update(f);
    }
  }

  std::vector<Rect> boxes;
  for (const auto& f : r.frames)
    if (f.present) boxes.push_back(f.bbox);
  r.crop_side = boxes.empty() ? 0 : static_cast<int>(std::ceil(max_bbox_side(boxes))) + 1;
  derive_segments(r, cfg);

  if (opt.crops_dir && r.crop_side > 0) {
    namespace fs = std::filesystem;
    fs::create_directories(*opt.crops_dir);
    nlohmann::json origins = nlohmann::json::object();
    char name[32];
    for (std::size_t i = 0; i < n; ++i) {
      if (!r.frames[i].present || r.contact[i]) continue;
      const AthleteCrop c = prepare_crop(src.read(i), silhouettes[i], r.crop_side, cfg.crop.blur_radius, cfg.crop.darken);
      std::snprintf(name, sizeof name, "%06zu.png", i);
      write_png(*opt.crops_dir / name, c.image);
      origins[std::to_string(i)] = {c.origin_x, c.origin_y};
    }
    write_json_atomic(*opt.crops_dir / "origins.json", origins);
  }
  return r;
}

inline std::string to_string(LineSource s) { return s == LineSource::Detected ? "detected" : "user_adjusted"; }

inline nlohmann::json line_json(const TrampolineLine& l) { return {{"top_row", l.top_row}, {"source", to_string(l.source)}}; }

inline TrampolineLine line_from_json(const nlohmann::json& j) {
  TrampolineLine l;
  l.top_row = j.at("top_row").get<int>();
  l.source = j.value("source", std::string("detected")) == "user_adjusted" ? LineSource::UserAdjusted : LineSource::Detected;
  return l;
}

/// {routine_id, segments: [{start, end, apex, apex_height, is_routine_jump, airborne}]}
inline nlohmann::json segments_json(const RoutineExtraction& r) {
  nlohmann::json segs = nlohmann::json::array();
  for (std::size_t k = 0; k < r.segments.size(); ++k) {
    const auto& s = r.segments[k];
    nlohmann::json e{{"index", k},
                     {"start", s.segment.start_frame},
                     {"end", s.segment.end_frame},
                     {"apex", s.segment.apex_frame},
                     {"apex_height", s.segment.apex_height},
                     {"is_routine_jump", s.segment.is_routine_jump},
                     {"airborne", nullptr}};
    if (s.airborne) e["airborne"] = {s.airborne->first, s.airborne->second};
    segs.push_back(std::move(e));
  }
  nlohmann::json j{{"routine_id", r.id}, {"trampoline_line", line_json(r.line)}, {"segments", std::move(segs)}};
  if (!r.segmentation_error.empty()) j["error"] = r.segmentation_error;
  return j;
}

inline std::vector<SegmentRecord> segments_from_json(const nlohmann::json& j) {
  std::vector<SegmentRecord> out;
  try {
    for (const auto& e : j.at("segments")) {
      SegmentRecord s;
      s.segment.start_frame = e.at("start").get<std::size_t>();
      s.segment.end_frame = e.at("end").get<std::size_t>();
      s.segment.apex_frame = e.at("apex").get<std::size_t>();
      s.segment.apex_height = e.value("apex_height", 0.0);
      s.segment.is_routine_jump = e.value("is_routine_jump", true);
      if (e.contains("airborne") && !e.at("airborne").is_null())
        s.airborne = std::pair{e.at("airborne").at(0).get<std::size_t>(), e.at("airborne").at(1).get<std::size_t>()};
      out.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed segments document: ") + e.what());
  }
  return out;
}

/// {fps, reference_row, frames: [{centroid, bbox} | null], contact: [...]}
inline nlohmann::json track_json(const RoutineExtraction& r) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : r.frames) {
    if (!f.present) {
      frames.push_back(nullptr);
      continue;
    }
    frames.push_back({{"centroid", {f.centroid.x, f.centroid.y}},
                      {"bbox", {f.bbox.x_min, f.bbox.y_min, f.bbox.x_max, f.bbox.y_max}}});
  }
  return {{"fps", r.fps}, {"reference_row", r.line.top_row}, {"frames", std::move(frames)}, {"contact", r.contact}};
}

inline std::vector<FrameObservation> observations_from_json(const nlohmann::json& j) {
  std::vector<FrameObservation> out;
  try {
    for (const auto& f : j.at("frames")) {
      FrameObservation o;
      if (!f.is_null()) {
        o.present = true;
        o.centroid = {f.at("centroid").at(0).get<double>(), f.at("centroid").at(1).get<double>()};
        const auto& b = f.at("bbox");
        o.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
      }
      out.push_back(o);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed track document: ") + e.what());
  }
  return out;
}

inline nlohmann::json routine_json(const RoutineExtraction& r, const PipelineConfig& cfg) {
  return {{"id", r.id},
          {"source", r.source},
          {"fps", r.fps},
          {"width", r.width},
          {"height", r.height},
          {"frame_count", r.frames.size()},
          {"trampoline_line", line_json(r.line)},
          {"crop_side", r.crop_side},
          {"config", to_json(cfg)}};
}

/// Writes routine.json, track.json and segments.json into `dir`.
inline void write_extraction(const std::filesystem::path& dir, const RoutineExtraction& r, const PipelineConfig& cfg) {
  write_json_atomic(dir / "track.json", track_json(r));
  write_json_atomic(dir / "segments.json", segments_json(r));
  write_json_atomic(dir / "routine.json", routine_json(r, cfg));
}

/// Rebuilds an extraction from the files written by write_extraction.
inline RoutineExtraction read_extraction(const std::filesystem::path& dir) {
  const auto routine = read_json_file(dir / "routine.json");
  const auto track = read_json_file(dir / "track.json");
  RoutineExtraction r;
  try {
    r.id = routine.at("id").get<std::string>();
    r.source = routine.value("source", std::string());
    r.fps = routine.at("fps").get<double>();
    r.width = routine.value("width", 0);
    r.height = routine.value("height", 0);
    r.line = line_from_json(routine.at("trampoline_line"));
    r.crop_side = routine.value("crop_side", 0);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed routine document: ") + e.what());
  }
  r.frames = observations_from_json(track);
  return r;
}

/// Feature trajectory of each routine jump's airborne frames. Poses are
/// smoothed over the whole routine first; the twist normaliser is the
/// routine-wide maximum shoulder separation. Entries are empty for
/// in/out-bounces and segments without airborne poses.
inline std::vector<std::optional<FeatureTrajectory>> routine_features(const PoseSequence& poses,
                                                                      const std::vector<SegmentRecord>& segments,
                                                                      const PipelineConfig& cfg,
                                                                      const std::string& routine_id = "routine") {
  if (poses.coords != CoordFrame::Full) throw InputError("poses must be in full-frame coordinates");
  validate(poses);
  const PoseSequence smooth = smooth_poses(poses, cfg.pose_smooth_window, cfg.confidence_floor);
  const double sep_max = routine_shoulder_span(smooth, cfg.confidence_floor);
  std::vector<std::optional<FeatureTrajectory>> out(segments.size());
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& s = segments[k];
    if (!s.segment.is_routine_jump || !s.airborne) continue;
    PoseSequence part;
    part.fps = smooth.fps;
    for (const auto& f : smooth.frames)
      if (f.frame >= static_cast<int>(s.airborne->first) && f.frame <= static_cast<int>(s.airborne->second))
        part.frames.push_back(f);
    if (part.size() < 2) continue;
    FeatureTrajectory t = extract_features(part, sep_max, cfg.confidence_floor);
    t.skill_ref = routine_id + ":" + std::to_string(k);
    out[k] = std::move(t);
  }
  return out;
}

}  // namespace tramp
