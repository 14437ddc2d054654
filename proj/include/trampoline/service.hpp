#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "trampoline/catalog.hpp"
#include "trampoline/classifier.hpp"
#include "trampoline/config.hpp"
#include "trampoline/features.hpp"
#include "trampoline/io.hpp"
#include "trampoline/pipeline.hpp"

namespace tramp {

/// Data directory layout shared by the CLI and the service:
///   routines/<id>/routine.json, track.json, segments.json, labels.json
///   routines/<id>/crops/NNNNNN.png, crops/origins.json
///   routines/<id>/features/<segment index>.json
///   refset.json
///   evaluation/report.json (written by `evaluate --out <data>/evaluation`)
struct DataLayout {
  std::filesystem::path root;

  std::filesystem::path routines() const { return root / "routines"; }
  std::filesystem::path routine(const std::string& id) const { return routines() / id; }
  std::filesystem::path refset() const { return root / "refset.json"; }
  std::filesystem::path evaluation() const { return root / "evaluation" / "report.json"; }
  std::filesystem::path crop(const std::string& id, std::size_t frame) const {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.png", frame);
    return routine(id) / "crops" / name;
  }
  std::filesystem::path features(const std::string& id, std::size_t segment) const {
    return routine(id) / "features" / (std::to_string(segment) + ".json");
  }
};

/// FNV-1a over the given file contents, as a quoted ETag.
inline std::string content_revision(std::initializer_list<std::filesystem::path> files) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& f : files) {
    std::string text;
    if (std::filesystem::exists(f)) text = read_file(f);
    for (unsigned char c : text) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "\"%016llx\"", static_cast<unsigned long long>(h));
  return buf;
}

class HttpError : public Error {
public:
  HttpError(int status, const std::string& msg) : Error(msg), status_(status) {}
  int status() const noexcept { return status_; }

private:
  int status_;
};

/// HTTP index over a data directory. Readers share a lock; writers take the
/// routine's (or the reference set's) lock exclusively, and every file is
/// replaced by atomic rename.
class Service {
public:
  Service(std::filesystem::path data_dir, PipelineConfig cfg = {}) : layout_{std::move(data_dir)}, cfg_(std::move(cfg)) {}

  void install(httplib::Server& srv) {
    const std::string id = R"(([A-Za-z0-9_.\-]+))";
    srv.Get("/api/catalog", wrap([](const httplib::Request&, httplib::Response& res) { send_json(res, catalog_json()); }));
    srv.Get("/api/routines", wrap([this](const httplib::Request&, httplib::Response& res) { list_routines(res); }));
    srv.Get("/api/routines/" + id, wrap([this](const httplib::Request& q, httplib::Response& res) { get_routine(q, res); }));
    srv.Get("/api/routines/" + id + "/segments",
            wrap([this](const httplib::Request& q, httplib::Response& res) { get_segments(q, res); }));
    srv.Get("/api/routines/" + id + R"(/frames/(\d+))",
            wrap([this](const httplib::Request& q, httplib::Response& res) { get_frame(q, res); }));
    srv.Get("/api/routines/" + id + R"(/frames/(\d+)/meta)",
            wrap([this](const httplib::Request& q, httplib::Response& res) { get_frame_meta(q, res); }));
    srv.Put("/api/routines/" + id + "/trampoline-line",
            wrap([this](const httplib::Request& q, httplib::Response& res) { put_line(q, res); }));
    srv.Post(R"(/api/segments/([A-Za-z0-9_.\-]+):(\d+)/label)",
             wrap([this](const httplib::Request& q, httplib::Response& res) { post_label(q, res); }));
    srv.Post(R"(/api/segments/([A-Za-z0-9_.\-]+):(\d+)/classify)",
             wrap([this](const httplib::Request& q, httplib::Response& res) { post_classify(q, res); }));
    srv.Get("/api/reference-set", wrap([this](const httplib::Request&, httplib::Response& res) { get_refset(res); }));
    srv.Delete("/api/reference-set/" + id,
               wrap([this](const httplib::Request& q, httplib::Response& res) { delete_ref(q, res); }));
    srv.Get("/api/evaluation/latest", wrap([this](const httplib::Request&, httplib::Response& res) { get_evaluation(res); }));
    const auto ui = layout_.root / "ui";
    if (std::filesystem::is_directory(ui)) srv.set_mount_point("/", ui.string());
  }

  const DataLayout& layout() const { return layout_; }

private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static Handler wrap(Handler h) {
    return [h](const httplib::Request& q, httplib::Response& res) {
      try {
        h(q, res);
      } catch (const HttpError& e) {
        send_json(res, {{"error", e.what()}}, e.status());
      } catch (const UnknownCodeError& e) {
        send_json(res, {{"error", e.what()}}, 422);
      } catch (const InputError& e) {
        send_json(res, {{"error", e.what()}}, 400);
      } catch (const std::exception& e) {
        send_json(res, {{"error", e.what()}}, 500);
      }
    };
  }

  std::shared_mutex& routine_mutex(const std::string& id) {
    std::lock_guard lk(index_mu_);
    auto& m = routine_mu_[id];
    if (!m) m = std::make_unique<std::shared_mutex>();
    return *m;
  }

  void require_routine(const std::string& id) const {
    if (!std::filesystem::exists(layout_.routine(id) / "routine.json")) throw HttpError(404, "unknown routine " + id);
  }

  std::string routine_revision(const std::string& id) const {
    const auto dir = layout_.routine(id);
    return content_revision({dir / "routine.json", dir / "segments.json", dir / "labels.json"});
  }

  std::string refset_revision() const { return content_revision({layout_.refset()}); }

  static void check_revision(const httplib::Request& q, const std::string& current) {
    if (q.has_header("If-Match")) {
      const std::string want = q.get_header_value("If-Match");
      if (want != "*" && want != current) throw HttpError(409, "stale revision");
    }
  }

  static nlohmann::json parse_body(const httplib::Request& q) {
    try {
      return q.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(q.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("request body is not JSON: ") + e.what());
    }
  }

  nlohmann::json labels(const std::string& id) const {
    const auto p = layout_.routine(id) / "labels.json";
    return std::filesystem::exists(p) ? read_json_file(p) : nlohmann::json::object();
  }

  void list_routines(httplib::Response& res) {
    nlohmann::json out = nlohmann::json::array();
    if (std::filesystem::is_directory(layout_.routines())) {
      std::vector<std::string> ids;
      for (const auto& e : std::filesystem::directory_iterator(layout_.routines()))
        if (std::filesystem::exists(e.path() / "routine.json")) ids.push_back(e.path().filename().string());
      std::sort(ids.begin(), ids.end());
      for (const auto& id : ids) {
        std::shared_lock lk(routine_mutex(id));
        const auto r = read_json_file(layout_.routine(id) / "routine.json");
        out.push_back({{"id", id},
                       {"frame_count", r.value("frame_count", 0)},
                       {"fps", r.value("fps", 30.0)},
                       {"trampoline_line", r.value("trampoline_line", nlohmann::json())},
                       {"revision", routine_revision(id)}});
      }
    }
    send_json(res, out);
  }

  void get_routine(const httplib::Request& q, httplib::Response& res) {
    const std::string id = q.matches[1];
    std::shared_lock lk(routine_mutex(id));
    require_routine(id);
    nlohmann::json r = read_json_file(layout_.routine(id) / "routine.json");
    r["labels"] = labels(id);
    r["revision"] = routine_revision(id);
    res.set_header("ETag", r["revision"].get<std::string>());
    send_json(res, r);
  }

  nlohmann::json segments_view(const std::string& id) const {
    nlohmann::json s = read_json_file(layout_.routine(id) / "segments.json");
    const auto track = read_json_file(layout_.routine(id) / "track.json");
    s["contact"] = track.at("contact");
    s["labels"] = labels(id);
    s["revision"] = routine_revision(id);
    return s;
  }

  void get_segments(const httplib::Request& q, httplib::Response& res) {
    const std::string id = q.matches[1];
    std::shared_lock lk(routine_mutex(id));
    require_routine(id);
    const auto s = segments_view(id);
    res.set_header("ETag", s["revision"].get<std::string>());
    send_json(res, s);
  }

  void get_frame(const httplib::Request& q, httplib::Response& res) {
    const std::string id = q.matches[1];
    const std::size_t n = std::stoull(q.matches[2]);
    std::shared_lock lk(routine_mutex(id));
    require_routine(id);
    const auto p = layout_.crop(id, n);
    if (!std::filesystem::exists(p)) throw HttpError(404, "no crop for frame " + std::to_string(n));
    res.set_content(read_file(p), "image/png");
  }

  void get_frame_meta(const httplib::Request& q, httplib::Response& res) {
    const std::string id = q.matches[1];
    const std::size_t n = std::stoull(q.matches[2]);
    std::shared_lock lk(routine_mutex(id));
    require_routine(id);
    const auto track = read_json_file(layout_.routine(id) / "track.json");
    const auto& frames = track.at("frames");
    if (n >= frames.size()) throw HttpError(404, "frame " + std::to_string(n) + " out of range");
    nlohmann::json meta{{"frame", n},
                        {"observation", frames[n]},
                        {"contact", track.at("contact")[n]},
                        {"reference_row", track.at("reference_row")},
                        {"origin", nullptr}};
    const auto origins_path = layout_.routine(id) / "crops" / "origins.json";
    if (std::filesystem::exists(origins_path)) {
      const auto origins = read_json_file(origins_path);
      if (origins.contains(std::to_string(n))) meta["origin"] = origins[std::to_string(n)];
    }
    send_json(res, meta);
  }

  void put_line(const httplib::Request& q, httplib::Response& res) {
    const std::string id = q.matches[1];
    const auto body = parse_body(q);
    if (!body.contains("top_row") || !body["top_row"].is_number_integer())
      throw InputError("body must contain an integer top_row");
    std::unique_lock lk(routine_mutex(id));
    require_routine(id);
    check_revision(q, routine_revision(id));
    const auto dir = layout_.routine(id);
    RoutineExtraction r = read_extraction(dir);
    const int row = body["top_row"].get<int>();
    if (row < 0 || (r.height > 0 && row >= r.height)) throw InputError("top_row outside the frame");
    r.line = set_trampoline_line(row);
    const nlohmann::json routine = read_json_file(dir / "routine.json");
    PipelineConfig cfg = routine.contains("config") ? config_from_json(routine["config"]) : cfg_;
    derive_segments(r, cfg);
    write_extraction(dir, r, cfg);
    const auto s = segments_view(id);
    res.set_header("ETag", s["revision"].get<std::string>());
    send_json(res, s);
  }

  static std::pair<std::string, std::size_t> segment_id(const httplib::Request& q) {
    return {q.matches[1], std::stoull(q.matches[2])};
  }

  FeatureTrajectory segment_features(const std::string& id, std::size_t k) const {
    const auto p = layout_.features(id, k);
    if (!std::filesystem::exists(p)) throw HttpError(404, "no features for segment " + id + ":" + std::to_string(k));
    return trajectory_from_json(read_json_file(p));
  }

  static std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  void post_label(const httplib::Request& q, httplib::Response& res) {
    const auto [id, k] = segment_id(q);
    const auto body = parse_body(q);
    if (!body.contains("code") || !body["code"].is_string()) throw HttpError(422, "body must contain a skill code");
    const SkillCode code = parse_code(body["code"].get<std::string>());
    const bool add = body.value("add_to_reference_set", false);

    std::unique_lock lk(routine_mutex(id));
    require_routine(id);
    check_revision(q, routine_revision(id));
    const auto segs = segments_from_json(read_json_file(layout_.routine(id) / "segments.json"));
    if (k >= segs.size()) throw HttpError(404, "unknown segment " + id + ":" + std::to_string(k));

    nlohmann::json out{{"segment", id + ":" + std::to_string(k)}, {"code", code.str()}, {"reference_entry", nullptr}};
    if (add) {
      ReferenceSkill ref{"", code, segment_features(id, k), {id, body.value("athlete_id", std::string()), now_utc()}};
      ref.trajectory.label = code.str();
      std::unique_lock rlk(refset_mu_);
      if (q.has_header("If-Match-Reference-Set")) {
        const std::string want = q.get_header_value("If-Match-Reference-Set");
        if (want != refset_revision()) throw HttpError(409, "stale reference set revision");
      }
      ReferenceSet set = std::filesystem::exists(layout_.refset()) ? load_reference_set(layout_.refset()) : ReferenceSet{};
      out["reference_entry"] = set.add(std::move(ref)).id;
      save_reference_set(layout_.refset(), set);
      out["reference_set_revision"] = refset_revision();
    }
    nlohmann::json l = labels(id);
    l[std::to_string(k)] = code.str();
    write_json_atomic(layout_.routine(id) / "labels.json", l);
    out["revision"] = routine_revision(id);
    send_json(res, out);
  }

  void post_classify(const httplib::Request& q, httplib::Response& res) {
    const auto [id, k] = segment_id(q);
    FeatureTrajectory f;
    {
      std::shared_lock lk(routine_mutex(id));
      require_routine(id);
      f = segment_features(id, k);
    }
    std::shared_lock rlk(refset_mu_);
    if (!std::filesystem::exists(layout_.refset())) throw HttpError(409, "reference set is empty");
    const ReferenceSet set = load_reference_set(layout_.refset());
    if (set.empty()) throw HttpError(409, "reference set is empty");
    nlohmann::json out = to_json(classify(f, set));
    out["segment"] = id + ":" + std::to_string(k);
    send_json(res, out);
  }

  void get_refset(httplib::Response& res) {
    std::shared_lock lk(refset_mu_);
    nlohmann::json j = std::filesystem::exists(layout_.refset()) ? read_json_file(layout_.refset()) : to_json(ReferenceSet{});
    const std::string rev = refset_revision();
    j["revision"] = rev;
    res.set_header("ETag", rev);
    send_json(res, j);
  }

  void delete_ref(const httplib::Request& q, httplib::Response& res) {
    const std::string entry = q.matches[1];
    std::unique_lock lk(refset_mu_);
    check_revision(q, refset_revision());
    if (!std::filesystem::exists(layout_.refset())) throw HttpError(404, "unknown reference entry " + entry);
    ReferenceSet set = load_reference_set(layout_.refset());
    if (!set.remove(entry)) throw HttpError(404, "unknown reference entry " + entry);
    save_reference_set(layout_.refset(), set);
    send_json(res, {{"deleted", entry}, {"revision", refset_revision()}});
  }

  void get_evaluation(httplib::Response& res) {
    if (!std::filesystem::exists(layout_.evaluation())) throw HttpError(404, "no evaluation has been run");
    send_json(res, read_json_file(layout_.evaluation()));
  }

  DataLayout layout_;
  PipelineConfig cfg_;
  std::mutex index_mu_;
  std::map<std::string, std::unique_ptr<std::shared_mutex>> routine_mu_;
  std::shared_mutex refset_mu_;
};

}  // namespace tramp
