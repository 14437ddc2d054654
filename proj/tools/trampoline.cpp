#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "trampoline/commands.hpp"
#include "trampoline/service.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kPipelineError = 3;

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace tramp;

  CLI::App app{"Trampoline skill identification"};
  app.require_subcommand(1);

  cmd::ExtractArgs ex;
  int ex_line = -1;
  std::string ex_config;
  auto* extract = app.add_subcommand("extract", "Body extraction and jump segmentation");
  extract->add_option("--frames", ex.frames, "PNG directory or .rgb stream (with .json sidecar)")->required();
  extract->add_option("--out", ex.out, "Routine output directory")->required();
  extract->add_option("--id", ex.id, "Routine id (default: output directory name)");
  extract->add_option("--line", ex_line, "Trampoline top row; skips detection");
  extract->add_option("--config", ex_config, "JSON config file");
  extract->add_option("--fps", ex.fps, "Frame rate of a PNG directory");
  extract->add_flag("!--no-crops", ex.crops, "Skip writing athlete crops");

  cmd::FeaturesArgs fe;
  std::string fe_origins, fe_config;
  auto* features = app.add_subcommand("features", "Angle trajectories for each routine jump");
  features->add_option("--poses", fe.poses, "Pose stream (JSON lines)")->required();
  features->add_option("--segments", fe.segments, "segments.json from extract")->required();
  features->add_option("--out", fe.out, "Output directory")->required();
  features->add_option("--origins", fe_origins, "crops/origins.json for crop-coordinate poses");
  features->add_option("--config", fe_config, "JSON config file");
  features->add_option("--label", fe.label, "Skill code to store with every trajectory");

  fs::path cl_features, cl_refs, cl_out;
  auto* classify = app.add_subcommand("classify", "Nearest-reference classification of one trajectory");
  classify->add_option("--features", cl_features, "Feature trajectory JSON")->required();
  classify->add_option("--refs", cl_refs, "Reference set JSON")->required();
  classify->add_option("--out", cl_out, "Write the result here instead of stdout");

  cmd::EvaluateArgs ev;
  std::string ev_config;
  std::uint64_t ev_seed = 0;
  unsigned ev_threads = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Repeated random sub-sampling evaluation");
  evaluate->add_option("--dataset", ev.dataset, "Directory of labelled trajectories")->required();
  evaluate->add_option("--out", ev.out, "Report directory")->required();
  evaluate->add_option("--config", ev_config, "JSON config file");
  auto* ev_seed_opt = evaluate->add_option("--seed", ev_seed, "RNG seed");
  auto* ev_threads_opt = evaluate->add_option("--threads", ev_threads, "Worker threads");

  cmd::GenerateArgs ge;
  std::vector<std::string> ge_models;
  auto* generate = app.add_subcommand("generate", "Synthetic pose sequences, routines or datasets");
  generate->add_option("codes", ge.codes, "Skill codes");
  generate->add_option("--model", ge_models, "User-defined skill model JSON (repeatable)");
  generate->add_flag("--routine", ge.routine, "Concatenate the codes into one routine with in/out-bounces");
  generate->add_option("--dataset", ge.dataset_per_skill, "Examples per built-in skill for a feature dataset");
  generate->add_flag("--render", ge.render, "Also render routine frames as PNG");
  generate->add_option("--seed", ge.seed, "RNG seed");
  generate->add_option("--fps", ge.fps, "Frame rate");
  generate->add_option("--keypoint-sigma", ge.noise.keypoint_sigma, "Keypoint jitter (pixels)");
  generate->add_option("--angle-sigma", ge.noise.angle_sigma, "Key-frame angle jitter (degrees)");
  generate->add_option("--timing-sigma", ge.noise.timing_sigma, "Flight duration jitter (frames)");
  generate->add_option("--out", ge.out, "Output directory")->required();

  fs::path sv_data;
  int sv_port = 8080;
  std::string sv_host = "127.0.0.1", sv_config;
  auto* serve = app.add_subcommand("serve", "HTTP service for the annotation interface");
  serve->add_option("--data", sv_data, "Data directory")->required();
  serve->add_option("--port", sv_port, "Port");
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--config", sv_config, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  auto opt_path = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<fs::path>(s); };

  try {
    if (*extract) {
      if (ex_line >= 0) ex.line = ex_line;
      ex.config = opt_path(ex_config);
      const RoutineExtraction r = cmd::extract(ex);
      std::printf("%zu frames, trampoline line %d, %zu segments\n", r.frames.size(), r.line.top_row, r.segments.size());
      if (!r.segmentation_error.empty()) {
        std::fprintf(stderr, "segmentation failed: %s\n", r.segmentation_error.c_str());
        return kPipelineError;
      }
    } else if (*features) {
      fe.origins = opt_path(fe_origins);
      fe.config = opt_path(fe_config);
      std::printf("%zu trajectories written\n", cmd::features(fe));
    } else if (*classify) {
      const auto j = cmd::classify(cl_features, cl_refs);
      if (cl_out.empty()) std::cout << j.dump(2) << '\n';
      else write_json_atomic(cl_out, j);
    } else if (*evaluate) {
      ev.config = opt_path(ev_config);
      if (*ev_seed_opt) ev.seed = ev_seed;
      if (*ev_threads_opt) ev.threads = ev_threads;
      const auto report = cmd::evaluate(ev);
      std::printf("mean accuracy %.4f over %zu iterations\n", report["mean_accuracy"].get<double>(),
                  report["per_iteration"].size());
    } else if (*generate) {
      for (const auto& m : ge_models) ge.model_files.emplace_back(m);
      std::printf("%zu outputs written\n", cmd::generate(ge).size());
    } else if (*serve) {
      Service service(sv_data, cmd::config_or_default(opt_path(sv_config)));
      httplib::Server srv;
      service.install(srv);
      g_server = &srv;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      std::printf("serving %s on http://%s:%d\n", sv_data.c_str(), sv_host.c_str(), sv_port);
      std::fflush(stdout);
      if (!srv.listen(sv_host, sv_port)) throw InputError("cannot listen on port " + std::to_string(sv_port));
    }
  } catch (const PipelineError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kPipelineError;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return kOk;
}
