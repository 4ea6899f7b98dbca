// mmrecon command-line driver. Each subcommand runs one phase so intermediate files can
// be inspected or swapped out.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/spdlog.h>

#include "mmrecon/mmrecon.hpp"

namespace fs = std::filesystem;
using namespace mmrecon;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitProtocol = 4;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string completer;
  std::string exchange_dir;
  bool keep_intermediates = false;
  int threads = 0;
  bool fixture_defaults = false;
  std::string log_level = "info";
};

PipelineConfig build_config(const GlobalOptions& g) {
  PipelineConfig c = g.fixture_defaults ? fixture_config() : PipelineConfig{};
  if (!g.config_path.empty()) c = load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.completer.empty()) c.completer = g.completer;
  if (!g.exchange_dir.empty()) c.exchange_dir = g.exchange_dir;
  c.validate();
  return c;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void log_timings(const std::vector<StageTiming>& timings) {
  for (const auto& t : timings) spdlog::info("stage={} seconds={:.3f}", t.stage, t.seconds);
}

template <typename Fn>
auto timed(const std::string& stage, Fn&& fn) {
  std::vector<StageTiming> timings;
  if constexpr (std::is_void_v<decltype(fn())>) {
    run_stage(stage, timings, fn);
    log_timings(timings);
  } else {
    auto out = run_stage(stage, timings, fn);
    log_timings(timings);
    return out;
  }
}

/// Signals plus the grid to image them on: a scene directory carries its own grid,
/// a bare signal file uses the config grid.
std::pair<SignalSet, VoxelGridSpec> load_measurement(const std::string& scene, const std::string& signals, const PipelineConfig& c) {
  if (!scene.empty()) {
    auto s = read_scene(scene, c.grid);
    return {std::move(s.signals), s.grid};
  }
  if (signals.empty()) fail(ErrorCode::ConfigError, "need --scene or --signals");
  return {read_signals(signals), c.grid};
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError: return kExitConfig;
    case ErrorCode::Timeout:
    case ErrorCode::ProtocolError:
    case ErrorCode::RemoteFailure: return kExitProtocol;
    default: return kExitStage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmWave radar reconstruction of occluded objects"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Pipeline config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--completer", g.completer, "Completion backend")->check(CLI::IsMember({"baseline", "external"}));
  app.add_option("--exchange-dir", g.exchange_dir, "Exchange directory for the external completer");
  app.add_flag("--keep-intermediates", g.keep_intermediates, "Persist every stage's output");
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  app.add_flag("--fixture-defaults", g.fixture_defaults, "Start from the fixture-suite settings instead of the library defaults");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error"}));

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Write procedural test meshes (OBJ)");
  std::string synth_out;
  std::size_t synth_random = 0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--random", synth_random, "Extra randomized scenes beyond the four fixtures");

  // export-train
  auto* exporter = app.add_subcommand("export-train", "Synthesize (partial, full) training pairs from a mesh directory");
  std::string export_meshes, export_out;
  exporter->add_option("--meshes", export_meshes, "Directory of .ply/.obj meshes")->required();
  exporter->add_option("--out", export_out, "Corpus directory")->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Forward-simulate a mesh into a scene directory");
  std::string sim_mesh, sim_out, sim_id;
  std::size_t sim_points = kSimulationPoints;
  bool sim_fixtures = false;
  simulate->add_option("--mesh", sim_mesh, "Mesh in the sensing frame");
  simulate->add_flag("--fixtures", sim_fixtures, "Simulate the four-object fixture suite instead");
  simulate->add_option("--out", sim_out, "Scene directory (or root for --fixtures)")->required();
  simulate->add_option("--id", sim_id, "Scene id (default: mesh file stem)");
  simulate->add_option("--scatterers", sim_points, "Surface samples used as scatterers");

  // image
  auto* image = app.add_subcommand("image", "Backproject signals and threshold the image");
  std::string img_scene, img_signals, img_out;
  double img_percentile = 97.0;
  bool img_percentile_set = false;
  image->add_option("--scene", img_scene, "Scene directory");
  image->add_option("--signals", img_signals, "Signal file (uses the config grid)");
  image->add_option("--out", img_out, "Output directory")->required();
  auto* pct = image->add_option("--percentile", img_percentile, "Keep voxels at or above this |S| percentile")->check(CLI::Range(0.0, 100.0));

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "Run the full reconstruction pipeline");
  std::string rec_scene, rec_signals, rec_out;
  recon->add_option("--scene", rec_scene, "Scene directory");
  recon->add_option("--signals", rec_signals, "Signal file (uses the config grid)");
  recon->add_option("--out", rec_out, "Output directory")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a reconstruction against ground truth");
  std::string ev_final, ev_gt, ev_partial, ev_id, ev_out;
  evaluate->add_option("--final", ev_final, "Reconstruction PLY")->required();
  evaluate->add_option("--gt", ev_gt, "Ground-truth PLY")->required();
  evaluate->add_option("--partial", ev_partial, "Partial used for coverage (default: the reconstruction)");
  evaluate->add_option("--id", ev_id, "Object id");
  evaluate->add_option("--out", ev_out, "Report JSON (default: stdout)");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Reconstruct and score every scene in a directory");
  std::string bench_scenes, bench_out;
  bench->add_option("--scenes", bench_scenes, "Directory of scene directories")->required();
  bench->add_option("--out", bench_out, "Output directory for benchmark.csv and benchmark.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  img_percentile_set = pct->count() > 0;

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  omp_set_num_threads(g.threads > 0 ? g.threads : omp_get_num_procs());

  PipelineConfig config;
  try {
    config = build_config(g);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  }

  try {
    if (synth->parsed()) {
      fs::create_directories(synth_out);
      std::size_t n = 0;
      for (const auto& s : fixtures::fixture_suite()) {
        write_mesh_obj(s.mesh, fs::path(synth_out) / (s.id + ".obj"));
        ++n;
      }
      for (std::size_t i = 0; i < synth_random; ++i) {
        const auto s = fixtures::random_scene(config.seed + i);
        write_mesh_obj(s.mesh, fs::path(synth_out) / (s.id + ".obj"));
        ++n;
      }
      spdlog::info("wrote {} meshes to {}", n, synth_out);
    } else if (exporter->parsed()) {
      const auto m = timed("export-train", [&] { return generate_corpus(export_meshes, export_out, config, config.seed); });
      std::size_t train = 0;
      for (const auto& r : m.records) train += r.split == "train";
      for (const auto& f : m.failures) spdlog::warn("skipped {}", f);
      spdlog::info("{} pairs ({} train, {} test), {} skipped", m.records.size(), train, m.records.size() - train, m.failed);
    } else if (simulate->parsed()) {
      if (sim_fixtures) {
        const auto dirs = timed("simulate", [&] { return write_fixture_scenes(sim_out, config, config.seed); });
        spdlog::info("wrote {} fixture scenes under {}", dirs.size(), sim_out);
      } else {
        if (sim_mesh.empty()) fail(ErrorCode::ConfigError, "simulate needs --mesh or --fixtures");
        const auto mesh = load_mesh(sim_mesh);
        const auto id = sim_id.empty() ? fs::path(sim_mesh).stem().string() : sim_id;
        const auto scene = timed("simulate", [&] { return simulate_scene(id, mesh, config, config.seed, sim_points); });
        write_scene(scene, sim_out);
        spdlog::info("scene {} written to {} (grid {}x{}x{})", id, sim_out, scene.grid.dims[0], scene.grid.dims[1], scene.grid.dims[2]);
      }
    } else if (image->parsed()) {
      const double percentile = img_percentile_set ? img_percentile : config.threshold_percentile;
      const auto [signals, grid] = load_measurement(img_scene, img_signals, config);
      const auto volume = timed("backprojection", [&] { return backproject(signals, grid); });
      const auto cloud = timed("threshold", [&] { return threshold_image(volume, percentile); });
      fs::create_directories(img_out);
      write_volume(volume, fs::path(img_out) / "volume.bin");
      write_cloud_ply(cloud, fs::path(img_out) / "image.ply");
      spdlog::info("{} voxels at or above the {} percentile", cloud.size(), percentile);
    } else if (recon->parsed()) {
      auto [signals, grid] = load_measurement(rec_scene, rec_signals, config);
      config.grid = grid;
      const auto r = run_pipeline(signals, config);
      log_timings(r.timings);
      write_pipeline_outputs(r, rec_out, g.keep_intermediates);
      write_json(timings_json(r.timings), fs::path(rec_out) / "timings.json");
      spdlog::info("selected candidate {} via {} branch, {} points", r.report.chosen_source_index, to_string(r.report.branch),
                   r.final_cloud.size());
    } else if (evaluate->parsed()) {
      const auto final_cloud = read_cloud_ply(ev_final);
      const auto gt = read_cloud_ply(ev_gt);
      const auto partial = ev_partial.empty() ? final_cloud : read_cloud_ply(ev_partial);
      const auto report = evaluate_run(final_cloud, gt, partial, {ev_id, config.metric_threshold});
      const nlohmann::json j = report;
      if (ev_out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        write_json(j, ev_out);
      }
    } else if (bench->parsed()) {
      const auto summary = timed("benchmark", [&] { return benchmark(bench_scenes, config); });
      fs::create_directories(bench_out);
      std::ofstream(fs::path(bench_out) / "benchmark.csv", std::ios::binary) << benchmark_csv(summary);
      write_json(benchmark_json(summary), fs::path(bench_out) / "benchmark.json");
      for (const auto& row : summary.rows) {
        if (row.status == "ok") {
          spdlog::info("{} CD={:.4f} P={:.3f} R={:.3f} seconds={:.1f}", row.id, row.eval.chamfer, row.eval.precision, row.eval.recall,
                       row.seconds);
        } else {
          spdlog::warn("{} {}: {}", row.id, row.status, row.message);
        }
      }
    }
  } catch (const StageError& e) {
    spdlog::error("stage {} failed: {}", e.stage(), e.what());
    return exit_code_for(e);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  }
  return kExitOk;
}
