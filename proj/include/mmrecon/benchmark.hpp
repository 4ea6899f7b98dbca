#pragma once

// Simulated scenes on disk and the benchmark harness that reconstructs and scores them.
//
// A scene directory holds `signals.mmsig` (the measurement), `gt.ply` (dense ground-truth
// samples in the sensing frame) and `scene.json` (id plus the voxel grid fitted to it).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmrecon/fixtures.hpp"
#include "mmrecon/metrics.hpp"
#include "mmrecon/pipeline.hpp"

namespace mmrecon {

/// Settings under which the fixture suite images cleanly: a lower carrier than automotive
/// radar so the 5 mm lattice resolves the point response, a wide aperture close to the
/// objects, and 16 GHz of bandwidth over 64 samples (250 MHz steps, 0.6 m unambiguous range).
inline PipelineConfig fixture_config() {
  PipelineConfig c;
  c.waveform.start_frequency = 20e9;
  c.waveform.bandwidth = 16e9;
  c.waveform.num_samples = 64;
  c.array_nx = c.array_ny = 24;
  c.array_width_x = c.array_width_y = 0.6;
  c.array_height = 0.3;
  c.grid.spacing = 0.005;
  return c;
}

/// Axis-aligned grid with spacing `spacing` covering `points` plus `margin` voxels per side.
inline VoxelGridSpec fit_grid(const std::vector<Point3>& points, double spacing, double margin = 2.0) {
  if (points.empty()) fail(ErrorCode::EmptyCloud, "cannot fit a grid to nothing");
  if (!(spacing > 0.0)) fail(ErrorCode::InvalidArgument, "grid spacing must be > 0");
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo.array() -= margin * spacing;
  hi.array() += margin * spacing;
  VoxelGridSpec g;
  g.origin = lo;
  g.spacing = spacing;
  for (int a = 0; a < 3; ++a) g.dims[static_cast<std::size_t>(a)] = static_cast<std::size_t>(std::ceil((hi[a] - lo[a]) / spacing)) + 1;
  return g;
}

inline constexpr std::size_t kGroundTruthPoints = 8192;
inline constexpr std::size_t kSimulationPoints = 20000;

struct SimulatedScene {
  std::string id;
  SignalSet signals;
  OrientedPointCloud ground_truth;
  VoxelGridSpec grid;
};

/// Forward-simulates `mesh` (already in the sensing frame) with the config's array and
/// waveform. Ground truth and the scattering scene are independent surface samples.
inline SimulatedScene simulate_scene(const std::string& id, const TriangleMesh& mesh, const PipelineConfig& config,
                                     std::uint64_t seed, std::size_t scatterers = kSimulationPoints) {
  SimulatedScene s;
  s.id = id;
  s.ground_truth = sample_surface(mesh, kGroundTruthPoints, seed);
  const auto scene = sample_surface(mesh, scatterers, seed + 1);
  s.signals = simulate_signals(scene, config.sensor_array(), config.waveform, {config.specular_sigma, config.hidden_point_removal});
  if (std::isfinite(config.snr_db)) s.signals = add_signal_noise(s.signals, config.snr_db, seed + 2);
  s.grid = fit_grid(mesh.vertices, config.grid.spacing);
  return s;
}

inline nlohmann::json grid_json(const VoxelGridSpec& g) {
  return {{"origin", {g.origin.x(), g.origin.y(), g.origin.z()}}, {"spacing", g.spacing}, {"dims", g.dims}};
}

inline VoxelGridSpec grid_from_json(const nlohmann::json& j) {
  VoxelGridSpec g;
  const auto o = j.at("origin").get<std::array<double, 3>>();
  g.origin = Point3(o[0], o[1], o[2]);
  g.spacing = j.at("spacing").get<double>();
  g.dims = j.at("dims").get<std::array<std::size_t, 3>>();
  if (!g.valid()) fail(ErrorCode::ParseError, "invalid grid in scene description");
  return g;
}

inline void write_scene(const SimulatedScene& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_signals(s.signals, dir / "signals.mmsig");
  write_cloud_ply(s.ground_truth, dir / "gt.ply");
  std::ofstream(dir / "scene.json") << nlohmann::json{{"id", s.id}, {"grid", grid_json(s.grid)}}.dump(2) << "\n";
}

inline bool is_scene_dir(const std::filesystem::path& dir) {
  return std::filesystem::is_regular_file(dir / "signals.mmsig") && std::filesystem::is_regular_file(dir / "gt.ply");
}

/// Loads a scene; without `scene.json` the id is the directory name and `fallback_grid` is used.
inline SimulatedScene read_scene(const std::filesystem::path& dir, const VoxelGridSpec& fallback_grid = {}) {
  SimulatedScene s;
  s.signals = read_signals(dir / "signals.mmsig");
  s.ground_truth = read_cloud_ply(dir / "gt.ply");
  s.id = dir.filename().string();
  s.grid = fallback_grid;
  if (std::filesystem::exists(dir / "scene.json")) {
    try {
      const auto j = nlohmann::json::parse(read_file(dir / "scene.json"));
      s.id = j.value("id", s.id);
      if (j.contains("grid")) s.grid = grid_from_json(j.at("grid"));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, (dir / "scene.json").string() + ": " + e.what());
    }
  }
  return s;
}

/// Scene subdirectories of `root` in name order.
inline std::vector<std::filesystem::path> list_scenes(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(root)) return out;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.is_directory() && is_scene_dir(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Config for one scene: the run config with the scene's fitted grid.
inline PipelineConfig scene_config(const PipelineConfig& base, const SimulatedScene& s) {
  PipelineConfig c = base;
  c.grid = s.grid;
  return c;
}

struct BenchmarkRow {
  std::string id;
  std::string status = "ok";  // "ok" or the failing error code
  std::string message;
  EvalReport eval;
  double seconds = 0.0;
};

struct CategoryMeans {
  std::size_t count = 0;
  double chamfer = 0.0, fscore = 0.0, precision = 0.0, recall = 0.0;
};

struct BenchmarkSummary {
  std::vector<BenchmarkRow> rows;
  CategoryMeans overall;
  std::map<std::string, CategoryMeans> by_size;
  std::map<std::string, CategoryMeans> by_coverage;
};

inline CategoryMeans category_means(const std::vector<const BenchmarkRow*>& rows) {
  CategoryMeans m;
  for (const auto* r : rows) {
    m.chamfer += r->eval.chamfer;
    m.fscore += r->eval.fscore;
    m.precision += r->eval.precision;
    m.recall += r->eval.recall;
  }
  m.count = rows.size();
  if (m.count > 0) {
    const auto n = static_cast<double>(m.count);
    m.chamfer /= n;
    m.fscore /= n;
    m.precision /= n;
    m.recall /= n;
  }
  return m;
}

inline nlohmann::json to_json_means(const CategoryMeans& m) {
  return {{"count", m.count}, {"CD", m.chamfer}, {"FS", m.fscore}, {"Precision", m.precision}, {"Recall", m.recall}};
}

inline void summarize(BenchmarkSummary& s) {
  std::vector<const BenchmarkRow*> ok;
  std::map<std::string, std::vector<const BenchmarkRow*>> size, coverage;
  for (const auto& r : s.rows) {
    if (r.status != "ok") continue;
    ok.push_back(&r);
    size[std::string(to_string(r.eval.size_category))].push_back(&r);
    coverage[std::string(to_string(r.eval.coverage_category))].push_back(&r);
  }
  s.overall = category_means(ok);
  s.by_size.clear();
  s.by_coverage.clear();
  for (const auto& [k, v] : size) s.by_size[k] = category_means(v);
  for (const auto& [k, v] : coverage) s.by_coverage[k] = category_means(v);
}

/// Reconstructs one scene and scores it. The coverage partial is the selected candidate.
inline BenchmarkRow benchmark_scene(const SimulatedScene& scene, const PipelineConfig& base) {
  BenchmarkRow row;
  row.id = scene.id;
  row.eval.object_id = scene.id;
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto config = scene_config(base, scene);
    const auto r = run_pipeline(scene.signals, config);
    row.eval = evaluate_run(r.final_cloud, scene.ground_truth, r.candidates.partials[r.report.chosen_source_index],
                            {scene.id, config.metric_threshold});
  } catch (const Error& e) {
    row.status = std::string(to_string(e.code()));
    row.message = e.what();
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

inline BenchmarkSummary benchmark(const std::filesystem::path& scene_dir, const PipelineConfig& config) {
  const auto scenes = list_scenes(scene_dir);
  if (scenes.empty()) fail(ErrorCode::NoScenes, "no scenes in " + scene_dir.string());
  BenchmarkSummary s;
  for (const auto& dir : scenes) {
    try {
      s.rows.push_back(benchmark_scene(read_scene(dir, config.grid), config));
    } catch (const Error& e) {
      BenchmarkRow row;
      row.id = dir.filename().string();
      row.status = std::string(to_string(e.code()));
      row.message = e.what();
      s.rows.push_back(row);
    }
  }
  summarize(s);
  return s;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string benchmark_csv(const BenchmarkSummary& s) {
  std::ostringstream out;
  out.precision(17);
  out << "id,status,CD,FS,Precision,Recall,coverage_percent,coverage_category,size_category,longest_dimension,seconds,message\n";
  for (const auto& r : s.rows) {
    const bool ok = r.status == "ok";
    out << csv_field(r.id) << ',' << r.status << ',';
    if (ok) {
      out << r.eval.chamfer << ',' << r.eval.fscore << ',' << r.eval.precision << ',' << r.eval.recall << ','
          << r.eval.coverage_percent << ',' << to_string(r.eval.coverage_category) << ',' << to_string(r.eval.size_category) << ','
          << r.eval.longest_dimension;
    } else {
      out << ",,,,,,,";
    }
    out << ',' << r.seconds << ',' << csv_field(r.message) << '\n';
  }
  return out.str();
}

inline nlohmann::json benchmark_json(const BenchmarkSummary& s) {
  nlohmann::json j{{"rows", s.rows.size()}, {"mean", to_json_means(s.overall)}};
  std::size_t failed = 0;
  for (const auto& r : s.rows) failed += r.status != "ok";
  j["failed"] = failed;
  j["by_size"] = nlohmann::json::object();
  for (const auto& [k, v] : s.by_size) j["by_size"][k] = to_json_means(v);
  j["by_coverage"] = nlohmann::json::object();
  for (const auto& [k, v] : s.by_coverage) j["by_coverage"][k] = to_json_means(v);
  return j;
}

/// Writes the fixture suite, scaled for `fixture_config`, as simulated scenes under `root`.
inline std::vector<std::filesystem::path> write_fixture_scenes(const std::filesystem::path& root, const PipelineConfig& config,
                                                               std::uint64_t seed) {
  std::vector<std::filesystem::path> out;
  for (const auto& f : fixtures::fixture_suite()) {
    const auto dir = root / f.id;
    write_scene(simulate_scene(f.id, f.mesh, config, seed), dir);
    out.push_back(dir);
  }
  return out;
}

}  // namespace mmrecon
