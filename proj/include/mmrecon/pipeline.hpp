#pragma once

// End-to-end reconstruction: signals -> normal field -> potential -> isosurface candidates
// -> completions -> selection, with per-stage timing and stage-tagged errors.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmrecon/backprojection.hpp"
#include "mmrecon/completion.hpp"
#include "mmrecon/config.hpp"
#include "mmrecon/mesh_io.hpp"
#include "mmrecon/selection.hpp"
#include "mmrecon/surface_proposal.hpp"

namespace mmrecon {

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  OrientedPointCloud final_cloud;
  SelectionReport report;
  NormalField field;
  ScalarField potential;
  CandidateSet candidates;
  std::vector<CompletedCandidate> completed;
  std::vector<StageTiming> timings;
};

/// Rounds every coordinate through float32 so the cloud survives a PLY round trip unchanged.
inline OrientedPointCloud quantize_f32(OrientedPointCloud pc) {
  const auto q = [](Vec3& v) {
    for (int a = 0; a < 3; ++a) v[a] = static_cast<double>(static_cast<float>(v[a]));
  };
  for (auto& p : pc.points) q(p);
  for (auto& n : pc.normals) q(n);
  return pc;
}

template <typename Fn>
auto run_stage(const std::string& name, std::vector<StageTiming>& timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    } else {
      auto out = fn();
      timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
      return out;
    }
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

inline Completer make_completer(const PipelineConfig& config) {
  if (config.completer == "external") {
    ExchangeEndpoint ep;
    ep.directory = config.exchange_dir;
    ep.timeout = std::chrono::milliseconds(static_cast<long long>(config.exchange_timeout_s * 1000.0));
    return external_completer(ep);
  }
  return baseline_completer();
}

/// Drops candidates with fewer than `min_points` points and rounds the rest to float32.
inline CandidateSet prepare_candidates(const CandidateSet& raw, std::size_t min_points) {
  CandidateSet out;
  out.delta = raw.delta;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw.partials[i].size() < std::max<std::size_t>(min_points, 1)) continue;
    out.partials.push_back(quantize_f32(raw.partials[i]));
    out.iso_values.push_back(raw.iso_values[i]);
  }
  if (out.empty()) fail(ErrorCode::NoCandidates, "no candidate has >= " + std::to_string(min_points) + " points");
  return out;
}

inline std::pair<OrientedPointCloud, SelectionReport> select_completed(const std::vector<CompletedCandidate>& completed,
                                                                      const CandidateSet& candidates, const SignalSet& signals,
                                                                      const PipelineConfig& config) {
  std::vector<OrientedPointCloud> partials;
  for (const auto& c : completed) partials.push_back(candidates.partials[c.source_index]);
  return select(completed, partials, config.grid, signals, config.selection());
}

/// Stages from a given potential onwards; shared by the full run and the resume paths.
inline void run_from_potential(PipelineResult& r, const SignalSet& signals, const PipelineConfig& config,
                               const Completer& completer) {
  r.candidates = run_stage("isosurfaces", r.timings, [&] {
    return prepare_candidates(sample_isosurfaces(r.potential, r.field, config.num_candidates, config.effective_delta()),
                              config.min_candidate_points);
  });
  r.completed = run_stage("completion", r.timings, [&] {
    auto done = complete_all(r.candidates, completer);
    for (auto& c : done) c.reconstruction = quantize_f32(std::move(c.reconstruction));
    return done;
  });
  auto [final_cloud, report] = run_stage("selection", r.timings, [&] { return select_completed(r.completed, r.candidates, signals, config); });
  r.final_cloud = std::move(final_cloud);
  r.report = std::move(report);
}

inline PipelineResult run_pipeline(const SignalSet& signals, const PipelineConfig& config, const Completer& completer) {
  try {
    config.validate();
  } catch (const Error& e) {
    throw StageError("config", e);
  }
  if (!signals.valid()) throw StageError("input", Error(ErrorCode::InvalidArgument, "invalid signal set"));
  PipelineResult r;
  r.field = run_stage("normal-field", r.timings, [&] { return estimate_normal_field(signals, config.grid); });
  r.potential = run_stage("potential", r.timings, [&] { return integrate_potential(r.field, config.reference_voxel); });
  run_from_potential(r, signals, config, completer);
  return r;
}

inline PipelineResult run_pipeline(const SignalSet& signals, const PipelineConfig& config) {
  return run_pipeline(signals, config, make_completer(config));
}

// --- persistence -----------------------------------------------------------

inline nlohmann::json timings_json(const std::vector<StageTiming>& timings) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : timings) j.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  return j;
}

namespace detail {

inline void put_grid(std::string& buf, const VoxelGridSpec& g) {
  for (int a = 0; a < 3; ++a) put_le(buf, g.origin[a]);
  put_le(buf, g.spacing);
  for (auto d : g.dims) put_le(buf, static_cast<std::uint64_t>(d));
}

inline VoxelGridSpec get_grid(std::istream& in, const std::string& what) {
  VoxelGridSpec g;
  for (int a = 0; a < 3; ++a) g.origin[a] = get_le<double>(in, what);
  g.spacing = get_le<double>(in, what);
  for (auto& d : g.dims) d = static_cast<std::size_t>(get_le<std::uint64_t>(in, what));
  if (!g.valid()) fail(ErrorCode::ParseError, what + ": invalid grid");
  return g;
}

inline void expect_magic(std::istream& in, const std::string& magic, const std::string& what) {
  std::string m(magic.size(), '\0');
  in.read(m.data(), static_cast<std::streamsize>(m.size()));
  if (!in || m != magic) fail(ErrorCode::ParseError, what + ": bad magic");
}

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

}  // namespace detail

/// "MMNRM1", grid, then per voxel: u8 has_direction, 3 x f64 direction, f64 confidence.
inline void write_normal_field(const NormalField& f, const std::filesystem::path& path) {
  std::string buf = "MMNRM1";
  detail::put_grid(buf, f.grid);
  for (std::size_t v = 0; v < f.grid.size(); ++v) {
    const auto& d = f.directions[v];
    buf.push_back(d ? 1 : 0);
    const Vec3 dir = d ? *d : Vec3::Zero();
    for (int a = 0; a < 3; ++a) detail::put_le(buf, dir[a]);
    detail::put_le(buf, f.confidence[v]);
  }
  detail::write_bytes(path, buf);
}

inline NormalField read_normal_field(const std::filesystem::path& path) {
  auto in = detail::open_binary(path);
  const std::string what = path.string();
  detail::expect_magic(in, "MMNRM1", what);
  NormalField f;
  f.grid = detail::get_grid(in, what);
  f.directions.resize(f.grid.size());
  f.confidence.resize(f.grid.size());
  for (std::size_t v = 0; v < f.grid.size(); ++v) {
    const auto flag = detail::get_le<std::uint8_t>(in, what);
    Vec3 dir;
    for (int a = 0; a < 3; ++a) dir[a] = detail::get_le<double>(in, what);
    if (flag) f.directions[v] = dir;
    f.confidence[v] = detail::get_le<double>(in, what);
  }
  return f;
}

/// "MMPOT1", grid, u64 reference voxel, f64 values.
inline void write_scalar_field(const ScalarField& f, const std::filesystem::path& path) {
  std::string buf = "MMPOT1";
  detail::put_grid(buf, f.grid);
  detail::put_le(buf, static_cast<std::uint64_t>(f.reference));
  for (double v : f.values) detail::put_le(buf, v);
  detail::write_bytes(path, buf);
}

inline ScalarField read_scalar_field(const std::filesystem::path& path) {
  auto in = detail::open_binary(path);
  const std::string what = path.string();
  detail::expect_magic(in, "MMPOT1", what);
  ScalarField f;
  f.grid = detail::get_grid(in, what);
  f.reference = static_cast<std::size_t>(detail::get_le<std::uint64_t>(in, what));
  f.values.resize(f.grid.size());
  for (auto& v : f.values) v = detail::get_le<double>(in, what);
  return f;
}

/// Directory of `candidate_XXX.ply` files plus `manifest.json`.
inline void export_candidates(const CandidateSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest{{"delta", set.delta}, {"candidates", nlohmann::json::array()}};
  for (std::size_t i = 0; i < set.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "candidate_%03zu.ply", i);
    write_cloud_ply(set.partials[i], dir / name);
    manifest["candidates"].push_back(
        {{"index", i}, {"file", name}, {"iso_value", set.iso_values[i]}, {"delta", set.delta}, {"num_points", set.partials[i].size()}});
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
}

inline CandidateSet load_candidates(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "candidate manifest: " + std::string(e.what()));
  }
  CandidateSet set;
  set.delta = manifest.at("delta").get<double>();
  for (const auto& c : manifest.at("candidates")) {
    set.partials.push_back(read_cloud_ply(dir / c.at("file").get<std::string>()));
    set.iso_values.push_back(c.at("iso_value").get<double>());
  }
  return set;
}

inline void export_completions(const std::vector<CompletedCandidate>& completed, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (std::size_t i = 0; i < completed.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "completion_%03zu.ply", i);
    write_cloud_ply(completed[i].reconstruction, dir / name);
    manifest.push_back({{"file", name}, {"source_index", completed[i].source_index}, {"completer", completed[i].completer_tag}});
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
}

inline std::vector<CompletedCandidate> load_completions(const std::filesystem::path& dir) {
  std::vector<CompletedCandidate> out;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "completion manifest: " + std::string(e.what()));
  }
  for (const auto& c : manifest) {
    out.push_back({read_cloud_ply(dir / c.at("file").get<std::string>()), c.at("source_index").get<std::size_t>(),
                   c.at("completer").get<std::string>()});
  }
  return out;
}

/// final.ply + selection.json; with `keep_intermediates` also the normal field, potential,
/// candidates and completions, each reloadable.
inline void write_pipeline_outputs(const PipelineResult& r, const std::filesystem::path& out_dir, bool keep_intermediates,
                                   bool include_timings = false) {
  std::filesystem::create_directories(out_dir);
  write_cloud_ply(r.final_cloud, out_dir / "final.ply");
  nlohmann::json report = r.report;
  if (include_timings) report["timings"] = timings_json(r.timings);
  std::ofstream(out_dir / "selection.json") << report.dump(2) << "\n";
  if (!keep_intermediates) return;
  write_normal_field(r.field, out_dir / "normal_field.bin");
  write_scalar_field(r.potential, out_dir / "potential.bin");
  export_candidates(r.candidates, out_dir / "candidates");
  export_completions(r.completed, out_dir / "completions");
}

}  // namespace mmrecon
