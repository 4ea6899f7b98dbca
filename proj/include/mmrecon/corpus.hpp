#pragma once

// Training corpus: (partial, full) pairs synthesized from a directory of meshes, split
// 80/20 by shuffled object order and listed in a JSON-lines manifest.

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmrecon/config.hpp"
#include "mmrecon/mesh_io.hpp"
#include "mmrecon/partial_synth.hpp"

namespace mmrecon {

struct CorpusRecord {
  std::string id;
  std::string partial_path;  // relative to the corpus directory
  std::string full_path;
  double tau = 0.0;  // degrees
  double tau_h = 0.0;
  double tau_v = 0.0;
  double noise_sigma = 0.0;  // metres, applied before normalization
  double scale = 1.0;        // unit-sphere radius in metres; noise in file units is noise_sigma / scale
  std::uint64_t seed = 0;
  std::string split;  // "train" | "test"
};

inline void to_json(nlohmann::json& j, const CorpusRecord& r) {
  j = nlohmann::json{{"id", r.id},       {"partial_path", r.partial_path}, {"full_path", r.full_path}, {"tau", r.tau},
                     {"tau_h", r.tau_h}, {"tau_v", r.tau_v},               {"noise_sigma", r.noise_sigma}, {"scale", r.scale},
                     {"seed", r.seed},   {"split", r.split}};
}

inline void from_json(const nlohmann::json& j, CorpusRecord& r) {
  j.at("id").get_to(r.id);
  j.at("partial_path").get_to(r.partial_path);
  j.at("full_path").get_to(r.full_path);
  j.at("tau").get_to(r.tau);
  j.at("tau_h").get_to(r.tau_h);
  j.at("tau_v").get_to(r.tau_v);
  j.at("noise_sigma").get_to(r.noise_sigma);
  r.scale = j.value("scale", 1.0);
  j.at("seed").get_to(r.seed);
  j.at("split").get_to(r.split);
}

struct CorpusManifest {
  std::vector<CorpusRecord> records;  // in mesh-name order
  std::size_t failed = 0;
  std::vector<std::string> failures;  // "<file>: <reason>"
};

/// Mesh files (.ply, .obj) directly inside `dir`, sorted by name.
inline std::vector<std::filesystem::path> list_meshes(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".ply" || ext == ".obj") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// First round(0.8 n) objects of a seeded shuffle train, the rest test.
inline std::vector<std::string> split_assignment(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  std::vector<std::string> split(n);
  for (std::size_t r = 0; r < n; ++r) split[order[r]] = r < train ? "train" : "test";
  return split;
}

inline double draw_degrees(std::mt19937_64& rng, const std::array<double, 2>& range) {
  return std::uniform_real_distribution<double>(range[0], range[1])(rng);
}

/// Object seed: a fixed mix of the corpus seed and the object's position in name order.
inline std::uint64_t object_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(index)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

/// One pair: the mesh is centred beneath the array, sampled, masked with the visibility
/// model, then both clouds are mapped into the full cloud's unit-sphere frame.
inline std::pair<PartialPair, RigidScale> synthesize_pair(const TriangleMesh& mesh, const PipelineConfig& config,
                                                          const VisibilityParams& params, std::uint64_t seed) {
  const auto array = config.sensor_array();
  TriangleMesh placed = mesh;
  const Vec3 c = centroid(mesh.vertices);
  const Vec3 target(config.array_center_x, config.array_center_y, 0.0);
  for (auto& v : placed.vertices) v += target - c;
  const auto full = sample_surface(placed, config.surface_points, seed);
  auto pair = synthesize_partial(full, array, params, seed + 1);
  auto [full_unit, frame] = normalize_to_unit_sphere(pair.full);
  return {{frame.apply_inverse(pair.partial), std::move(full_unit)}, frame};
}

inline void write_manifest_jsonl(const std::vector<CorpusRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& r : records) out << nlohmann::json(r).dump() << "\n";
}

inline std::vector<CorpusRecord> read_manifest_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<CorpusRecord>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

/// Writes `pairs/<id>.partial.ply`, `pairs/<id>.full.ply` and `manifest.jsonl` under
/// `out_dir`. Objects that fail to load or synthesize are skipped and counted.
inline CorpusManifest generate_corpus(const std::filesystem::path& mesh_dir, const std::filesystem::path& out_dir,
                                      const PipelineConfig& config, std::uint64_t seed) {
  const auto meshes = list_meshes(mesh_dir);
  if (meshes.empty()) fail(ErrorCode::NoMeshes, "no .ply or .obj meshes in " + mesh_dir.string());
  std::filesystem::create_directories(out_dir / "pairs");
  const auto split = split_assignment(meshes.size(), seed);

  std::vector<std::optional<CorpusRecord>> slots(meshes.size());
  std::vector<std::string> errors(meshes.size());
  const auto n = static_cast<std::ptrdiff_t>(meshes.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      CorpusRecord r;
      r.id = meshes[idx].stem().string();
      r.seed = object_seed(seed, idx);
      std::mt19937_64 rng(r.seed);
      r.tau = draw_degrees(rng, config.tau_range_deg);
      r.tau_h = draw_degrees(rng, config.tau_h_range_deg);
      r.tau_v = draw_degrees(rng, config.tau_v_range_deg);
      r.noise_sigma = config.noise_sigma;
      r.split = split[idx];
      const VisibilityParams params{deg2rad(r.tau), deg2rad(r.tau_h), deg2rad(r.tau_v), r.noise_sigma, config.dropout_fraction};
      const auto [pair, frame] = synthesize_pair(load_mesh(meshes[idx]), config, params, r.seed);
      r.scale = frame.scale;
      r.partial_path = "pairs/" + r.id + ".partial.ply";
      r.full_path = "pairs/" + r.id + ".full.ply";
      write_cloud_ply(pair.partial, out_dir / r.partial_path);
      write_cloud_ply(pair.full, out_dir / r.full_path);
      slots[idx] = std::move(r);
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  }

  CorpusManifest m;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (slots[i]) {
      m.records.push_back(std::move(*slots[i]));
    } else {
      ++m.failed;
      m.failures.push_back(meshes[i].filename().string() + ": " + errors[i]);
    }
  }
  write_manifest_jsonl(m.records, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace mmrecon
