#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmrecon/geometry.hpp"
#include "mmrecon/kdtree.hpp"
#include "mmrecon/mesh_io.hpp"
#include "mmrecon/surface_proposal.hpp"

namespace mmrecon {

/// Completed clouds always have this many points.
inline constexpr std::size_t kCompletionPoints = 2048;

struct CompletionRequest {
  OrientedPointCloud partial;  // unit-sphere frame
  std::string id;
  RigidScale normalization;  // unit-sphere -> source frame
};

struct CompletedCandidate {
  OrientedPointCloud reconstruction;  // source frame
  std::size_t source_index = 0;
  std::string completer_tag;
};

/// A completion strategy: unit-sphere partial in, unit-sphere complete shape out.
struct Completer {
  std::string tag;
  std::function<OrientedPointCloud(const CompletionRequest&)> run;
  bool parallel_safe = true;
};

inline std::vector<std::size_t> sorted_order(const OrientedPointCloud& pc) {
  std::vector<std::size_t> order(pc.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& p = pc.points[a];
    const auto& q = pc.points[b];
    return std::tie(p.x(), p.y(), p.z(), a) < std::tie(q.x(), q.y(), q.z(), b);
  });
  return order;
}

inline OrientedPointCloud reorder(const OrientedPointCloud& pc, const std::vector<std::size_t>& order) {
  OrientedPointCloud out;
  for (std::size_t i : order) {
    out.points.push_back(pc.points[i]);
    if (pc.has_normals()) out.normals.push_back(pc.normals[i]);
    if (pc.has_reflectivity()) out.reflectivity.push_back(pc.reflectivity[i]);
  }
  return out;
}

/// Farthest-point subsampling to exactly `count` points, seeded at index 0.
/// Inputs with fewer unique points are padded by cycling through the FPS order.
inline OrientedPointCloud farthest_point_sample(const OrientedPointCloud& pc, std::size_t count) {
  if (pc.empty()) fail(ErrorCode::EmptyCloud, "farthest point sampling of an empty cloud");
  std::vector<std::size_t> picked;
  picked.reserve(std::min(count, pc.size()));
  std::vector<double> dist(pc.size(), std::numeric_limits<double>::infinity());
  std::size_t current = 0;
  while (picked.size() < std::min(count, pc.size())) {
    picked.push_back(current);
    std::size_t next = current;
    double best = -1.0;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      dist[i] = std::min(dist[i], (pc.points[i] - pc.points[current]).squaredNorm());
      if (dist[i] > best) best = dist[i], next = i;
    }
    current = next;
  }
  std::vector<std::size_t> order;
  order.reserve(count);
  for (std::size_t i = 0; i < count; ++i) order.push_back(picked[i % picked.size()]);
  return reorder(pc, order);
}

/// Drops points within `tolerance` of an earlier kept point.
inline OrientedPointCloud deduplicate(const OrientedPointCloud& pc, double tolerance) {
  using Key = std::tuple<long long, long long, long long>;
  std::map<Key, std::vector<std::size_t>> cells;
  std::vector<bool> keep(pc.size(), false);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3& p = pc.points[i];
    const long long cx = static_cast<long long>(std::floor(p.x() / tolerance));
    const long long cy = static_cast<long long>(std::floor(p.y() / tolerance));
    const long long cz = static_cast<long long>(std::floor(p.z() / tolerance));
    bool dup = false;
    for (long long dx = -1; dx <= 1 && !dup; ++dx) {
      for (long long dy = -1; dy <= 1 && !dup; ++dy) {
        for (long long dz = -1; dz <= 1 && !dup; ++dz) {
          const auto it = cells.find(Key{cx + dx, cy + dy, cz + dz});
          if (it == cells.end()) continue;
          for (std::size_t j : it->second) {
            if ((pc.points[j] - p).norm() < tolerance) {
              dup = true;
              break;
            }
          }
        }
      }
    }
    if (dup) continue;
    keep[i] = true;
    cells[Key{cx, cy, cz}].push_back(i);
  }
  return pc.filtered(keep);
}

/// Mirror-symmetry completion. The view axis is the third principal component, oriented
/// along the mean normal (towards the sensor); the partial is reflected across the plane
/// perpendicular to it through the partial's far extent, merged with the original,
/// deduplicated within 1e-3 and farthest-point subsampled to 2048 points.
inline OrientedPointCloud mirror_baseline_complete(const OrientedPointCloud& partial_in) {
  if (partial_in.size() < 10) fail(ErrorCode::DegenerateCloud, "mirror completion needs >= 10 points");
  const OrientedPointCloud partial = reorder(partial_in, sorted_order(partial_in));
  const PrincipalAxes pa = principal_axes(partial.points);
  if (!(pa.eigenvalues[0] > 0.0)) fail(ErrorCode::DegenerateCloud, "all points coincide");

  Vec3 axis = pa.axes.col(2).normalized();
  double orient = 0.0;
  if (partial.has_normals()) {
    Vec3 mean_normal = Vec3::Zero();
    for (const auto& n : partial.normals) mean_normal += n;
    orient = mean_normal.dot(axis) / static_cast<double>(partial.size());
  }
  if (std::abs(orient) < 1e-9) {
    // no usable normals: fall back to a canonical sign
    int largest = 0;
    axis.cwiseAbs().maxCoeff(&largest);
    orient = axis[largest];
  }
  if (orient < 0) axis = -axis;

  double plane = std::numeric_limits<double>::infinity();
  for (const auto& p : partial.points) plane = std::min(plane, p.dot(axis));

  OrientedPointCloud merged = partial;
  OrientedPointCloud mirrored = partial;
  for (auto& p : mirrored.points) p -= 2.0 * (p.dot(axis) - plane) * axis;
  for (auto& n : mirrored.normals) n -= 2.0 * n.dot(axis) * axis;
  merged.append(mirrored);
  return farthest_point_sample(deduplicate(merged, 1e-3), kCompletionPoints);
}

inline Completer baseline_completer() {
  return {"mirror-baseline", [](const CompletionRequest& r) { return mirror_baseline_complete(r.partial); }, true};
}

/// PCA normals over k nearest neighbours, each flipped to face away from the centroid.
inline std::vector<Vec3> estimate_point_normals(const OrientedPointCloud& pc, std::size_t k = 16) {
  std::vector<Vec3> normals(pc.size(), Vec3::UnitZ());
  if (pc.size() < 3) return normals;
  const KdTree tree(pc.points);
  const Vec3 center = centroid(pc.points);
  const std::size_t kk = std::min(k, pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    std::vector<Point3> hood;
    for (const auto& nb : tree.knn(pc.points[i], kk)) hood.push_back(pc.points[nb.index]);
    Vec3 n = principal_axes(hood).axes.col(2).normalized();
    if (n.dot(pc.points[i] - center) < 0) n = -n;
    normals[i] = n;
  }
  return normals;
}

// --- exchange-directory protocol -------------------------------------------
// request:  <id>.req.ply  then  <id>.req.json {id, normalization}
// response: <id>.resp.ply  or  <id>.err.json {id, message}
// Files are published by writing to a temporary name and renaming.

struct ExchangeEndpoint {
  std::filesystem::path directory;
  std::chrono::milliseconds timeout{120'000};
  std::chrono::milliseconds poll_interval{100};
};

inline nlohmann::json to_json(const RigidScale& t) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
  }
  return {{"rotation", rot}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}, {"scale", t.scale}};
}

inline RigidScale rigid_scale_from_json(const nlohmann::json& j) {
  RigidScale t;
  const auto& rot = j.at("rotation");
  if (rot.size() != 9) fail(ErrorCode::ProtocolError, "rotation must have 9 entries");
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot.at(static_cast<std::size_t>(3 * r + c)).get<double>();
  }
  const auto& tr = j.at("translation");
  t.translation = Vec3(tr.at(0).get<double>(), tr.at(1).get<double>(), tr.at(2).get<double>());
  t.scale = j.at("scale").get<double>();
  if (!t.valid()) fail(ErrorCode::ProtocolError, "normalization is not a valid rigid scale");
  return t;
}

inline void publish_file(const std::filesystem::path& target, const std::string& bytes) {
  const auto tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "write failed: " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Sends one request through the exchange directory and waits for its response.
/// Returns the completion in the source frame (the request's normalization applied).
inline OrientedPointCloud external_complete(const CompletionRequest& request, const ExchangeEndpoint& endpoint) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(endpoint.directory, ec);
  const fs::path dir = endpoint.directory;
  const fs::path resp = dir / (request.id + ".resp.ply");
  const fs::path err = dir / (request.id + ".err.json");
  fs::remove(resp, ec);
  fs::remove(err, ec);

  publish_file(dir / (request.id + ".req.ply"), encode_cloud_ply(request.partial));
  const nlohmann::json sidecar{{"id", request.id}, {"normalization", to_json(request.normalization)}};
  publish_file(dir / (request.id + ".req.json"), sidecar.dump());

  const auto deadline = std::chrono::steady_clock::now() + endpoint.timeout;
  while (true) {
    if (fs::exists(err)) {
      std::string message = "remote error";
      try {
        const auto j = nlohmann::json::parse(read_file(err));
        message = j.value("message", message);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ProtocolError, "malformed error record for " + request.id + ": " + e.what());
      }
      fs::remove(err, ec);
      fail(ErrorCode::RemoteFailure, request.id + ": " + message);
    }
    if (fs::exists(resp)) {
      OrientedPointCloud unit;
      try {
        unit = read_cloud_ply(resp);
      } catch (const Error& e) {
        fail(ErrorCode::ProtocolError, "malformed response for " + request.id + ": " + e.what());
      }
      fs::remove(resp, ec);
      if (unit.size() != kCompletionPoints) {
        fail(ErrorCode::ProtocolError,
             request.id + ": response has " + std::to_string(unit.size()) + " points, expected " + std::to_string(kCompletionPoints));
      }
      return request.normalization.apply(unit);
    }
    if (std::chrono::steady_clock::now() >= deadline) fail(ErrorCode::Timeout, "no response for " + request.id);
    std::this_thread::sleep_for(endpoint.poll_interval);
  }
}

/// Wraps the exchange client as a Completer; the result is handed back in unit-sphere
/// coordinates so complete_all can apply the normalization uniformly.
inline Completer external_completer(ExchangeEndpoint endpoint) {
  return {"external",
          [endpoint](const CompletionRequest& r) { return r.normalization.apply_inverse(external_complete(r, endpoint)); },
          false};
}

/// Completes every non-empty candidate: normalize to the unit sphere, run the completer,
/// map back through the recorded transform. The raw partial is never concatenated.
inline std::vector<CompletedCandidate> complete_all(const CandidateSet& candidates, const Completer& completer,
                                                    const std::string& request_prefix = "cand") {
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates.partials[i].empty()) indices.push_back(i);
  }
  if (indices.empty()) fail(ErrorCode::NoCandidates, "candidate set is empty");

  std::vector<CompletedCandidate> out(indices.size());
  std::vector<std::string> errors(indices.size());
  std::vector<ErrorCode> codes(indices.size(), ErrorCode::CompleterFailure);
  const auto run_one = [&](std::size_t slot) {
    const std::size_t idx = indices[slot];
    try {
      auto [unit, frame] = normalize_to_unit_sphere(candidates.partials[idx]);
      CompletionRequest req{std::move(unit), request_prefix + "-" + std::to_string(idx), frame};
      OrientedPointCloud result = completer.run(req);
      if (result.empty()) fail(ErrorCode::CompleterFailure, "completer returned no points");
      if (!result.has_normals()) result.normals = estimate_point_normals(result);
      out[slot] = {frame.apply(result), idx, completer.tag};
    } catch (const Error& e) {
      errors[slot] = e.what();
      codes[slot] = e.code();
    } catch (const std::exception& e) {
      errors[slot] = e.what();
    }
  };
  if (completer.parallel_safe) {
    const auto n = static_cast<std::ptrdiff_t>(indices.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t s = 0; s < n; ++s) run_one(static_cast<std::size_t>(s));
  } else {
    for (std::size_t s = 0; s < indices.size(); ++s) run_one(s);
  }
  for (std::size_t s = 0; s < errors.size(); ++s) {
    if (errors[s].empty()) continue;
    // exchange-protocol failures keep their own code so callers can tell them apart
    const bool protocol = codes[s] == ErrorCode::Timeout || codes[s] == ErrorCode::ProtocolError ||
                          codes[s] == ErrorCode::RemoteFailure;
    fail(protocol ? codes[s] : ErrorCode::CompleterFailure, "candidate " + std::to_string(indices[s]) + ": " + errors[s]);
  }
  return out;
}

}  // namespace mmrecon
