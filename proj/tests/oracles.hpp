#pragma once

// Slow, obviously-correct reference implementations the tests compare against.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mmrecon/mmrecon.hpp"

namespace oracle {

using namespace mmrecon;

/// Indices of the k nearest points by exhaustive scan; ties to the lower index.
inline std::vector<std::uint32_t> knn(const std::vector<Point3>& pts, const Point3& q, std::size_t k) {
  std::vector<std::pair<double, std::uint32_t>> all;
  for (std::uint32_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - q).squaredNorm(), i);
  std::sort(all.begin(), all.end());
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(all[i].second);
  return out;
}

inline double nearest(const std::vector<Point3>& pts, const Point3& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) best = std::min(best, (p - q).norm());
  return best;
}

inline double chamfer(const OrientedPointCloud& a, const OrientedPointCloud& b) {
  double ab = 0.0, ba = 0.0;
  for (const auto& p : a.points) ab += nearest(b.points, p);
  for (const auto& p : b.points) ba += nearest(a.points, p);
  return ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size());
}

inline double fraction_within(const OrientedPointCloud& from, const OrientedPointCloud& to, double t) {
  std::size_t n = 0;
  for (const auto& p : from.points) n += nearest(to.points, p) <= t ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(from.size());
}

/// h_k(t) straight from the definition, one complex exponential per term.
inline SignalSet signals(const OrientedPointCloud& scene, const SensorArray& array, const Waveform& w, double sigma) {
  auto out = SignalSet::zeros(array, w);
  for (std::size_t k = 0; k < array.positions.size(); ++k) {
    for (std::size_t i = 0; i < scene.size(); ++i) {
      const Vec3 d = array.positions[k] - scene.points[i];
      const double theta = std::acos(std::clamp(scene.normals[i].dot(d.normalized()), -1.0, 1.0));
      const double amp = scene.reflectivity_at(i) * std::exp(-(theta / sigma) * (theta / sigma));
      for (std::size_t t = 0; t < w.num_samples; ++t) {
        const double phase = -2.0 * std::numbers::pi * 2.0 * d.norm() / w.wavelength(t);
        out.at(k, t) += std::polar(amp, phase);
      }
    }
  }
  return out;
}

/// S(v) straight from the definition at a single voxel.
inline Complex image_at(const SignalSet& s, const Point3& v) {
  Complex acc(0.0, 0.0);
  for (std::size_t k = 0; k < s.num_sensors(); ++k) {
    const double d = (s.array.positions[k] - v).norm();
    for (std::size_t t = 0; t < s.num_samples(); ++t) {
      acc += s.at(k, t) * std::polar(1.0, 2.0 * std::numbers::pi * 2.0 * d / s.waveform.wavelength(t));
    }
  }
  return acc;
}

inline OrientedPointCloud random_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  OrientedPointCloud pc;
  for (std::size_t i = 0; i < n; ++i) pc.points.emplace_back(u(rng), u(rng), u(rng));
  return pc;
}

/// Unit sphere samples with outward normals.
inline OrientedPointCloud unit_sphere(std::size_t n, std::uint64_t seed, double radius = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  OrientedPointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 v(g(rng), g(rng), g(rng));
    v.normalize();
    pc.points.push_back(radius * v);
    pc.normals.push_back(v);
  }
  return pc;
}

/// Exact coordinates as a set key.
inline std::array<double, 3> key(const Point3& p) { return {p.x(), p.y(), p.z()}; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mmrecon-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
