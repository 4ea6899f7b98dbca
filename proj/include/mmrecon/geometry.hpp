#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "mmrecon/error.hpp"

namespace mmrecon {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Point3 = Vec3;

inline bool is_finite(const Vec3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// Points with optional parallel unit normals and per-point reflectivity.
struct OrientedPointCloud {
  std::vector<Point3> points;
  std::vector<Vec3> normals;
  std::vector<double> reflectivity;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_normals() const noexcept { return !points.empty() && normals.size() == points.size(); }
  bool has_reflectivity() const noexcept { return reflectivity.size() == points.size(); }

  double reflectivity_at(std::size_t i) const { return has_reflectivity() ? reflectivity[i] : 1.0; }

  /// Copy of the points at `keep[i] == true`, carrying normals and reflectivity along.
  OrientedPointCloud filtered(const std::vector<bool>& keep) const {
    OrientedPointCloud out;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!keep[i]) continue;
      out.points.push_back(points[i]);
      if (has_normals()) out.normals.push_back(normals[i]);
      if (has_reflectivity()) out.reflectivity.push_back(reflectivity[i]);
    }
    return out;
  }

  void append(const OrientedPointCloud& other) {
    const bool normals_ok = (empty() || has_normals()) && other.has_normals();
    const bool refl_ok = (empty() || has_reflectivity()) && other.has_reflectivity();
    points.insert(points.end(), other.points.begin(), other.points.end());
    if (normals_ok) {
      normals.insert(normals.end(), other.normals.begin(), other.normals.end());
    } else {
      normals.clear();
    }
    if (refl_ok) {
      reflectivity.insert(reflectivity.end(), other.reflectivity.begin(), other.reflectivity.end());
    } else {
      reflectivity.clear();
    }
  }

  /// Checks parallel-array lengths, finiteness, unit normals and non-negative reflectivity.
  bool valid() const {
    if (!normals.empty() && normals.size() != points.size()) return false;
    if (!reflectivity.empty() && reflectivity.size() != points.size()) return false;
    for (const auto& p : points) {
      if (!is_finite(p)) return false;
    }
    for (const auto& n : normals) {
      if (std::abs(n.norm() - 1.0) > 1e-6) return false;
    }
    for (double r : reflectivity) {
      if (!(r >= 0.0)) return false;
    }
    return true;
  }
};

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  double face_area(std::size_t f) const {
    const auto& t = faces[f];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  }
  Vec3 face_normal(std::size_t f) const {
    const auto& t = faces[f];
    return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).normalized();
  }
};

/// Similarity transform x -> rotation * (scale * x) + translation.
/// Maps unit-sphere (normalized) coordinates back to the source frame.
struct RigidScale {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Point3 apply(const Point3& p) const { return rotation * (scale * p) + translation; }
  Point3 apply_inverse(const Point3& p) const {
    return rotation.transpose() * (p - translation) / scale;
  }

  OrientedPointCloud apply(const OrientedPointCloud& pc) const {
    OrientedPointCloud out = pc;
    for (auto& p : out.points) p = apply(p);
    for (auto& n : out.normals) n = rotation * n;
    return out;
  }
  OrientedPointCloud apply_inverse(const OrientedPointCloud& pc) const {
    OrientedPointCloud out = pc;
    for (auto& p : out.points) p = apply_inverse(p);
    for (auto& n : out.normals) n = rotation.transpose() * n;
    return out;
  }

  bool valid() const {
    return scale > 0.0 && (rotation * rotation.transpose() - Mat3::Identity()).norm() < 1e-6;
  }
};

inline Vec3 centroid(const std::vector<Point3>& points) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

/// Centers the cloud at its centroid and scales the farthest point to radius 1.
inline std::pair<OrientedPointCloud, RigidScale> normalize_to_unit_sphere(const OrientedPointCloud& pc) {
  if (pc.empty()) fail(ErrorCode::DegenerateCloud, "cannot normalize an empty cloud");
  RigidScale t;
  t.translation = centroid(pc.points);
  double max_norm = 0.0;
  for (const auto& p : pc.points) max_norm = std::max(max_norm, (p - t.translation).norm());
  if (!(max_norm > 0.0)) fail(ErrorCode::DegenerateCloud, "all points coincide");
  t.scale = max_norm;

  OrientedPointCloud out = pc;
  for (auto& p : out.points) p = (p - t.translation) / max_norm;
  return {std::move(out), t};
}

/// Axis-aligned extent, max - min per axis.
inline Vec3 bounding_extent(const std::vector<Point3>& points) {
  if (points.empty()) return Vec3::Zero();
  Vec3 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return hi - lo;
}

inline double bounding_diameter(const std::vector<Point3>& points) { return bounding_extent(points).norm(); }

/// Area-weighted uniform samples with stratified per-face allocation: each face gets
/// floor(n * area / total) points and the remainder is distributed by a weighted draw
/// over the fractional parts. Normals follow face winding and are flipped globally so
/// the majority face away from the mesh centroid.
inline OrientedPointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.faces.empty()) fail(ErrorCode::EmptyMesh, "mesh has no faces");
  if (n == 0) fail(ErrorCode::InvalidArgument, "sample count must be >= 1");

  const std::size_t nf = mesh.faces.size();
  std::vector<double> area(nf);
  for (std::size_t f = 0; f < nf; ++f) area[f] = mesh.face_area(f);
  const double total = std::accumulate(area.begin(), area.end(), 0.0);
  if (!(total > 0.0)) fail(ErrorCode::EmptyMesh, "mesh has zero surface area");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> count(nf);
  std::vector<double> frac(nf);
  std::size_t assigned = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    const double expected = static_cast<double>(n) * area[f] / total;
    count[f] = static_cast<std::size_t>(std::floor(expected));
    frac[f] = expected - static_cast<double>(count[f]);
    assigned += count[f];
  }
  // Remainder: weighted draws without replacement over fractional parts.
  for (std::size_t r = assigned; r < n; ++r) {
    const double frac_total = std::accumulate(frac.begin(), frac.end(), 0.0);
    std::size_t pick = 0;
    if (frac_total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, frac_total)(rng);
      for (pick = 0; pick + 1 < nf; ++pick) {
        if (u < frac[pick]) break;
        u -= frac[pick];
      }
    } else {
      pick = std::discrete_distribution<std::size_t>(area.begin(), area.end())(rng);
    }
    ++count[pick];
    frac[pick] = 0.0;
  }

  OrientedPointCloud pc;
  pc.points.reserve(n);
  pc.normals.reserve(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t f = 0; f < nf; ++f) {
    if (count[f] == 0) continue;
    const auto& t = mesh.faces[f];
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    const Vec3 normal = mesh.face_normal(f);
    for (std::size_t s = 0; s < count[f]; ++s) {
      const double r1 = std::sqrt(unit(rng));
      const double r2 = unit(rng);
      pc.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
      pc.normals.push_back(normal);
    }
  }

  const Vec3 center = centroid(mesh.vertices);
  std::size_t outward = 0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if ((pc.points[i] - center).dot(pc.normals[i]) >= 0.0) ++outward;
  }
  if (2 * outward < pc.size()) {
    for (auto& nrm : pc.normals) nrm = -nrm;
  }
  return pc;
}

/// Principal axes of a point set, eigenvalues descending.
struct PrincipalAxes {
  Vec3 mean = Vec3::Zero();
  Vec3 eigenvalues = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // column i pairs with eigenvalues[i]
};

inline Mat3 covariance(const std::vector<Point3>& points, const Vec3& mean) {
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  return points.empty() ? cov : Mat3(cov / static_cast<double>(points.size()));
}

inline PrincipalAxes principal_axes(const std::vector<Point3>& points) {
  PrincipalAxes pa;
  pa.mean = centroid(points);
  Eigen::SelfAdjointEigenSolver<Mat3> solver(covariance(points, pa.mean));
  // Eigen sorts ascending.
  for (int i = 0; i < 3; ++i) {
    pa.eigenvalues[i] = std::max(0.0, solver.eigenvalues()[2 - i]);
    pa.axes.col(i) = solver.eigenvectors().col(2 - i);
  }
  return pa;
}

}  // namespace mmrecon
