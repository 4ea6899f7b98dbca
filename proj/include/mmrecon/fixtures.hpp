#pragma once

// Procedural test objects: closed, outward-wound triangle meshes for primitive shapes,
// and the small scene suite used by the benchmark and end-to-end checks.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "mmrecon/geometry.hpp"

namespace mmrecon::fixtures {

inline std::uint32_t add_vertex(TriangleMesh& m, const Point3& p) {
  m.vertices.push_back(p);
  return static_cast<std::uint32_t>(m.vertices.size() - 1);
}

/// UV sphere; faces wound counter-clockwise seen from outside.
inline TriangleMesh uv_sphere(double radius, std::size_t stacks = 16, std::size_t slices = 32) {
  TriangleMesh m;
  const auto top = add_vertex(m, {0, 0, radius});
  for (std::size_t i = 1; i < stacks; ++i) {
    const double phi = std::numbers::pi * static_cast<double>(i) / static_cast<double>(stacks);
    for (std::size_t j = 0; j < slices; ++j) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(slices);
      add_vertex(m, {radius * std::sin(phi) * std::cos(theta), radius * std::sin(phi) * std::sin(theta), radius * std::cos(phi)});
    }
  }
  const auto bottom = add_vertex(m, {0, 0, -radius});
  const auto ring = [&](std::size_t i, std::size_t j) {
    return static_cast<std::uint32_t>(1 + (i - 1) * slices + j % slices);
  };
  for (std::size_t j = 0; j < slices; ++j) {
    m.faces.push_back({top, ring(1, j), ring(1, j + 1)});
    m.faces.push_back({bottom, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
  }
  for (std::size_t i = 1; i + 1 < stacks; ++i) {
    for (std::size_t j = 0; j < slices; ++j) {
      m.faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
      m.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
    }
  }
  return m;
}

/// Axis-aligned box centred on the origin.
inline TriangleMesh box(double sx, double sy, double sz) {
  TriangleMesh m;
  for (int k = 0; k < 8; ++k) {
    m.vertices.emplace_back((k & 1 ? 0.5 : -0.5) * sx, (k & 2 ? 0.5 : -0.5) * sy, (k & 4 ? 0.5 : -0.5) * sz);
  }
  const std::uint32_t quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

/// Closed prism: the convex counter-clockwise polygon `outline` in the xy plane extruded
/// over z in [-height/2, height/2]. Caps are fans from the outline centroid.
inline TriangleMesh extrude(const std::vector<Eigen::Vector2d>& outline, double height) {
  TriangleMesh m;
  const auto n = static_cast<std::uint32_t>(outline.size());
  for (const auto& p : outline) m.vertices.emplace_back(p.x(), p.y(), -height / 2);
  for (const auto& p : outline) m.vertices.emplace_back(p.x(), p.y(), height / 2);
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : outline) c += p;
  c /= static_cast<double>(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.faces.push_back({i, j, n + j});
    m.faces.push_back({i, n + j, n + i});
  }
  const auto bc = add_vertex(m, {c.x(), c.y(), -height / 2});
  const auto tc = add_vertex(m, {c.x(), c.y(), height / 2});
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.faces.push_back({bc, j, i});
    m.faces.push_back({tc, n + i, n + j});
  }
  return m;
}

inline TriangleMesh cylinder(double radius, double height, std::size_t slices = 32) {
  std::vector<Eigen::Vector2d> outline;
  for (std::size_t i = 0; i < slices; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(slices);
    outline.emplace_back(radius * std::cos(t), radius * std::sin(t));
  }
  return extrude(outline, height);
}

/// L-shaped bracket: two plates of `thickness` meeting at a right angle, legs `a` (along x)
/// and `b` (along y), extruded `depth` along z.
inline TriangleMesh l_bracket(double a, double b, double thickness, double depth) {
  // L outline is star-shaped about the inner corner, so a fan from there closes the caps
  const std::vector<Eigen::Vector2d> outline = {{0, 0}, {a, 0}, {a, thickness}, {thickness, thickness}, {thickness, b}, {0, b}};
  TriangleMesh m;
  const auto n = static_cast<std::uint32_t>(outline.size());
  for (const auto& p : outline) m.vertices.emplace_back(p.x(), p.y(), -depth / 2);
  for (const auto& p : outline) m.vertices.emplace_back(p.x(), p.y(), depth / 2);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.faces.push_back({i, j, n + j});
    m.faces.push_back({i, n + j, n + i});
  }
  const std::uint32_t pivot = 3;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    if (i == pivot || j == pivot) continue;
    m.faces.push_back({pivot, j, i});
    m.faces.push_back({n + pivot, n + i, n + j});
  }
  Vec3 c = Vec3::Zero();
  for (const auto& v : m.vertices) c += v;
  c /= static_cast<double>(m.vertices.size());
  for (auto& v : m.vertices) v -= c;
  return m;
}

inline TriangleMesh transformed(TriangleMesh m, const Mat3& rotation, const Vec3& translation) {
  for (auto& v : m.vertices) v = rotation * v + translation;
  return m;
}

inline Mat3 rotation_xyz(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Vec3::UnitZ()) * Eigen::AngleAxisd(ry, Vec3::UnitY()) * Eigen::AngleAxisd(rx, Vec3::UnitX()))
      .toRotationMatrix();
}

struct Scene {
  std::string id;
  TriangleMesh mesh;  // placed in the sensing frame
};

/// The four-object suite, each centred at `center` in a pose that presents part of its
/// surface to an overhead array.
inline std::vector<Scene> fixture_suite(const Point3& center = Point3::Zero()) {
  const double q = std::numbers::pi / 4;
  const double h = std::numbers::pi / 2;
  return {
      {"sphere", transformed(uv_sphere(0.10, 24, 48), Mat3::Identity(), center)},
      {"cube", transformed(box(0.16, 0.16, 0.16), rotation_xyz(q, 0, 0), center)},
      {"cylinder", transformed(cylinder(0.08, 0.24, 48), rotation_xyz(h, 0, 0), center)},
      {"l-bracket", transformed(l_bracket(0.24, 0.16, 0.04, 0.16), Mat3::Identity(), center)},
  };
}

/// One of the four suite shapes with a random yaw, a small tilt, a scale jitter of
/// +-15% and an offset of up to `max_offset` in x and y.
inline Scene random_scene(std::uint64_t seed, const Point3& center = Point3::Zero(), double max_offset = 0.01) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto suite = fixture_suite();
  Scene s = suite[static_cast<std::size_t>(rng() % suite.size())];
  const double scale = 1.0 + 0.15 * u(rng);
  const Mat3 r = rotation_xyz(0.1 * u(rng), 0.1 * u(rng), std::numbers::pi * u(rng));
  const Vec3 offset(max_offset * u(rng), max_offset * u(rng), 0.0);
  for (auto& v : s.mesh.vertices) v = r * (scale * v) + center + offset;
  s.id += "-" + std::to_string(seed);
  return s;
}

}  // namespace mmrecon::fixtures
