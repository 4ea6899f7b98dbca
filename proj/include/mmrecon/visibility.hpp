#pragma once

// Spherical-flip hidden point removal on top of an incremental 3D convex hull.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "mmrecon/geometry.hpp"

namespace mmrecon {

namespace detail {

/// Incremental convex hull; reports which input points end up as hull vertices.
class ConvexHull3 {
 public:
  explicit ConvexHull3(std::span<const Vec3> points) : pts_(points) {
    if (pts_.size() < 4) fail(ErrorCode::DegenerateCloud, "convex hull needs >= 4 points");
    double extent = 0.0;
    for (const auto& p : pts_) extent = std::max(extent, p.cwiseAbs().maxCoeff());
    eps_ = 1e-11 * std::max(extent, 1e-300);
    build();
  }

  std::vector<bool> vertex_mask() const {
    std::vector<bool> mask(pts_.size(), false);
    for (const auto& f : faces_) {
      if (!f.alive) continue;
      for (int v : f.v) mask[static_cast<std::size_t>(v)] = true;
    }
    return mask;
  }

  std::size_t face_count() const {
    std::size_t n = 0;
    for (const auto& f : faces_) n += f.alive ? 1 : 0;
    return n;
  }

 private:
  struct Face {
    std::array<int, 3> v;
    Vec3 normal;
    double offset;
    bool alive = true;
  };

  static std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }

  double distance(const Face& f, const Vec3& p) const { return f.normal.dot(p) - f.offset; }

  int add_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    Vec3 n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    const double len = n.norm();
    f.normal = len > 0 ? Vec3(n / len) : Vec3::Zero();
    f.offset = f.normal.dot(pts_[a]);
    const int id = static_cast<int>(faces_.size());
    faces_.push_back(f);
    edges_[edge_key(a, b)] = id;
    edges_[edge_key(b, c)] = id;
    edges_[edge_key(c, a)] = id;
    return id;
  }

  void kill_face(int id) {
    Face& f = faces_[static_cast<std::size_t>(id)];
    f.alive = false;
    for (int e = 0; e < 3; ++e) {
      auto it = edges_.find(edge_key(f.v[e], f.v[(e + 1) % 3]));
      if (it != edges_.end() && it->second == id) edges_.erase(it);
    }
  }

  void build() {
    const int n = static_cast<int>(pts_.size());
    int i0 = 0;
    for (int i = 1; i < n; ++i) {
      if (pts_[i].x() < pts_[i0].x()) i0 = i;
    }
    int i1 = -1;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = (pts_[i] - pts_[i0]).squaredNorm();
      if (d > best) best = d, i1 = i;
    }
    if (i1 < 0 || std::sqrt(best) <= eps_) fail(ErrorCode::DegenerateCloud, "all points coincide");
    const Vec3 dir = (pts_[i1] - pts_[i0]).normalized();
    int i2 = -1;
    best = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 d = pts_[i] - pts_[i0];
      const double off = (d - d.dot(dir) * dir).norm();
      if (off > best) best = off, i2 = i;
    }
    if (i2 < 0 || best <= eps_) fail(ErrorCode::DegenerateCloud, "points are collinear");
    const Vec3 plane_n = (pts_[i1] - pts_[i0]).cross(pts_[i2] - pts_[i0]).normalized();
    int i3 = -1;
    best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double off = std::abs(plane_n.dot(pts_[i] - pts_[i0]));
      if (off > best) best = off, i3 = i;
    }
    if (i3 < 0 || best <= eps_) fail(ErrorCode::DegenerateCloud, "points are coplanar");

    const Vec3 inside = (pts_[i0] + pts_[i1] + pts_[i2] + pts_[i3]) / 4.0;
    const std::array<std::array<int, 3>, 4> tets{{{i0, i1, i2}, {i0, i1, i3}, {i0, i2, i3}, {i1, i2, i3}}};
    for (auto t : tets) {
      const Vec3 nrm = (pts_[t[1]] - pts_[t[0]]).cross(pts_[t[2]] - pts_[t[0]]);
      if (nrm.dot(inside - pts_[t[0]]) > 0) std::swap(t[1], t[2]);
      add_face(t[0], t[1], t[2]);
    }

    // outside sets: every pending point is filed under one face it lies above; when that
    // face dies its points move to a new face they see, or drop out as interior
    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    outside_.assign(faces_.size(), {});
    for (int p = 0; p < n; ++p) {
      if (p == i0 || p == i1 || p == i2 || p == i3) continue;
      assign(p, 0, static_cast<int>(faces_.size()), owner);
    }

    std::vector<int> visible, stack, orphans;
    std::vector<int> mark;  // epoch stamps, so nothing is cleared per point
    int epoch = 0;
    std::vector<std::pair<int, int>> horizon;
    for (int p = 0; p < n; ++p) {
      const int seed = owner[static_cast<std::size_t>(p)];
      if (seed < 0) continue;
      const Vec3& q = pts_[p];

      // flood the connected visible region from the owning face
      ++epoch;
      mark.resize(faces_.size(), 0);
      visible.clear();
      stack.assign(1, seed);
      mark[static_cast<std::size_t>(seed)] = epoch;
      while (!stack.empty()) {
        const int f = stack.back();
        stack.pop_back();
        visible.push_back(f);
        const Face& face = faces_[static_cast<std::size_t>(f)];
        for (int e = 0; e < 3; ++e) {
          const auto it = edges_.find(edge_key(face.v[(e + 1) % 3], face.v[e]));
          if (it == edges_.end()) continue;
          const int g = it->second;
          if (mark[static_cast<std::size_t>(g)] == epoch) continue;
          if (distance(faces_[static_cast<std::size_t>(g)], q) > eps_) {
            mark[static_cast<std::size_t>(g)] = epoch;
            stack.push_back(g);
          }
        }
      }
      horizon.clear();
      for (int f : visible) {
        const Face& face = faces_[static_cast<std::size_t>(f)];
        for (int e = 0; e < 3; ++e) {
          const int a = face.v[e], b = face.v[(e + 1) % 3];
          const auto it = edges_.find(edge_key(b, a));
          if (it == edges_.end() || mark[static_cast<std::size_t>(it->second)] != epoch) horizon.emplace_back(a, b);
        }
      }
      orphans.clear();
      for (int f : visible) {
        for (int o : outside_[static_cast<std::size_t>(f)]) {
          if (o != p && owner[static_cast<std::size_t>(o)] == f) orphans.push_back(o);
        }
        outside_[static_cast<std::size_t>(f)].clear();
        kill_face(f);
      }
      owner[static_cast<std::size_t>(p)] = -1;
      const int first_new = static_cast<int>(faces_.size());
      for (const auto& [a, b] : horizon) add_face(a, b, p);
      outside_.resize(faces_.size());
      // orphans all come after p in index order, so they are still pending
      std::sort(orphans.begin(), orphans.end());
      for (int o : orphans) assign(o, first_new, static_cast<int>(faces_.size()), owner);
    }
  }

  void assign(int p, int face_begin, int face_end, std::vector<int>& owner) {
    owner[static_cast<std::size_t>(p)] = -1;
    for (int f = face_begin; f < face_end; ++f) {
      if (faces_[static_cast<std::size_t>(f)].alive && distance(faces_[static_cast<std::size_t>(f)], pts_[p]) > eps_) {
        owner[static_cast<std::size_t>(p)] = f;
        outside_[static_cast<std::size_t>(f)].push_back(p);
        return;
      }
    }
  }

  std::span<const Vec3> pts_;
  double eps_ = 0.0;
  std::vector<Face> faces_;
  std::unordered_map<std::uint64_t, int> edges_;
  std::vector<std::vector<int>> outside_;
};

}  // namespace detail

/// Spherical-flip hidden point removal (Katz et al. style): flip every point about a sphere
/// of radius 100 x cloud diameter centred on the viewpoint; points landing on the convex
/// hull of the flipped set plus the viewpoint are visible.
inline std::vector<bool> radar_facing_mask(const OrientedPointCloud& cloud, const Point3& viewpoint) {
  if (cloud.size() < 4) fail(ErrorCode::DegenerateCloud, "hidden point removal needs >= 4 points");
  const double diameter = bounding_diameter(cloud.points);
  if (!(diameter > 0.0)) fail(ErrorCode::DegenerateCloud, "all points coincide");
  double max_r = 0.0;
  for (const auto& p : cloud.points) max_r = std::max(max_r, (p - viewpoint).norm());
  // the flip sphere must enclose the cloud
  const double radius = std::max(100.0 * diameter, 2.0 * max_r);

  std::vector<Vec3> flipped;
  flipped.reserve(cloud.size() + 1);
  std::vector<std::size_t> source;
  std::vector<bool> mask(cloud.size(), false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 q = cloud.points[i] - viewpoint;
    const double r = q.norm();
    if (r == 0.0) {
      mask[i] = true;
      continue;
    }
    flipped.push_back(q + 2.0 * (radius - r) * q / r);
    source.push_back(i);
  }
  flipped.emplace_back(Vec3::Zero());
  if (flipped.size() < 4) return mask;
  const auto hull = detail::ConvexHull3(flipped).vertex_mask();
  for (std::size_t j = 0; j < source.size(); ++j) {
    if (hull[j]) mask[source[j]] = true;
  }
  return mask;
}

/// Union of per-viewpoint masks over at most `max_viewpoints` evenly subsampled viewpoints.
inline std::vector<bool> radar_facing_mask_union(const OrientedPointCloud& cloud, std::span<const Point3> viewpoints,
                                                 std::size_t max_viewpoints = 16) {
  std::vector<bool> mask(cloud.size(), false);
  if (viewpoints.empty()) return mask;
  const std::size_t n = viewpoints.size();
  const std::size_t m = std::min(n, std::max<std::size_t>(max_viewpoints, 1));
  std::size_t last = n;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t idx = m == 1 ? 0 : (j * (n - 1) + (m - 1) / 2) / (m - 1);
    if (idx == last) continue;
    last = idx;
    const auto single = radar_facing_mask(cloud, viewpoints[idx]);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] || single[i];
  }
  return mask;
}

}  // namespace mmrecon
