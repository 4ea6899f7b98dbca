#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <algorithm>
#include <optional>
#include <vector>

#include "mmrecon/geometry.hpp"

namespace mmrecon {

/// Isotropic voxel grid. `origin` is the centre of voxel (0,0,0); x varies fastest.
struct VoxelGridSpec {
  Point3 origin = Point3::Zero();
  double spacing = 0.004;
  std::array<std::size_t, 3> dims{64, 64, 64};

  bool valid() const { return spacing > 0.0 && dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1 && is_finite(origin); }

  std::size_t size() const noexcept { return dims[0] * dims[1] * dims[2]; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept { return i + dims[0] * (j + dims[1] * k); }

  std::array<std::size_t, 3> coords(std::size_t linear) const noexcept {
    const std::size_t i = linear % dims[0];
    const std::size_t rest = linear / dims[0];
    return {i, rest % dims[1], rest / dims[1]};
  }

  Point3 center(std::size_t i, std::size_t j, std::size_t k) const {
    return origin + spacing * Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
  }
  Point3 center(std::size_t linear) const {
    const auto c = coords(linear);
    return center(c[0], c[1], c[2]);
  }

  /// Grid of `n`^3 voxels centred on `middle`.
  static VoxelGridSpec cube(const Point3& middle, std::size_t n, double spacing) {
    VoxelGridSpec g;
    g.spacing = spacing;
    g.dims = {n, n, n};
    g.origin = middle - Vec3::Constant(spacing * static_cast<double>(n - 1) / 2.0);
    return g;
  }

  /// Nearest voxel to `p`, or nothing when outside the grid.
  std::optional<std::size_t> locate(const Point3& p) const {
    std::array<std::size_t, 3> c{};
    for (int a = 0; a < 3; ++a) {
      const double f = std::round((p[a] - origin[a]) / spacing);
      if (f < 0 || f >= static_cast<double>(dims[static_cast<std::size_t>(a)])) return std::nullopt;
      c[static_cast<std::size_t>(a)] = static_cast<std::size_t>(f);
    }
    return index(c[0], c[1], c[2]);
  }

  bool operator==(const VoxelGridSpec& o) const { return origin == o.origin && spacing == o.spacing && dims == o.dims; }
};

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (first value for p = 0).
inline double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) fail(ErrorCode::InvalidArgument, "percentile of empty set");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(std::clamp(percentile, 0.0, 100.0) / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

}  // namespace mmrecon
