#pragma once

// Candidate partial surfaces from radar signals: a normal field is estimated per voxel,
// integrated into a scalar potential along lattice paths, and sliced into isosurfaces.

#include <optional>
#include <vector>

#include "mmrecon/backprojection.hpp"
#include "mmrecon/geometry.hpp"
#include "mmrecon/grid.hpp"

namespace mmrecon {

struct NormalField {
  VoxelGridSpec grid;
  std::vector<std::optional<Vec3>> directions;  // nullopt: no reliable estimate
  std::vector<double> confidence;

  std::size_t confident_count() const {
    std::size_t n = 0;
    for (const auto& d : directions) n += d.has_value() ? 1 : 0;
    return n;
  }
};

struct ScalarField {
  VoxelGridSpec grid;
  std::vector<double> values;
  std::size_t reference = 0;
};

struct CandidateSet {
  std::vector<OrientedPointCloud> partials;
  std::vector<double> iso_values;
  double delta = 0.0;

  std::size_t size() const noexcept { return partials.size(); }
  bool empty() const noexcept { return partials.empty(); }
};

/// Confidence gate: voxels below this percentile of |S| get no direction.
inline constexpr double kConfidencePercentile = 90.0;

/// Builds the field from a focusing pass that carried sum_k |c_k(v)| u_{k,v}.
inline NormalField normal_field_from_focus(const FocusResult& focus, double gate_percentile = kConfidencePercentile) {
  NormalField field;
  field.grid = focus.image.grid;
  field.confidence = focus.image.magnitudes();
  field.directions.assign(field.confidence.size(), std::nullopt);
  const double gate = nearest_rank_percentile(field.confidence, gate_percentile);
  for (std::size_t v = 0; v < field.confidence.size(); ++v) {
    if (!(field.confidence[v] > 0.0) || field.confidence[v] < gate) continue;
    const double len = focus.direction_sum[v].norm();
    if (len > 0.0) field.directions[v] = focus.direction_sum[v] / len;
  }
  return field;
}

/// Per voxel: direction = normalize(sum_k |c_k(v)| u_{k,v}), confidence = |S(v)|, where
/// c_k(v) is sensor k's focused contribution and u_{k,v} points from v to sensor k.
inline NormalField estimate_normal_field(const SignalSet& signals, const VoxelGridSpec& grid) {
  return normal_field_from_focus(detail::focus<true>(signals, grid));
}

/// Accumulates field(v_j) . (v_j - v_{j-1}) along the lattice path from `v0` that steps in x,
/// then y, then z. `field` maps a linear voxel index to a vector (zero for no contribution).
template <typename FieldFn>
ScalarField integrate_lattice_path(const VoxelGridSpec& grid, std::size_t v0, FieldFn&& field) {
  if (v0 >= grid.size()) fail(ErrorCode::InvalidArgument, "reference voxel outside the grid");
  const auto [i0, j0, k0] = grid.coords(v0);
  const auto [nx, ny, nz] = grid.dims;
  const double h = grid.spacing;
  ScalarField out{grid, std::vector<double>(grid.size(), 0.0), v0};

  const auto step = [&](std::size_t to, int axis, int sign) {
    return sign * h * field(to)[axis];
  };

  // x leg along row (j0, k0)
  std::vector<double> fx(nx, 0.0);
  for (std::size_t i = i0 + 1; i < nx; ++i) fx[i] = fx[i - 1] + step(grid.index(i, j0, k0), 0, +1);
  for (std::size_t i = i0; i-- > 0;) fx[i] = fx[i + 1] + step(grid.index(i, j0, k0), 0, -1);

  // y leg in plane k0, then z leg per column
  std::vector<double> fy(ny);
  for (std::size_t i = 0; i < nx; ++i) {
    fy[j0] = fx[i];
    for (std::size_t j = j0 + 1; j < ny; ++j) fy[j] = fy[j - 1] + step(grid.index(i, j, k0), 1, +1);
    for (std::size_t j = j0; j-- > 0;) fy[j] = fy[j + 1] + step(grid.index(i, j, k0), 1, -1);
    for (std::size_t j = 0; j < ny; ++j) {
      out.values[grid.index(i, j, k0)] = fy[j];
      for (std::size_t k = k0 + 1; k < nz; ++k) {
        out.values[grid.index(i, j, k)] = out.values[grid.index(i, j, k - 1)] + step(grid.index(i, j, k), 2, +1);
      }
      for (std::size_t k = k0; k-- > 0;) {
        out.values[grid.index(i, j, k)] = out.values[grid.index(i, j, k + 1)] + step(grid.index(i, j, k), 2, -1);
      }
    }
  }
  out.values[v0] = 0.0;
  return out;
}

/// f(v) = sum_{j in R} N(v_j) . d_j along the axis-ordered path R from v0, with d_j the
/// step displacement in metres; null directions contribute nothing.
inline ScalarField integrate_potential(const NormalField& field, std::size_t v0) {
  return integrate_lattice_path(field.grid, v0, [&](std::size_t v) -> Vec3 {
    const auto& d = field.directions[v];
    return d ? *d : Vec3::Zero();
  });
}

/// Slices the potential at `num_candidates` iso-values evenly spaced between the 10th and
/// 90th percentile of f over confident voxels; candidate i holds the confident voxels with
/// |f(v) - I(i)| < delta, carrying the field direction as normal. Duplicate iso-values and
/// empty candidates are dropped.
inline CandidateSet sample_isosurfaces(const ScalarField& scalar, const NormalField& field, std::size_t num_candidates,
                                       double delta) {
  if (num_candidates < 1) fail(ErrorCode::InvalidArgument, "num_candidates must be >= 1");
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "delta must be > 0");
  if (!(scalar.grid == field.grid)) fail(ErrorCode::InvalidArgument, "scalar and normal field grids differ");

  std::vector<std::size_t> confident;
  std::vector<double> values;
  for (std::size_t v = 0; v < field.directions.size(); ++v) {
    if (!field.directions[v]) continue;
    confident.push_back(v);
    values.push_back(scalar.values[v]);
  }
  if (confident.empty()) fail(ErrorCode::NoConfidentVoxels, "normal field has no confident voxels");

  const double lo = nearest_rank_percentile(values, 10.0);
  const double hi = nearest_rank_percentile(values, 90.0);
  std::vector<double> iso;
  for (std::size_t i = 0; i < num_candidates; ++i) {
    const double value = num_candidates == 1 ? 0.5 * (lo + hi)
                                             : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(num_candidates - 1);
    if (iso.empty() || value > iso.back()) iso.push_back(value);
  }

  CandidateSet set;
  set.delta = delta;
  for (double level : iso) {
    OrientedPointCloud pc;
    for (std::size_t c = 0; c < confident.size(); ++c) {
      if (std::abs(values[c] - level) < delta) {
        pc.points.push_back(field.grid.center(confident[c]));
        pc.normals.push_back(*field.directions[confident[c]]);
      }
    }
    if (pc.empty()) continue;
    set.partials.push_back(std::move(pc));
    set.iso_values.push_back(level);
  }
  return set;
}

}  // namespace mmrecon
