#pragma once

// Physics-consistent partial observations of a full oriented cloud: specular returns,
// radar-facing visibility and material-dependent anisotropic visibility, plus noise.

#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "mmrecon/geometry.hpp"
#include "mmrecon/radar.hpp"
#include "mmrecon/visibility.hpp"

namespace mmrecon {

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct VisibilityParams {
  double tau = deg2rad(40.0);
  double tau_h = deg2rad(90.0);
  double tau_v = deg2rad(90.0);
  double noise_sigma = 0.010;
  double dropout_fraction = 0.0;

  bool valid() const {
    const auto angle_ok = [](double a) { return a > 0.0 && a <= std::numbers::pi; };
    return angle_ok(tau) && angle_ok(tau_h) && angle_ok(tau_v) && noise_sigma >= 0.0 && dropout_fraction >= 0.0 &&
           dropout_fraction < 1.0;
  }
};

/// Smallest angle between the normal at each point and the directions to the sensors.
inline std::vector<double> specular_mismatch(const OrientedPointCloud& cloud, std::span<const Point3> sensors) {
  if (!cloud.empty() && !cloud.has_normals()) fail(ErrorCode::MissingNormals, "specular mask needs normals");
  std::vector<double> theta(cloud.size(), std::numbers::pi);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double best = std::numbers::pi;
    for (const auto& p : sensors) {
      const Vec3 delta = p - cloud.points[i];
      const double d = delta.norm();
      if (d < 1e-12) fail(ErrorCode::SensorCoincidesWithPoint, "sensor within 1e-12 m of point " + std::to_string(i));
      const double c = std::clamp(cloud.normals[i].dot(delta / d), -1.0, 1.0);
      best = std::min(best, std::abs(std::acos(c)));
    }
    theta[i] = best;
  }
  return theta;
}

/// Points whose normal lies within `tau` of the direction to at least one sensor.
inline std::vector<bool> specular_mask(const OrientedPointCloud& cloud, const SensorArray& array, double tau) {
  const auto theta = specular_mismatch(cloud, array.positions);
  std::vector<bool> mask(cloud.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = theta[i] < tau;
  return mask;
}

/// Radar-frame anisotropy: angle to [1,0,0] below tau_h and angle to [0,1,0] below tau_v.
inline std::vector<bool> anisotropic_mask(const OrientedPointCloud& cloud, double tau_h, double tau_v) {
  if (!cloud.empty() && !cloud.has_normals()) fail(ErrorCode::MissingNormals, "anisotropic mask needs normals");
  std::vector<bool> mask(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& n = cloud.normals[i];
    const double theta_h = std::abs(std::acos(std::clamp(n.x(), -1.0, 1.0)));
    const double theta_v = std::abs(std::acos(std::clamp(n.y(), -1.0, 1.0)));
    mask[i] = theta_h < tau_h && theta_v < tau_v;
  }
  return mask;
}

inline std::vector<bool> mask_and(const std::vector<bool>& a, const std::vector<bool>& b) {
  std::vector<bool> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

struct PartialPair {
  OrientedPointCloud partial;
  OrientedPointCloud full;
};

/// Hidden-point viewpoints are at most 16 sensors subsampled evenly from the array.
inline constexpr std::size_t kMaxVisibilityViewpoints = 16;

inline PartialPair synthesize_partial(const OrientedPointCloud& full, const SensorArray& array, const VisibilityParams& params,
                                      std::uint64_t seed) {
  if (!full.has_normals()) fail(ErrorCode::MissingNormals, "full cloud needs normals");
  if (full.size() < 100) fail(ErrorCode::InvalidArgument, "full cloud needs >= 100 points");
  if (!params.valid()) fail(ErrorCode::InvalidArgument, "invalid visibility parameters");

  const auto mask = mask_and(mask_and(specular_mask(full, array, params.tau),
                                      radar_facing_mask_union(full, array.positions, kMaxVisibilityViewpoints)),
                             anisotropic_mask(full, params.tau_h, params.tau_v));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  OrientedPointCloud partial;
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (!mask[i]) continue;
    // fixed draw count per surviving point keeps streams aligned across parameter choices
    const double drop = unit(rng);
    const Vec3 offset(gauss(rng), gauss(rng), gauss(rng));
    if (drop < params.dropout_fraction) continue;
    partial.points.push_back(full.points[i] + params.noise_sigma * offset);
    partial.normals.push_back(full.normals[i]);
    if (full.has_reflectivity()) partial.reflectivity.push_back(full.reflectivity[i]);
  }
  if (partial.empty()) fail(ErrorCode::EmptyPartial, "every point was masked out");
  return {std::move(partial), full};
}

}  // namespace mmrecon
