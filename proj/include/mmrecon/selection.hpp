#pragma once

// Choosing the final reconstruction among completed candidates: local-entropy scoring
// for noisy (vertically stacked) proposals, simulated-response correlation otherwise.

#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmrecon/completion.hpp"
#include "mmrecon/grid.hpp"
#include "mmrecon/kdtree.hpp"
#include "mmrecon/radar.hpp"

namespace mmrecon {

enum class SelectionBranch { Entropy, Rendering };

constexpr std::string_view to_string(SelectionBranch b) { return b == SelectionBranch::Entropy ? "entropy" : "rendering"; }

struct UncertaintyRule {
  double threshold = 0.6;
  /// true: flag when ratio <= threshold (stacked columns shrink the projection);
  /// false: flag when ratio > threshold.
  bool flag_at_or_below = true;

  bool flags(double ratio) const { return flag_at_or_below ? ratio <= threshold : ratio > threshold; }
};

/// Distinct occupied (x, y) voxel columns divided by the number of points.
inline double uncertainty_ratio(const OrientedPointCloud& partial, const VoxelGridSpec& grid) {
  if (partial.empty()) fail(ErrorCode::EmptyCloud, "uncertainty ratio of an empty cloud");
  std::set<std::pair<std::size_t, std::size_t>> columns;
  for (const auto& p : partial.points) {
    const auto v = grid.locate(p);
    if (!v) fail(ErrorCode::InvalidArgument, "point outside the voxel grid");
    const auto c = grid.coords(*v);
    columns.emplace(c[0], c[1]);
  }
  return static_cast<double>(columns.size()) / static_cast<double>(partial.size());
}

inline constexpr std::size_t kEntropyNeighbors = 30;
inline constexpr double kEntropyPercentile = 75.0;

/// lambda3 / lambda1 of the neighbourhood covariance (the point and its k nearest
/// neighbours) at every point; 0 when lambda1 = 0 or lambda3 is at round-off level.
inline std::vector<double> local_eigen_ratios(const OrientedPointCloud& cloud, std::size_t k = kEntropyNeighbors) {
  if (cloud.size() < k + 1) {
    fail(ErrorCode::TooFewPoints, "entropy score needs >= " + std::to_string(k + 1) + " points, got " + std::to_string(cloud.size()));
  }
  const KdTree tree(cloud.points);
  std::vector<double> ratios(cloud.size());
  const auto n = static_cast<std::ptrdiff_t>(cloud.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::vector<Point3> hood;
    hood.reserve(k + 1);
    for (const auto& nb : tree.knn(cloud.points[static_cast<std::size_t>(i)], k + 1)) hood.push_back(cloud.points[nb.index]);
    const Vec3 ev = principal_axes(hood).eigenvalues;
    const double l1 = ev[0], l3 = ev[2];
    ratios[static_cast<std::size_t>(i)] = (l1 > 0.0 && l3 > 1e-12 * l1) ? l3 / l1 : 0.0;
  }
  return ratios;
}

/// Nearest-rank `percentile` of the local lambda3/lambda1 ratios.
inline double entropy_score(const OrientedPointCloud& cloud, std::size_t k = kEntropyNeighbors,
                            double percentile = kEntropyPercentile) {
  return nearest_rank_percentile(local_eigen_ratios(cloud, k), percentile);
}

inline std::size_t argmin_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

inline std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

inline std::vector<double> entropy_scores(const std::vector<CompletedCandidate>& candidates) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(entropy_score(c.reconstruction));
  return scores;
}

/// Index of the candidate with the lowest entropy score (lowest index on ties).
inline std::size_t select_by_entropy(const std::vector<CompletedCandidate>& candidates) {
  if (candidates.empty()) fail(ErrorCode::NoCandidates, "nothing to select from");
  return argmin_first(entropy_scores(candidates));
}

/// |<a, b>| / (|a| |b|); 0 when either side vanishes.
inline double normalized_correlation(const SignalSet& a, const SignalSet& b) {
  if (a.samples.size() != b.samples.size()) fail(ErrorCode::InvalidArgument, "signal shapes differ");
  Complex inner(0.0, 0.0);
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    inner += std::conj(a.samples[i]) * b.samples[i];
    na += std::norm(a.samples[i]);
    nb += std::norm(b.samples[i]);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::abs(inner) / std::sqrt(na * nb);
}

inline std::vector<double> rendering_scores(const std::vector<CompletedCandidate>& candidates, const SignalSet& measured,
                                            double specular_sigma) {
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& rec = candidates[i].reconstruction;
    if (!rec.has_normals()) fail(ErrorCode::MissingNormals, "candidate " + std::to_string(i) + " has no normals");
    const auto simulated = simulate_signals(rec, measured.array, measured.waveform, {specular_sigma, false});
    scores[i] = normalized_correlation(simulated, measured);
  }
  return scores;
}

/// Candidate whose simulated response correlates best with the measurement.
inline std::size_t select_by_rendering(const std::vector<CompletedCandidate>& candidates, const SignalSet& measured,
                                       double specular_sigma) {
  if (candidates.empty()) fail(ErrorCode::NoCandidates, "nothing to select from");
  return argmax_first(rendering_scores(candidates, measured, specular_sigma));
}

struct SelectionReport {
  std::size_t chosen_index = 0;       // into the completed list
  std::size_t chosen_source_index = 0;  // into the candidate set
  std::vector<double> uncertainty_ratios;
  std::vector<double> entropy_scores;
  std::vector<double> rendering_scores;
  SelectionBranch branch = SelectionBranch::Rendering;
};

inline void to_json(nlohmann::json& j, const SelectionReport& r) {
  j = nlohmann::json{{"chosen_index", r.chosen_index},
                     {"chosen_source_index", r.chosen_source_index},
                     {"branch", std::string(to_string(r.branch))},
                     {"uncertainty_ratios", r.uncertainty_ratios},
                     {"entropy_scores", r.entropy_scores},
                     {"rendering_scores", r.rendering_scores}};
}

struct SelectionOptions {
  UncertaintyRule rule;
  double specular_sigma = 0.35;
};

/// Entropy branch for the whole set when any partial is flagged high-uncertainty,
/// rendering comparison otherwise. `partials[i]` is the proposal behind `candidates[i]`.
inline std::pair<OrientedPointCloud, SelectionReport> select(const std::vector<CompletedCandidate>& candidates,
                                                             const std::vector<OrientedPointCloud>& partials,
                                                             const VoxelGridSpec& grid, const SignalSet& measured,
                                                             const SelectionOptions& options = {}) {
  if (candidates.empty()) fail(ErrorCode::NoCandidates, "nothing to select from");
  if (candidates.size() != partials.size()) fail(ErrorCode::InvalidArgument, "candidates and partials are not parallel");
  SelectionReport report;
  bool any_flagged = false;
  for (const auto& p : partials) {
    report.uncertainty_ratios.push_back(uncertainty_ratio(p, grid));
    any_flagged = any_flagged || options.rule.flags(report.uncertainty_ratios.back());
  }
  report.entropy_scores = entropy_scores(candidates);
  if (any_flagged) {
    report.branch = SelectionBranch::Entropy;
    report.chosen_index = argmin_first(report.entropy_scores);
  } else {
    report.branch = SelectionBranch::Rendering;
    report.rendering_scores = rendering_scores(candidates, measured, options.specular_sigma);
    report.chosen_index = argmax_first(report.rendering_scores);
  }
  report.chosen_source_index = candidates[report.chosen_index].source_index;
  return {candidates[report.chosen_index].reconstruction, report};
}

}  // namespace mmrecon
