#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmrecon/geometry.hpp"
#include "mmrecon/kdtree.hpp"

namespace mmrecon {

/// Distance threshold for F-score and coverage, in unit-sphere coordinates.
inline constexpr double kMetricThreshold = 0.08;

enum class CoverageCategory { Moderate, Challenging, Extreme };
enum class SizeCategory { Large, Medium, Small };

constexpr std::string_view to_string(CoverageCategory c) {
  switch (c) {
    case CoverageCategory::Moderate: return "Moderate";
    case CoverageCategory::Challenging: return "Challenging";
    case CoverageCategory::Extreme: return "Extreme";
  }
  return "?";
}

constexpr std::string_view to_string(SizeCategory c) {
  switch (c) {
    case SizeCategory::Large: return "Large";
    case SizeCategory::Medium: return "Medium";
    case SizeCategory::Small: return "Small";
  }
  return "?";
}

/// Distance from every point of `from` to its nearest point in `to`.
inline std::vector<double> nearest_distances(const OrientedPointCloud& from, const OrientedPointCloud& to) {
  const KdTree tree(to.points);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = std::sqrt(tree.nearest(from.points[i]).sq_dist);
  return d;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Mean nearest distance a->b plus mean nearest distance b->a (un-squared L2).
inline double chamfer_distance(const OrientedPointCloud& a, const OrientedPointCloud& b) {
  if (a.empty() || b.empty()) fail(ErrorCode::EmptyCloud, "chamfer distance of an empty cloud");
  // floating-point addition commutes, so swapping a and b gives the identical value
  return mean(nearest_distances(a, b)) + mean(nearest_distances(b, a));
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
};

inline double fscore_of(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline double fraction_within(const std::vector<double>& distances, double threshold) {
  std::size_t hits = 0;
  for (double d : distances) hits += d <= threshold ? 1 : 0;
  return distances.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(distances.size());
}

/// precision: pred points with a gt neighbour within `threshold`; recall: the converse.
inline PrecisionRecall precision_recall_fscore(const OrientedPointCloud& pred, const OrientedPointCloud& gt, double threshold) {
  if (pred.empty() || gt.empty()) fail(ErrorCode::EmptyCloud, "precision/recall of an empty cloud");
  if (!(threshold > 0.0)) fail(ErrorCode::InvalidArgument, "threshold must be > 0");
  PrecisionRecall r;
  r.precision = fraction_within(nearest_distances(pred, gt), threshold);
  r.recall = fraction_within(nearest_distances(gt, pred), threshold);
  r.fscore = fscore_of(r.precision, r.recall);
  return r;
}

/// > 36 Moderate, (18, 36] Challenging, <= 18 Extreme.
inline CoverageCategory coverage_category(double percent) {
  if (percent > 36.0) return CoverageCategory::Moderate;
  if (percent > 18.0) return CoverageCategory::Challenging;
  return CoverageCategory::Extreme;
}

struct Coverage {
  double percent = 0.0;
  CoverageCategory category = CoverageCategory::Extreme;
};

/// Percent of gt points whose nearest partial point is within `threshold` (unit-sphere frame).
inline Coverage coverage_percent(const OrientedPointCloud& partial, const OrientedPointCloud& gt,
                                 double threshold = kMetricThreshold) {
  if (partial.empty() || gt.empty()) fail(ErrorCode::EmptyCloud, "coverage of an empty cloud");
  Coverage c;
  c.percent = 100.0 * fraction_within(nearest_distances(gt, partial), threshold);
  c.category = coverage_category(c.percent);
  return c;
}

/// Longest dimension in metres: > 0.20 Large, [0.10, 0.20] Medium, < 0.10 Small.
inline SizeCategory size_category(double longest_dimension) {
  if (!(longest_dimension > 0.0)) fail(ErrorCode::NonPositiveDimension, "longest dimension must be > 0");
  if (longest_dimension > 0.20) return SizeCategory::Large;
  if (longest_dimension >= 0.10) return SizeCategory::Medium;
  return SizeCategory::Small;
}

struct EvalReport {
  std::string object_id;
  double chamfer = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  double coverage_percent = 0.0;
  CoverageCategory coverage_category = CoverageCategory::Extreme;
  SizeCategory size_category = SizeCategory::Small;
  double longest_dimension = 0.0;
};

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"object_id", r.object_id},
                     {"chamfer", r.chamfer},
                     {"precision", r.precision},
                     {"recall", r.recall},
                     {"fscore", r.fscore},
                     {"coverage_percent", r.coverage_percent},
                     {"coverage_category", std::string(to_string(r.coverage_category))},
                     {"size_category", std::string(to_string(r.size_category))},
                     {"longest_dimension", r.longest_dimension}};
}

struct EvalMeta {
  std::string object_id;
  double threshold = kMetricThreshold;
};

/// All metrics in the ground truth's unit-sphere frame. Synthetic scenes share the
/// simulation frame, so alignment is the ground-truth normalization applied to every cloud.
inline EvalReport evaluate_run(const OrientedPointCloud& final_cloud, const OrientedPointCloud& gt, const OrientedPointCloud& partial,
                               const EvalMeta& meta = {}) {
  if (final_cloud.empty() || gt.empty() || partial.empty()) fail(ErrorCode::EmptyCloud, "evaluate_run needs non-empty clouds");
  const auto [gt_unit, frame] = normalize_to_unit_sphere(gt);
  const auto pred_unit = frame.apply_inverse(final_cloud);
  const auto partial_unit = frame.apply_inverse(partial);

  EvalReport r;
  r.object_id = meta.object_id;
  r.chamfer = chamfer_distance(pred_unit, gt_unit);
  const auto prf = precision_recall_fscore(pred_unit, gt_unit, meta.threshold);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.fscore = prf.fscore;
  const auto cov = coverage_percent(partial_unit, gt_unit, meta.threshold);
  r.coverage_percent = cov.percent;
  r.coverage_category = cov.category;
  r.longest_dimension = bounding_extent(gt.points).maxCoeff();
  r.size_category = size_category(r.longest_dimension);
  return r;
}

}  // namespace mmrecon
