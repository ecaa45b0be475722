#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lookaround/geometry.hpp"

namespace lookaround::metrics {

constexpr double kBaselineEps = 1e-6;

/// One evaluated frame: ground truth, prediction (already moved into the
/// ground-truth frame by the dataset-level alignment), and its confidence.
struct PoseEvalRecord {
  RigidPose gt;
  RigidPose pred;
  double confidence = 1.0;
  int sequence = 0;
  int frame = 0;
};

struct ShapeEvalConfig {
  int resolution = 30;  // voxels per axis
  double tau = 0.0;     // occupancy threshold used upstream; recorded in reports
  bool smooth = true;
};

struct AbsoluteErrors {
  double rotation_rad = 0.0;   // 2^(-1/2) |ln(R* Rhat^T)|_F
  double center_dist = 0.0;    // camera-center distance
};

struct RelativeErrors {
  double rotation_rad = 0.0;
  double translation = 0.0;  // unit-normalized difference, in [0, 2]
};

AbsoluteErrors absolute_errors(const PoseEvalRecord& rec);

/// Relative errors over a frame pair; nullopt when either relative
/// translation baseline is degenerate (pair skipped).
std::optional<RelativeErrors> relative_errors(const PoseEvalRecord& rec_t,
                                              const PoseEvalRecord& rec_tp);

struct PairingConfig {
  int max_pairs = 0;         // 0 = all pairs
  bool within_sequence_only = false;
};

struct MedianReport {
  double e_r = 0.0;
  double e_c = 0.0;
  double e_r_rel = 0.0;
  double e_t_rel = 0.0;
  int n_records = 0;
  int n_pairs = 0;
};

/// Medians of the absolute errors over records and of the relative errors
/// over all admissible pairs.
MedianReport median_report(const std::vector<PoseEvalRecord>& records,
                           const PairingConfig& pairing = {});

/// Interpolation-free average precision: label = (error <= threshold), rank
/// by decreasing confidence (ties by original index), mean precision at the
/// positive ranks; 0 when there are no positives.
double average_precision(const std::vector<double>& errors, const std::vector<double>& confidences,
                         double threshold);

/// Symmetric normalized point-cloud distance:
/// mean_c min_chat |c - chat| + mean_chat min_c |c - chat|.
double pcl_distance(const PointCloud& c, const PointCloud& c_hat);

/// Intersection-over-union of occupied voxels on a grid over c's bounding
/// box; predicted points outside the box are clipped (counted nowhere).
double voxel_iou(const PointCloud& c, const PointCloud& c_hat, const ShapeEvalConfig& cfg);

/// Closed-form scale aligning centroids: zeta = mu_c . mu_chat / |mu_chat|^2.
std::pair<double, PointCloud> scale_align(const PointCloud& c_hat, const PointCloud& c);

double median(std::vector<double> values);

}  // namespace lookaround::metrics
