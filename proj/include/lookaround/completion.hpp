#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "lookaround/ad.hpp"
#include "lookaround/depth.hpp"
#include "lookaround/geometry.hpp"
#include "lookaround/params.hpp"

namespace lookaround::completion {

/// M predicted support points with non-negative occupancy masses.
struct SupportCloud {
  std::vector<Vec3> points;
  std::vector<double> masses;

  std::size_t size() const { return points.size(); }
};

/// Occupancy targets: fraction of ground-truth points whose nearest support
/// point is each s_m (ties to the lowest index); sums to 1. The serial twin
/// is the brute-force oracle.
std::vector<double> occupancy_targets(const std::vector<Vec3>& support, const PointCloud& gt);
std::vector<double> occupancy_targets_serial(const std::vector<Vec3>& support,
                                             const PointCloud& gt);

/// Mean over ground-truth points of the distance to the nearest predicted
/// point (one-sided).
double loss_pcl(const std::vector<Vec3>& pred_points, const PointCloud& gt);
double loss_pcl_serial(const std::vector<Vec3>& pred_points, const PointCloud& gt);

/// Squared error between predicted and target masses.
double loss_delta(const std::vector<double>& pred_masses, const std::vector<double>& target_masses);

/// Support points with mass >= tau.
PointCloud threshold_cloud(const SupportCloud& sc, double tau);

/// Iterative neighborhood-mean filter: each point moves by
/// step * (centroid of its k nearest neighbors - itself).
PointCloud laplacian_smooth(const PointCloud& cloud, int k_neighbors, int iterations, double step);

/// Confidence-weighted subsample without replacement. The sample size is
/// drawn uniformly in [m_min, min(m_max, n)]; fixing m_min = m_max gives the
/// test-time behavior. Zero-confidence points are never chosen while
/// positive-confidence points remain.
std::vector<int> leave_out_indices(const std::vector<double>& confidence, int m_min, int m_max,
                                   std::uint64_t seed);
PointCloud leave_out(const PointCloud& cloud, int m_min, int m_max, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Point completion network
// ---------------------------------------------------------------------------

/// Per-point encoder, concatenated max+sum pooling, decoder into M support
/// points and M masses (masses through softplus). Input points are put in a
/// canonical lexicographic order first, which makes the whole forward (and
/// the sum pooling in particular) bit-for-bit permutation invariant.
struct PointMlpParams {
  int support_size = 512;
  int point_feature_dim = 4;
  double leak = 0.2;
  std::vector<int> encoder_widths{128, 128, 128};
  std::vector<int> decoder_widths{256, 256};
  learn::ParamStore params;

  static PointMlpParams make(int support_size, int point_feature_dim, std::uint64_t seed);
  int input_dim() const { return 3 + point_feature_dim; }
  int pooled_dim() const { return 2 * encoder_widths.back(); }
};

/// Indices that order (point, descriptor) rows lexicographically.
std::vector<int> canonical_order(const PointCloud& cloud,
                                 const std::vector<Eigen::VectorXd>& descriptors);

/// Per-point appearance features aligned with backproject()'s valid-pixel
/// order: (u, v normalized, bilinear frame-descriptor sample, squashed
/// confidence). The completion input alongside align_partial_cloud.
std::vector<Eigen::VectorXd> point_features(const depth::DepthPrediction& pred,
                                            const Eigen::VectorXd& frame_descriptor,
                                            const Calibration& k);

struct PointMlpOut {
  ad::Var support;  // [M x 3]
  ad::Var masses;   // [M]
};

/// Training-side graph; cloud/descriptors enter as constants.
PointMlpOut point_mlp_build(ad::Tape& tape, const learn::BoundParams& bound,
                            const PointMlpParams& mlp, const PointCloud& cloud,
                            const std::vector<Eigen::VectorXd>& descriptors);

/// Inference wrapper around the same graph.
SupportCloud point_mlp_forward(const PointCloud& cloud,
                               const std::vector<Eigen::VectorXd>& descriptors,
                               const PointMlpParams& mlp);

}  // namespace lookaround::completion
