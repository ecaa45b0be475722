#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>
#include <vector>

#include "lookaround/depthmap.hpp"

namespace lookaround {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rotation stored as a unit quaternion, canonicalized to w >= 0 so every
/// rotation has exactly one representation. Matrix form is materialized on
/// demand; normalization on construction prevents drift over long
/// composition chains.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}
  explicit Rotation(const Quat& q);
  explicit Rotation(const Mat3& m);

  static Rotation identity() { return Rotation(); }

  const Quat& quat() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Vec3 rotate(const Vec3& v) const { return q_ * v; }

  Rotation inverse() const;
  Rotation compose(const Rotation& rhs) const;  // this * rhs

  /// Geodesic angle to another rotation, in [0, pi].
  double angle_to(const Rotation& other) const;

 private:
  Quat q_;  // unit, w >= 0
};

/// Rigid motion g = (R, T): p_out = R p + T. World-to-camera convention.
struct RigidPose {
  Rotation rotation;
  Vec3 translation{0.0, 0.0, 0.0};

  static RigidPose identity() { return RigidPose{}; }

  RigidPose compose(const RigidPose& rhs) const;  // apply rhs, then this
  RigidPose inverse() const;
  Vec3 apply(const Vec3& p) const { return rotation.rotate(p) + translation; }
  /// Center of a camera with this world-to-camera pose: -R^T T.
  Vec3 camera_center() const { return -(rotation.inverse().rotate(translation)); }
};

/// Similarity transform (R, T, s), s > 0.
struct SimilarityTransform {
  Rotation rotation;
  Vec3 translation{0.0, 0.0, 0.0};
  double scale = 1.0;

  static SimilarityTransform identity() { return SimilarityTransform{}; }
};

/// Pinhole intrinsics. Throws ContractViolation when out of range.
struct Calibration {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  Calibration() = default;
  Calibration(double fx, double fy, double cx, double cy, int w, int h);
};

/// Ordered 3D points with optional per-point confidence (>= 0).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> confidence;  // empty or same size as points

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_confidence() const { return !confidence.empty(); }
  Vec3 centroid() const;
};

// ---------------------------------------------------------------------------
// SO(3) maps
// ---------------------------------------------------------------------------

/// Principal log map: axis-angle vector with norm = rotation angle in [0, pi].
/// Well conditioned for all angles because rotations are stored as
/// quaternions (the angle-pi branch lives in the matrix-to-quaternion
/// conversion).
Vec3 so3_log(const Rotation& r);

/// Exponential map (Rodrigues). Angles below 1e-8 use the second-order
/// Taylor expansion of the quaternion form.
Rotation so3_exp(const Vec3& omega);

// ---------------------------------------------------------------------------
// Pose algebra
// ---------------------------------------------------------------------------

/// Relative motion from camera t to camera t': g_tp o g_t^-1, i.e.
/// (R_tp R_t^T, T_tp - R_tp R_t^T T_t). Invariant to right-composition of
/// both poses with any fixed rigid motion.
RigidPose relative_pose(const RigidPose& g_t, const RigidPose& g_tp);

/// Camera-frame points from a depth map: one point per valid pixel sampled
/// with the given stride, ((u-cx)/fx d, (v-cy)/fy d, d) in row-major pixel
/// order. When the map carries a sigma plane, per-point confidence 1/sigma
/// is attached.
PointCloud backproject(const DepthMap& depth, const Calibration& k, int stride = 1);

/// Pixel position of a camera-frame point (z > 0), the internal inverse of
/// backproject used by the warping and consistency tests.
inline Eigen::Vector2d project(const Vec3& p, const Calibration& k) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

/// Least-squares similarity aligning predicted centers to ground-truth
/// centers: minimizes sum_i |(1/s) R c_i + (1/s) T - c_hat_i|^2 over
/// (R, T, s), with s forced to 1 when with_scale is off. Reflections are
/// clamped to proper rotations by flipping the smallest singular direction.
/// Throws NumericalError on degenerate (collinear/coincident) input.
SimilarityTransform umeyama_align(const PointCloud& gt_centers, const PointCloud& pred_centers,
                                  bool with_scale);

/// Move a predicted pose into the ground-truth frame established by
/// umeyama_align: (R_hat R_G, R_hat T_G + s_G T_hat).
RigidPose adjust_pose(const RigidPose& g_hat, const SimilarityTransform& t_g);

}  // namespace lookaround
