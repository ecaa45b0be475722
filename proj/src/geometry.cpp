#include "lookaround/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "lookaround/errors.hpp"

namespace lookaround {

namespace {
Quat canonicalize(Quat q) {
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}
}  // namespace

Rotation::Rotation(const Quat& q) : q_(canonicalize(q)) {}

// Eigen's matrix constructor uses the max-diagonal (Shepperd) branch, which
// stays well conditioned near angle pi where the log formula degenerates.
Rotation::Rotation(const Mat3& m) : q_(canonicalize(Quat(m))) {}

Rotation Rotation::inverse() const {
  Quat c = q_.conjugate();
  return Rotation(c);
}

Rotation Rotation::compose(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }

double Rotation::angle_to(const Rotation& other) const {
  const Quat e = q_ * other.q_.conjugate();
  const double s = e.vec().norm();
  return 2.0 * std::atan2(s, std::abs(e.w()));
}

RigidPose RigidPose::compose(const RigidPose& rhs) const {
  return {rotation.compose(rhs.rotation), rotation.rotate(rhs.translation) + translation};
}

RigidPose RigidPose::inverse() const {
  const Rotation rinv = rotation.inverse();
  return {rinv, -rinv.rotate(translation)};
}

Calibration::Calibration(double fx_, double fy_, double cx_, double cy_, int w, int h)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
  if (fx <= 0.0 || fy <= 0.0) throw ContractViolation("calibration: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ContractViolation("calibration: image size must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
    throw ContractViolation("calibration: principal point outside image");
}

Vec3 PointCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

Vec3 so3_log(const Rotation& r) {
  const Quat& q = r.quat();  // w >= 0, so the angle is already principal
  const double s = q.vec().norm();
  const double angle = 2.0 * std::atan2(s, q.w());
  if (s < 1e-12) return 2.0 * q.vec();  // angle ~ 0: omega = 2 v / w, w ~ 1
  return (angle / s) * q.vec();
}

Rotation so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  Quat q;
  if (theta < 1e-8) {
    // second-order Taylor of (cos(t/2), sinc(t/2)/2 * omega)
    const double t2 = theta * theta;
    q.w() = 1.0 - t2 / 8.0;
    q.vec() = (0.5 - t2 / 48.0) * omega;
  } else {
    q.w() = std::cos(0.5 * theta);
    q.vec() = (std::sin(0.5 * theta) / theta) * omega;
  }
  return Rotation(q);
}

RigidPose relative_pose(const RigidPose& g_t, const RigidPose& g_tp) {
  const Rotation r_rel = g_tp.rotation.compose(g_t.rotation.inverse());
  return {r_rel, g_tp.translation - r_rel.rotate(g_t.translation)};
}

PointCloud backproject(const DepthMap& depth, const Calibration& k, int stride) {
  if (depth.width != k.width || depth.height != k.height)
    throw ContractViolation("backproject: depth dimensions do not match calibration");
  if (stride < 1) throw ContractViolation("backproject: stride must be >= 1");

  PointCloud cloud;
  const bool with_conf = depth.has_sigma();
  for (int v = 0; v < depth.height; v += stride) {
    for (int u = 0; u < depth.width; u += stride) {
      const double d = depth.at(u, v);
      if (!std::isfinite(d)) continue;
      cloud.points.emplace_back((u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d);
      if (with_conf) cloud.confidence.push_back(1.0 / depth.sigma[depth.index(u, v)]);
    }
  }
  return cloud;
}

SimilarityTransform umeyama_align(const PointCloud& gt_centers, const PointCloud& pred_centers,
                                  bool with_scale) {
  const std::size_t n = gt_centers.size();
  if (n != pred_centers.size() || n < 3)
    throw ContractViolation("umeyama_align: needs equal counts >= 3");

  // Solve pred ~ c R_u gt + t_u, then map back to the (1/s) parametrization.
  Vec3 mu_x = gt_centers.centroid();
  Vec3 mu_y = pred_centers.centroid();

  Mat3 cov = Mat3::Zero();
  double var_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 dx = gt_centers.points[i] - mu_x;
    const Vec3 dy = pred_centers.points[i] - mu_y;
    cov += dy * dx.transpose();
    var_x += dx.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_x /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  const double span = (var_x > 0.0) ? std::sqrt(var_x) : 0.0;
  if (span < 1e-12 || d(1) <= 1e-12 * std::max(d(0), 1e-300))
    throw NumericalError("umeyama_align: degenerate point configuration");

  Vec3 sgn = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sgn(2) = -1.0;

  const Mat3 r_u = svd.matrixU() * sgn.asDiagonal() * svd.matrixV().transpose();
  const double c = with_scale ? (d.dot(sgn) / var_x) : 1.0;
  if (c <= 0.0) throw NumericalError("umeyama_align: non-positive scale");
  const Vec3 t_u = mu_y - c * (r_u * mu_x);

  SimilarityTransform t;
  t.rotation = Rotation(r_u);
  t.scale = 1.0 / c;
  t.translation = t.scale * t_u;
  return t;
}

RigidPose adjust_pose(const RigidPose& g_hat, const SimilarityTransform& t_g) {
  RigidPose out;
  out.rotation = g_hat.rotation.compose(t_g.rotation);
  out.translation = g_hat.rotation.rotate(t_g.translation) + t_g.scale * g_hat.translation;
  return out;
}

}  // namespace lookaround
