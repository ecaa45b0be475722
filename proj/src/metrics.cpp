#include "lookaround/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "lookaround/errors.hpp"
#include "lookaround/kernels.hpp"

namespace lookaround::metrics {

double median(std::vector<double> values) {
  if (values.empty()) throw ContractViolation("median: empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lo + hi);
}

AbsoluteErrors absolute_errors(const PoseEvalRecord& rec) {
  AbsoluteErrors e;
  // |ln(R* Rhat^T)|_F = sqrt(2) * geodesic angle, so e_R is the angle itself
  e.rotation_rad = rec.gt.rotation.angle_to(rec.pred.rotation);
  e.center_dist = (rec.pred.camera_center() - rec.gt.camera_center()).norm();
  return e;
}

std::optional<RelativeErrors> relative_errors(const PoseEvalRecord& rec_t,
                                              const PoseEvalRecord& rec_tp) {
  const RigidPose gt_rel = relative_pose(rec_t.gt, rec_tp.gt);
  const RigidPose pred_rel = relative_pose(rec_t.pred, rec_tp.pred);

  const double n_gt = gt_rel.translation.norm();
  const double n_pred = pred_rel.translation.norm();
  if (n_gt < kBaselineEps || n_pred < kBaselineEps) return std::nullopt;

  RelativeErrors e;
  e.rotation_rad = gt_rel.rotation.angle_to(pred_rel.rotation);
  e.translation = (pred_rel.translation / n_pred - gt_rel.translation / n_gt).norm();
  return e;
}

MedianReport median_report(const std::vector<PoseEvalRecord>& records,
                           const PairingConfig& pairing) {
  if (records.empty()) throw ContractViolation("median_report: no records");

  std::vector<double> er, ec, err, ett;
  er.reserve(records.size());
  ec.reserve(records.size());
  for (const PoseEvalRecord& r : records) {
    const AbsoluteErrors e = absolute_errors(r);
    er.push_back(e.rotation_rad);
    ec.push_back(e.center_dist);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      if (pairing.within_sequence_only && records[i].sequence != records[j].sequence) continue;
      if (pairing.max_pairs > 0 && static_cast<int>(err.size()) >= pairing.max_pairs) break;
      const auto rel = relative_errors(records[i], records[j]);
      if (!rel) continue;
      err.push_back(rel->rotation_rad);
      ett.push_back(rel->translation);
    }
  }

  MedianReport rep;
  rep.e_r = median(er);
  rep.e_c = median(ec);
  rep.e_r_rel = err.empty() ? 0.0 : median(err);
  rep.e_t_rel = ett.empty() ? 0.0 : median(ett);
  rep.n_records = static_cast<int>(records.size());
  rep.n_pairs = static_cast<int>(err.size());
  return rep;
}

double average_precision(const std::vector<double>& errors,
                         const std::vector<double>& confidences, double threshold) {
  if (errors.empty() || errors.size() != confidences.size())
    throw ContractViolation("average_precision: bad input lengths");

  std::vector<int> order(errors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return confidences[a] > confidences[b];
  });

  double precision_sum = 0.0;
  int positives = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (errors[order[k]] <= threshold) {
      ++positives;
      precision_sum += static_cast<double>(positives) / static_cast<double>(k + 1);
    }
  }
  return positives == 0 ? 0.0 : precision_sum / positives;
}

double pcl_distance(const PointCloud& c, const PointCloud& c_hat) {
  if (c.empty() || c_hat.empty()) throw ContractViolation("pcl_distance: empty cloud");
  const auto nn_ab = kernels::nearest_indices(c.points, c_hat.points);
  const auto nn_ba = kernels::nearest_indices(c_hat.points, c.points);
  const double d_ab =
      kernels::map_sum(static_cast<int>(c.size()),
                       [&](int i) { return (c.points[i] - c_hat.points[nn_ab[i]]).norm(); }) /
      static_cast<double>(c.size());
  const double d_ba =
      kernels::map_sum(static_cast<int>(c_hat.size()),
                       [&](int i) { return (c_hat.points[i] - c.points[nn_ba[i]]).norm(); }) /
      static_cast<double>(c_hat.size());
  return d_ab + d_ba;
}

double voxel_iou(const PointCloud& c, const PointCloud& c_hat, const ShapeEvalConfig& cfg) {
  if (c.empty() || c_hat.empty()) throw ContractViolation("voxel_iou: empty cloud");
  if (cfg.resolution < 2) throw ContractViolation("voxel_iou: resolution must be >= 2");

  Vec3 lo = c.points[0], hi = c.points[0];
  for (const Vec3& p : c.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = hi - lo;
  if (extent.minCoeff() <= 0.0) throw ContractViolation("voxel_iou: zero-volume bounding box");

  const int res = cfg.resolution;
  auto voxel_of = [&](const Vec3& p) -> std::int64_t {
    std::int64_t idx = 0;
    for (int a = 0; a < 3; ++a) {
      const double f = (p[a] - lo[a]) / extent[a];
      if (f < 0.0 || f > 1.0) return -1;  // outside the grid: clipped
      int cell = static_cast<int>(f * res);
      cell = std::min(cell, res - 1);  // points on the max face stay inside
      idx = idx * res + cell;
    }
    return idx;
  };

  std::unordered_set<std::int64_t> a, b;
  for (const Vec3& p : c.points) a.insert(voxel_of(p));
  for (const Vec3& p : c_hat.points) {
    const std::int64_t v = voxel_of(p);
    if (v >= 0) b.insert(v);
  }
  a.erase(-1);

  std::size_t inter = 0;
  for (std::int64_t v : b) inter += a.count(v);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::pair<double, PointCloud> scale_align(const PointCloud& c_hat, const PointCloud& c) {
  if (c.empty() || c_hat.empty()) throw ContractViolation("scale_align: empty cloud");
  const Vec3 mu_c = c.centroid();
  const Vec3 mu_h = c_hat.centroid();
  const double denom = mu_h.squaredNorm();
  if (denom < 1e-15) throw NumericalError("scale_align: predicted centroid at the origin");
  const double zeta = mu_c.dot(mu_h) / denom;

  PointCloud scaled = c_hat;
  for (Vec3& p : scaled.points) p *= zeta;
  return {zeta, std::move(scaled)};
}

}  // namespace lookaround::metrics
