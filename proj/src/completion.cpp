#include "lookaround/completion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lookaround/errors.hpp"
#include "lookaround/kernels.hpp"
#include "lookaround/models.hpp"
#include "lookaround/rng.hpp"

namespace lookaround::completion {

std::vector<double> occupancy_targets_serial(const std::vector<Vec3>& support,
                                             const PointCloud& gt) {
  if (support.empty() || gt.empty())
    throw ContractViolation("occupancy_targets: empty input");
  std::vector<double> masses(support.size(), 0.0);
  const auto nn = kernels::nearest_indices_serial(gt.points, support);
  for (std::int32_t m : nn) masses[m] += 1.0;
  const double inv = 1.0 / static_cast<double>(gt.size());
  for (double& v : masses) v *= inv;
  return masses;
}

std::vector<double> occupancy_targets(const std::vector<Vec3>& support, const PointCloud& gt) {
  if (support.empty() || gt.empty())
    throw ContractViolation("occupancy_targets: empty input");
  std::vector<double> masses(support.size(), 0.0);
  const auto nn = kernels::nearest_indices(gt.points, support);
  for (std::int32_t m : nn) masses[m] += 1.0;
  const double inv = 1.0 / static_cast<double>(gt.size());
  for (double& v : masses) v *= inv;
  return masses;
}

double loss_pcl_serial(const std::vector<Vec3>& pred_points, const PointCloud& gt) {
  if (pred_points.empty() || gt.empty()) throw ContractViolation("loss_pcl: empty input");
  const auto nn = kernels::nearest_indices_serial(gt.points, pred_points);
  double total = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k)
    total += (gt.points[k] - pred_points[nn[k]]).norm();
  return total / static_cast<double>(gt.size());
}

double loss_pcl(const std::vector<Vec3>& pred_points, const PointCloud& gt) {
  if (pred_points.empty() || gt.empty()) throw ContractViolation("loss_pcl: empty input");
  const auto nn = kernels::nearest_indices(gt.points, pred_points);
  return kernels::map_sum(static_cast<int>(gt.size()),
                          [&](int k) { return (gt.points[k] - pred_points[nn[k]]).norm(); }) /
         static_cast<double>(gt.size());
}

double loss_delta(const std::vector<double>& pred_masses,
                  const std::vector<double>& target_masses) {
  if (pred_masses.size() != target_masses.size())
    throw ContractViolation("loss_delta: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred_masses.size(); ++i) {
    const double d = pred_masses[i] - target_masses[i];
    s += d * d;
  }
  return s;
}

PointCloud threshold_cloud(const SupportCloud& sc, double tau) {
  if (tau < 0.0) throw ContractViolation("threshold_cloud: tau must be >= 0");
  PointCloud out;
  for (std::size_t m = 0; m < sc.size(); ++m)
    if (sc.masses[m] >= tau) out.points.push_back(sc.points[m]);
  return out;
}

PointCloud laplacian_smooth(const PointCloud& cloud, int k_neighbors, int iterations,
                            double step) {
  if (static_cast<int>(cloud.size()) <= k_neighbors)
    throw ContractViolation("laplacian_smooth: cloud smaller than k+1");
  PointCloud out = cloud;
  for (int it = 0; it < iterations; ++it) {
    const auto knn = kernels::knn_indices(out.points, k_neighbors);
    std::vector<Vec3> next(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      Vec3 centroid = Vec3::Zero();
      for (std::int32_t j : knn[i]) centroid += out.points[j];
      centroid /= static_cast<double>(k_neighbors);
      next[i] = out.points[i] + step * (centroid - out.points[i]);
    }
    out.points = std::move(next);
  }
  return out;
}

std::vector<int> leave_out_indices(const std::vector<double>& confidence, int m_min, int m_max,
                                   std::uint64_t seed) {
  const int n = static_cast<int>(confidence.size());
  if (n == 0) throw ContractViolation("leave_out: empty cloud");
  if (m_min > m_max) throw ContractViolation("leave_out: m_min > m_max");

  auto rng = make_rng(seed, 81);
  const int hi = std::min(m_max, n);
  const int lo = std::min(m_min, hi);
  const int take = lo == hi ? hi : uniform_int(rng, lo, hi);

  // weighted sampling without replacement via exponential keys u^(1/w);
  // w = 0 keys sort last, so zero-confidence points lose to any positive one
  std::vector<std::pair<double, int>> keys(n);
  for (int i = 0; i < n; ++i) {
    const double u = uniform_real(rng, 1e-15, 1.0);
    const double w = confidence[i];
    keys[i] = {w > 0.0 ? std::pow(u, 1.0 / w) : -1.0, i};
  }
  std::partial_sort(keys.begin(), keys.begin() + take, keys.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<int> out(take);
  for (int i = 0; i < take; ++i) out[i] = keys[i].second;
  return out;
}

PointCloud leave_out(const PointCloud& cloud, int m_min, int m_max, std::uint64_t seed) {
  const std::vector<double> conf =
      cloud.has_confidence() ? cloud.confidence : std::vector<double>(cloud.size(), 1.0);
  const std::vector<int> idx = leave_out_indices(conf, m_min, m_max, seed);
  PointCloud out;
  out.points.reserve(idx.size());
  if (cloud.has_confidence()) out.confidence.reserve(idx.size());
  for (int i : idx) {
    out.points.push_back(cloud.points[i]);
    if (cloud.has_confidence()) out.confidence.push_back(cloud.confidence[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Point completion network
// ---------------------------------------------------------------------------

PointMlpParams PointMlpParams::make(int support_size, int point_feature_dim, std::uint64_t seed) {
  PointMlpParams p;
  p.support_size = support_size;
  p.point_feature_dim = point_feature_dim;

  const models::Mlp enc{p.input_dim(),
                        {p.encoder_widths[0], p.encoder_widths[1]},
                        p.encoder_widths[2],
                        p.leak};
  const models::Mlp dec{p.pooled_dim(),
                        {p.decoder_widths[0], p.decoder_widths[1]},
                        4 * support_size,
                        p.leak};
  models::add_mlp_params(p.params, "pcl.enc", enc, mix64(seed ^ 0xe17c), 1.0);
  models::add_mlp_params(p.params, "pcl.dec", dec, mix64(seed ^ 0xdec0), 0.1);
  return p;
}

std::vector<int> canonical_order(const PointCloud& cloud,
                                 const std::vector<Eigen::VectorXd>& descriptors) {
  std::vector<int> order(cloud.size());
  std::iota(order.begin(), order.end(), 0);
  auto key_less = [&](int a, int b) {
    const Vec3 &pa = cloud.points[a], &pb = cloud.points[b];
    for (int c = 0; c < 3; ++c)
      if (pa[c] != pb[c]) return pa[c] < pb[c];
    if (!descriptors.empty()) {
      const auto &da = descriptors[a], &db = descriptors[b];
      for (Eigen::Index c = 0; c < da.size(); ++c)
        if (da[c] != db[c]) return da[c] < db[c];
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), key_less);
  return order;
}

std::vector<Eigen::VectorXd> point_features(const depth::DepthPrediction& pred,
                                            const Eigen::VectorXd& frame_descriptor,
                                            const Calibration& k) {
  const int grid = static_cast<int>(std::lround(std::sqrt(double(frame_descriptor.size()))));
  if (grid * grid != frame_descriptor.size())
    throw ContractViolation("point_features: descriptor is not a square grid");

  auto desc_at = [&](double gu, double gv) {
    // bilinear sample of the descriptor grid
    const double x = std::clamp(gu, 0.0, grid - 1.0);
    const double y = std::clamp(gv, 0.0, grid - 1.0);
    const int x0 = std::min(static_cast<int>(x), grid - 2);
    const int y0 = std::min(static_cast<int>(y), grid - 2);
    const double fx = x - x0, fy = y - y0;
    auto v = [&](int xx, int yy) { return frame_descriptor[yy * grid + xx]; };
    return (1 - fx) * (1 - fy) * v(x0, y0) + fx * (1 - fy) * v(x0 + 1, y0) +
           (1 - fx) * fy * v(x0, y0 + 1) + fx * fy * v(x0 + 1, y0 + 1);
  };

  std::vector<Eigen::VectorXd> feats;
  for (int v = 0; v < pred.mean.height; ++v) {
    for (int u = 0; u < pred.mean.width; ++u) {
      if (!pred.mean.valid(u, v)) continue;
      const double conf = 1.0 / pred.sigma.at(u, v);
      Eigen::VectorXd f(4);
      f << static_cast<double>(u) / std::max(1, k.width - 1),
          static_cast<double>(v) / std::max(1, k.height - 1),
          desc_at(double(u) / std::max(1, k.width - 1) * (grid - 1),
                  double(v) / std::max(1, k.height - 1) * (grid - 1)),
          conf / (1.0 + conf);
      feats.push_back(std::move(f));
    }
  }
  return feats;
}

PointMlpOut point_mlp_build(ad::Tape& tape, const learn::BoundParams& bound,
                            const PointMlpParams& mlp, const PointCloud& cloud,
                            const std::vector<Eigen::VectorXd>& descriptors) {
  if (cloud.empty()) throw ContractViolation("point_mlp: empty input cloud");
  if (!descriptors.empty() && descriptors.size() != cloud.size())
    throw ContractViolation("point_mlp: descriptor count mismatch");
  const int feat = mlp.point_feature_dim;
  if (!descriptors.empty() && descriptors[0].size() != feat)
    throw ContractViolation("point_mlp: descriptor length mismatch");

  const std::vector<int> order = canonical_order(cloud, descriptors);
  const int n = static_cast<int>(cloud.size());
  const int in_dim = mlp.input_dim();
  std::vector<double> rows(static_cast<std::size_t>(n) * in_dim, 0.0);
  for (int r = 0; r < n; ++r) {
    const int src = order[r];
    double* row = rows.data() + static_cast<std::size_t>(r) * in_dim;
    for (int c = 0; c < 3; ++c) row[c] = cloud.points[src][c];
    if (!descriptors.empty())
      for (int c = 0; c < feat; ++c) row[3 + c] = descriptors[src][c];
  }

  const ad::Var input = tape.constant(rows, n, in_dim);
  const models::Mlp enc{in_dim, {mlp.encoder_widths[0], mlp.encoder_widths[1]},
                        mlp.encoder_widths[2], mlp.leak};
  ad::Var encoded = models::mlp_forward_rows(tape, bound, "pcl.enc", enc, input);
  encoded = tape.leaky_relu(encoded, mlp.leak);  // keep the pooled features nonlinear
  const ad::Var pooled = tape.concat(tape.max_pool_rows(encoded), tape.sum_pool_rows(encoded));

  const models::Mlp dec{mlp.pooled_dim(), {mlp.decoder_widths[0], mlp.decoder_widths[1]},
                        4 * mlp.support_size, mlp.leak};
  const ad::Var out = models::mlp_forward(tape, bound, "pcl.dec", dec, pooled);

  PointMlpOut result;
  result.support = tape.slice(out, 0, mlp.support_size, 3);
  result.masses = tape.softplus(tape.slice(out, 3 * mlp.support_size, mlp.support_size));
  return result;
}

SupportCloud point_mlp_forward(const PointCloud& cloud,
                               const std::vector<Eigen::VectorXd>& descriptors,
                               const PointMlpParams& mlp) {
  ad::Tape tape;
  const learn::BoundParams bound = learn::bind(tape, mlp.params);
  const PointMlpOut out = point_mlp_build(tape, bound, mlp, cloud, descriptors);

  SupportCloud sc;
  sc.points.resize(mlp.support_size);
  sc.masses.resize(mlp.support_size);
  const auto pv = tape.values(out.support);
  const auto mv = tape.values(out.masses);
  for (int m = 0; m < mlp.support_size; ++m) {
    sc.points[m] = Vec3(pv[3 * m], pv[3 * m + 1], pv[3 * m + 2]);
    sc.masses[m] = mv[m];
  }
  return sc;
}

}  // namespace lookaround::completion
