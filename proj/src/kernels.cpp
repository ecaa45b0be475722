#include "lookaround/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "lookaround/errors.hpp"
#include "lookaround/threads.hpp"

namespace lookaround::kernels {

namespace {

constexpr int kGridThreshold = 4000;

inline std::int32_t nearest_one(const Vec3& q, const std::vector<Vec3>& refs) {
  std::int32_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < refs.size(); ++m) {
    const double d2 = (refs[m] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<std::int32_t>(m);
    }
  }
  return best;
}

// Uniform hash grid over the reference bounding box. Ring search expands
// until the best candidate distance is provably minimal, so results match
// brute force exactly (including the lowest-index tie rule: cell lists are
// ascending and strict < keeps the first minimum).
class UniformGrid {
 public:
  explicit UniformGrid(const std::vector<Vec3>& refs) : refs_(refs) {
    lo_ = refs[0];
    Vec3 hi = refs[0];
    for (const Vec3& p : refs) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3 extent = (hi - lo_).cwiseMax(1e-12);
    const double target = std::cbrt(static_cast<double>(refs.size()));
    for (int a = 0; a < 3; ++a) {
      dims_[a] = std::clamp(static_cast<int>(target), 1, 64);
      cell_[a] = extent[a] / dims_[a];
      if (cell_[a] <= 0.0) cell_[a] = 1.0;
    }
    cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
    for (std::size_t m = 0; m < refs.size(); ++m)
      cells_[cell_index(coords(refs[m]))].push_back(static_cast<std::int32_t>(m));
  }

  std::int32_t nearest(const Vec3& q) const {
    const std::array<int, 3> c = coords(q);
    std::int32_t best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (best >= 0) {
        // Points in farther rings are at least (ring-1) cells away along
        // some axis; stop once that bound exceeds the best distance.
        const double min_cell = std::min({cell_[0], cell_[1], cell_[2]});
        const double bound = (ring - 1) * min_cell;
        if (bound > 0.0 && bound * bound > best_d2) break;
      }
      scan_ring(q, c, ring, best, best_d2);
    }
    return best;
  }

 private:
  std::array<int, 3> coords(const Vec3& p) const {
    std::array<int, 3> c;
    for (int a = 0; a < 3; ++a) {
      const int i = static_cast<int>(std::floor((p[a] - lo_[a]) / cell_[a]));
      c[a] = std::clamp(i, 0, dims_[a] - 1);
    }
    return c;
  }

  std::size_t cell_index(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  void scan_cell(const Vec3& q, int x, int y, int z, std::int32_t& best, double& best_d2) const {
    if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) return;
    for (std::int32_t m : cells_[cell_index({x, y, z})]) {
      const double d2 = (refs_[m] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && m < best)) {
        best_d2 = d2;
        best = m;
      }
    }
  }

  void scan_ring(const Vec3& q, const std::array<int, 3>& c, int ring, std::int32_t& best,
                 double& best_d2) const {
    if (ring == 0) {
      scan_cell(q, c[0], c[1], c[2], best, best_d2);
      return;
    }
    for (int dz = -ring; dz <= ring; ++dz)
      for (int dy = -ring; dy <= ring; ++dy)
        for (int dx = -ring; dx <= ring; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          scan_cell(q, c[0] + dx, c[1] + dy, c[2] + dz, best, best_d2);
        }
  }

  const std::vector<Vec3>& refs_;
  Vec3 lo_;
  std::array<int, 3> dims_;
  std::array<double, 3> cell_;
  std::vector<std::vector<std::int32_t>> cells_;
};

}  // namespace

int grid_threshold() { return kGridThreshold; }

std::vector<std::int32_t> nearest_indices_serial(const std::vector<Vec3>& queries,
                                                 const std::vector<Vec3>& refs) {
  if (queries.empty() || refs.empty())
    throw ContractViolation("nearest_indices: empty input cloud");
  std::vector<std::int32_t> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = nearest_one(queries[i], refs);
  return out;
}

std::vector<std::int32_t> nearest_indices(const std::vector<Vec3>& queries,
                                          const std::vector<Vec3>& refs) {
  if (queries.empty() || refs.empty())
    throw ContractViolation("nearest_indices: empty input cloud");
  std::vector<std::int32_t> out(queries.size());
  const int n = static_cast<int>(queries.size());
  if (refs.size() < static_cast<std::size_t>(kGridThreshold)) {
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
    for (int i = 0; i < n; ++i) out[i] = nearest_one(queries[i], refs);
  } else {
    const UniformGrid grid(refs);
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
    for (int i = 0; i < n; ++i) out[i] = grid.nearest(queries[i]);
  }
  return out;
}

namespace {
std::vector<std::int32_t> knn_one(const std::vector<Vec3>& points, std::size_t i, int k) {
  std::vector<std::pair<double, std::int32_t>> dist;
  dist.reserve(points.size() - 1);
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j == i) continue;
    dist.emplace_back((points[j] - points[i]).squaredNorm(), static_cast<std::int32_t>(j));
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  std::vector<std::int32_t> out(k);
  for (int j = 0; j < k; ++j) out[j] = dist[j].second;
  return out;
}
}  // namespace

std::vector<std::vector<std::int32_t>> knn_indices_serial(const std::vector<Vec3>& points, int k) {
  if (static_cast<int>(points.size()) <= k)
    throw ContractViolation("knn_indices: cloud smaller than k+1");
  std::vector<std::vector<std::int32_t>> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = knn_one(points, i, k);
  return out;
}

std::vector<std::vector<std::int32_t>> knn_indices(const std::vector<Vec3>& points, int k) {
  if (static_cast<int>(points.size()) <= k)
    throw ContractViolation("knn_indices: cloud smaller than k+1");
  std::vector<std::vector<std::int32_t>> out(points.size());
  const int n = static_cast<int>(points.size());
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
  for (int i = 0; i < n; ++i) out[i] = knn_one(points, i, k);
  return out;
}

double map_sum_serial(int n, const std::function<double(int)>& f) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f(i);
  return s;
}

double map_sum(int n, const std::function<double(int)>& f) {
  std::vector<double> partial(static_cast<std::size_t>(std::max(n, 0)));
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
  for (int i = 0; i < n; ++i) partial[i] = f(i);
  double s = 0.0;
  for (double v : partial) s += v;
  return s;
}

}  // namespace lookaround::kernels
