#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lookaround/geometry.hpp"

namespace lookaround::kernels {

// Data-parallel inner loops. Every kernel has a serial reference twin used
// by the tests and the benchmark; the OpenMP variants are written so their
// output is bit-identical to the serial one for any worker count (disjoint
// outputs, fixed accumulation order).

/// Index of the exact nearest reference point for each query; ties go to
/// the lowest index. Brute force below grid_threshold() references, uniform
/// grid with ring search above (still exact).
std::vector<std::int32_t> nearest_indices(const std::vector<Vec3>& queries,
                                          const std::vector<Vec3>& refs);
std::vector<std::int32_t> nearest_indices_serial(const std::vector<Vec3>& queries,
                                                 const std::vector<Vec3>& refs);

/// Reference count at which nearest_indices switches to the grid.
int grid_threshold();

/// k nearest neighbors (excluding the point itself) for every point of the
/// cloud, by ascending (distance, index). Brute force, parallel over points.
std::vector<std::vector<std::int32_t>> knn_indices(const std::vector<Vec3>& points, int k);
std::vector<std::vector<std::int32_t>> knn_indices_serial(const std::vector<Vec3>& points, int k);

/// sum_i f(i) with f evaluated in parallel and the partial values reduced
/// in index order, so the result does not depend on the worker count.
double map_sum(int n, const std::function<double(int)>& f);
double map_sum_serial(int n, const std::function<double(int)>& f);

}  // namespace lookaround::kernels
