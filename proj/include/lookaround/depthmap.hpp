#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace lookaround {

/// Row-major depth image in world units. Missing depth is a quiet NaN in
/// memory; the on-disk format carries an explicit validity plane. An
/// optional sigma plane holds per-pixel Laplace scales.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // width*height
  std::vector<double> sigma;   // empty or width*height

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, invalid_depth()) {}

  static double invalid_depth() { return std::numeric_limits<double>::quiet_NaN(); }

  bool has_sigma() const { return !sigma.empty(); }
  std::size_t pixel_count() const { return values.size(); }
  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }

  double at(int u, int v) const { return values[index(u, v)]; }
  double& at(int u, int v) { return values[index(u, v)]; }
  bool valid(int u, int v) const { return std::isfinite(at(u, v)); }

  int valid_count() const {
    int n = 0;
    for (double d : values) n += std::isfinite(d) ? 1 : 0;
    return n;
  }
};

}  // namespace lookaround
