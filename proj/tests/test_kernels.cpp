#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lookaround/errors.hpp"
#include "lookaround/kernels.hpp"
#include "lookaround/rng.hpp"
#include "lookaround/threads.hpp"

using namespace lookaround;

namespace {
std::vector<Vec3> random_cloud(int n, std::uint64_t seed, double span = 1.0) {
  auto rng = make_rng(seed);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts)
    p = Vec3(uniform_real(rng, -span, span), uniform_real(rng, -span, span),
             uniform_real(rng, -span, span));
  return pts;
}
}  // namespace

TEST_CASE("nearest: parallel matches serial bit for bit") {
  const auto queries = random_cloud(500, 1);
  const auto refs = random_cloud(300, 2);
  const auto serial = kernels::nearest_indices_serial(queries, refs);
  for (int cap : {1, 2, 4}) {
    threads::set_worker_cap(cap);
    CHECK(kernels::nearest_indices(queries, refs) == serial);
  }
  threads::set_worker_cap(0);
}

TEST_CASE("nearest: grid path is exact against brute force") {
  const auto queries = random_cloud(2000, 3);
  auto refs = random_cloud(kernels::grid_threshold() + 500, 4);
  REQUIRE(static_cast<int>(refs.size()) > kernels::grid_threshold());
  const auto brute = kernels::nearest_indices_serial(queries, refs);
  const auto grid = kernels::nearest_indices(queries, refs);
  CHECK(grid == brute);
}

TEST_CASE("nearest: clustered refs still exact through the grid") {
  // highly non-uniform distribution stresses the ring search bound
  auto rng = make_rng(5);
  std::vector<Vec3> refs;
  for (int c = 0; c < 5; ++c) {
    const Vec3 center(uniform_real(rng, -10, 10), uniform_real(rng, -10, 10),
                      uniform_real(rng, -10, 10));
    for (int i = 0; i < 900; ++i)
      refs.push_back(center + 0.05 * Vec3(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1),
                                          uniform_real(rng, -1, 1)));
  }
  const auto queries = random_cloud(500, 6, 12.0);
  CHECK(kernels::nearest_indices(queries, refs) == kernels::nearest_indices_serial(queries, refs));
}

TEST_CASE("nearest: ties go to the lowest index") {
  std::vector<Vec3> refs = {Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  std::vector<Vec3> queries = {Vec3(1, 0, 0), Vec3(1.5, 0, 0)};
  const auto idx = kernels::nearest_indices(queries, refs);
  CHECK(idx[0] == 0);
  CHECK(idx[1] == 0);  // exactly between refs 0/1 and 2: lowest wins
}

TEST_CASE("nearest: empty inputs throw") {
  std::vector<Vec3> pts = {Vec3(0, 0, 0)};
  std::vector<Vec3> none;
  CHECK_THROWS_AS(kernels::nearest_indices(none, pts), ContractViolation);
  CHECK_THROWS_AS(kernels::nearest_indices(pts, none), ContractViolation);
}

TEST_CASE("knn: serial/parallel agreement and ordering") {
  const auto pts = random_cloud(200, 7);
  const auto serial = kernels::knn_indices_serial(pts, 5);
  CHECK(kernels::knn_indices(pts, 5) == serial);
  // neighbors sorted by distance, self excluded
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double prev = -1.0;
    for (int j : serial[i]) {
      CHECK(j != static_cast<int>(i));
      const double d = (pts[j] - pts[i]).norm();
      CHECK(d >= prev);
      prev = d;
    }
  }
  CHECK_THROWS_AS(kernels::knn_indices(random_cloud(4, 8), 5), ContractViolation);
}

TEST_CASE("map_sum: deterministic across worker counts") {
  auto rng = make_rng(9);
  std::vector<double> xs(5000);
  for (double& v : xs) v = uniform_real(rng, -1, 1);
  auto f = [&](int i) { return xs[i] * xs[i] * 1.000000001; };
  const double serial = kernels::map_sum_serial(5000, f);
  for (int cap : {1, 2, 3}) {
    threads::set_worker_cap(cap);
    const double par = kernels::map_sum(5000, f);
    CHECK(par == serial);  // bit-identical, not approximately equal
  }
  threads::set_worker_cap(0);
}
