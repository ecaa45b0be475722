// Timing harness for the parallel kernels against their serial references.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "lookaround/ad.hpp"
#include "lookaround/augment.hpp"
#include "lookaround/kernels.hpp"
#include "lookaround/rng.hpp"
#include "lookaround/synth.hpp"
#include "lookaround/threads.hpp"

using namespace lookaround;

namespace {

template <typename F>
double time_ms(F&& f, int repeats = 3) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    if (ms < best) best = ms;
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

std::vector<Vec3> random_cloud(int n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts)
    p = Vec3(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1), uniform_real(rng, -1, 1));
  return pts;
}

}  // namespace

int main() {
  std::printf("workers: %d\n\n", threads::worker_count());

  {
    const auto queries = random_cloud(20000, 1);
    const auto refs = random_cloud(2000, 2);
    report("nearest (brute force)",
           time_ms([&] { kernels::nearest_indices_serial(queries, refs); }),
           time_ms([&] { kernels::nearest_indices(queries, refs); }));
  }
  {
    const auto queries = random_cloud(20000, 3);
    const auto refs = random_cloud(20000, 4);
    report("nearest (grid)",
           time_ms([&] { kernels::nearest_indices_serial(queries, refs); }),
           time_ms([&] { kernels::nearest_indices(queries, refs); }));
  }
  {
    const auto shapes = synth::generate_category(7, 1, {});
    synth::OrbitConfig orbit;
    const Calibration k(154.0, 154.0, 64.0, 64.0, 128, 128);
    const auto seq = synth::render_sequence(shapes[0], orbit, k, 7, "bench");
    const RigidPose pose = seq.frames[0].gt_global_pose;
    report("raycast depth 128x128",
           time_ms([&] { synth::raycast_depth_serial(shapes[0], pose, k); }),
           time_ms([&] { synth::raycast_depth(shapes[0], pose, k); }));

    augment::PerturbationConfig pcfg;
    auto rng = make_rng(11);
    const RigidPose delta = augment::sample_perturbation(pcfg, rng);
    report("dibr warp 128x128",
           time_ms([&] { augment::dibr_warp_serial(seq.frames[0], seq.frames[0].depth, delta); }),
           time_ms([&] { augment::dibr_warp(seq.frames[0], seq.frames[0].depth, delta); }));
  }
  {
    const int n = 4096, in = 7, out = 128;
    auto rng = make_rng(5);
    std::vector<double> x(n * in), w(out * in), b(out);
    for (double& v : x) v = uniform_real(rng, -1, 1);
    for (double& v : w) v = uniform_real(rng, -1, 1);
    for (double& v : b) v = uniform_real(rng, -1, 1);

    auto run = [&](int cap) {
      threads::set_worker_cap(cap);
      ad::Tape tape;
      const ad::Var xv = tape.constant(x, n, in);
      const ad::Var wv = tape.leaf(w, out, in);
      const ad::Var bv = tape.leaf(b, out, 1);
      const ad::Var y = tape.linear_rows(xv, wv, bv);
      const ad::Var loss = tape.dot(tape.sum_pool_rows(y), tape.sum_pool_rows(y));
      tape.backward(loss);
      threads::set_worker_cap(0);
    };
    report("mlp rows fwd+bwd 4096x7->128", time_ms([&] { run(1); }), time_ms([&] { run(0); }));
  }
  {
    std::vector<double> xs(1 << 20);
    auto rng = make_rng(6);
    for (double& v : xs) v = uniform_real(rng, -1, 1);
    report("map_sum 1M",
           time_ms([&] { kernels::map_sum_serial(1 << 20, [&](int i) { return xs[i] * xs[i]; }); }),
           time_ms([&] { kernels::map_sum(1 << 20, [&](int i) { return xs[i] * xs[i]; }); }));
  }
  return 0;
}
