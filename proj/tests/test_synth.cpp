#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "lookaround/errors.hpp"
#include "lookaround/rng.hpp"
#include "lookaround/synth.hpp"
#include "lookaround/threads.hpp"

using namespace lookaround;
using namespace lookaround::synth;

namespace {

CategoryConfig test_category() { return CategoryConfig{}; }

Calibration test_calib(int n = 32) {
  return Calibration(1.2 * n, 1.2 * n, n / 2.0, n / 2.0, n, n);
}

// bit-equality with NaN == NaN (invalid pixels)
bool same_depth(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool va = std::isfinite(a[i]), vb = std::isfinite(b[i]);
    if (va != vb) return false;
    if (va && a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("generate_category determinism and ranges") {
  const auto a = generate_category(7, 5, test_category());
  const auto b = generate_category(7, 5, test_category());
  REQUIRE(a.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(a[i].body.half_axes == b[i].body.half_axes);  // bit-identical
    CHECK(a[i].body.e1 == b[i].body.e1);
    CHECK(a[i].marker.center == b[i].marker.center);
    CHECK(a[i].body.half_axes.minCoeff() > 0.0);
  }
  CHECK(generate_category(8, 1, test_category()).size() == 1);
}

TEST_CASE("generate_category degenerate and invalid ranges") {
  CategoryConfig collapsed = test_category();
  collapsed.body_a = Range(1.0, 1.0);
  collapsed.body_b = Range(0.5, 0.5);
  collapsed.body_c = Range(0.4, 0.4);
  collapsed.body_e1 = Range(1.0, 1.0);
  collapsed.body_e2 = Range(1.0, 1.0);
  collapsed.marker_scale = Range(0.3, 0.3);
  collapsed.marker_e = Range(1.0, 1.0);
  const auto shapes = generate_category(1, 3, collapsed);
  CHECK(shapes[0].body.half_axes == shapes[1].body.half_axes);
  CHECK(shapes[1].body.half_axes == shapes[2].body.half_axes);

  CategoryConfig bad = test_category();
  bad.body_a = Range(2.0, 1.0);
  CHECK_THROWS_AS(generate_category(1, 2, bad), ConfigError);
  CHECK_THROWS_AS(generate_category(1, 0, test_category()), ConfigError);
}

TEST_CASE("superellipsoid implicit/parametric consistency") {
  Lobe lobe;
  lobe.e1 = 0.7;
  lobe.e2 = 1.3;
  lobe.half_axes = Vec3(1.2, 0.6, 0.4);
  auto rng = make_rng(3);
  for (int i = 0; i < 200; ++i) {
    const double eta = uniform_real(rng, -M_PI / 2, M_PI / 2);
    const double om = uniform_real(rng, -M_PI, M_PI);
    const Vec3 p = lobe.surface_point(eta, om);
    CHECK(lobe.implicit(p) == doctest::Approx(1.0).epsilon(1e-7));
  }
}

TEST_CASE("render_sequence geometry") {
  CategoryConfig collapsed = test_category();
  collapsed.body_a = Range(1.0, 1.0);
  collapsed.body_b = Range(1.0, 1.0);
  collapsed.body_c = Range(1.0, 1.0);
  collapsed.body_e1 = Range(1.0, 1.0);
  collapsed.body_e2 = Range(1.0, 1.0);
  collapsed.marker_scale = Range(0.0, 0.0);  // bare unit sphere
  const auto shapes = generate_category(1, 1, collapsed);

  OrbitConfig orbit;
  orbit.frames = 8;
  orbit.elevation_jitter_deg = 0.0;
  orbit.azimuth_jitter_deg = 0.0;
  orbit.radius_factor = 3.0;
  const Calibration k = test_calib();

  const Sequence seq = render_sequence(shapes[0], orbit, k, 5, "s");
  REQUIRE(seq.frames.size() == 8);

  SUBCASE("antipodal frames are a half-turn apart") {
    const RigidPose rel =
        relative_pose(seq.frames[0].gt_global_pose, seq.frames[4].gt_global_pose);
    CHECK(so3_log(rel.rotation).norm() == doctest::Approx(M_PI).epsilon(1e-6));
  }

  SUBCASE("center pixel depth is radius minus sphere radius") {
    // for a unit sphere the principal ray hits at orbit_radius - 1
    const double d_center = seq.frames[0].depth.at(k.width / 2, k.height / 2);
    CHECK(std::isfinite(d_center));
    CHECK(d_center == doctest::Approx(seq.orbit_radius - 1.0).epsilon(1e-6));
  }

  SUBCASE("same seed renders identical sequences") {
    const Sequence again = render_sequence(shapes[0], orbit, k, 5, "s");
    for (int t = 0; t < 8; ++t) {
      CHECK(same_depth(again.frames[t].depth.values, seq.frames[t].depth.values));
      CHECK(again.frames[t].descriptor == seq.frames[t].descriptor);
    }
  }

  SUBCASE("parallel raycast kernel matches serial bit for bit") {
    for (int cap : {1, 2, 4}) {
      threads::set_worker_cap(cap);
      const DepthMap par = raycast_depth(shapes[0], seq.frames[0].gt_global_pose, k);
      threads::set_worker_cap(0);
      const DepthMap ser = raycast_depth_serial(shapes[0], seq.frames[0].gt_global_pose, k);
      REQUIRE(par.values.size() == ser.values.size());
      for (std::size_t i = 0; i < par.values.size(); ++i) {
        const bool pv = std::isfinite(par.values[i]), sv = std::isfinite(ser.values[i]);
        CHECK(pv == sv);
        if (pv) CHECK(par.values[i] == ser.values[i]);
      }
    }
  }

  SUBCASE("camera inside the object is rejected") {
    OrbitConfig inside = orbit;
    inside.radius_factor = 0.5;
    CHECK_THROWS_AS(render_sequence(shapes[0], inside, k, 5, "s"), ConfigError);
  }
}

TEST_CASE("multi-view depth consistency") {
  // back-projecting frame t and moving through the relative pose lands on
  // the surface seen by frame t'
  const auto shapes = generate_category(11, 1, test_category());
  OrbitConfig orbit;
  orbit.frames = 12;
  const Calibration k = test_calib();
  const Sequence seq = render_sequence(shapes[0], orbit, k, 9, "s");

  const Frame& a = seq.frames[2];
  const Frame& b = seq.frames[3];
  const PointCloud cloud_a = backproject(a.depth, k);
  const RigidPose rel = relative_pose(a.gt_global_pose, b.gt_global_pose);

  int checked = 0, consistent = 0;
  for (const Vec3& p : cloud_a.points) {
    const Vec3 q = rel.apply(p);
    if (q.z() <= 0.1) continue;
    const Eigen::Vector2d uv = project(q, k);
    const int u = static_cast<int>(std::lround(uv.x()));
    const int v = static_cast<int>(std::lround(uv.y()));
    if (u < 0 || v < 0 || u >= k.width || v >= k.height) continue;
    ++checked;
    if (!b.depth.valid(u, v)) continue;  // occlusion boundary
    // reprojected depth within ~2 px of surface: compare z against the map
    if (std::abs(b.depth.at(u, v) - q.z()) < 0.15 * seq.orbit_radius) ++consistent;
  }
  REQUIRE(checked > 100);
  CHECK(static_cast<double>(consistent) / checked > 0.9);
}

TEST_CASE("simulate_sfm") {
  const auto shapes = generate_category(13, 1, test_category());
  OrbitConfig orbit;
  orbit.frames = 10;
  const Calibration k = test_calib();

  SUBCASE("identity alignment with unit scale reproduces the gt track") {
    Sequence seq = render_sequence(shapes[0], orbit, k, 21, "s");
    NoiseConfig noise = NoiseConfig::none();
    noise.identity_alignment = true;
    simulate_sfm(seq, noise, Modality::kKfLike, 3);
    CHECK(seq.gt_scale == 1.0);
    for (const Frame& f : seq.frames) {
      CHECK(f.observed_pose.rotation.angle_to(f.gt_global_pose.rotation) < 1e-12);
      CHECK((f.observed_pose.translation - f.gt_global_pose.translation).norm() < 1e-12);
    }
  }

  SUBCASE("relative rotations are alignment-invariant") {
    Sequence seq = render_sequence(shapes[0], orbit, k, 22, "s");
    simulate_sfm(seq, NoiseConfig::none(), Modality::kSfmLike, 4);
    for (std::size_t t = 0; t + 1 < seq.frames.size(); ++t) {
      const Rotation obs =
          relative_pose(seq.frames[t].observed_pose, seq.frames[t + 1].observed_pose).rotation;
      const Rotation gt =
          relative_pose(seq.frames[t].gt_global_pose, seq.frames[t + 1].gt_global_pose).rotation;
      CHECK(obs.angle_to(gt) < 1e-9);
    }
  }

  SUBCASE("observed translations carry the hidden scale") {
    Sequence seq = render_sequence(shapes[0], orbit, k, 23, "s");
    simulate_sfm(seq, NoiseConfig::none(), Modality::kSfmLike, 5);
    const double lambda = seq.gt_scale;
    CHECK(lambda >= 0.5);
    CHECK(lambda <= 2.0);
    // canonical relative translation = lambda x observed relative translation
    for (std::size_t t = 0; t + 2 < seq.frames.size(); t += 2) {
      const Vec3 obs =
          relative_pose(seq.frames[t].observed_pose, seq.frames[t + 2].observed_pose).translation;
      const Vec3 gt = relative_pose(seq.frames[t].gt_global_pose, seq.frames[t + 2].gt_global_pose)
                          .translation;
      if (gt.norm() < 1e-6) continue;
      CHECK(gt.norm() / obs.norm() == doctest::Approx(lambda).epsilon(1e-9));
    }
    // depths scale the same way
    const Frame& f = seq.frames[0];
    const DepthMap clean = raycast_depth_serial(shapes[0], f.gt_global_pose, k);
    for (int i = 0; i < 32 * 32; i += 37) {
      if (!std::isfinite(clean.values[i]) || !std::isfinite(f.depth.values[i])) continue;
      CHECK(clean.values[i] / f.depth.values[i] == doctest::Approx(lambda).epsilon(1e-9));
    }
  }

  SUBCASE("kf-like sequences keep lambda = 1") {
    Sequence seq = render_sequence(shapes[0], orbit, k, 24, "s");
    simulate_sfm(seq, NoiseConfig::none(), Modality::kKfLike, 6);
    CHECK(seq.gt_scale == 1.0);
  }

  SUBCASE("noise knobs produce holes and outliers") {
    Sequence seq = render_sequence(shapes[0], orbit, k, 25, "s");
    const int clean_count = seq.frames[0].depth.valid_count();
    NoiseConfig noise;
    noise.hole_fraction = 0.3;
    simulate_sfm(seq, noise, Modality::kKfLike, 7);
    const int noisy_count = seq.frames[0].depth.valid_count();
    CHECK(noisy_count < clean_count);
    CHECK(noisy_count > 0);
  }

  SUBCASE("pose outliers corrupt the requested fraction of frames") {
    Sequence seq = render_sequence(shapes[0], orbit, k, 26, "s");
    NoiseConfig noise = NoiseConfig::none();
    noise.pose_outlier_frame_fraction = 0.3;
    simulate_sfm(seq, noise, Modality::kKfLike, 8);
    int corrupted = 0;
    for (const Frame& f : seq.frames)
      if (f.pose_corrupted) {
        ++corrupted;
        CHECK(f.observed_pose.rotation.angle_to(f.gt_global_pose.rotation) > 0.5);
      }
    CHECK(corrupted == 3);
  }
}

TEST_CASE("descriptor properties") {
  const auto shapes = generate_category(17, 1, test_category());
  OrbitConfig orbit;
  orbit.frames = 6;
  const Calibration k = test_calib();
  Sequence seq = render_sequence(shapes[0], orbit, k, 31, "s");

  const Eigen::VectorXd d0 = seq.frames[0].descriptor;
  CHECK(d0.size() == 256);
  CHECK(d0.minCoeff() >= 0.0);
  CHECK(d0.maxCoeff() <= 1.0);
  CHECK(d0.maxCoeff() > 0.0);

  // scale invariance: scaling depth does not change the descriptor much
  DepthMap scaled = seq.frames[0].depth;
  for (double& v : scaled.values)
    if (std::isfinite(v)) v *= 1.7;
  const Eigen::VectorXd ds = depth_descriptor(scaled);
  CHECK((ds - d0).cwiseAbs().maxCoeff() < 1e-9);

  // fully invalid map -> zero descriptor
  DepthMap empty(32, 32);
  CHECK(depth_descriptor(empty).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("surface sampler stays on the surface") {
  const auto shapes = generate_category(19, 1, test_category());
  const PointCloud cloud = sample_surface(shapes[0], 2000, 3);
  REQUIRE(cloud.size() == 2000);
  for (const Vec3& p : cloud.points) {
    const double f_body = shapes[0].body.implicit(p);
    const double f_marker = shapes[0].marker.implicit(p);
    const double nearest = std::min(std::abs(f_body - 1.0), std::abs(f_marker - 1.0));
    CHECK(nearest < 1e-6);          // exactly on one lobe's surface
    CHECK(std::min(f_body, f_marker) > 1.0 - 1e-6);  // not inside the other
  }
}

TEST_CASE("dataset disk round trip") {
  GenerateConfig cfg;
  cfg.sequences = 2;
  cfg.orbit.frames = 4;
  cfg.test_fraction = 0.5;
  cfg.calibration = test_calib(16);
  cfg.noise = NoiseConfig::none();
  const Dataset ds = generate_dataset(33, cfg);

  const auto dir = std::filesystem::temp_directory_path() / "lookaround_synth_test";
  std::filesystem::remove_all(dir);
  write_dataset(dir, ds);
  const Dataset back = load_dataset(dir);

  REQUIRE(back.sequences.size() == ds.sequences.size());
  CHECK(back.train_ids == ds.train_ids);
  CHECK(back.test_ids == ds.test_ids);
  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    const Sequence &a = ds.sequences[s], &b = back.sequences[s];
    CHECK(a.id == b.id);
    CHECK(a.modality == b.modality);
    CHECK(a.gt_scale == b.gt_scale);
    CHECK(a.gt_alignment.rotation.angle_to(b.gt_alignment.rotation) == 0.0);
    CHECK(a.shape.body.half_axes == b.shape.body.half_axes);
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
      CHECK(a.frames[t].descriptor == b.frames[t].descriptor);
      CHECK((a.frames[t].observed_pose.translation - b.frames[t].observed_pose.translation)
                .norm() == 0.0);
      // depth stored as float32
      for (std::size_t i = 0; i < a.frames[t].depth.values.size(); ++i) {
        if (!std::isfinite(a.frames[t].depth.values[i])) {
          CHECK_FALSE(std::isfinite(b.frames[t].depth.values[i]));
        } else {
          CHECK(b.frames[t].depth.values[i] ==
                doctest::Approx(a.frames[t].depth.values[i]).epsilon(1e-6));
        }
      }
    }
  }
}
