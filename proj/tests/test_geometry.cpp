#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lookaround/errors.hpp"
#include "lookaround/geometry.hpp"
#include "lookaround/rng.hpp"

using namespace lookaround;

namespace {

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return Rotation(Quat(g(rng), g(rng), g(rng), g(rng)));
}

RigidPose random_pose(std::mt19937_64& rng) {
  RigidPose p;
  p.rotation = random_rotation(rng);
  p.translation = Vec3(uniform_real(rng, -2, 2), uniform_real(rng, -2, 2),
                       uniform_real(rng, -2, 2));
  return p;
}

Eigen::Matrix4d homogeneous(const RigidPose& g) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = g.rotation.matrix();
  m.topRightCorner<3, 1>() = g.translation;
  return m;
}

}  // namespace

TEST_CASE("rotation invariants") {
  auto rng = make_rng(1);
  for (int i = 0; i < 200; ++i) {
    const Rotation r = random_rotation(rng);
    CHECK(r.quat().norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.quat().w() >= 0.0);
    const Mat3 m = r.matrix();
    CHECK((m * m.transpose() - Mat3::Identity()).norm() < 1e-9);
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("so3 log basics") {
  CHECK(so3_log(Rotation::identity()).norm() == 0.0);

  // quarter turn about z
  const Rotation r = so3_exp(Vec3(0, 0, M_PI / 2));
  const Vec3 w = so3_log(r);
  CHECK(w.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w.z() == doctest::Approx(M_PI / 2).epsilon(1e-12));

  // oracle: angle from the quaternion
  auto rng = make_rng(2);
  for (int i = 0; i < 100; ++i) {
    const Rotation r2 = random_rotation(rng);
    const double angle = 2.0 * std::atan2(r2.quat().vec().norm(), r2.quat().w());
    CHECK(so3_log(r2).norm() == doctest::Approx(angle).epsilon(1e-9));
  }
}

TEST_CASE("so3 exp basics") {
  CHECK(so3_exp(Vec3::Zero()).matrix().isApprox(Mat3::Identity(), 1e-15));
  const Rotation pi_x = so3_exp(Vec3(M_PI, 0, 0));
  CHECK(pi_x.matrix().trace() == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("log/exp round trips over the open ball") {
  auto rng = make_rng(3);
  for (int i = 0; i < 1000; ++i) {
    // exp then log
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 axis(g(rng), g(rng), g(rng));
    axis.normalize();
    const double angle = uniform_real(rng, 1e-12, M_PI - 1e-6);
    const Vec3 w = angle * axis;
    CHECK((so3_log(so3_exp(w)) - w).norm() < 1e-9);

    // log then exp
    const Rotation r = random_rotation(rng);
    const Rotation back = so3_exp(so3_log(r));
    CHECK(r.angle_to(back) < 1e-9);
  }

  // near the angle-pi boundary (ill-conditioned for matrix-based logs)
  for (int i = 0; i < 100; ++i) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 axis(g(rng), g(rng), g(rng));
    axis.normalize();
    const Vec3 w = (M_PI - 1e-7) * axis;
    CHECK((so3_log(so3_exp(w)) - w).norm() < 1e-8);
  }

  // tiny angles hit the Taylor branch
  const Vec3 tiny(1e-10, -2e-10, 5e-11);
  CHECK((so3_log(so3_exp(tiny)) - tiny).norm() < 1e-15);
}

TEST_CASE("matrix round trip near pi") {
  auto rng = make_rng(4);
  for (int i = 0; i < 200; ++i) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 axis(g(rng), g(rng), g(rng));
    axis.normalize();
    const Rotation r = so3_exp((M_PI - uniform_real(rng, 0.0, 1e-4)) * axis);
    const Rotation back(r.matrix());
    CHECK(r.angle_to(back) < 1e-9);
  }
}

TEST_CASE("relative pose") {
  auto rng = make_rng(5);
  const RigidPose g = random_pose(rng);
  SUBCASE("same pose gives identity") {
    const RigidPose rel = relative_pose(g, g);
    CHECK(rel.rotation.angle_to(Rotation::identity()) < 1e-12);
    CHECK(rel.translation.norm() < 1e-12);
  }
  SUBCASE("right-alignment invariance") {
    for (int i = 0; i < 1000; ++i) {
      const RigidPose g_t = random_pose(rng), g_tp = random_pose(rng), h = random_pose(rng);
      const RigidPose a = relative_pose(g_t, g_tp);
      const RigidPose b = relative_pose(g_t.compose(h), g_tp.compose(h));
      CHECK(a.rotation.angle_to(b.rotation) < 1e-9);
      CHECK((a.translation - b.translation).norm() < 1e-9);
    }
  }
  SUBCASE("matrix-product oracle") {
    for (int i = 0; i < 1000; ++i) {
      const RigidPose g_t = random_pose(rng), g_tp = random_pose(rng);
      const RigidPose rel = relative_pose(g_t, g_tp);
      const Eigen::Matrix4d oracle = homogeneous(g_tp) * homogeneous(g_t).inverse();
      CHECK((homogeneous(rel) - oracle).norm() < 1e-9);
    }
  }
}

TEST_CASE("compose/inverse identity") {
  auto rng = make_rng(6);
  for (int i = 0; i < 200; ++i) {
    const RigidPose g = random_pose(rng);
    const RigidPose id = g.compose(g.inverse());
    CHECK(id.rotation.angle_to(Rotation::identity()) < 1e-9);
    CHECK(id.translation.norm() < 1e-9);
  }
}

TEST_CASE("backproject") {
  const Calibration k(2.0, 2.0, 1.0, 1.0, 4, 4);

  SUBCASE("principal point maps to the optical axis") {
    DepthMap d(4, 4);
    d.at(1, 1) = 3.0;
    const PointCloud c = backproject(d, k);
    REQUIRE(c.size() == 1);
    CHECK(c.points[0].x() == 0.0);
    CHECK(c.points[0].y() == 0.0);
    CHECK(c.points[0].z() == 3.0);
  }
  SUBCASE("all invalid gives an empty cloud") {
    DepthMap d(4, 4);
    CHECK(backproject(d, k).empty());
  }
  SUBCASE("2x2 map against the per-pixel formula") {
    const Calibration k2(1.0, 1.0, 0.0, 0.0, 2, 2);
    DepthMap d(2, 2);
    d.at(0, 0) = 1.0;
    d.at(1, 0) = 2.0;
    d.at(0, 1) = 3.0;
    d.at(1, 1) = 4.0;
    const PointCloud c = backproject(d, k2);
    REQUIRE(c.size() == 4);
    CHECK((c.points[0] - Vec3(0, 0, 1)).norm() < 1e-15);
    CHECK((c.points[1] - Vec3(2, 0, 2)).norm() < 1e-15);
    CHECK((c.points[2] - Vec3(0, 3, 3)).norm() < 1e-15);
    CHECK((c.points[3] - Vec3(4, 4, 4)).norm() < 1e-15);
  }
  SUBCASE("confidence rides along from the sigma plane") {
    DepthMap d(4, 4);
    d.at(2, 2) = 1.5;
    d.sigma.assign(16, 0.5);
    const PointCloud c = backproject(d, k);
    REQUIRE(c.size() == 1);
    CHECK(c.confidence[0] == doctest::Approx(2.0));
  }
  SUBCASE("dimension mismatch throws") {
    DepthMap d(3, 4);
    CHECK_THROWS_AS(backproject(d, k), ContractViolation);
  }
  SUBCASE("project inverts backproject on valid pixels") {
    DepthMap d(4, 4);
    d.at(3, 2) = 2.5;
    const PointCloud c = backproject(d, k);
    const Eigen::Vector2d uv = project(c.points[0], k);
    CHECK(uv.x() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(uv.y() == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("umeyama alignment") {
  auto rng = make_rng(7);

  SUBCASE("identity on equal clouds") {
    PointCloud a;
    for (int i = 0; i < 10; ++i)
      a.points.push_back(Vec3(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1),
                              uniform_real(rng, -1, 1)));
    const SimilarityTransform t = umeyama_align(a, a, true);
    CHECK(t.scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.translation.norm() < 1e-12);
    CHECK(t.rotation.angle_to(Rotation::identity()) < 1e-12);
  }

  SUBCASE("construct-then-recover") {
    for (int trial = 0; trial < 50; ++trial) {
      PointCloud gt;
      for (int i = 0; i < 20; ++i)
        gt.points.push_back(Vec3(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1),
                                 uniform_real(rng, -1, 1)));
      const Rotation r_g = random_rotation(rng);
      const Vec3 t_g(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1), uniform_real(rng, -1, 1));
      const double s_g = uniform_real(rng, 0.5, 2.0);

      PointCloud pred;
      for (const Vec3& p : gt.points)
        pred.points.push_back((1.0 / s_g) * (r_g.rotate(p) + t_g));

      const SimilarityTransform t = umeyama_align(gt, pred, true);
      CHECK(t.scale == doctest::Approx(s_g).epsilon(1e-9));
      CHECK((t.translation - t_g).norm() < 1e-9);
      CHECK(t.rotation.angle_to(r_g) < 1e-9);

      // residual of the recovered model
      double rmax = 0.0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        const Vec3 fit = (1.0 / t.scale) * (t.rotation.rotate(gt.points[i]) + t.translation);
        rmax = std::max(rmax, (fit - pred.points[i]).norm());
      }
      CHECK(rmax < 1e-9);
    }
  }

  SUBCASE("with_scale off forces unit scale") {
    PointCloud gt;
    for (int i = 0; i < 12; ++i)
      gt.points.push_back(Vec3(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1),
                               uniform_real(rng, -1, 1)));
    PointCloud pred;
    for (const Vec3& p : gt.points) pred.points.push_back(0.5 * p);
    const SimilarityTransform t = umeyama_align(gt, pred, false);
    CHECK(t.scale == 1.0);
  }

  SUBCASE("noisy alignment keeps small residual") {
    PointCloud gt, pred;
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int i = 0; i < 100; ++i) {
      const Vec3 p(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1), uniform_real(rng, -1, 1));
      gt.points.push_back(p);
      pred.points.push_back(p + Vec3(noise(rng), noise(rng), noise(rng)));
    }
    const SimilarityTransform t = umeyama_align(gt, pred, true);
    double rms = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const Vec3 fit = (1.0 / t.scale) * (t.rotation.rotate(gt.points[i]) + t.translation);
      rms += (fit - pred.points[i]).squaredNorm();
    }
    rms = std::sqrt(rms / gt.size());
    CHECK(rms <= 0.02);
  }

  SUBCASE("degenerate input throws") {
    PointCloud line_a, line_b;
    for (int i = 0; i < 5; ++i) {
      line_a.points.push_back(Vec3(i, 0, 0));
      line_b.points.push_back(Vec3(i, 0, 0));
    }
    CHECK_THROWS_AS(umeyama_align(line_a, line_b, true), NumericalError);

    PointCloud tiny;
    tiny.points.push_back(Vec3(0, 0, 0));
    CHECK_THROWS_AS(umeyama_align(tiny, tiny, true), ContractViolation);
  }

  SUBCASE("reflection clamps to a proper rotation") {
    PointCloud gt, pred;
    for (int i = 0; i < 30; ++i) {
      const Vec3 p(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1), uniform_real(rng, -1, 1));
      gt.points.push_back(p);
      pred.points.push_back(Vec3(p.x(), p.y(), -p.z()));  // mirrored
    }
    const SimilarityTransform t = umeyama_align(gt, pred, true);
    CHECK(t.rotation.matrix().determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("adjust_pose") {
  auto rng = make_rng(8);

  SUBCASE("identity transform is a no-op") {
    const RigidPose g = random_pose(rng);
    const RigidPose adj = adjust_pose(g, SimilarityTransform::identity());
    CHECK(adj.rotation.angle_to(g.rotation) < 1e-12);
    CHECK((adj.translation - g.translation).norm() < 1e-12);
  }

  SUBCASE("round trip through umeyama recovers camera centers") {
    // predictions = ground truth seen through a hidden similarity
    const Rotation r_g = random_rotation(rng);
    const Vec3 t_g(0.3, -0.2, 0.5);
    const double s_g = 1.7;

    std::vector<RigidPose> gt_poses, pred_poses;
    PointCloud gt_centers, pred_centers;
    for (int i = 0; i < 20; ++i) {
      const RigidPose g = random_pose(rng);
      RigidPose pred;
      pred.rotation = g.rotation.compose(r_g.inverse());
      pred.translation = (g.translation - g.rotation.rotate(r_g.inverse().rotate(t_g))) / s_g;
      gt_poses.push_back(g);
      pred_poses.push_back(pred);
      gt_centers.points.push_back(g.camera_center());
      pred_centers.points.push_back(pred.camera_center());
    }
    const SimilarityTransform t = umeyama_align(gt_centers, pred_centers, true);
    for (int i = 0; i < 20; ++i) {
      const RigidPose adj = adjust_pose(pred_poses[i], t);
      CHECK((adj.camera_center() - gt_poses[i].camera_center()).norm() < 1e-8);
    }
  }

  SUBCASE("translation-only adjustment follows the formula") {
    RigidPose g;
    g.translation = Vec3(1, 2, 3);
    SimilarityTransform t;
    t.translation = Vec3(0.5, 0, -0.5);
    t.scale = 2.0;
    const RigidPose adj = adjust_pose(g, t);
    CHECK((adj.translation - Vec3(2.5, 4.0, 5.5)).norm() < 1e-12);
  }
}

TEST_CASE("calibration validation") {
  CHECK_THROWS_AS(Calibration(0.0, 1.0, 0.0, 0.0, 4, 4), ContractViolation);
  CHECK_THROWS_AS(Calibration(1.0, 1.0, 4.0, 0.0, 4, 4), ContractViolation);
  CHECK_NOTHROW(Calibration(1.0, 1.0, 3.9, 0.0, 4, 4));
}
