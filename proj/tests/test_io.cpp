#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lookaround/errors.hpp"
#include "lookaround/io.hpp"
#include "lookaround/rng.hpp"

using namespace lookaround;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "lookaround_io_test";
  fs::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("dmap round trip preserves values, sigma and validity") {
  auto rng = make_rng(1);
  DepthMap m(7, 5);
  m.sigma.assign(m.pixel_count(), 0.0);
  for (std::size_t i = 0; i < m.pixel_count(); ++i) {
    if (i % 4 == 0) continue;  // leave some invalid
    m.values[i] = uniform_real(rng, 0.5, 5.0);
    m.sigma[i] = uniform_real(rng, 0.01, 2.0);
  }

  const fs::path path = temp_dir() / "roundtrip.dmap";
  io::write_dmap(path, m);
  const DepthMap back = io::read_dmap(path);

  REQUIRE(back.width == m.width);
  REQUIRE(back.height == m.height);
  REQUIRE(back.has_sigma());
  for (std::size_t i = 0; i < m.pixel_count(); ++i) {
    CHECK(std::isfinite(back.values[i]) == std::isfinite(m.values[i]));
    if (std::isfinite(m.values[i])) {
      // float32 on disk
      CHECK(back.values[i] == doctest::Approx(m.values[i]).epsilon(1e-6));
      CHECK(back.sigma[i] == doctest::Approx(m.sigma[i]).epsilon(1e-6));
    }
  }

  // header: magic + dims + flags (sigma | mask)
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  std::uint32_t w, h, flags;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&flags), 4);
  CHECK(std::string(magic, 4) == "DMAP");
  CHECK(w == 7);
  CHECK(h == 5);
  CHECK((flags & 1u) == 1u);
  CHECK((flags & 2u) == 2u);
}

TEST_CASE("dmap rejects corrupt headers") {
  const fs::path path = temp_dir() / "bad.dmap";
  io::write_file_atomic(path, "NOPE0000000000000000");
  CHECK_THROWS_AS(io::read_dmap(path), IoError);
  CHECK_THROWS_AS(io::read_dmap(temp_dir() / "missing.dmap"), IoError);
}

TEST_CASE("ply round trip with and without scalar property") {
  auto rng = make_rng(2);
  PointCloud cloud;
  for (int i = 0; i < 50; ++i) {
    cloud.points.push_back(Vec3(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1),
                                uniform_real(rng, -1, 1)));
    cloud.confidence.push_back(uniform_real(rng, 0, 3));
  }

  const fs::path path = temp_dir() / "cloud.ply";
  io::write_ply(path, cloud);
  const PointCloud back = io::read_ply(path);
  REQUIRE(back.size() == cloud.size());
  REQUIRE(back.has_confidence());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((back.points[i] - cloud.points[i]).norm() == 0.0);  // %.17g round trip is exact
    CHECK(back.confidence[i] == cloud.confidence[i]);
  }

  PointCloud bare;
  bare.points = cloud.points;
  io::write_ply(path, bare, "mass");
  CHECK_FALSE(io::read_ply(path).has_confidence());
}

TEST_CASE("pose json round trip") {
  auto rng = make_rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  RigidPose pose;
  pose.rotation = Rotation(Quat(g(rng), g(rng), g(rng), g(rng)));
  pose.translation = Vec3(1.25, -3.5, 0.125);

  const nlohmann::json j = io::pose_to_json(pose);
  CHECK(j.contains("q"));
  CHECK(j.contains("t"));
  const RigidPose back = io::pose_from_json(j);
  CHECK(pose.rotation.angle_to(back.rotation) < 1e-12);
  CHECK((pose.translation - back.translation).norm() == 0.0);
}

TEST_CASE("atomic writes leave no temp files") {
  const fs::path dir = temp_dir();
  const fs::path path = dir / "atomic.json";
  io::write_json_atomic(path, nlohmann::json{{"x", 1}});
  CHECK(fs::exists(path));
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
  CHECK(io::read_json(path).at("x") == 1);
}
