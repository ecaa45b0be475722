#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lookaround/depthmap.hpp"
#include "lookaround/geometry.hpp"

namespace lookaround::synth {

/// Axis-aligned superellipsoid lobe: inside-outside function
/// ((|x|/a)^(2/e2) + (|y|/b)^(2/e2))^(e2/e1) + (|z|/c)^(2/e1) <= 1,
/// offset by `center` in the canonical frame.
struct Lobe {
  double e1 = 1.0;
  double e2 = 1.0;
  Vec3 half_axes{1.0, 1.0, 1.0};
  Vec3 center{0.0, 0.0, 0.0};

  double implicit(const Vec3& p) const;
  Vec3 surface_point(double eta, double omega) const;
};

/// One object instance: a superellipsoid body plus a smaller offset marker
/// lobe. The marker breaks the half-turn symmetry of a bare superellipsoid
/// (views half an orbit apart would otherwise be identical), so the absolute
/// viewpoint stays identifiable from appearance. A zero-size marker
/// reproduces the bare shape.
struct InstanceShape {
  Lobe body;
  Lobe marker;
  int sample_budget = 8192;

  bool has_marker() const { return marker.half_axes.minCoeff() > 0.0; }
  /// Radius of a bounding sphere around the whole shape.
  double bounding_radius() const;
  bool contains(const Vec3& p) const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  Range() = default;
  Range(double l, double h) : lo(l), hi(h) {}
  double sample(std::mt19937_64& rng) const;
};

struct CategoryConfig {
  Range body_a{0.8, 1.3};
  Range body_b{0.45, 0.7};
  Range body_c{0.35, 0.55};
  Range body_e1{0.6, 1.4};
  Range body_e2{0.6, 1.4};
  Range marker_scale{0.28, 0.42};  // marker half-axes relative to body's
  Range marker_e{0.8, 1.2};
  double marker_offset_x = 0.55;  // fraction of body a, toward the "front"
  double marker_offset_z = 0.75;  // fraction of body c, on top
  int sample_budget = 8192;
};

struct OrbitConfig {
  int frames = 36;
  double radius_factor = 2.8;  // orbit radius as a multiple of the bounding radius
  double elevation_deg = 25.0;
  double elevation_jitter_deg = 10.0;
  double azimuth_jitter_deg = 3.0;
};

/// Simulated track degradation. Depth noise magnitudes are relative to the
/// orbit radius; pose outliers mark whole frames whose stored pose is
/// grossly wrong (the way reconstruction failures show up in practice).
struct NoiseConfig {
  double depth_sigma_frac = 0.01;
  double outlier_fraction = 0.10;        // per-pixel, resampled in [0.5 d, 2 d]
  double hole_fraction = 0.20;           // random blobs of missing depth
  double pose_outlier_frame_fraction = 0.0;
  bool identity_alignment = false;       // keep h^i = identity (testing)
  double fixed_lambda = 0.0;             // > 0 pins lambda^i instead of drawing
  double alignment_translation_factor = 2.0;  // |T_h| bound, x bounding radius

  static NoiseConfig none() {
    NoiseConfig n;
    n.depth_sigma_frac = 0.0;
    n.outlier_fraction = 0.0;
    n.hole_fraction = 0.0;
    return n;
  }
};

enum class Modality { kSfmLike, kKfLike };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct Frame {
  int index = 0;
  Calibration calibration;
  RigidPose observed_pose;   // sequence-local track (what training sees)
  RigidPose gt_global_pose;  // canonical frame; hidden, evaluation only
  bool pose_corrupted = false;
  DepthMap depth;            // observed depth (scaled + degraded for sfm-like)
  Eigen::VectorXd descriptor;
};

struct Sequence {
  std::string id;
  Modality modality = Modality::kKfLike;
  std::vector<Frame> frames;
  RigidPose gt_alignment;  // h^i, hidden
  double gt_scale = 1.0;   // lambda^i, hidden; 1 for kf-like
  InstanceShape shape;     // hidden; source of evaluation clouds
  double orbit_radius = 0.0;
};

struct Dataset {
  std::vector<Sequence> sequences;
  std::vector<int> train_ids;
  std::vector<int> test_ids;
  Calibration calibration;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Deterministic instance draw from the configured ranges.
/// Throws ConfigError on empty ranges or n_instances < 1.
std::vector<InstanceShape> generate_category(std::uint64_t seed, int n_instances,
                                             const CategoryConfig& config);

/// Ground-truth track: frames on a jittered circular orbit looking at the
/// object, depth maps ray-cast against the shape, descriptors computed from
/// the rendered depth. Throws ConfigError when the camera would start inside
/// the object.
Sequence render_sequence(const InstanceShape& shape, const OrbitConfig& orbit,
                         const Calibration& calibration, std::uint64_t seed,
                         const std::string& id);

/// Replace the ground-truth track with a simulated reconstruction: draws the
/// hidden alignment h^i and scale lambda^i (observed poses/depths are the
/// canonical ones divided by lambda^i), then applies depth noise, outliers,
/// holes, and pose corruption per the config. h^i and lambda^i stay on the
/// sequence as hidden ground truth.
void simulate_sfm(Sequence& seq, const NoiseConfig& noise, Modality modality,
                  std::uint64_t seed);

/// 16x16 block-averaged, range-normalized depth image, invalid blocks -> 0,
/// flattened row-major. The appearance stand-in every predictor consumes.
Eigen::VectorXd depth_descriptor(const DepthMap& depth, int grid = 16);

/// Ray-cast depth of the shape from a camera pose (z-depth per pixel,
/// background invalid). The OpenMP kernel and its serial reference.
DepthMap raycast_depth(const InstanceShape& shape, const RigidPose& pose,
                       const Calibration& k);
DepthMap raycast_depth_serial(const InstanceShape& shape, const RigidPose& pose,
                              const Calibration& k);

/// Points exactly on the shape surface, area-weighted via importance
/// resampling, points inside the other lobe rejected.
PointCloud sample_surface(const InstanceShape& shape, int n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// On-disk dataset
// ---------------------------------------------------------------------------

struct GenerateConfig {
  int sequences = 8;
  double test_fraction = 0.25;
  CategoryConfig category;
  OrbitConfig orbit;
  NoiseConfig noise;
  Modality modality = Modality::kSfmLike;
  Calibration calibration{38.0, 38.0, 16.0, 16.0, 32, 32};
};

Dataset generate_dataset(std::uint64_t seed, const GenerateConfig& config);

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace lookaround::synth
