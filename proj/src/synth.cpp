#include "lookaround/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lookaround/errors.hpp"
#include "lookaround/rng.hpp"
#include "lookaround/threads.hpp"

namespace lookaround::synth {

namespace {

// signed power: sgn(x) |x|^e
double spow(double x, double e) {
  if (x == 0.0) return 0.0;
  return x > 0.0 ? std::pow(x, e) : -std::pow(-x, e);
}

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Quat q(g(rng), g(rng), g(rng), g(rng));
  if (q.norm() < 1e-9) q = Quat(1, 0, 0, 0);
  return Rotation(q);
}

Vec3 random_ball(std::mt19937_64& rng, double radius) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 dir(g(rng), g(rng), g(rng));
  const double n = dir.norm();
  if (n < 1e-12) return Vec3::Zero();
  const double r = radius * std::cbrt(uniform_real(rng, 0.0, 1.0));
  return (r / n) * dir;
}

}  // namespace

double Lobe::implicit(const Vec3& p) const {
  const Vec3 q = p - center;
  const double x = std::abs(q.x()) / half_axes.x();
  const double y = std::abs(q.y()) / half_axes.y();
  const double z = std::abs(q.z()) / half_axes.z();
  const double xy = std::pow(std::pow(x, 2.0 / e2) + std::pow(y, 2.0 / e2), e2 / e1);
  return xy + std::pow(z, 2.0 / e1);
}

Vec3 Lobe::surface_point(double eta, double omega) const {
  const double ce = std::cos(eta), se = std::sin(eta);
  const double co = std::cos(omega), so = std::sin(omega);
  return center + Vec3(half_axes.x() * spow(ce, e1) * spow(co, e2),
                       half_axes.y() * spow(ce, e1) * spow(so, e2),
                       half_axes.z() * spow(se, e1));
}

double InstanceShape::bounding_radius() const {
  double r = body.center.norm() + body.half_axes.norm();
  if (has_marker()) r = std::max(r, marker.center.norm() + marker.half_axes.norm());
  return r;
}

bool InstanceShape::contains(const Vec3& p) const {
  if (body.implicit(p) <= 1.0) return true;
  return has_marker() && marker.implicit(p) <= 1.0;
}

double Range::sample(std::mt19937_64& rng) const {
  if (lo > hi) throw ConfigError("empty parameter range");
  if (lo == hi) return lo;
  return uniform_real(rng, lo, hi);
}

std::string to_string(Modality m) { return m == Modality::kSfmLike ? "sfm-like" : "kf-like"; }

Modality modality_from_string(const std::string& s) {
  if (s == "sfm-like" || s == "sfm") return Modality::kSfmLike;
  if (s == "kf-like" || s == "kf") return Modality::kKfLike;
  throw ConfigError("unknown modality: " + s);
}

std::vector<InstanceShape> generate_category(std::uint64_t seed, int n_instances,
                                             const CategoryConfig& config) {
  if (n_instances < 1) throw ConfigError("generate_category: n_instances must be >= 1");
  std::vector<InstanceShape> shapes(n_instances);
  for (int i = 0; i < n_instances; ++i) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(i), 11);
    InstanceShape s;
    s.body.half_axes = Vec3(config.body_a.sample(rng), config.body_b.sample(rng),
                            config.body_c.sample(rng));
    s.body.e1 = config.body_e1.sample(rng);
    s.body.e2 = config.body_e2.sample(rng);

    const double ms = config.marker_scale.sample(rng);
    s.marker.half_axes = ms * s.body.half_axes;
    s.marker.e1 = config.marker_e.sample(rng);
    s.marker.e2 = config.marker_e.sample(rng);
    s.marker.center = Vec3(config.marker_offset_x * s.body.half_axes.x(), 0.0,
                           config.marker_offset_z * s.body.half_axes.z());
    s.sample_budget = config.sample_budget;
    shapes[i] = s;
  }
  return shapes;
}

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

namespace {

// Ray/AABB slab test; returns false when the ray misses the box.
bool slab(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi, double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

// First root of lobe.implicit(o + s d) = 1 on the ray, or NaN. Dense march
// to bracket the entry crossing, then bisection.
double ray_lobe(const Lobe& lobe, const Vec3& o, const Vec3& d) {
  const Vec3 lo = lobe.center - lobe.half_axes;
  const Vec3 hi = lobe.center + lobe.half_axes;
  double t0, t1;
  if (!slab(o, d, lo, hi, t0, t1)) return std::numeric_limits<double>::quiet_NaN();

  constexpr int kSteps = 96;
  const double dt = (t1 - t0) / kSteps;
  double prev_s = t0;
  if (lobe.implicit(o + t0 * d) - 1.0 <= 0.0)
    return t0 > 0.0 ? t0 : std::numeric_limits<double>::quiet_NaN();
  for (int i = 1; i <= kSteps; ++i) {
    const double s = t0 + i * dt;
    if (lobe.implicit(o + s * d) - 1.0 <= 0.0) {
      double a = prev_s, b = s;
      for (int it = 0; it < 64; ++it) {
        const double m = 0.5 * (a + b);
        if (lobe.implicit(o + m * d) - 1.0 > 0.0)
          a = m;
        else
          b = m;
      }
      return 0.5 * (a + b);
    }
    prev_s = s;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ray_shape(const InstanceShape& shape, const Vec3& o, const Vec3& d) {
  double s = ray_lobe(shape.body, o, d);
  if (shape.has_marker()) {
    const double sm = ray_lobe(shape.marker, o, d);
    if (std::isfinite(sm) && (!std::isfinite(s) || sm < s)) s = sm;
  }
  return s;
}

DepthMap raycast_impl(const InstanceShape& shape, const RigidPose& pose, const Calibration& k,
                      bool parallel) {
  DepthMap depth(k.width, k.height);
  const Vec3 o = pose.camera_center();
  const Mat3 r_t = pose.rotation.matrix().transpose();
  const int n = k.width * k.height;

  auto cast = [&](int i) {
    const int u = i % k.width;
    const int v = i / k.width;
    // unnormalized direction with z = 1, so the ray parameter is the z-depth
    const Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    const Vec3 dir = r_t * dir_cam;
    const double s = ray_shape(shape, o, dir);
    if (std::isfinite(s) && s > 0.0) depth.values[i] = s;
  };

  if (parallel) {
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
    for (int i = 0; i < n; ++i) cast(i);
  } else {
    for (int i = 0; i < n; ++i) cast(i);
  }
  return depth;
}

}  // namespace

DepthMap raycast_depth(const InstanceShape& shape, const RigidPose& pose, const Calibration& k) {
  return raycast_impl(shape, pose, k, true);
}

DepthMap raycast_depth_serial(const InstanceShape& shape, const RigidPose& pose,
                              const Calibration& k) {
  return raycast_impl(shape, pose, k, false);
}

// ---------------------------------------------------------------------------
// Descriptor
// ---------------------------------------------------------------------------

Eigen::VectorXd depth_descriptor(const DepthMap& depth, int grid) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid) * grid);
  std::vector<double> block(out.size(), std::numeric_limits<double>::quiet_NaN());

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();
  for (int bv = 0; bv < grid; ++bv) {
    const int v0 = bv * depth.height / grid;
    const int v1 = (bv + 1) * depth.height / grid;
    for (int bu = 0; bu < grid; ++bu) {
      const int u0 = bu * depth.width / grid;
      const int u1 = (bu + 1) * depth.width / grid;
      double sum = 0.0;
      int count = 0;
      for (int v = v0; v < v1; ++v)
        for (int u = u0; u < u1; ++u)
          if (depth.valid(u, v)) {
            sum += depth.at(u, v);
            ++count;
          }
      if (count > 0) {
        const double m = sum / count;
        block[bv * grid + bu] = m;
        dmin = std::min(dmin, m);
        dmax = std::max(dmax, m);
      }
    }
  }
  if (!std::isfinite(dmin)) return out;  // fully invalid view

  // Valid blocks map to (0.5, 1] (near surface bright), invalid stay 0, so
  // silhouette and range are both visible and the code is invariant to the
  // absolute depth scale.
  const double span = dmax - dmin + 1e-9;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (std::isfinite(block[i])) out[i] = 0.5 + 0.5 * (dmax - block[i]) / span;
  return out;
}

// ---------------------------------------------------------------------------
// Sequence generation
// ---------------------------------------------------------------------------

Sequence render_sequence(const InstanceShape& shape, const OrbitConfig& orbit,
                         const Calibration& calibration, std::uint64_t seed,
                         const std::string& id) {
  if (orbit.frames < 2) throw ConfigError("render_sequence: need at least 2 frames");
  const double bound = shape.bounding_radius();
  const double radius = orbit.radius_factor * bound;
  if (radius <= bound) throw ConfigError("render_sequence: camera orbit inside the object");

  auto rng = make_rng(seed, 21);
  Sequence seq;
  seq.id = id;
  seq.shape = shape;
  seq.orbit_radius = radius;
  seq.frames.resize(orbit.frames);

  const double deg = M_PI / 180.0;
  std::vector<std::pair<double, double>> angles(orbit.frames);
  for (int t = 0; t < orbit.frames; ++t) {
    const double az = 2.0 * M_PI * t / orbit.frames +
                      uniform_real(rng, -orbit.azimuth_jitter_deg, orbit.azimuth_jitter_deg) * deg;
    const double el = orbit.elevation_deg * deg +
                      uniform_real(rng, -orbit.elevation_jitter_deg, orbit.elevation_jitter_deg) * deg;
    angles[t] = {az, el};
  }

  const int n = orbit.frames;
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
  for (int t = 0; t < n; ++t) {
    const auto [az, el] = angles[t];
    const Vec3 center(radius * std::cos(az) * std::cos(el), radius * std::sin(az) * std::cos(el),
                      radius * std::sin(el));
    // look-at: z forward (toward origin), x right, y down
    const Vec3 forward = (-center).normalized();
    Vec3 right = forward.cross(Vec3::UnitZ());
    right.normalize();
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.row(0) = right;
    r.row(1) = down;
    r.row(2) = forward;

    Frame& f = seq.frames[t];
    f.index = t;
    f.calibration = calibration;
    f.gt_global_pose.rotation = Rotation(r);
    f.gt_global_pose.translation = -(f.gt_global_pose.rotation.rotate(center));
    f.observed_pose = f.gt_global_pose;
    f.depth = raycast_depth_serial(shape, f.gt_global_pose, calibration);
    f.descriptor = depth_descriptor(f.depth);
  }
  return seq;
}

void simulate_sfm(Sequence& seq, const NoiseConfig& noise, Modality modality,
                  std::uint64_t seed) {
  if (seq.frames.size() < 2) throw ContractViolation("simulate_sfm: sequence too short");
  seq.modality = modality;

  auto rng_align = make_rng(seed, 31);
  RigidPose h;  // h^i: canonical pose = observed pose composed with h
  if (!noise.identity_alignment) {
    h.rotation = random_rotation(rng_align);
    h.translation = random_ball(rng_align, noise.alignment_translation_factor *
                                               seq.shape.bounding_radius());
  }
  double lambda = 1.0;
  if (modality == Modality::kSfmLike)
    lambda = noise.fixed_lambda > 0.0 ? noise.fixed_lambda
                                      : std::exp(uniform_real(rng_align, std::log(0.5), std::log(2.0)));
  seq.gt_alignment = h;
  seq.gt_scale = lambda;

  const RigidPose h_inv = h.inverse();
  auto rng_noise = make_rng(seed, 32);
  for (Frame& f : seq.frames) {
    // bake the alignment out and the reconstruction scale in:
    // canonical = observed o h, observed translation/depth = canonical / lambda
    f.observed_pose = f.gt_global_pose.compose(h_inv);
    f.observed_pose.translation /= lambda;

    DepthMap& d = f.depth;
    const double sigma = noise.depth_sigma_frac * seq.orbit_radius / lambda;
    std::normal_distribution<double> gauss(0.0, sigma > 0.0 ? sigma : 1.0);
    for (double& v : d.values) {
      if (!std::isfinite(v)) continue;
      v /= lambda;
      if (sigma > 0.0) v += gauss(rng_noise);
      if (noise.outlier_fraction > 0.0 && uniform_real(rng_noise, 0.0, 1.0) < noise.outlier_fraction)
        v *= uniform_real(rng_noise, 0.5, 2.0);
    }
    if (noise.hole_fraction > 0.0) {
      const int target = static_cast<int>(noise.hole_fraction * d.valid_count());
      int removed = 0;
      int guard = 0;
      while (removed < target && guard++ < 10000) {
        const int u = uniform_int(rng_noise, 0, d.width - 1);
        const int v = uniform_int(rng_noise, 0, d.height - 1);
        if (!d.valid(u, v)) continue;
        const int r = uniform_int(rng_noise, 1, 3);
        for (int dv = -r; dv <= r; ++dv)
          for (int du = -r; du <= r; ++du) {
            const int uu = u + du, vv = v + dv;
            if (uu < 0 || vv < 0 || uu >= d.width || vv >= d.height) continue;
            if (du * du + dv * dv > r * r) continue;
            if (d.valid(uu, vv)) {
              d.at(uu, vv) = DepthMap::invalid_depth();
              ++removed;
            }
          }
      }
    }
  }

  if (noise.pose_outlier_frame_fraction > 0.0) {
    auto rng_out = make_rng(seed, 33);
    const int n = static_cast<int>(seq.frames.size());
    const int k = static_cast<int>(std::lround(noise.pose_outlier_frame_fraction * n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_out);
    for (int i = 0; i < std::min(k, n); ++i) {
      Frame& f = seq.frames[order[i]];
      f.pose_corrupted = true;
      const double angle = uniform_real(rng_out, M_PI / 3.0, M_PI);
      Vec3 axis = random_ball(rng_out, 1.0);
      if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
      axis.normalize();
      f.observed_pose.rotation = so3_exp(angle * axis).compose(f.observed_pose.rotation);
      f.observed_pose.translation +=
          random_ball(rng_out, 0.5 * f.observed_pose.translation.norm());
    }
  }
}

// ---------------------------------------------------------------------------
// Surface sampling
// ---------------------------------------------------------------------------

PointCloud sample_surface(const InstanceShape& shape, int n, std::uint64_t seed) {
  if (n < 1) throw ContractViolation("sample_surface: n must be >= 1");
  auto rng = make_rng(seed, 41);

  struct Cand {
    Vec3 p;
    double key;  // Efraimidis-Spirakis key for area-weighted sampling
  };
  std::vector<Cand> pool;

  auto add_lobe = [&](const Lobe& lobe, const Lobe* other, int budget) {
    for (int i = 0; i < budget; ++i) {
      const double eta = uniform_real(rng, -M_PI / 2.0, M_PI / 2.0);
      const double omega = uniform_real(rng, -M_PI, M_PI);
      const double u = uniform_real(rng, 1e-12, 1.0);
      const Vec3 p = lobe.surface_point(eta, omega);
      if (other && other->implicit(p) < 1.0) continue;
      const double h = 1e-4;
      const Vec3 de = (lobe.surface_point(eta + h, omega) - lobe.surface_point(eta - h, omega)) /
                      (2.0 * h);
      const Vec3 dw = (lobe.surface_point(eta, omega + h) - lobe.surface_point(eta, omega - h)) /
                      (2.0 * h);
      const double area = de.cross(dw).norm();
      if (area <= 1e-12) continue;
      pool.push_back({p, std::pow(u, 1.0 / area)});
    }
  };

  const int body_budget = 6 * n;
  add_lobe(shape.body, shape.has_marker() ? &shape.marker : nullptr, body_budget);
  if (shape.has_marker()) {
    // budget proportional to the rough area ratio of the lobes
    const double ratio = std::pow(shape.marker.half_axes.norm() / shape.body.half_axes.norm(), 2);
    add_lobe(shape.marker, &shape.body, std::max(16, static_cast<int>(body_budget * ratio)));
  }
  if (pool.empty()) throw NumericalError("sample_surface: produced no candidates");

  const int take = std::min<int>(n, static_cast<int>(pool.size()));
  std::partial_sort(pool.begin(), pool.begin() + take, pool.end(),
                    [](const Cand& a, const Cand& b) { return a.key > b.key; });

  PointCloud cloud;
  cloud.points.reserve(n);
  for (int i = 0; i < n; ++i) cloud.points.push_back(pool[i % take].p);
  return cloud;
}

}  // namespace lookaround::synth
