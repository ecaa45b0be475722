#include "lookaround/models.hpp"

#include <cmath>

#include "lookaround/errors.hpp"
#include "lookaround/rng.hpp"

namespace lookaround::models {

namespace {
constexpr double kSigmaFloor = factorization::kSigmaFloor;

// softplus(x) = 1 at x = ln(e - 1); used to start the confidence heads at 1.
const double kUnitSigmaRaw = std::log(std::exp(1.0) - 1.0);

std::vector<double> xavier(std::mt19937_64& rng, int rows, int cols, double gain) {
  const double limit = gain * std::sqrt(6.0 / (rows + cols));
  std::vector<double> w(static_cast<std::size_t>(rows) * cols);
  for (double& v : w) v = uniform_real(rng, -limit, limit);
  return w;
}
}  // namespace

void add_mlp_params(learn::ParamStore& store, const std::string& prefix, const Mlp& spec,
                    std::uint64_t seed, double final_scale) {
  auto rng = make_rng(seed, 71);
  int in = spec.input;
  for (int l = 0; l < spec.layers(); ++l) {
    const bool last = l == spec.layers() - 1;
    const int out = last ? spec.output : spec.hidden[l];
    const double gain = last ? final_scale : 1.0;
    store.add(prefix + ".w" + std::to_string(l), out, in, xavier(rng, out, in, gain));
    store.add(prefix + ".b" + std::to_string(l), out, 1, std::vector<double>(out, 0.0));
    in = out;
  }
}

ad::Var mlp_forward(ad::Tape& tape, const learn::BoundParams& params, const std::string& prefix,
                    const Mlp& spec, ad::Var input) {
  ad::Var x = input;
  for (int l = 0; l < spec.layers(); ++l) {
    x = tape.linear(params.of(prefix + ".w" + std::to_string(l)),
                    params.of(prefix + ".b" + std::to_string(l)), x);
    if (l + 1 < spec.layers()) x = tape.leaky_relu(x, spec.leak);
  }
  return x;
}

ad::Var mlp_forward_rows(ad::Tape& tape, const learn::BoundParams& params,
                         const std::string& prefix, const Mlp& spec, ad::Var input) {
  ad::Var x = input;
  for (int l = 0; l < spec.layers(); ++l) {
    x = tape.linear_rows(x, params.of(prefix + ".w" + std::to_string(l)),
                         params.of(prefix + ".b" + std::to_string(l)));
    if (l + 1 < spec.layers()) x = tape.leaky_relu(x, spec.leak);
  }
  return x;
}

// ---------------------------------------------------------------------------
// VpModel
// ---------------------------------------------------------------------------

VpModel VpModel::make(int descriptor_dim, std::vector<int> hidden) {
  VpModel m;
  m.spec = Mlp{descriptor_dim, std::move(hidden), 8};
  return m;
}

void VpModel::init(learn::ParamStore& store, std::uint64_t seed) const {
  add_mlp_params(store, "vp", spec, seed, 0.2);
  // start the confidence heads at sigma = 1
  auto& bias = store.get("vp.b" + std::to_string(spec.layers() - 1)).data;
  bias[6] = kUnitSigmaRaw;
  bias[7] = kUnitSigmaRaw;
}

VpHeads VpModel::build(ad::Tape& tape, const learn::BoundParams& params,
                       const Eigen::VectorXd& descriptor) const {
  if (descriptor.size() != spec.input)
    throw ContractViolation("VpModel: descriptor length mismatch");
  const ad::Var in = tape.constant({descriptor.data(), static_cast<std::size_t>(descriptor.size())});
  const ad::Var out = mlp_forward(tape, params, "vp", spec, in);
  VpHeads h;
  h.omega = tape.slice(out, 0, 3);
  h.t = tape.slice(out, 3, 3);
  h.sigma_r = tape.clamp_min(tape.softplus(tape.slice(out, 6, 1)), kSigmaFloor);
  h.sigma_t = tape.clamp_min(tape.softplus(tape.slice(out, 7, 1)), kSigmaFloor);
  return h;
}

factorization::PosePrediction VpModel::predict(const learn::ParamStore& store,
                                               const Eigen::VectorXd& descriptor) const {
  ad::Tape tape;
  const learn::BoundParams bound = learn::bind(tape, store);
  const VpHeads h = build(tape, bound, descriptor);
  const auto om = tape.values(h.omega);
  const auto tr = tape.values(h.t);
  RigidPose pose;
  pose.rotation = so3_exp(Vec3(om[0], om[1], om[2]));
  pose.translation = Vec3(tr[0], tr[1], tr[2]);
  return factorization::PosePrediction(pose, tape.value(h.sigma_r), tape.value(h.sigma_t));
}

// ---------------------------------------------------------------------------
// DepthModel
// ---------------------------------------------------------------------------

DepthModel DepthModel::make(int descriptor_dim, int width, int height, std::vector<int> hidden) {
  DepthModel m;
  m.spec = Mlp{descriptor_dim, std::move(hidden), 2 * width * height};
  m.width = width;
  m.height = height;
  return m;
}

void DepthModel::init(learn::ParamStore& store, std::uint64_t seed) const {
  add_mlp_params(store, "depth", spec, seed, 0.2);
  auto& bias = store.get("depth.b" + std::to_string(spec.layers() - 1)).data;
  const int pixels = width * height;
  for (int i = 0; i < pixels; ++i) bias[pixels + i] = kUnitSigmaRaw;
}

DepthHeads DepthModel::build(ad::Tape& tape, const learn::BoundParams& params,
                             const Eigen::VectorXd& descriptor) const {
  if (descriptor.size() != spec.input)
    throw ContractViolation("DepthModel: descriptor length mismatch");
  const ad::Var in = tape.constant({descriptor.data(), static_cast<std::size_t>(descriptor.size())});
  const ad::Var out = mlp_forward(tape, params, "depth", spec, in);
  const int pixels = width * height;
  DepthHeads h;
  h.mean = tape.slice(out, 0, pixels);
  h.sigma = tape.clamp_min(tape.softplus(tape.slice(out, pixels, pixels)), depth::kSigmaFloor);
  return h;
}

depth::DepthPrediction DepthModel::predict(const learn::ParamStore& store,
                                           const Eigen::VectorXd& descriptor) const {
  ad::Tape tape;
  const learn::BoundParams bound = learn::bind(tape, store);
  const DepthHeads h = build(tape, bound, descriptor);

  DepthMap mean(width, height), sigma(width, height);
  const auto mv = tape.values(h.mean);
  const auto sv = tape.values(h.sigma);
  for (std::size_t i = 0; i < mean.values.size(); ++i) {
    mean.values[i] = mv[i];
    sigma.values[i] = sv[i];
  }
  return depth::DepthPrediction(std::move(mean), std::move(sigma));
}

}  // namespace lookaround::models
