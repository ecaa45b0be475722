#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lookaround/ad.hpp"
#include "lookaround/depth.hpp"
#include "lookaround/factorization.hpp"
#include "lookaround/params.hpp"

namespace lookaround::models {

/// Fully connected stack: input -> hidden... -> output, leaky activations
/// between layers, linear output.
struct Mlp {
  int input = 0;
  std::vector<int> hidden;
  int output = 0;
  double leak = 0.2;

  int layers() const { return static_cast<int>(hidden.size()) + 1; }
};

/// Xavier-uniform parameters under "<prefix>.w<i>" / "<prefix>.b<i>";
/// final_scale shrinks the output layer (small initial predictions).
void add_mlp_params(learn::ParamStore& store, const std::string& prefix, const Mlp& spec,
                    std::uint64_t seed, double final_scale = 1.0);

ad::Var mlp_forward(ad::Tape& tape, const learn::BoundParams& params, const std::string& prefix,
                    const Mlp& spec, ad::Var input);

/// Row-batched variant: input is [N x spec.input].
ad::Var mlp_forward_rows(ad::Tape& tape, const learn::BoundParams& params,
                         const std::string& prefix, const Mlp& spec, ad::Var input);

// ---------------------------------------------------------------------------
// Viewpoint regressor: descriptor -> (axis-angle, translation, sigmas)
// ---------------------------------------------------------------------------

struct VpHeads {
  ad::Var omega;    // 3, through so3 exp for the rotation
  ad::Var t;        // 3
  ad::Var sigma_r;  // 1, softplus + floor
  ad::Var sigma_t;  // 1
};

struct VpModel {
  Mlp spec;

  static VpModel make(int descriptor_dim, std::vector<int> hidden = {128, 128});
  void init(learn::ParamStore& store, std::uint64_t seed) const;
  VpHeads build(ad::Tape& tape, const learn::BoundParams& params,
                const Eigen::VectorXd& descriptor) const;
  factorization::PosePrediction predict(const learn::ParamStore& store,
                                        const Eigen::VectorXd& descriptor) const;
};

// ---------------------------------------------------------------------------
// Depth regressor: descriptor -> per-pixel mean + Laplace scale
// ---------------------------------------------------------------------------

struct DepthHeads {
  ad::Var mean;   // width*height
  ad::Var sigma;  // width*height, softplus + floor
};

struct DepthModel {
  Mlp spec;
  int width = 0;
  int height = 0;

  static DepthModel make(int descriptor_dim, int width, int height,
                         std::vector<int> hidden = {128, 128});
  void init(learn::ParamStore& store, std::uint64_t seed) const;
  DepthHeads build(ad::Tape& tape, const learn::BoundParams& params,
                   const Eigen::VectorXd& descriptor) const;
  depth::DepthPrediction predict(const learn::ParamStore& store,
                                 const Eigen::VectorXd& descriptor) const;
};

}  // namespace lookaround::models
