#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lookaround/completion.hpp"
#include "lookaround/depth.hpp"
#include "lookaround/factorization.hpp"
#include "lookaround/models.hpp"
#include "lookaround/params.hpp"
#include "lookaround/synth.hpp"

namespace lookaround::learn {

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.0005;
  int batch_size = 4;
  int iterations = 4000;

  double w_r = 1.0;
  double w_t = 1.0;
  double w_d = 1.0;
  double w_pcl = 1.0;
  double w_delta = 1.0;
  /// Weight of the scale-consistency term that ties predicted translation
  /// norms to lambda_hat-rescaled observations (sfm-like sequences only).
  double w_scale = 1.0;

  bool probabilistic = true;
  /// Iterations trained on the plain residual losses before switching to the
  /// NLLs; keeps the confidence heads from absorbing the large initial
  /// residuals. Ignored when probabilistic is off.
  int nll_warmup_iters = 1000;
  int min_gap = 1;
  std::uint64_t seed = 0;

  // plateau schedule: decay x0.1 when the windowed mean loss stops
  // improving; stop after max_decays decays have been exhausted the same way
  int plateau_window = 200;
  int plateau_patience = 600;
  int max_decays = 2;
  double decay_factor = 0.1;
  int log_every = 25;

  double ema_decay = 0.99;
  int scale_warmup_iters = 1500;  // iterations before lambda_hat starts tracking

  // stage 2
  int support_size = 512;
  int target_budget = 1024;   // ground-truth target points per iteration
  int input_min = 256;        // leave-out range for input clouds
  int input_max = 1024;
  int merge_stride = 3;       // frames merged into per-sequence target clouds
  int merge_budget = 3000;    // points kept per merged target cloud
};

struct TrainLogRow {
  int iter = 0;
  double loss_r = 0.0;
  double loss_t = 0.0;
  double loss_d = 0.0;
  double total = 0.0;
  double lr = 0.0;
  std::vector<double> lambdas;
};

std::string log_to_csv(const std::vector<TrainLogRow>& log,
                       const std::vector<std::string>& sequence_ids);

/// v <- momentum v + g; p <- p - lr v. Throws NumericalError on non-finite
/// gradients or parameters.
void sgd_step(ParamStore& params, const Gradients& grads, double learning_rate, double momentum);

struct Stage1Result {
  ParamStore params;  // vp.* and depth.* tensors
  models::VpModel vp;
  models::DepthModel depth_model;
  std::vector<double> lambda_hat;  // per sequence, dataset order (1.0 where untrained)
  std::vector<TrainLogRow> log;
  double final_loss = 0.0;
};

/// Stage 1: joint viewpoint + depth training on Siamese pairs from the train
/// split, with the per-sequence scale estimate tracked as an EMA.
Stage1Result train_stage1(const synth::Dataset& dataset, const TrainConfig& cfg);

struct Stage2Result {
  completion::PointMlpParams pcl;
  std::vector<TrainLogRow> log;
  double final_loss = 0.0;
};

/// Stage 2: completion training on globally aligned partial clouds built
/// from the frozen stage-1 predictors; targets are per-sequence merged
/// clouds of observed depth aligned by the predicted poses. The final
/// decoder bias starts as a random sample of those clouds (the category's
/// average shape).
Stage2Result train_stage2(const synth::Dataset& dataset, const Stage1Result& stage1,
                          const TrainConfig& cfg);

}  // namespace lookaround::learn
