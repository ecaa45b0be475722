#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "lookaround/geometry.hpp"
#include "lookaround/synth.hpp"

namespace lookaround::factorization {

constexpr double kSigmaFloor = 1e-3;
constexpr double kBaselineEps = 1e-6;

/// Absolute pose prediction with per-frame confidence scales.
struct PosePrediction {
  RigidPose pose;
  double sigma_r = 1.0;
  double sigma_t = 1.0;

  PosePrediction() = default;
  PosePrediction(const RigidPose& p, double sr, double st);
};

/// Online estimate of a sequence's reconstruction scale, tracked as an
/// exponential moving average of per-pair predicted/observed translation
/// norm ratios.
struct ScaleEstimate {
  int sequence = 0;
  double lambda_hat = 1.0;
  double ema_decay = 0.99;
  std::int64_t updates = 0;
};

struct PairLosses {
  double rotation = 0.0;     // |ln(Rhat_rel Rrel^T)|_F = sqrt(2) * angle
  double translation = 0.0;  // |That_rel - Trel|, unit-normalized when requested
};

/// Relative-pose losses for a Siamese pair. Returns nullopt when
/// normalization is requested and either relative translation has a
/// near-zero baseline (the pair should be skipped and resampled).
std::optional<PairLosses> siamese_losses(const PosePrediction& pred_t,
                                         const PosePrediction& pred_tp, const RigidPose& obs_t,
                                         const RigidPose& obs_tp, bool normalize_translation);

/// Probabilistic counterparts: 3-D Gaussian NLL for translation with
/// sigma_T = sigma_t(t) + sigma_t(t'), half-line Laplace NLL for rotation
/// with the additive constant dropped (it does not affect optimization).
std::optional<PairLosses> siamese_nll(const PosePrediction& pred_t, const PosePrediction& pred_tp,
                                      const RigidPose& obs_t, const RigidPose& obs_tp,
                                      bool normalize_translation);

/// NLL values from precomputed residuals (shared by the training graph).
double gaussian_translation_nll(double l_t, double sigma_t);
double laplace_rotation_nll(double l_r, double sigma_r);

/// One EMA step from a Siamese pair: lambda_pair = |That_rel| / |Trel|.
/// Returns false (no update) on a degenerate baseline.
bool update_scale(ScaleEstimate& est, const PosePrediction& pred_t, const PosePrediction& pred_tp,
                  const RigidPose& obs_t, const RigidPose& obs_tp);

/// Deterministic Siamese pairs (t, t') with gap |t - t'| >= max(min_gap, 1),
/// gap drawn uniformly over admissible gaps, then position uniformly.
std::vector<std::pair<int, int>> sample_pairs(int n_frames, int n_pairs, int min_gap,
                                              std::uint64_t seed);

}  // namespace lookaround::factorization
