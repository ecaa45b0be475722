#include "lookaround/factorization.hpp"

#include <cmath>

#include "lookaround/errors.hpp"
#include "lookaround/rng.hpp"

namespace lookaround::factorization {

PosePrediction::PosePrediction(const RigidPose& p, double sr, double st)
    : pose(p), sigma_r(sr), sigma_t(st) {
  if (!(sigma_r >= kSigmaFloor) || !(sigma_t >= kSigmaFloor))
    throw ContractViolation("PosePrediction: confidence scales below floor");
}

std::optional<PairLosses> siamese_losses(const PosePrediction& pred_t,
                                         const PosePrediction& pred_tp, const RigidPose& obs_t,
                                         const RigidPose& obs_tp, bool normalize_translation) {
  const RigidPose pred_rel = relative_pose(pred_t.pose, pred_tp.pose);
  const RigidPose obs_rel = relative_pose(obs_t, obs_tp);

  PairLosses out;
  out.rotation = std::sqrt(2.0) * pred_rel.rotation.angle_to(obs_rel.rotation);

  Vec3 t_pred = pred_rel.translation;
  Vec3 t_obs = obs_rel.translation;
  if (normalize_translation) {
    const double np = t_pred.norm(), no = t_obs.norm();
    if (np < kBaselineEps || no < kBaselineEps) return std::nullopt;
    t_pred /= np;
    t_obs /= no;
  }
  out.translation = (t_pred - t_obs).norm();
  return out;
}

double gaussian_translation_nll(double l_t, double sigma_t) {
  // -ln[(2 pi s^2)^(-3/2) exp(-l^2 / (2 s^2))]
  return 1.5 * std::log(2.0 * M_PI) + 3.0 * std::log(sigma_t) +
         0.5 * l_t * l_t / (sigma_t * sigma_t);
}

double laplace_rotation_nll(double l_r, double sigma_r) {
  return std::log(sigma_r) + std::sqrt(2.0) * l_r / sigma_r;
}

std::optional<PairLosses> siamese_nll(const PosePrediction& pred_t, const PosePrediction& pred_tp,
                                      const RigidPose& obs_t, const RigidPose& obs_tp,
                                      bool normalize_translation) {
  const auto base = siamese_losses(pred_t, pred_tp, obs_t, obs_tp, normalize_translation);
  if (!base) return std::nullopt;
  PairLosses out;
  out.rotation = laplace_rotation_nll(base->rotation, pred_t.sigma_r + pred_tp.sigma_r);
  out.translation = gaussian_translation_nll(base->translation, pred_t.sigma_t + pred_tp.sigma_t);
  return out;
}

bool update_scale(ScaleEstimate& est, const PosePrediction& pred_t, const PosePrediction& pred_tp,
                  const RigidPose& obs_t, const RigidPose& obs_tp) {
  const Vec3 t_pred = relative_pose(pred_t.pose, pred_tp.pose).translation;
  const Vec3 t_obs = relative_pose(obs_t, obs_tp).translation;
  if (t_obs.norm() < kBaselineEps) return false;
  const double ratio = t_pred.norm() / t_obs.norm();
  est.lambda_hat = est.ema_decay * est.lambda_hat + (1.0 - est.ema_decay) * ratio;
  ++est.updates;
  return true;
}

std::vector<std::pair<int, int>> sample_pairs(int n_frames, int n_pairs, int min_gap,
                                              std::uint64_t seed) {
  if (n_frames < 2) throw ContractViolation("sample_pairs: need at least 2 frames");
  const int gap_lo = std::max(min_gap, 1);
  if (gap_lo >= n_frames) throw ConfigError("sample_pairs: min_gap leaves no admissible pair");

  auto rng = make_rng(seed, 61);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    const int gap = uniform_int(rng, gap_lo, n_frames - 1);
    const int t = uniform_int(rng, 0, n_frames - 1 - gap);
    pairs.emplace_back(t, t + gap);
  }
  return pairs;
}

}  // namespace lookaround::factorization
