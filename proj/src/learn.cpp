#include "lookaround/learn.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "lookaround/errors.hpp"
#include "lookaround/rng.hpp"

namespace lookaround::learn {

namespace {

const double kSqrt2 = std::sqrt(2.0);
const double kGaussConst = 1.5 * std::log(2.0 * M_PI);

struct PairDraw {
  int seq = 0;  // index into dataset.sequences
  int t = 0;
  int tp = 0;
};

std::vector<PairDraw> make_schedule(const synth::Dataset& ds, const TrainConfig& cfg,
                                    int entries) {
  auto rng = make_rng(cfg.seed, 91);
  std::vector<PairDraw> schedule(entries);
  const auto& ids = ds.train_ids;
  for (PairDraw& d : schedule) {
    d.seq = ids[uniform_int(rng, 0, static_cast<int>(ids.size()) - 1)];
    const int n = static_cast<int>(ds.sequences[d.seq].frames.size());
    const int gap = uniform_int(rng, std::max(cfg.min_gap, 1), n - 1);
    d.t = uniform_int(rng, 0, n - 1 - gap);
    d.tp = d.t + gap;
  }
  return schedule;
}

/// Loss-plateau learning-rate schedule with a bounded number of decays.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, const TrainConfig& cfg)
      : lr_(lr), window_(cfg.plateau_window), patience_(cfg.plateau_patience),
        max_decays_(cfg.max_decays), factor_(cfg.decay_factor) {}

  /// Returns false once training should stop.
  bool observe(double loss) {
    buffer_.push_back(loss);
    if (static_cast<int>(buffer_.size()) < window_) return true;
    double mean = 0.0;
    for (std::size_t i = buffer_.size() - window_; i < buffer_.size(); ++i) mean += buffer_[i];
    mean /= window_;
    if (mean < best_ - 1e-12) {
      best_ = mean;
      since_best_ = 0;
    } else if (++since_best_ >= patience_) {
      if (decays_ == max_decays_) return false;
      ++decays_;
      lr_ *= factor_;
      since_best_ = 0;
      best_ = mean;
    }
    return true;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  double lr_;
  int window_, patience_, max_decays_;
  double factor_;
  std::vector<double> buffer_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_best_ = 0;
  int decays_ = 0;
};

struct PairGraph {
  ad::Var rot_term;
  ad::Var trans_term;
  double pred_rel_norm = 0.0;
  double obs_rel_norm = 0.0;
};

PairGraph build_pair_loss(ad::Tape& tape, const models::VpHeads& h_t,
                          const models::VpHeads& h_tp, const RigidPose& obs_t,
                          const RigidPose& obs_tp, double lambda_hat, bool sfm_like,
                          const TrainConfig& cfg) {
  const RigidPose obs_rel = relative_pose(obs_t, obs_tp);
  const Quat q_obs_conj = obs_rel.rotation.quat().conjugate();
  const double obs_q[4] = {q_obs_conj.w(), q_obs_conj.x(), q_obs_conj.y(), q_obs_conj.z()};

  const ad::Var q_t = tape.quat_exp(h_t.omega);
  const ad::Var q_tp = tape.quat_exp(h_tp.omega);
  const ad::Var q_rel = tape.quat_mul(q_tp, tape.quat_conj(q_t));
  const ad::Var q_err = tape.quat_mul(q_rel, tape.constant({obs_q, 4}));
  const ad::Var l_r = tape.scale(tape.geodesic_angle(q_err), kSqrt2);

  const ad::Var t_rel = tape.sub(h_tp.t, tape.quat_rotate(q_rel, h_t.t));
  const ad::Var pred_norm = tape.norm(t_rel);

  PairGraph out;
  out.pred_rel_norm = tape.value(pred_norm);
  out.obs_rel_norm = obs_rel.translation.norm();

  ad::Var l_t;
  ad::Var scale_anchor;
  if (sfm_like) {
    // direction loss on unit vectors; the scale-ambiguous magnitude is tied
    // to lambda_hat-rescaled observations by a separate bounded anchor term
    const Vec3 u_obs = obs_rel.translation / std::max(out.obs_rel_norm, 1e-12);
    const double u[3] = {u_obs.x(), u_obs.y(), u_obs.z()};
    l_t = tape.norm(tape.sub(tape.normalize3(t_rel), tape.constant({u, 3})));
    const double target = lambda_hat * std::max(out.obs_rel_norm, 1e-12);
    const ad::Var ratio = tape.add_const(tape.scale(pred_norm, 1.0 / target), -1.0);
    scale_anchor = tape.mul(ratio, ratio);
  } else {
    const double t_obs[3] = {obs_rel.translation.x(), obs_rel.translation.y(),
                             obs_rel.translation.z()};
    l_t = tape.norm(tape.sub(t_rel, tape.constant({t_obs, 3})));
  }

  if (cfg.probabilistic) {
    const ad::Var sigma_r = tape.add(h_t.sigma_r, h_tp.sigma_r);
    out.rot_term = tape.add(tape.log(sigma_r), tape.div(tape.scale(l_r, kSqrt2), sigma_r));
    const ad::Var sigma_t = tape.add(h_t.sigma_t, h_tp.sigma_t);
    const ad::Var quad = tape.scale(tape.div(tape.mul(l_t, l_t), tape.mul(sigma_t, sigma_t)), 0.5);
    out.trans_term = tape.add_const(tape.add(tape.scale(tape.log(sigma_t), 3.0), quad),
                                    kGaussConst);
  } else {
    out.rot_term = l_r;
    out.trans_term = l_t;
  }
  if (scale_anchor.valid())
    out.trans_term = tape.add(out.trans_term, tape.scale(scale_anchor, cfg.w_scale));
  return out;
}

double mean_observed_depth(const synth::Dataset& ds) {
  double sum = 0.0;
  long count = 0;
  for (int si : ds.train_ids)
    for (const synth::Frame& f : ds.sequences[si].frames)
      for (double v : f.depth.values)
        if (std::isfinite(v)) {
          sum += v;
          ++count;
        }
  return count > 0 ? sum / count : 1.0;
}

double mean_observed_tnorm(const synth::Dataset& ds) {
  double sum = 0.0;
  long count = 0;
  for (int si : ds.train_ids)
    for (const synth::Frame& f : ds.sequences[si].frames) {
      sum += f.observed_pose.translation.norm();
      ++count;
    }
  return count > 0 ? sum / count : 1.0;
}

}  // namespace

std::string log_to_csv(const std::vector<TrainLogRow>& log,
                       const std::vector<std::string>& sequence_ids) {
  std::ostringstream out;
  out.precision(17);
  out << "iter,loss_r,loss_t,loss_d,total,lr";
  for (const std::string& id : sequence_ids) out << ",lambda_" << id;
  out << "\n";
  for (const TrainLogRow& row : log) {
    out << row.iter << "," << row.loss_r << "," << row.loss_t << "," << row.loss_d << ","
        << row.total << "," << row.lr;
    for (double l : row.lambdas) out << "," << l;
    out << "\n";
  }
  return out.str();
}

void sgd_step(ParamStore& params, const Gradients& grads, double learning_rate, double momentum) {
  if (static_cast<int>(grads.by_tensor.size()) != params.count())
    throw ContractViolation("sgd_step: gradient/parameter shape mismatch");
  for (int i = 0; i < params.count(); ++i) {
    Tensor& t = params.tensor(i);
    const std::vector<double>& g = grads.by_tensor[i];
    if (g.size() != t.size()) throw ContractViolation("sgd_step: tensor size mismatch");
    std::vector<double>& v = params.momentum(i);
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j]))
        throw NumericalError("sgd_step: non-finite gradient in " + t.name);
      v[j] = momentum * v[j] + g[j];
      t.data[j] -= learning_rate * v[j];
      if (!std::isfinite(t.data[j]))
        throw NumericalError("sgd_step: parameter diverged in " + t.name);
    }
  }
}

Stage1Result train_stage1(const synth::Dataset& dataset, const TrainConfig& cfg) {
  if (dataset.train_ids.size() < 2)
    throw ContractViolation("train_stage1: need at least 2 training sequences");
  for (int si : dataset.train_ids)
    if (dataset.sequences[si].frames.size() < 2)
      throw ContractViolation("train_stage1: sequence with fewer than 2 frames");

  const synth::Sequence& first = dataset.sequences[dataset.train_ids[0]];
  const int desc_dim = static_cast<int>(first.frames[0].descriptor.size());
  const Calibration& k = dataset.calibration;

  Stage1Result res;
  res.vp = models::VpModel::make(desc_dim);
  res.depth_model = models::DepthModel::make(desc_dim, k.width, k.height);
  res.vp.init(res.params, mix64(cfg.seed ^ 0x1a1a));
  res.depth_model.init(res.params, mix64(cfg.seed ^ 0x2b2b));

  // data-driven bias start: translations at the mean observed magnitude
  // (cameras look at the object, so T ~ (0, 0, |T|)), depths at the mean
  // observed depth
  {
    auto& vp_bias = res.params.get("vp.b" + std::to_string(res.vp.spec.layers() - 1)).data;
    vp_bias[5] = mean_observed_tnorm(dataset);
    auto& d_bias =
        res.params.get("depth.b" + std::to_string(res.depth_model.spec.layers() - 1)).data;
    const double dbar = mean_observed_depth(dataset);
    for (int i = 0; i < k.width * k.height; ++i) d_bias[i] = dbar;
  }

  std::vector<factorization::ScaleEstimate> scales(dataset.sequences.size());
  for (std::size_t i = 0; i < scales.size(); ++i) {
    scales[i].sequence = static_cast<int>(i);
    scales[i].ema_decay = cfg.ema_decay;
  }

  const auto schedule = make_schedule(dataset, cfg, cfg.iterations * cfg.batch_size);
  PlateauSchedule plateau(cfg.learning_rate, cfg);

  for (int it = 0; it < cfg.iterations; ++it) {
    ad::Tape tape;
    const BoundParams bound = bind(tape, res.params);

    std::map<std::pair<int, int>, models::VpHeads> vp_cache;
    std::map<std::pair<int, int>, ad::Var> depth_cache;
    auto vp_heads = [&](int si, int t) -> const models::VpHeads& {
      auto key = std::make_pair(si, t);
      auto itc = vp_cache.find(key);
      if (itc == vp_cache.end())
        itc = vp_cache
                  .emplace(key, res.vp.build(tape, bound,
                                             dataset.sequences[si].frames[t].descriptor))
                  .first;
      return itc->second;
    };
    auto depth_term = [&](int si, int t) -> ad::Var {
      auto key = std::make_pair(si, t);
      auto itc = depth_cache.find(key);
      if (itc == depth_cache.end()) {
        const synth::Frame& f = dataset.sequences[si].frames[t];
        const int count = f.depth.valid_count();
        ad::Var term;
        if (count > 0) {
          const models::DepthHeads h = res.depth_model.build(tape, bound, f.descriptor);
          term = tape.scale(
              tape.laplace_depth_nll(h.mean, h.sigma, f.depth, scales[si].lambda_hat),
              1.0 / count);
        }
        itc = depth_cache.emplace(key, term).first;
      }
      return itc->second;
    };

    ad::Var total;
    double batch_lr_sum = 0.0, batch_lt_sum = 0.0, batch_ld_sum = 0.0;
    struct PairScale {
      int seq;
      double ratio;
      bool ok;
    };
    std::vector<PairScale> pair_scales;

    for (int b = 0; b < cfg.batch_size; ++b) {
      const PairDraw d = schedule[static_cast<std::size_t>(it) * cfg.batch_size + b];
      const synth::Sequence& seq = dataset.sequences[d.seq];
      const bool sfm = seq.modality == synth::Modality::kSfmLike;

      const PairGraph pair = build_pair_loss(
          tape, vp_heads(d.seq, d.t), vp_heads(d.seq, d.tp), seq.frames[d.t].observed_pose,
          seq.frames[d.tp].observed_pose, scales[d.seq].lambda_hat, sfm, cfg);

      ad::Var term = tape.add(tape.scale(pair.rot_term, cfg.w_r),
                              tape.scale(pair.trans_term, cfg.w_t));
      batch_lr_sum += tape.value(pair.rot_term);
      batch_lt_sum += tape.value(pair.trans_term);

      if (cfg.w_d > 0.0) {
        const ad::Var dt0 = depth_term(d.seq, d.t);
        const ad::Var dt1 = depth_term(d.seq, d.tp);
        if (dt0.valid() && dt1.valid()) {
          const ad::Var davg = tape.scale(tape.add(dt0, dt1), 0.5);
          term = tape.add(term, tape.scale(davg, cfg.w_d));
          batch_ld_sum += tape.value(davg);
        }
      }
      total = total.valid() ? tape.add(total, term) : term;

      if (sfm && pair.obs_rel_norm > factorization::kBaselineEps)
        pair_scales.push_back({d.seq, pair.pred_rel_norm / pair.obs_rel_norm, true});
    }
    total = tape.scale(total, 1.0 / cfg.batch_size);

    const double loss = tape.value(total);
    if (!std::isfinite(loss)) throw NumericalError("train_stage1: training loss diverged");

    tape.backward(total);
    Gradients grads;
    grads.loss = loss;
    grads.by_tensor.reserve(res.params.count());
    for (int i = 0; i < res.params.count(); ++i) {
      auto g = tape.grad(bound.vars[i]);
      grads.by_tensor.emplace_back(g.begin(), g.end());
    }
    sgd_step(res.params, grads, plateau.lr(), cfg.momentum);

    if (it >= cfg.scale_warmup_iters)
      for (const PairScale& ps : pair_scales)
        if (ps.ok) {
          scales[ps.seq].lambda_hat = scales[ps.seq].ema_decay * scales[ps.seq].lambda_hat +
                                      (1.0 - scales[ps.seq].ema_decay) * ps.ratio;
          ++scales[ps.seq].updates;
        }

    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      TrainLogRow row;
      row.iter = it;
      row.loss_r = batch_lr_sum / cfg.batch_size;
      row.loss_t = batch_lt_sum / cfg.batch_size;
      row.loss_d = batch_ld_sum / cfg.batch_size;
      row.total = loss;
      row.lr = plateau.lr();
      for (const auto& s : scales) row.lambdas.push_back(s.lambda_hat);
      res.log.push_back(std::move(row));
    }
    res.final_loss = loss;
    if (!plateau.observe(loss)) break;
  }

  res.lambda_hat.resize(dataset.sequences.size(), 1.0);
  for (std::size_t i = 0; i < scales.size(); ++i) res.lambda_hat[i] = scales[i].lambda_hat;
  return res;
}

// ---------------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------------

namespace {

struct FrameInput {
  PointCloud cloud;  // globally aligned partial cloud, with confidences
  std::vector<Eigen::VectorXd> feats;
  int seq = 0;
};

PointCloud subsample(const PointCloud& cloud, int budget, std::mt19937_64& rng) {
  if (static_cast<int>(cloud.size()) <= budget) return cloud;
  PointCloud out;
  out.points.reserve(budget);
  for (int i = 0; i < budget; ++i)
    out.points.push_back(cloud.points[uniform_int(rng, 0, static_cast<int>(cloud.size()) - 1)]);
  return out;
}

}  // namespace

Stage2Result train_stage2(const synth::Dataset& dataset, const Stage1Result& stage1,
                          const TrainConfig& cfg) {
  if (dataset.train_ids.empty()) throw ContractViolation("train_stage2: no training sequences");
  const Calibration& k = dataset.calibration;

  // frozen stage-1 predictions: inputs and per-sequence merged target clouds
  std::vector<FrameInput> inputs;
  std::map<int, PointCloud> targets;
  for (int si : dataset.train_ids) {
    const synth::Sequence& seq = dataset.sequences[si];
    const double lam = stage1.lambda_hat[si];
    PointCloud merged;
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      const synth::Frame& f = seq.frames[t];
      const auto pred_pose = stage1.vp.predict(stage1.params, f.descriptor);
      const auto pred_depth = stage1.depth_model.predict(stage1.params, f.descriptor);

      FrameInput in;
      in.seq = si;
      in.cloud = depth::align_partial_cloud(pred_depth, k, pred_pose.pose);
      in.feats = completion::point_features(pred_depth, f.descriptor, k);
      inputs.push_back(std::move(in));

      if (t % std::max(1, cfg.merge_stride) == 0) {
        // observed depth lifted to the canonical scale, aligned by the
        // predicted pose: the self-supervised shape target
        PointCloud part = backproject(f.depth, k);
        const RigidPose inv = pred_pose.pose.inverse();
        for (Vec3& p : part.points) p = inv.apply(lam * p);
        merged.points.insert(merged.points.end(), part.points.begin(), part.points.end());
      }
    }
    auto rng = make_rng(cfg.seed, 101, si);
    targets[si] = subsample(merged, cfg.merge_budget, rng);
  }

  Stage2Result res;
  res.pcl = completion::PointMlpParams::make(cfg.support_size, 4, mix64(cfg.seed ^ 0x3c3c));

  {
    // final-layer bias: a random draw from the training shape clouds (the
    // category's average cloud), so the zero-state prediction is that shape
    PointCloud pool;
    for (const auto& [si, cloud] : targets)
      pool.points.insert(pool.points.end(), cloud.points.begin(), cloud.points.end());
    auto rng = make_rng(cfg.seed, 102);
    const int layer = 2;  // decoder output layer
    auto& bias = res.pcl.params.get("pcl.dec.b" + std::to_string(layer)).data;
    for (int m = 0; m < cfg.support_size; ++m) {
      const Vec3& p = pool.points[uniform_int(rng, 0, static_cast<int>(pool.size()) - 1)];
      for (int c = 0; c < 3; ++c) bias[3 * m + c] = p[c];
    }
    const double mass_raw = std::log(std::expm1(1.0 / cfg.support_size));
    for (int m = 0; m < cfg.support_size; ++m) bias[3 * cfg.support_size + m] = mass_raw;
  }

  auto rng = make_rng(cfg.seed, 103);
  PlateauSchedule plateau(cfg.learning_rate, cfg);

  for (int it = 0; it < cfg.iterations; ++it) {
    const FrameInput& in = inputs[uniform_int(rng, 0, static_cast<int>(inputs.size()) - 1)];
    const std::uint64_t it_seed = mix64(cfg.seed ^ (0x57a6e2ull + it));

    const std::vector<int> keep =
        completion::leave_out_indices(in.cloud.confidence, cfg.input_min, cfg.input_max, it_seed);
    PointCloud sub;
    std::vector<Eigen::VectorXd> feats;
    sub.points.reserve(keep.size());
    feats.reserve(keep.size());
    for (int i : keep) {
      sub.points.push_back(in.cloud.points[i]);
      feats.push_back(in.feats[i]);
    }

    auto rng_t = make_rng(it_seed, 7);
    const PointCloud target = subsample(targets[in.seq], cfg.target_budget, rng_t);

    ad::Tape tape;
    const BoundParams bound = bind(tape, res.pcl.params);
    const completion::PointMlpOut out = completion::point_mlp_build(tape, bound, res.pcl, sub, feats);

    // occupancy targets against the current support (constant w.r.t. the step)
    std::vector<Vec3> support(res.pcl.support_size);
    const auto sv = tape.values(out.support);
    for (int m = 0; m < res.pcl.support_size; ++m)
      support[m] = Vec3(sv[3 * m], sv[3 * m + 1], sv[3 * m + 2]);
    const std::vector<double> delta = completion::occupancy_targets(support, target);

    const ad::Var l_pcl = tape.chamfer_to_target(out.support, target);
    const ad::Var dmass = tape.sub(out.masses, tape.constant(delta));
    const ad::Var l_delta = tape.dot(dmass, dmass);
    const ad::Var total =
        tape.add(tape.scale(l_pcl, cfg.w_pcl), tape.scale(l_delta, cfg.w_delta));

    const double loss = tape.value(total);
    if (!std::isfinite(loss)) throw NumericalError("train_stage2: training loss diverged");

    tape.backward(total);
    Gradients grads;
    grads.loss = loss;
    for (int i = 0; i < res.pcl.params.count(); ++i) {
      auto g = tape.grad(bound.vars[i]);
      grads.by_tensor.emplace_back(g.begin(), g.end());
    }
    sgd_step(res.pcl.params, grads, plateau.lr(), cfg.momentum);

    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      TrainLogRow row;
      row.iter = it;
      row.loss_r = tape.value(l_pcl);
      row.loss_t = tape.value(l_delta);
      row.total = loss;
      row.lr = plateau.lr();
      res.log.push_back(std::move(row));
    }
    res.final_loss = loss;
    if (!plateau.observe(loss)) break;
  }
  return res;
}

}  // namespace lookaround::learn
