#include "lookaround/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lookaround/completion.hpp"
#include "lookaround/depth.hpp"
#include "lookaround/errors.hpp"
#include "lookaround/rng.hpp"

namespace lookaround::pipeline {

namespace {

std::vector<int> split_ids(const synth::Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train_ids;
  if (split == "test") return ds.test_ids;
  if (split == "all") {
    std::vector<int> all = ds.train_ids;
    all.insert(all.end(), ds.test_ids.begin(), ds.test_ids.end());
    std::sort(all.begin(), all.end());
    return all;
  }
  throw ConfigError("unknown split: " + split);
}

struct FramePrediction {
  RigidPose pose;  // network frame (unadjusted)
  double sigma_r = 1.0;
  double sigma_t = 1.0;
};

FramePrediction predict_frame(const synth::Frame& f, const checkpoint::Checkpoint* ckpt,
                              bool oracle) {
  FramePrediction p;
  if (oracle) {
    p.pose = f.gt_global_pose;
    return p;
  }
  const auto vp = ckpt->vp_model().predict(ckpt->stage1_params, f.descriptor);
  p.pose = vp.pose;
  p.sigma_r = vp.sigma_r;
  p.sigma_t = vp.sigma_t;
  return p;
}

}  // namespace

EvalReport evaluate(const synth::Dataset& dataset, const checkpoint::Checkpoint* ckpt,
                    const EvalOptions& options) {
  if (!options.oracle && ckpt == nullptr)
    throw ContractViolation("evaluate: checkpoint required unless in oracle mode");

  const std::vector<int> fit_ids = split_ids(dataset, options.tg_split);
  const std::vector<int> eval_ids = split_ids(dataset, options.eval_split);
  if (fit_ids.empty() || eval_ids.empty())
    throw ConfigError("evaluate: empty fit or eval split");

  const bool any_sfm = std::any_of(
      dataset.sequences.begin(), dataset.sequences.end(),
      [](const synth::Sequence& s) { return s.modality == synth::Modality::kSfmLike; });

  // single dataset-level alignment fitted on camera centers of the fit split
  PointCloud gt_centers, pred_centers;
  for (int si : fit_ids)
    for (const synth::Frame& f : dataset.sequences[si].frames) {
      const FramePrediction p = predict_frame(f, ckpt, options.oracle);
      gt_centers.points.push_back(f.gt_global_pose.camera_center());
      pred_centers.points.push_back(p.pose.camera_center());
    }
  const SimilarityTransform t_g = umeyama_align(gt_centers, pred_centers, any_sfm);

  EvalReport report;
  report.tg_scale = t_g.scale;

  std::vector<metrics::PoseEvalRecord> records;
  std::vector<double> er_list, ec_list, conf_r_list, conf_t_list;
  for (int si : eval_ids) {
    for (const synth::Frame& f : dataset.sequences[si].frames) {
      const FramePrediction p = predict_frame(f, ckpt, options.oracle);
      metrics::PoseEvalRecord rec;
      rec.gt = f.gt_global_pose;
      rec.pred = adjust_pose(p.pose, t_g);
      rec.confidence = 1.0 / p.sigma_r;
      rec.sequence = si;
      rec.frame = f.index;
      records.push_back(rec);

      const auto abs_err = metrics::absolute_errors(rec);
      er_list.push_back(abs_err.rotation_rad);
      ec_list.push_back(abs_err.center_dist);
      conf_r_list.push_back(1.0 / p.sigma_r);
      conf_t_list.push_back(1.0 / p.sigma_t);
      report.records.push_back(
          {si, f.index, abs_err.rotation_rad, abs_err.center_dist, 1.0 / p.sigma_r,
           1.0 / p.sigma_t});
    }
  }

  metrics::PairingConfig pairing;
  pairing.max_pairs = options.max_pairs;
  report.medians = metrics::median_report(records, pairing);
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      if (options.max_pairs > 0 && static_cast<int>(report.pairs.size()) >= options.max_pairs)
        break;
      const auto rel = metrics::relative_errors(records[i], records[j]);
      if (!rel) continue;
      report.pairs.push_back({records[i].sequence, records[i].frame, records[j].sequence,
                              records[j].frame, rel->rotation_rad, rel->translation});
    }

  report.ap_er = metrics::average_precision(er_list, conf_r_list, options.ap_er_threshold);
  report.ap_ec = metrics::average_precision(ec_list, conf_t_list, options.ap_ec_threshold);

  // ---- shape metrics ------------------------------------------------------
  const bool completion_ready = options.oracle || (ckpt != nullptr && ckpt->pcl.has_value());
  if (completion_ready) {
    double viou_sum = 0.0, dpcl_sum = 0.0, viou_part_sum = 0.0, dpcl_part_sum = 0.0;
    int n_shape = 0;
    metrics::ShapeEvalConfig shape_cfg;
    shape_cfg.resolution = options.voxel_resolution;
    shape_cfg.smooth = options.smooth;

    for (int si : eval_ids) {
      const synth::Sequence& seq = dataset.sequences[si];
      const PointCloud gt_canonical =
          synth::sample_surface(seq.shape, options.eval_cloud_budget, mix64(dataset.seed ^ si));
      const int step =
          std::max<std::size_t>(1, seq.frames.size() / options.completion_frames_per_seq);
      for (std::size_t t = 0; t < seq.frames.size(); t += step) {
        const synth::Frame& f = seq.frames[t];
        PointCloud gt_cam = gt_canonical;
        for (Vec3& p : gt_cam.points) p = f.gt_global_pose.apply(p);

        PointCloud completed_cam, partial_cam;
        if (options.oracle) {
          completed_cam = gt_cam;
          partial_cam = gt_cam;
        } else {
          const auto vp = ckpt->vp_model().predict(ckpt->stage1_params, f.descriptor);
          const auto dp = ckpt->depth_model().predict(ckpt->stage1_params, f.descriptor);

          PointCloud aligned = depth::align_partial_cloud(dp, dataset.calibration, vp.pose);
          const auto feats = completion::point_features(dp, f.descriptor, dataset.calibration);

          const std::uint64_t lo_seed = mix64(options.seed ^ (si * 1000003ull + t));
          const auto keep = completion::leave_out_indices(aligned.confidence, options.leave_out_m,
                                                          options.leave_out_m, lo_seed);
          PointCloud sub;
          std::vector<Eigen::VectorXd> sub_feats;
          for (int i : keep) {
            sub.points.push_back(aligned.points[i]);
            sub_feats.push_back(feats[i]);
          }

          const auto sc = completion::point_mlp_forward(sub, sub_feats, *ckpt->pcl);
          const double tau =
              options.tau >= 0.0 ? options.tau : 0.5 / static_cast<double>(sc.size());
          PointCloud completed = completion::threshold_cloud(sc, tau);
          if (options.smooth && static_cast<int>(completed.size()) > options.smooth_k)
            completed = completion::laplacian_smooth(completed, options.smooth_k,
                                                     options.smooth_iters, options.smooth_step);
          if (completed.empty()) completed.points.push_back(sc.points.empty() ? Vec3::Zero()
                                                                              : sc.points[0]);

          completed_cam = completed;
          for (Vec3& p : completed_cam.points) p = vp.pose.apply(p);
          // the partial baseline in the camera frame is the back-projection itself
          partial_cam = backproject(dp.to_depthmap(), dataset.calibration);

          if (seq.modality == synth::Modality::kSfmLike) {
            completed_cam = metrics::scale_align(completed_cam, gt_cam).second;
            partial_cam = metrics::scale_align(partial_cam, gt_cam).second;
          }
        }

        viou_sum += metrics::voxel_iou(gt_cam, completed_cam, shape_cfg);
        dpcl_sum += metrics::pcl_distance(gt_cam, completed_cam);
        viou_part_sum += metrics::voxel_iou(gt_cam, partial_cam, shape_cfg);
        dpcl_part_sum += metrics::pcl_distance(gt_cam, partial_cam);
        ++n_shape;
      }
    }
    if (n_shape > 0) {
      report.m_viou = viou_sum / n_shape;
      report.m_dpcl = dpcl_sum / n_shape;
      report.m_viou_partial = viou_part_sum / n_shape;
      report.m_dpcl_partial = dpcl_part_sum / n_shape;
    }
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report, const EvalOptions& options) {
  nlohmann::json j;
  j["schema"] = "lookaround-eval-report/1";
  j["medians"] = {{"e_r", report.medians.e_r},
                  {"e_c", report.medians.e_c},
                  {"e_r_rel", report.medians.e_r_rel},
                  {"e_t_rel", report.medians.e_t_rel}};
  j["ap_er"] = report.ap_er;
  j["ap_ec"] = report.ap_ec;
  j["n_records"] = report.medians.n_records;
  j["n_pairs"] = report.medians.n_pairs;
  j["tg_scale"] = report.tg_scale;
  if (report.m_viou >= 0.0) {
    j["m_viou"] = report.m_viou;
    j["m_dpcl"] = report.m_dpcl;
    j["m_viou_partial"] = report.m_viou_partial;
    j["m_dpcl_partial"] = report.m_dpcl_partial;
  }
  j["config"] = {{"eval_split", options.eval_split},
                 {"tg_split", options.tg_split},
                 {"oracle", options.oracle},
                 {"ap_er_threshold", options.ap_er_threshold},
                 {"ap_ec_threshold", options.ap_ec_threshold},
                 {"tau", options.tau},
                 {"smooth", options.smooth},
                 {"leave_out_m", options.leave_out_m},
                 {"voxel_resolution", options.voxel_resolution},
                 {"viou_outside_gt_box", "clipped"},
                 {"seed", options.seed}};
  return j;
}

std::string records_to_csv(const std::vector<RecordRow>& records) {
  std::ostringstream out;
  out.precision(17);
  out << "sequence,frame,e_r,e_c,conf_r,conf_t\n";
  for (const RecordRow& r : records)
    out << r.sequence << "," << r.frame << "," << r.e_r << "," << r.e_c << "," << r.conf_r << ","
        << r.conf_t << "\n";
  return out.str();
}

std::string pairs_to_csv(const std::vector<PairRow>& pairs) {
  std::ostringstream out;
  out.precision(17);
  out << "seq_a,frame_a,seq_b,frame_b,e_r_rel,e_t_rel\n";
  for (const PairRow& p : pairs)
    out << p.seq_a << "," << p.frame_a << "," << p.seq_b << "," << p.frame_b << "," << p.e_r_rel
        << "," << p.e_t_rel << "\n";
  return out.str();
}

}  // namespace lookaround::pipeline
