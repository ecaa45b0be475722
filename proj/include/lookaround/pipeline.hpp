#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lookaround/checkpoint.hpp"
#include "lookaround/metrics.hpp"
#include "lookaround/synth.hpp"

namespace lookaround::pipeline {

struct EvalOptions {
  std::string eval_split = "test";  // test | train | all
  std::string tg_split = "train";   // split the dataset-level alignment is fitted on
  bool oracle = false;              // feed hidden ground truth back as predictions
  double ap_er_threshold = M_PI / 6.0;
  double ap_ec_threshold = 0.5;
  double tau = -1.0;  // completion threshold; < 0 means 0.5 / M
  bool smooth = true;
  int smooth_k = 8;
  int smooth_iters = 1;
  double smooth_step = 0.5;
  int completion_frames_per_seq = 6;
  int eval_cloud_budget = 8192;
  int leave_out_m = 1024;  // test-time input size for the completion network
  int voxel_resolution = 30;
  int max_pairs = 20000;
  std::uint64_t seed = 0;
};

struct RecordRow {
  int sequence = 0;
  int frame = 0;
  double e_r = 0.0;
  double e_c = 0.0;
  double conf_r = 0.0;
  double conf_t = 0.0;
};

struct PairRow {
  int seq_a = 0, frame_a = 0, seq_b = 0, frame_b = 0;
  double e_r_rel = 0.0, e_t_rel = 0.0;
};

struct EvalReport {
  metrics::MedianReport medians;
  double ap_er = 0.0;
  double ap_ec = 0.0;
  double m_viou = -1.0;        // completed shape, mean over evaluated frames
  double m_dpcl = -1.0;
  double m_viou_partial = -1.0;  // partial-cloud baseline
  double m_dpcl_partial = -1.0;
  double tg_scale = 1.0;  // scale of the fitted dataset-level alignment
  std::vector<RecordRow> records;
  std::vector<PairRow> pairs;
};

/// Full evaluation protocol: predict poses/depths on the eval split, fit the
/// single dataset-level similarity on the fit split, compute absolute /
/// relative / AP metrics, and (when a completion network is present or in
/// oracle mode) shape metrics in each test camera's frame.
EvalReport evaluate(const synth::Dataset& dataset, const checkpoint::Checkpoint* ckpt,
                    const EvalOptions& options);

nlohmann::json report_to_json(const EvalReport& report, const EvalOptions& options);
std::string records_to_csv(const std::vector<RecordRow>& records);
std::string pairs_to_csv(const std::vector<PairRow>& pairs);

}  // namespace lookaround::pipeline
