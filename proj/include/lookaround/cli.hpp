#pragma once

#include <cstdint>
#include <string>

namespace lookaround::cli {

inline constexpr const char* kToolVersion = "lookaround 0.1.0";

// exit codes: 0 ok, 2 usage/config, 3 I/O, 4 numerical failure
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

struct GenerateArgs {
  std::string workdir = ".";
  std::string out;
  std::string config_file;
  std::uint64_t seed = 0;
  int sequences = 8;
  int frames = 36;
  std::string modality = "sfm";
  double test_fraction = 0.25;
  int width = 32;
  int height = 32;
  double depth_noise = 0.01;
  double outlier_fraction = 0.10;
  double hole_fraction = 0.20;
  double pose_outlier_frames = 0.0;
  bool no_noise = false;
  bool identity_alignment = false;
  double fixed_lambda = 0.0;
  double elevation_deg = 25.0;
  double elevation_jitter_deg = 10.0;
  double azimuth_jitter_deg = 3.0;
  double radius_factor = 2.8;
  double marker_scale_lo = 0.28;
  double marker_scale_hi = 0.42;
};

struct TrainArgs {
  std::string workdir = ".";
  std::string dataset;
  std::string out;
  std::string config_file;
  std::string stage = "1";  // 1 | 2 | all
  std::string checkpoint;   // stage-1 checkpoint, required for --stage 2
  std::uint64_t seed = 0;
  int iters1 = 4000;
  int iters2 = 1500;
  int batch = 4;
  double lr = 1e-2;
  double momentum = 0.0005;
  bool probabilistic = true;
  double w_r = 1.0, w_t = 1.0, w_d = 1.0, w_pcl = 1.0, w_delta = 1.0, w_scale = 0.2;
  int support_size = 512;
  int min_gap = 1;
  int scale_warmup = 500;
  int input_min = 256, input_max = 1024;
};

struct EvalArgs {
  std::string workdir = ".";
  std::string dataset;
  std::string checkpoint;
  std::string out;
  std::string config_file;
  std::string eval_split = "test";
  std::string tg_split = "train";
  bool oracle = false;
  bool csv = false;
  bool disallow_overlap = false;
  double tau = -1.0;
  bool smooth = true;
  int leave_out_m = 1024;
  int frames_per_seq = 6;
  double ap_ec_threshold = 0.5;
  std::uint64_t seed = 0;
};

struct AugmentArgs {
  std::string workdir = ".";
  std::string dataset;
  std::string out;
  std::string config_file;
  std::string depth_source = "gt";  // gt | pred
  std::string checkpoint;           // required for --depth-source pred
  int per_frame = 1;
  std::uint64_t seed = 0;
  double rot_deg = 10.0;
  double lateral_frac = 0.05;  // of the orbit radius
  double forward_frac = 0.05;
};

int run_generate(const GenerateArgs& args);
int run_train(const TrainArgs& args);
int run_eval(const EvalArgs& args);
int run_augment(const AugmentArgs& args);

/// Full argv entry point (subcommand parsing + config-file merge).
int dispatch(int argc, const char* const* argv);

}  // namespace lookaround::cli
