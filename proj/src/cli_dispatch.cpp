#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lookaround/cli.hpp"
#include "lookaround/errors.hpp"
#include "lookaround/io.hpp"

namespace lookaround::cli {

namespace {

using nlohmann::json;

// Config-file semantics: values from --config fill in anything the command
// line did not set explicitly; explicit flags always win.
template <typename T>
void merge(const json& cfg, const char* key, const CLI::App& app, const std::string& flag,
           T& value) {
  if (app.count(flag) > 0) return;
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  return io::read_json(path);
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"lookaround: multi-view 3D category learning toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  GenerateArgs g;
  TrainArgs t;
  EvalArgs e;
  AugmentArgs a;

  CLI::App* gen = app.add_subcommand("generate", "Generate a synthetic multi-view dataset");
  gen->add_option("--workdir", g.workdir, "Base directory for relative paths");
  gen->add_option("--out", g.out, "Output dataset directory")->required();
  gen->add_option("--config", g.config_file, "JSON config merged under explicit flags");
  gen->add_option("--seed", g.seed, "RNG seed");
  gen->add_option("--sequences", g.sequences, "Number of sequences");
  gen->add_option("--frames", g.frames, "Frames per sequence");
  gen->add_option("--modality", g.modality, "sfm | kf");
  gen->add_option("--test-fraction", g.test_fraction, "Whole sequences held out for testing");
  gen->add_option("--width", g.width, "Depth map width");
  gen->add_option("--height", g.height, "Depth map height");
  gen->add_option("--depth-noise", g.depth_noise, "Depth noise sigma, fraction of orbit radius");
  gen->add_option("--outlier-frac", g.outlier_fraction, "Per-pixel outlier fraction");
  gen->add_option("--hole-frac", g.hole_fraction, "Missing-depth blob fraction");
  gen->add_option("--pose-outlier-frames", g.pose_outlier_frames,
                  "Fraction of frames with a grossly wrong stored pose");
  gen->add_flag("--no-noise", g.no_noise, "Disable all depth degradation");
  gen->add_flag("--identity-alignment", g.identity_alignment,
                "Keep the hidden per-sequence alignment at identity");
  gen->add_option("--fixed-lambda", g.fixed_lambda, "Pin the hidden scale (0 = draw)");
  gen->add_option("--elevation", g.elevation_deg, "Orbit elevation, degrees");
  gen->add_option("--elevation-jitter", g.elevation_jitter_deg, "Elevation jitter, degrees");
  gen->add_option("--azimuth-jitter", g.azimuth_jitter_deg, "Azimuth jitter, degrees");
  gen->add_option("--radius-factor", g.radius_factor, "Orbit radius / bounding radius");
  gen->add_option("--marker-scale-lo", g.marker_scale_lo, "Marker size range, lower");
  gen->add_option("--marker-scale-hi", g.marker_scale_hi, "Marker size range, upper");

  CLI::App* tr = app.add_subcommand("train", "Train the predictors on a dataset");
  tr->add_option("--workdir", t.workdir, "Base directory for relative paths");
  tr->add_option("--dataset", t.dataset, "Dataset directory")->required();
  tr->add_option("--out", t.out, "Output directory (checkpoint + logs)")->required();
  tr->add_option("--config", t.config_file, "JSON config merged under explicit flags");
  tr->add_option("--stage", t.stage, "1 | 2 | all");
  tr->add_option("--checkpoint", t.checkpoint, "Stage-1 checkpoint (for --stage 2)");
  tr->add_option("--seed", t.seed, "RNG seed");
  tr->add_option("--iters1", t.iters1, "Stage-1 iterations");
  tr->add_option("--iters2", t.iters2, "Stage-2 iterations");
  tr->add_option("--batch", t.batch, "Pairs per iteration");
  tr->add_option("--lr", t.lr, "Initial learning rate");
  tr->add_option("--momentum", t.momentum, "SGD momentum");
  tr->add_flag("--prob,!--no-prob", t.probabilistic,
               "Probabilistic (NLL) losses vs plain residuals");
  tr->add_option("--w-r", t.w_r, "Rotation loss weight");
  tr->add_option("--w-t", t.w_t, "Translation loss weight");
  tr->add_option("--w-d", t.w_d, "Depth loss weight");
  tr->add_option("--w-pcl", t.w_pcl, "Support-fitting loss weight");
  tr->add_option("--w-delta", t.w_delta, "Occupancy loss weight");
  tr->add_option("--w-scale", t.w_scale, "Scale-consistency weight (sfm)");
  tr->add_option("--support-size", t.support_size, "Completion support points M");
  tr->add_option("--min-gap", t.min_gap, "Minimum Siamese pair gap");
  tr->add_option("--scale-warmup", t.scale_warmup, "Iterations before lambda tracking starts");
  tr->add_option("--input-min", t.input_min, "Leave-out lower bound (stage 2)");
  tr->add_option("--input-max", t.input_max, "Leave-out upper bound (stage 2)");

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint and write a report");
  ev->add_option("--workdir", e.workdir, "Base directory for relative paths");
  ev->add_option("--dataset", e.dataset, "Dataset directory")->required();
  ev->add_option("--checkpoint", e.checkpoint, "Checkpoint file");
  ev->add_option("--out", e.out, "Output directory")->required();
  ev->add_option("--config", e.config_file, "JSON config merged under explicit flags");
  ev->add_option("--eval-split", e.eval_split, "test | train | all");
  ev->add_option("--tg-split", e.tg_split, "Split the global alignment is fitted on");
  ev->add_flag("--oracle", e.oracle, "Feed hidden ground truth back as predictions");
  ev->add_flag("--csv", e.csv, "Also write per-record and per-pair CSVs");
  ev->add_flag("--disallow-overlap", e.disallow_overlap,
               "Fail when fit and eval splits share sequences");
  ev->add_option("--tau", e.tau, "Occupancy threshold (< 0: 0.5/M)");
  ev->add_flag("--smooth,!--no-smooth", e.smooth, "Smooth the completed cloud");
  ev->add_option("--leave-out-m", e.leave_out_m, "Completion input size at test time");
  ev->add_option("--frames-per-seq", e.frames_per_seq, "Frames per sequence for shape metrics");
  ev->add_option("--ap-ec-threshold", e.ap_ec_threshold, "Camera-center AP threshold");
  ev->add_option("--seed", e.seed, "RNG seed");

  CLI::App* au = app.add_subcommand("augment", "Write a warped-viewpoint dataset");
  au->add_option("--workdir", a.workdir, "Base directory for relative paths");
  au->add_option("--dataset", a.dataset, "Dataset directory")->required();
  au->add_option("--out", a.out, "Output dataset directory")->required();
  au->add_option("--config", a.config_file, "JSON config merged under explicit flags");
  au->add_option("--depth-source", a.depth_source, "gt | pred");
  au->add_option("--checkpoint", a.checkpoint, "Checkpoint (for --depth-source pred)");
  au->add_option("--per-frame", a.per_frame, "Augmented samples per input frame");
  au->add_option("--seed", a.seed, "RNG seed");
  au->add_option("--rot-deg", a.rot_deg, "Max perturbation rotation, degrees");
  au->add_option("--lateral-frac", a.lateral_frac, "Lateral bound, fraction of orbit radius");
  au->add_option("--forward-frac", a.forward_frac, "Forward bias, fraction of orbit radius");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << "\n";
    return kExitIo;
  }

  try {
    if (gen->parsed()) {
      const json cfg = load_config(g.config_file);
      merge(cfg, "seed", *gen, "--seed", g.seed);
      merge(cfg, "sequences", *gen, "--sequences", g.sequences);
      merge(cfg, "frames", *gen, "--frames", g.frames);
      merge(cfg, "modality", *gen, "--modality", g.modality);
      merge(cfg, "test_fraction", *gen, "--test-fraction", g.test_fraction);
      merge(cfg, "width", *gen, "--width", g.width);
      merge(cfg, "height", *gen, "--height", g.height);
      merge(cfg, "depth_noise", *gen, "--depth-noise", g.depth_noise);
      merge(cfg, "outlier_fraction", *gen, "--outlier-frac", g.outlier_fraction);
      merge(cfg, "hole_fraction", *gen, "--hole-frac", g.hole_fraction);
      merge(cfg, "pose_outlier_frames", *gen, "--pose-outlier-frames", g.pose_outlier_frames);
      merge(cfg, "elevation_deg", *gen, "--elevation", g.elevation_deg);
      merge(cfg, "radius_factor", *gen, "--radius-factor", g.radius_factor);
      return run_generate(g);
    }
    if (tr->parsed()) {
      const json cfg = load_config(t.config_file);
      merge(cfg, "seed", *tr, "--seed", t.seed);
      merge(cfg, "stage", *tr, "--stage", t.stage);
      merge(cfg, "iters1", *tr, "--iters1", t.iters1);
      merge(cfg, "iters2", *tr, "--iters2", t.iters2);
      merge(cfg, "batch", *tr, "--batch", t.batch);
      merge(cfg, "lr", *tr, "--lr", t.lr);
      merge(cfg, "momentum", *tr, "--momentum", t.momentum);
      merge(cfg, "support_size", *tr, "--support-size", t.support_size);
      merge(cfg, "min_gap", *tr, "--min-gap", t.min_gap);
      return run_train(t);
    }
    if (ev->parsed()) {
      const json cfg = load_config(e.config_file);
      merge(cfg, "seed", *ev, "--seed", e.seed);
      merge(cfg, "eval_split", *ev, "--eval-split", e.eval_split);
      merge(cfg, "tg_split", *ev, "--tg-split", e.tg_split);
      merge(cfg, "tau", *ev, "--tau", e.tau);
      merge(cfg, "leave_out_m", *ev, "--leave-out-m", e.leave_out_m);
      return run_eval(e);
    }
    if (au->parsed()) {
      const json cfg = load_config(a.config_file);
      merge(cfg, "seed", *au, "--seed", a.seed);
      merge(cfg, "per_frame", *au, "--per-frame", a.per_frame);
      merge(cfg, "depth_source", *au, "--depth-source", a.depth_source);
      return run_augment(a);
    }
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace lookaround::cli
