#include "lookaround/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>

#include <nlohmann/json.hpp>

#include "lookaround/augment.hpp"
#include "lookaround/checkpoint.hpp"
#include "lookaround/errors.hpp"
#include "lookaround/io.hpp"
#include "lookaround/learn.hpp"
#include "lookaround/pipeline.hpp"
#include "lookaround/rng.hpp"
#include "lookaround/synth.hpp"

namespace lookaround::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const std::string& workdir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p : fs::path(workdir) / p;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config,
                    std::uint64_t seed, const json& inputs, const json& outputs,
                    double wall_clock) {
  json m;
  m["schema"] = "lookaround-run-manifest/1";
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["tool_version"] = kToolVersion;
  m["wall_clock_sec"] = wall_clock;
  io::write_json_atomic(out_dir / "run_manifest.json", m);
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

json generate_args_to_json(const GenerateArgs& a) {
  return json{{"seed", a.seed},
              {"sequences", a.sequences},
              {"frames", a.frames},
              {"modality", a.modality},
              {"test_fraction", a.test_fraction},
              {"width", a.width},
              {"height", a.height},
              {"depth_noise", a.depth_noise},
              {"outlier_fraction", a.outlier_fraction},
              {"hole_fraction", a.hole_fraction},
              {"pose_outlier_frames", a.pose_outlier_frames},
              {"no_noise", a.no_noise},
              {"identity_alignment", a.identity_alignment},
              {"fixed_lambda", a.fixed_lambda},
              {"elevation_deg", a.elevation_deg},
              {"elevation_jitter_deg", a.elevation_jitter_deg},
              {"azimuth_jitter_deg", a.azimuth_jitter_deg},
              {"radius_factor", a.radius_factor},
              {"marker_scale_lo", a.marker_scale_lo},
              {"marker_scale_hi", a.marker_scale_hi}};
}

synth::GenerateConfig to_generate_config(const GenerateArgs& a) {
  if (a.sequences < 1) throw ConfigError("--sequences must be >= 1");
  if (a.frames < 2) throw ConfigError("--frames must be >= 2");

  synth::GenerateConfig cfg;
  cfg.sequences = a.sequences;
  cfg.test_fraction = a.test_fraction;
  cfg.modality = synth::modality_from_string(a.modality);
  cfg.orbit.frames = a.frames;
  cfg.orbit.elevation_deg = a.elevation_deg;
  cfg.orbit.elevation_jitter_deg = a.elevation_jitter_deg;
  cfg.orbit.azimuth_jitter_deg = a.azimuth_jitter_deg;
  cfg.orbit.radius_factor = a.radius_factor;
  cfg.category.marker_scale = synth::Range(a.marker_scale_lo, a.marker_scale_hi);
  cfg.calibration = Calibration(1.2 * a.width, 1.2 * a.height, a.width / 2.0, a.height / 2.0,
                                a.width, a.height);
  if (a.no_noise) {
    cfg.noise = synth::NoiseConfig::none();
  } else {
    cfg.noise.depth_sigma_frac = a.depth_noise;
    cfg.noise.outlier_fraction = a.outlier_fraction;
    cfg.noise.hole_fraction = a.hole_fraction;
  }
  cfg.noise.pose_outlier_frame_fraction = a.pose_outlier_frames;
  cfg.noise.identity_alignment = a.identity_alignment;
  cfg.noise.fixed_lambda = a.fixed_lambda;
  return cfg;
}

learn::TrainConfig to_train_config(const TrainArgs& a) {
  learn::TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.probabilistic = a.probabilistic;
  cfg.w_r = a.w_r;
  cfg.w_t = a.w_t;
  cfg.w_d = a.w_d;
  cfg.w_pcl = a.w_pcl;
  cfg.w_delta = a.w_delta;
  cfg.w_scale = a.w_scale;
  cfg.support_size = a.support_size;
  cfg.min_gap = a.min_gap;
  cfg.scale_warmup_iters = a.scale_warmup;
  cfg.input_min = a.input_min;
  cfg.input_max = a.input_max;
  if (cfg.learning_rate <= 0.0) throw ConfigError("--lr must be positive");
  if (cfg.batch_size < 1) throw ConfigError("--batch must be >= 1");
  return cfg;
}

}  // namespace

int run_generate(const GenerateArgs& args) {
  return guarded([&] {
    if (args.out.empty()) throw ConfigError("generate: --out is required");
    Stopwatch timer;
    const synth::GenerateConfig cfg = to_generate_config(args);
    const synth::Dataset ds = synth::generate_dataset(args.seed, cfg);
    const fs::path out = resolve(args.workdir, args.out);
    synth::write_dataset(out, ds);
    write_manifest(out, "generate", generate_args_to_json(args), args.seed, json::array(),
                   json{{"dataset", out.string()}}, timer.seconds());
    std::cout << "generated " << ds.sequences.size() << " sequences ("
              << ds.sequences[0].frames.size() << " frames each) into " << out.string() << "\n";
  });
}

int run_train(const TrainArgs& args) {
  return guarded([&] {
    if (args.dataset.empty() || args.out.empty())
      throw ConfigError("train: --dataset and --out are required");
    if (args.stage != "1" && args.stage != "2" && args.stage != "all")
      throw ConfigError("train: --stage must be 1, 2 or all");
    if (args.stage == "2" && args.checkpoint.empty())
      throw ConfigError("train: --stage 2 needs a stage-1 --checkpoint");

    Stopwatch timer;
    const fs::path ds_path = resolve(args.workdir, args.dataset);
    if (!fs::exists(ds_path / "dataset.json"))
      throw ConfigError("train: dataset not found at " + ds_path.string());
    const synth::Dataset ds = synth::load_dataset(ds_path);
    const learn::TrainConfig base_cfg = to_train_config(args);

    const fs::path out = resolve(args.workdir, args.out);
    fs::create_directories(out);

    checkpoint::Checkpoint ckpt;
    std::vector<std::string> seq_ids;
    for (const auto& s : ds.sequences) seq_ids.push_back(s.id);

    learn::Stage1Result stage1;
    if (args.stage == "1" || args.stage == "all") {
      learn::TrainConfig cfg = base_cfg;
      cfg.iterations = args.iters1;
      stage1 = learn::train_stage1(ds, cfg);
      io::write_file_atomic(out / "train_log_stage1.csv", learn::log_to_csv(stage1.log, seq_ids));
    } else {
      const checkpoint::Checkpoint prev = checkpoint::load(resolve(args.workdir, args.checkpoint));
      stage1.vp = prev.vp_model();
      stage1.depth_model = prev.depth_model();
      for (int i = 0; i < prev.stage1_params.count(); ++i) {
        const learn::Tensor& t = prev.stage1_params.tensor(i);
        stage1.params.add(t.name, t.rows, t.cols, t.data);
      }
      stage1.lambda_hat = prev.lambda_hat;
      if (stage1.lambda_hat.size() != ds.sequences.size())
        throw ConfigError("train: checkpoint does not match the dataset");
    }

    ckpt.stage = 1;
    ckpt.descriptor_dim = stage1.vp.spec.input;
    ckpt.depth_width = stage1.depth_model.width;
    ckpt.depth_height = stage1.depth_model.height;
    ckpt.probabilistic = base_cfg.probabilistic;
    ckpt.sequence_ids = seq_ids;
    ckpt.lambda_hat = stage1.lambda_hat;
    for (int i = 0; i < stage1.params.count(); ++i) {
      const learn::Tensor& t = stage1.params.tensor(i);
      ckpt.stage1_params.add(t.name, t.rows, t.cols, t.data);
    }

    if (args.stage == "2" || args.stage == "all") {
      learn::TrainConfig cfg = base_cfg;
      cfg.iterations = args.iters2;
      const learn::Stage2Result stage2 = learn::train_stage2(ds, stage1, cfg);
      io::write_file_atomic(out / "train_log_stage2.csv", learn::log_to_csv(stage2.log, {}));
      ckpt.stage = 2;
      ckpt.pcl = stage2.pcl;
    }

    const fs::path ckpt_path = out / "checkpoint.lkcp";
    checkpoint::save(ckpt_path, ckpt);
    write_manifest(out, "train",
                   json{{"stage", args.stage},
                        {"iters1", args.iters1},
                        {"iters2", args.iters2},
                        {"batch", args.batch},
                        {"lr", args.lr},
                        {"momentum", args.momentum},
                        {"probabilistic", args.probabilistic},
                        {"weights",
                         {args.w_r, args.w_t, args.w_d, args.w_pcl, args.w_delta, args.w_scale}},
                        {"support_size", args.support_size},
                        {"min_gap", args.min_gap}},
                   args.seed, json{{"dataset", ds_path.string()}},
                   json{{"checkpoint", ckpt_path.string()}}, timer.seconds());
    std::cout << "trained stage " << args.stage << ", checkpoint at " << ckpt_path.string()
              << "\n";
  });
}

int run_eval(const EvalArgs& args) {
  return guarded([&] {
    if (args.dataset.empty() || args.out.empty())
      throw ConfigError("eval: --dataset and --out are required");
    if (!args.oracle && args.checkpoint.empty())
      throw ConfigError("eval: --checkpoint is required unless --oracle");

    Stopwatch timer;
    const fs::path ds_path = resolve(args.workdir, args.dataset);
    const synth::Dataset ds = synth::load_dataset(ds_path);

    pipeline::EvalOptions opt;
    opt.eval_split = args.eval_split;
    opt.tg_split = args.tg_split;
    opt.oracle = args.oracle;
    opt.tau = args.tau;
    opt.smooth = args.smooth;
    opt.leave_out_m = args.leave_out_m;
    opt.completion_frames_per_seq = args.frames_per_seq;
    opt.ap_ec_threshold = args.ap_ec_threshold;
    opt.seed = args.seed;

    if (args.disallow_overlap) {
      const auto a = args.eval_split, b = args.tg_split;
      if (a == b || a == "all" || b == "all")
        throw ConfigError("eval: --disallow-overlap forbids shared sequences between splits");
    }

    checkpoint::Checkpoint ckpt;
    if (!args.oracle) ckpt = checkpoint::load(resolve(args.workdir, args.checkpoint));

    const pipeline::EvalReport report =
        pipeline::evaluate(ds, args.oracle ? nullptr : &ckpt, opt);

    const fs::path out = resolve(args.workdir, args.out);
    fs::create_directories(out);
    io::write_json_atomic(out / "report.json", pipeline::report_to_json(report, opt));
    if (args.csv) {
      io::write_file_atomic(out / "records.csv", pipeline::records_to_csv(report.records));
      io::write_file_atomic(out / "pairs.csv", pipeline::pairs_to_csv(report.pairs));
    }
    write_manifest(out, "eval",
                   json{{"eval_split", args.eval_split},
                        {"tg_split", args.tg_split},
                        {"oracle", args.oracle},
                        {"csv", args.csv},
                        {"tau", args.tau},
                        {"smooth", args.smooth},
                        {"leave_out_m", args.leave_out_m}},
                   args.seed,
                   json{{"dataset", ds_path.string()}, {"checkpoint", args.checkpoint}},
                   json{{"report", (out / "report.json").string()}}, timer.seconds());
    std::cout << "eval: median e_R " << report.medians.e_r * 180.0 / M_PI << " deg, e_C "
              << report.medians.e_c << ", AP_eR " << report.ap_er << "\n";
  });
}

int run_augment(const AugmentArgs& args) {
  return guarded([&] {
    if (args.dataset.empty() || args.out.empty())
      throw ConfigError("augment: --dataset and --out are required");
    if (args.per_frame < 1) throw ConfigError("augment: --per-frame must be >= 1");
    if (args.depth_source != "gt" && args.depth_source != "pred")
      throw ConfigError("augment: --depth-source must be gt or pred");
    if (args.depth_source == "pred" && args.checkpoint.empty())
      throw ConfigError("augment: --depth-source pred needs --checkpoint");

    Stopwatch timer;
    const fs::path ds_path = resolve(args.workdir, args.dataset);
    synth::Dataset ds = synth::load_dataset(ds_path);

    checkpoint::Checkpoint ckpt;
    if (args.depth_source == "pred")
      ckpt = checkpoint::load(resolve(args.workdir, args.checkpoint));

    std::vector<double> hole_fractions;
    synth::Dataset out_ds;
    out_ds.calibration = ds.calibration;
    out_ds.seed = args.seed;
    out_ds.train_ids = ds.train_ids;
    out_ds.test_ids = ds.test_ids;

    for (std::size_t si = 0; si < ds.sequences.size(); ++si) {
      const synth::Sequence& seq = ds.sequences[si];
      synth::Sequence aug = seq;
      aug.frames.clear();

      augment::PerturbationConfig pcfg;
      pcfg.max_rotation_rad = args.rot_deg * M_PI / 180.0;
      pcfg.lateral_bound = args.lateral_frac * seq.orbit_radius;
      pcfg.forward_bias_mean = args.forward_frac * seq.orbit_radius;

      auto rng = make_rng(args.seed, 111, si);
      int new_index = 0;
      for (const synth::Frame& f : seq.frames) {
        DepthMap source = f.depth;
        if (args.depth_source == "pred") {
          // prediction is in canonical units; bring it back to the observed
          // scale of this sequence before warping
          const auto dp = ckpt.depth_model().predict(ckpt.stage1_params, f.descriptor);
          const double inv_lambda = 1.0 / ckpt.lambda_hat[si];
          source = dp.mean;
          for (double& v : source.values) v *= inv_lambda;
        }
        for (int r = 0; r < args.per_frame; ++r) {
          const RigidPose delta = augment::sample_perturbation(pcfg, rng);
          augment::WarpResult w = augment::dibr_warp(f, source, delta);
          w.frame.index = new_index++;
          const double holes =
              1.0 - static_cast<double>(w.frame.depth.valid_count()) /
                        static_cast<double>(w.frame.depth.pixel_count());
          hole_fractions.push_back(holes);
          aug.frames.push_back(std::move(w.frame));
        }
      }
      out_ds.sequences.push_back(std::move(aug));
    }

    const fs::path out = resolve(args.workdir, args.out);
    synth::write_dataset(out, out_ds);
    // tag every sequence manifest as augmented
    for (const synth::Sequence& seq : out_ds.sequences) {
      const fs::path mpath = out / seq.id / "manifest.json";
      json m = io::read_json(mpath);
      m["augmented"] = true;
      io::write_json_atomic(mpath, m);
    }

    json histogram = json::array();
    constexpr int kBins = 10;
    std::vector<int> bins(kBins, 0);
    double mean_holes = 0.0;
    for (double h : hole_fractions) {
      bins[std::min(kBins - 1, static_cast<int>(h * kBins))]++;
      mean_holes += h;
    }
    if (!hole_fractions.empty()) mean_holes /= hole_fractions.size();
    for (int b = 0; b < kBins; ++b)
      histogram.push_back({{"lo", b / double(kBins)}, {"hi", (b + 1) / double(kBins)},
                           {"count", bins[b]}});
    io::write_json_atomic(out / "augment_report.json",
                          json{{"schema", "lookaround-augment-report/1"},
                               {"mean_hole_fraction", mean_holes},
                               {"histogram", histogram},
                               {"depth_source", args.depth_source},
                               {"per_frame", args.per_frame}});

    write_manifest(out, "augment",
                   json{{"per_frame", args.per_frame},
                        {"depth_source", args.depth_source},
                        {"rot_deg", args.rot_deg},
                        {"lateral_frac", args.lateral_frac},
                        {"forward_frac", args.forward_frac}},
                   args.seed, json{{"dataset", ds_path.string()}},
                   json{{"dataset", out.string()}}, timer.seconds());
    std::cout << "augmented " << hole_fractions.size() << " frames, mean hole fraction "
              << mean_holes << "\n";
  });
}

}  // namespace lookaround::cli
