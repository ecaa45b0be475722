#include <nlohmann/json.hpp>

#include "lookaround/errors.hpp"
#include "lookaround/io.hpp"
#include "lookaround/rng.hpp"
#include "lookaround/synth.hpp"
#include "lookaround/threads.hpp"

#include <algorithm>
#include <numeric>

namespace lookaround::synth {

using nlohmann::json;

namespace {

json calib_to_json(const Calibration& k) {
  return json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
              {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Calibration calib_from_json(const json& j) {
  return Calibration(j.at("fx"), j.at("fy"), j.at("cx"), j.at("cy"), j.at("width"),
                     j.at("height"));
}

json lobe_to_json(const Lobe& l) {
  return json{{"e1", l.e1},
              {"e2", l.e2},
              {"half_axes", {l.half_axes.x(), l.half_axes.y(), l.half_axes.z()}},
              {"center", {l.center.x(), l.center.y(), l.center.z()}}};
}

Lobe lobe_from_json(const json& j) {
  Lobe l;
  l.e1 = j.at("e1");
  l.e2 = j.at("e2");
  const auto& h = j.at("half_axes");
  const auto& c = j.at("center");
  l.half_axes = Vec3(h.at(0), h.at(1), h.at(2));
  l.center = Vec3(c.at(0), c.at(1), c.at(2));
  return l;
}

std::string frame_file(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d.dmap", index);
  return buf;
}

}  // namespace

Dataset generate_dataset(std::uint64_t seed, const GenerateConfig& config) {
  if (config.sequences < 1) throw ConfigError("generate_dataset: need at least 1 sequence");
  if (config.test_fraction < 0.0 || config.test_fraction >= 1.0)
    throw ConfigError("generate_dataset: test_fraction must be in [0, 1)");

  const auto shapes = generate_category(seed, config.sequences, config.category);

  Dataset ds;
  ds.seed = seed;
  ds.calibration = config.calibration;
  ds.sequences.resize(config.sequences);

  const int n = config.sequences;
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "seq_%03d", i);
    Sequence seq = render_sequence(shapes[i], config.orbit, config.calibration,
                                   mix64(seed ^ (0x5eedull + i)), id);
    simulate_sfm(seq, config.noise, config.modality, mix64(seed ^ (0xc0ffeeull + i)));
    ds.sequences[i] = std::move(seq);
  }

  std::vector<int> order(config.sequences);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, 51);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_test = static_cast<int>(std::lround(config.test_fraction * config.sequences));
  ds.test_ids.assign(order.end() - n_test, order.end());
  ds.train_ids.assign(order.begin(), order.end() - n_test);
  std::sort(ds.train_ids.begin(), ds.train_ids.end());
  std::sort(ds.test_ids.begin(), ds.test_ids.end());
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json root;
  root["schema"] = "lookaround-dataset/1";
  root["seed"] = dataset.seed;
  root["calibration"] = calib_to_json(dataset.calibration);
  root["train_ids"] = dataset.train_ids;
  root["test_ids"] = dataset.test_ids;

  json seq_list = json::array();
  for (const Sequence& seq : dataset.sequences) {
    seq_list.push_back({{"id", seq.id}, {"modality", to_string(seq.modality)}});

    const auto seq_dir = dir / seq.id;
    std::filesystem::create_directories(seq_dir, ec);
    if (ec) throw IoError("cannot create " + seq_dir.string());

    json manifest;
    manifest["id"] = seq.id;
    manifest["modality"] = to_string(seq.modality);
    manifest["augmented"] = false;
    manifest["calibration"] = calib_to_json(dataset.calibration);
    json frames = json::array();
    for (const Frame& f : seq.frames) {
      std::vector<double> desc(f.descriptor.data(), f.descriptor.data() + f.descriptor.size());
      frames.push_back({{"index", f.index},
                        {"file", frame_file(f.index)},
                        {"pose", io::pose_to_json(f.observed_pose)},
                        {"descriptor", desc}});
      io::write_dmap(seq_dir / frame_file(f.index), f.depth);
    }
    manifest["frames"] = std::move(frames);
    io::write_json_atomic(seq_dir / "manifest.json", manifest);

    json gt;
    gt["alignment"] = io::pose_to_json(seq.gt_alignment);
    gt["lambda"] = seq.gt_scale;
    gt["orbit_radius"] = seq.orbit_radius;
    gt["shape"] = {{"body", lobe_to_json(seq.shape.body)},
                   {"marker", lobe_to_json(seq.shape.marker)},
                   {"sample_budget", seq.shape.sample_budget}};
    json gt_frames = json::array();
    for (const Frame& f : seq.frames)
      gt_frames.push_back({{"index", f.index},
                           {"pose", io::pose_to_json(f.gt_global_pose)},
                           {"corrupted", f.pose_corrupted}});
    gt["frames"] = std::move(gt_frames);
    io::write_json_atomic(seq_dir / "gt.json", gt);
  }
  root["sequences"] = std::move(seq_list);
  io::write_json_atomic(dir / "dataset.json", root);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const json root = io::read_json(dir / "dataset.json");
  Dataset ds;
  ds.seed = root.at("seed").get<std::uint64_t>();
  ds.calibration = calib_from_json(root.at("calibration"));
  ds.train_ids = root.at("train_ids").get<std::vector<int>>();
  ds.test_ids = root.at("test_ids").get<std::vector<int>>();

  for (const json& entry : root.at("sequences")) {
    const auto seq_dir = dir / entry.at("id").get<std::string>();
    const json manifest = io::read_json(seq_dir / "manifest.json");
    const json gt = io::read_json(seq_dir / "gt.json");

    Sequence seq;
    seq.id = manifest.at("id");
    seq.modality = modality_from_string(manifest.at("modality"));
    seq.gt_alignment = io::pose_from_json(gt.at("alignment"));
    seq.gt_scale = gt.at("lambda");
    seq.orbit_radius = gt.at("orbit_radius");
    seq.shape.body = lobe_from_json(gt.at("shape").at("body"));
    seq.shape.marker = lobe_from_json(gt.at("shape").at("marker"));
    seq.shape.sample_budget = gt.at("shape").at("sample_budget");

    const json& frames = manifest.at("frames");
    const json& gt_frames = gt.at("frames");
    if (frames.size() != gt_frames.size())
      throw IoError("dataset: manifest/gt frame count mismatch in " + seq.id);
    seq.frames.resize(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      Frame& f = seq.frames[i];
      f.index = frames[i].at("index");
      f.calibration = ds.calibration;
      f.observed_pose = io::pose_from_json(frames[i].at("pose"));
      f.gt_global_pose = io::pose_from_json(gt_frames[i].at("pose"));
      f.pose_corrupted = gt_frames[i].at("corrupted");
      const auto desc = frames[i].at("descriptor").get<std::vector<double>>();
      f.descriptor = Eigen::Map<const Eigen::VectorXd>(desc.data(),
                                                       static_cast<Eigen::Index>(desc.size()));
      f.depth = io::read_dmap(seq_dir / frames[i].at("file").get<std::string>());
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace lookaround::synth
