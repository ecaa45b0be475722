#include "lookaround/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lookaround/errors.hpp"
#include "lookaround/io.hpp"

namespace lookaround::checkpoint {

using nlohmann::json;

models::VpModel Checkpoint::vp_model() const { return models::VpModel::make(descriptor_dim); }

models::DepthModel Checkpoint::depth_model() const {
  return models::DepthModel::make(descriptor_dim, depth_width, depth_height);
}

namespace {

void describe_store(json& tensors, const learn::ParamStore& store, const std::string& group) {
  for (int i = 0; i < store.count(); ++i) {
    const learn::Tensor& t = store.tensor(i);
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"group", group}});
  }
}

void append_store(std::string& blob, const learn::ParamStore& store) {
  for (int i = 0; i < store.count(); ++i) {
    const learn::Tensor& t = store.tensor(i);
    const char* p = reinterpret_cast<const char*>(t.data.data());
    blob.append(p, p + t.data.size() * sizeof(double));
  }
}

}  // namespace

void save(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header;
  header["schema"] = "lookaround-checkpoint/1";
  header["stage"] = ckpt.stage;
  header["descriptor_dim"] = ckpt.descriptor_dim;
  header["depth_width"] = ckpt.depth_width;
  header["depth_height"] = ckpt.depth_height;
  header["probabilistic"] = ckpt.probabilistic;
  header["sequence_ids"] = ckpt.sequence_ids;
  header["lambda_hat"] = ckpt.lambda_hat;
  if (ckpt.pcl) {
    header["support_size"] = ckpt.pcl->support_size;
    header["point_feature_dim"] = ckpt.pcl->point_feature_dim;
  }
  json tensors = json::array();
  describe_store(tensors, ckpt.stage1_params, "stage1");
  if (ckpt.pcl) describe_store(tensors, ckpt.pcl->params, "pcl");
  header["tensors"] = std::move(tensors);

  std::string blob = header.dump();
  const std::uint64_t header_len = blob.size();
  std::string out;
  out.append("LKCP", 4);
  out.append(reinterpret_cast<const char*>(&header_len), 8);
  out.append(blob);
  append_store(out, ckpt.stage1_params);
  if (ckpt.pcl) append_store(out, ckpt.pcl->params);

  io::write_file_atomic(path, out);
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());

  char magic[4];
  std::uint64_t header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&header_len), 8);
  if (!in || std::memcmp(magic, "LKCP", 4) != 0)
    throw IoError("checkpoint: bad container header");
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("checkpoint: truncated header");

  json header;
  try {
    header = json::parse(header_str);
  } catch (const std::exception& e) {
    throw IoError(std::string("checkpoint: header parse error: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.stage = header.at("stage");
  ckpt.descriptor_dim = header.at("descriptor_dim");
  ckpt.depth_width = header.at("depth_width");
  ckpt.depth_height = header.at("depth_height");
  ckpt.probabilistic = header.at("probabilistic");
  ckpt.sequence_ids = header.at("sequence_ids").get<std::vector<std::string>>();
  ckpt.lambda_hat = header.at("lambda_hat").get<std::vector<double>>();

  if (header.contains("support_size")) {
    ckpt.pcl = completion::PointMlpParams::make(header.at("support_size"),
                                                header.at("point_feature_dim"), 0);
  }

  for (const json& tj : header.at("tensors")) {
    const std::string name = tj.at("name");
    const int rows = tj.at("rows");
    const int cols = tj.at("cols");
    const std::string group = tj.at("group");
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated tensor " + name);
    learn::ParamStore& store = group == "pcl" ? ckpt.pcl->params : ckpt.stage1_params;
    if (store.has(name))
      store.get(name).data = std::move(data);  // pcl store pre-built by make()
    else
      store.add(name, rows, cols, std::move(data));
  }
  return ckpt;
}

}  // namespace lookaround::checkpoint
