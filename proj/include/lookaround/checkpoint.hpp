#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lookaround/completion.hpp"
#include "lookaround/learn.hpp"

namespace lookaround::checkpoint {

/// Trained state: stage-1 predictors, per-sequence scale estimates, and the
/// completion network once stage 2 has run. Serialized as a "LKCP" container:
/// magic, u64 header length, JSON header (shapes + config), then the tensor
/// blobs as little-endian float64 in header order.
struct Checkpoint {
  int stage = 1;
  int descriptor_dim = 0;
  int depth_width = 0;
  int depth_height = 0;
  bool probabilistic = true;
  learn::ParamStore stage1_params;  // vp.* / depth.*
  std::vector<std::string> sequence_ids;
  std::vector<double> lambda_hat;
  std::optional<completion::PointMlpParams> pcl;

  models::VpModel vp_model() const;
  models::DepthModel depth_model() const;
};

void save(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load(const std::filesystem::path& path);

}  // namespace lookaround::checkpoint
