#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "lookaround/depthmap.hpp"
#include "lookaround/geometry.hpp"

namespace lookaround::io {

// DMAP: 16-byte header (magic "DMAP", u32 width, u32 height, u32 flags),
// then row-major little-endian float32 planes: depth, sigma when flags bit 0
// is set, and a 0/1 validity plane when flags bit 1 is set. Invalid pixels
// are additionally written as NaN so the mask and the payload agree.
void write_dmap(const std::filesystem::path& path, const DepthMap& map);
DepthMap read_dmap(const std::filesystem::path& path);

// ASCII PLY. "confidence" and "mass" are optional scalar vertex properties;
// mass rides in the confidence slot of PointCloud.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::string& scalar_name = "confidence");
PointCloud read_ply(const std::filesystem::path& path);

nlohmann::json pose_to_json(const RigidPose& pose);
RigidPose pose_from_json(const nlohmann::json& j);

/// Write via a temp file + rename so readers never observe partial content.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Write pretty-printed JSON atomically.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace lookaround::io
