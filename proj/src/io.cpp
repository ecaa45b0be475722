#include "lookaround/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lookaround/errors.hpp"

namespace lookaround::io {

namespace {

constexpr std::uint32_t kFlagSigma = 1u;
constexpr std::uint32_t kFlagMask = 2u;

void append_plane_f32(std::string& out, const std::vector<float>& plane) {
  const char* p = reinterpret_cast<const char*>(plane.data());
  out.append(p, p + plane.size() * sizeof(float));
}

std::vector<float> read_plane_f32(std::istream& in, std::size_t n, const char* what) {
  std::vector<float> plane(n);
  in.read(reinterpret_cast<char*>(plane.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw IoError(std::string("dmap: truncated ") + what + " plane");
  return plane;
}

}  // namespace

void write_dmap(const std::filesystem::path& path, const DepthMap& map) {
  if (map.width <= 0 || map.height <= 0) throw ContractViolation("dmap: empty map");
  const std::size_t n = map.pixel_count();

  std::uint32_t flags = kFlagMask;
  if (map.has_sigma()) flags |= kFlagSigma;

  std::string buf;
  buf.reserve(16 + n * sizeof(float) * 3);
  buf.append("DMAP", 4);
  const std::uint32_t w = static_cast<std::uint32_t>(map.width);
  const std::uint32_t h = static_cast<std::uint32_t>(map.height);
  buf.append(reinterpret_cast<const char*>(&w), 4);
  buf.append(reinterpret_cast<const char*>(&h), 4);
  buf.append(reinterpret_cast<const char*>(&flags), 4);

  std::vector<float> depth(n), mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool ok = std::isfinite(map.values[i]);
    depth[i] = ok ? static_cast<float>(map.values[i])
                  : std::numeric_limits<float>::quiet_NaN();
    mask[i] = ok ? 1.0f : 0.0f;
  }
  append_plane_f32(buf, depth);
  if (map.has_sigma()) {
    std::vector<float> sig(n);
    for (std::size_t i = 0; i < n; ++i) sig[i] = static_cast<float>(map.sigma[i]);
    append_plane_f32(buf, sig);
  }
  append_plane_f32(buf, mask);

  write_file_atomic(path, buf);
}

DepthMap read_dmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("dmap: cannot open " + path.string());

  char magic[4];
  std::uint32_t w = 0, h = 0, flags = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&flags), 4);
  if (!in || std::memcmp(magic, "DMAP", 4) != 0)
    throw IoError("dmap: bad header in " + path.string());
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
    throw IoError("dmap: implausible dimensions in " + path.string());

  const std::size_t n = static_cast<std::size_t>(w) * h;
  DepthMap map(static_cast<int>(w), static_cast<int>(h));
  const std::vector<float> depth = read_plane_f32(in, n, "depth");
  std::vector<float> sig;
  if (flags & kFlagSigma) sig = read_plane_f32(in, n, "sigma");
  std::vector<float> mask;
  if (flags & kFlagMask) mask = read_plane_f32(in, n, "mask");

  for (std::size_t i = 0; i < n; ++i) {
    const bool ok = (mask.empty() || mask[i] != 0.0f) && std::isfinite(depth[i]);
    map.values[i] = ok ? static_cast<double>(depth[i]) : DepthMap::invalid_depth();
  }
  if (!sig.empty()) {
    map.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) map.sigma[i] = static_cast<double>(sig[i]);
  }
  return map;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::string& scalar_name) {
  std::ostringstream out;
  out.precision(17);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_confidence()) out << "property double " << scalar_name << "\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << p.x() << " " << p.y() << " " << p.z();
    if (cloud.has_confidence()) out << " " << cloud.confidence[i];
    out << "\n";
  }
  write_file_atomic(path, out.str());
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("ply: cannot open " + path.string());

  std::string line;
  std::size_t n_vertices = 0;
  int n_props = 0;
  bool header_done = false;
  if (!std::getline(in, line) || line != "ply") throw IoError("ply: bad magic");
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "element") {
      std::string what;
      ls >> what >> n_vertices;
      if (what != "vertex") throw IoError("ply: unsupported element " + what);
    } else if (tok == "property") {
      ++n_props;
    } else if (tok == "end_header") {
      header_done = true;
      break;
    } else if (tok == "format" && line.find("ascii") == std::string::npos) {
      throw IoError("ply: only ascii supported");
    }
  }
  if (!header_done) throw IoError("ply: missing end_header");
  if (n_props != 3 && n_props != 4) throw IoError("ply: expected 3 or 4 vertex properties");

  PointCloud cloud;
  cloud.points.reserve(n_vertices);
  for (std::size_t i = 0; i < n_vertices; ++i) {
    double x, y, z, c;
    if (!(in >> x >> y >> z)) throw IoError("ply: truncated vertex data");
    if (n_props == 4) {
      if (!(in >> c)) throw IoError("ply: truncated vertex data");
      cloud.confidence.push_back(c);
    }
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

nlohmann::json pose_to_json(const RigidPose& pose) {
  const Quat& q = pose.rotation.quat();
  return nlohmann::json{{"q", {q.w(), q.x(), q.y(), q.z()}},
                        {"t", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

RigidPose pose_from_json(const nlohmann::json& j) {
  const auto& q = j.at("q");
  const auto& t = j.at("t");
  RigidPose pose;
  pose.rotation = Rotation(Quat(q.at(0).get<double>(), q.at(1).get<double>(),
                                q.at(2).get<double>(), q.at(3).get<double>()));
  pose.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  return pose;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("json parse error in " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace lookaround::io
