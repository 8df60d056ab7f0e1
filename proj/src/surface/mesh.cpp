#include <cstdio>
#include <fstream>

#include "common/binary_io.hpp"
#include "tacsim/error.hpp"
#include "tacsim/surface.hpp"

namespace tacsim::surface {

HeightfieldMesh depth_to_mesh(const DepthMap& d) {
  if (d.width < 2 || d.height < 2) fail(ErrorKind::Validation, "depth map must be at least 2x2");
  if (d.values.size() != static_cast<std::size_t>(d.width) * d.height) {
    fail(ErrorKind::Validation, "depth map value count does not match its size");
  }
  HeightfieldMesh m;
  m.width = d.width;
  m.height = d.height;
  const std::size_t nv = d.values.size();
  m.vertices.resize(nv);
  m.uvs.resize(nv);
  m.normals.assign(nv, Vec3::Zero());
  for (std::uint32_t j = 0; j < d.height; ++j) {
    for (std::uint32_t i = 0; i < d.width; ++i) {
      const std::size_t v = j * d.width + i;
      m.vertices[v] = Vec3(i * d.pixel_pitch, j * d.pixel_pitch, -d.at(i, j));
      m.uvs[v] = Vec2(static_cast<double>(i) / (d.width - 1), static_cast<double>(j) / (d.height - 1));
    }
  }
  m.triangles.reserve(2 * static_cast<std::size_t>(d.width - 1) * (d.height - 1));
  for (std::uint32_t j = 0; j + 1 < d.height; ++j) {
    for (std::uint32_t i = 0; i + 1 < d.width; ++i) {
      const std::uint32_t v00 = j * d.width + i;
      const std::uint32_t v10 = v00 + 1;
      const std::uint32_t v01 = v00 + d.width;
      const std::uint32_t v11 = v01 + 1;
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
    }
  }
  // Unnormalized face normals weight each face by its area.
  for (const auto& t : m.triangles) {
    const Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
    for (auto v : t) m.normals[v] += n;
  }
  for (auto& n : m.normals) n.normalize();
  return m;
}

DepthMap quantize(const DepthMap& d) {
  DepthMap out = d;
  out.pixel_pitch = static_cast<float>(d.pixel_pitch);
  for (double& v : out.values) v = static_cast<float>(v);
  return out;
}

std::vector<std::uint8_t> encode_depth(const DepthMap& d) {
  if (d.values.size() != static_cast<std::size_t>(d.width) * d.height) {
    fail(ErrorKind::Validation, "depth map value count does not match its size");
  }
  detail::ByteWriter w;
  w.raw("DPTH", 4);
  w.put<std::uint32_t>(d.width);
  w.put<std::uint32_t>(d.height);
  w.put<float>(static_cast<float>(d.pixel_pitch));
  for (double v : d.values) w.put<float>(static_cast<float>(v));
  return w.take();
}

DepthMap decode_depth(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "DPTH file");
  r.expect_magic("DPTH");
  DepthMap d;
  d.width = r.get<std::uint32_t>();
  d.height = r.get<std::uint32_t>();
  d.pixel_pitch = r.get<float>();
  const std::size_t n = static_cast<std::size_t>(d.width) * d.height;
  if (n > r.remaining() / 4) fail(ErrorKind::Io, "DPTH file: truncated");
  d.values.resize(n);
  for (double& v : d.values) v = r.get<float>();
  r.expect_end();
  return d;
}

void save_depth(const std::filesystem::path& path, const DepthMap& d) {
  detail::write_file(path, encode_depth(d));
}

DepthMap load_depth(const std::filesystem::path& path) {
  return decode_depth(detail::read_file(path));
}

std::string mesh_to_obj(const HeightfieldMesh& m) {
  std::string out;
  out.reserve(m.vertices.size() * 96 + m.triangles.size() * 40);
  char line[160];
  for (const auto& v : m.vertices) {
    std::snprintf(line, sizeof line, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out += line;
  }
  for (const auto& t : m.uvs) {
    std::snprintf(line, sizeof line, "vt %.9g %.9g\n", t.x(), t.y());
    out += line;
  }
  for (const auto& n : m.normals) {
    std::snprintf(line, sizeof line, "vn %.9g %.9g %.9g\n", n.x(), n.y(), n.z());
    out += line;
  }
  for (const auto& t : m.triangles) {
    const auto a = t[0] + 1, b = t[1] + 1, c = t[2] + 1;
    std::snprintf(line, sizeof line, "f %u/%u/%u %u/%u/%u %u/%u/%u\n", a, a, a, b, b, b, c, c, c);
    out += line;
  }
  return out;
}

void save_obj(const std::filesystem::path& path, const HeightfieldMesh& m) {
  const std::string text = mesh_to_obj(m);
  detail::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace tacsim::surface
