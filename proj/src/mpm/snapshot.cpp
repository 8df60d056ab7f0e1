#include "common/binary_io.hpp"
#include "tacsim/error.hpp"
#include "tacsim/mpm.hpp"

namespace tacsim::mpm {
namespace {

constexpr std::uint32_t kSnapshotVersion = 1;

void put_vec(detail::ByteWriter& w, const Vec3& v) {
  for (int i = 0; i < 3; ++i) w.put<double>(v[i]);
}

void put_mat(detail::ByteWriter& w, const Mat3& m) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) w.put<double>(m(r, c));
}

Vec3 get_vec(detail::ByteReader& r) {
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = r.get<double>();
  return v;
}

Mat3 get_mat(detail::ByteReader& r) {
  Mat3 m;
  for (int row = 0; row < 3; ++row)
    for (int c = 0; c < 3; ++c) m(row, c) = r.get<double>();
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(std::span<const Particle> particles) {
  detail::ByteWriter w;
  w.raw("MPMS", 4);
  w.put<std::uint32_t>(kSnapshotVersion);
  w.put<std::uint64_t>(particles.size());
  for (const auto& p : particles) {
    put_vec(w, p.position);
    put_vec(w, p.velocity);
    w.put<double>(p.mass);
    put_mat(w, p.affine);
    put_mat(w, p.def_grad);
    w.put<double>(p.init_volume);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.body));
  }
  return w.take();
}

std::vector<Particle> decode_snapshot(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "MPMS snapshot");
  r.expect_magic("MPMS");
  const auto version = r.get<std::uint32_t>();
  if (version != kSnapshotVersion) {
    fail(ErrorKind::Io, "MPMS snapshot: unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint64_t>();
  constexpr std::size_t kRecord = 8 * (3 + 3 + 1 + 9 + 9 + 1) + 1;
  if (count > r.remaining() / kRecord) fail(ErrorKind::Io, "MPMS snapshot: truncated");
  std::vector<Particle> out(count);
  for (auto& p : out) {
    p.position = get_vec(r);
    p.velocity = get_vec(r);
    p.mass = r.get<double>();
    p.affine = get_mat(r);
    p.def_grad = get_mat(r);
    p.init_volume = r.get<double>();
    const auto tag = r.get<std::uint8_t>();
    if (tag > 1) fail(ErrorKind::Io, "MPMS snapshot: bad body tag");
    p.body = static_cast<Body>(tag);
  }
  r.expect_end();
  return out;
}

void save_snapshot(const std::filesystem::path& path, std::span<const Particle> particles) {
  detail::write_file(path, encode_snapshot(particles));
}

std::vector<Particle> load_snapshot(const std::filesystem::path& path) {
  return decode_snapshot(detail::read_file(path));
}

}  // namespace tacsim::mpm
