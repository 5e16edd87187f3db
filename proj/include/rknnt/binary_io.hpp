#pragma once

// Little helpers for the versioned snapshot formats. Values are written in
// host byte order; snapshots are not meant to cross architectures.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace rknnt::io {

class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
  requires std::is_trivially_copyable_v<T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
  requires std::is_trivially_copyable_v<T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw SnapshotError("truncated snapshot");
  return v;
}

template <class T>
  requires std::is_trivially_copyable_v<T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
  write_pod<std::uint64_t>(out, v.size());
  if (!v.empty()) out.write(reinterpret_cast<const char*>(v.data()), sizeof(T) * v.size());
}

template <class T>
  requires std::is_trivially_copyable_v<T>
std::vector<T> read_vec(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 40) / sizeof(T)) throw SnapshotError("implausible vector length");
  std::vector<T> v(n);
  if (n) in.read(reinterpret_cast<char*>(v.data()), sizeof(T) * n);
  if (!in) throw SnapshotError("truncated snapshot");
  return v;
}

inline void write_header(std::ostream& out, std::string_view magic, std::uint32_t version) {
  char buf[8] = {};
  std::memcpy(buf, magic.data(), std::min<std::size_t>(magic.size(), 8));
  out.write(buf, 8);
  write_pod(out, version);
}

inline void read_header(std::istream& in, std::string_view magic, std::uint32_t version) {
  char buf[8] = {};
  in.read(buf, 8);
  if (!in) throw SnapshotError("truncated snapshot header");
  char want[8] = {};
  std::memcpy(want, magic.data(), std::min<std::size_t>(magic.size(), 8));
  if (std::memcmp(buf, want, 8) != 0)
    throw SnapshotError("bad snapshot magic, expected " + std::string(magic));
  const auto v = read_pod<std::uint32_t>(in);
  if (v != version)
    throw SnapshotError("unsupported snapshot version " + std::to_string(v) + " (expected " +
                        std::to_string(version) + ")");
}

}  // namespace rknnt::io
