#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "slotfill/tensor.hpp"

namespace slotfill {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered list of (hierarchical name, tensor) bindings. Save order is the
// registration order, so round trips are bit-exact.
class ParamRegistry {
 public:
  void add(std::string name, Tensor* t) { params_.emplace_back(std::move(name), t); }

  void merge(const ParamRegistry& other, const std::string& prefix) {
    for (const auto& [name, t] : other.params_)
      params_.emplace_back(prefix + name, t);
  }

  const std::vector<std::pair<std::string, Tensor*>>& entries() const {
    return params_;
  }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t->size();
    return n;
  }

  Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : params_)
      if (n == name) return t;
    return nullptr;
  }

 private:
  std::vector<std::pair<std::string, Tensor*>> params_;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw IoError("checkpoint: truncated file");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
         std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw IoError("checkpoint: truncated tensor data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'S', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Format: magic, version, metadata blob (length + bytes), parameter count,
// then per parameter: name length, name bytes, rank, dims, little-endian
// 64-bit floats.
inline void save_checkpoint(const std::string& path, const ParamRegistry& reg,
                            const std::string& metadata = "") {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
  os.write(kCheckpointMagic, 4);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(metadata.size()));
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(reg.entries().size()));
  for (const auto& [name, t] : reg.entries()) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape())
      detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t->size(); ++i) detail::put_f64(os, (*t)[i]);
  }
  if (!os) throw IoError("checkpoint: write failed: " + path);
}

// Loads into the registered tensors by name; returns the metadata blob.
// Every stored parameter must match a registered name and shape.
inline std::string load_checkpoint(const std::string& path, ParamRegistry& reg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  const std::uint32_t version = detail::get_u32(is);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t meta_len = detail::get_u32(is);
  std::string metadata(meta_len, '\0');
  if (meta_len && !is.read(metadata.data(), meta_len))
    throw IoError("checkpoint: truncated metadata");
  const std::uint32_t count = detail::get_u32(is);
  for (std::uint32_t p = 0; p < count; ++p) {
    const std::uint32_t name_len = detail::get_u32(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw IoError("checkpoint: truncated name");
    const std::uint32_t rank = detail::get_u32(is);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = detail::get_u32(is);
    Tensor* dst = reg.find(name);
    if (!dst) throw IoError("checkpoint: unknown parameter: " + name);
    if (dst->shape() != shape)
      throw IoError("checkpoint: shape mismatch for " + name);
    for (std::size_t i = 0; i < dst->size(); ++i) (*dst)[i] = detail::get_f64(is);
  }
  return metadata;
}

}  // namespace slotfill
