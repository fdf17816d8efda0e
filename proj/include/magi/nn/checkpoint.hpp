#pragma once

#include "magi/nn/param_set.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace magi::nn {

// Container layout, all integers little-endian:
//   "MAGI-CKPT" | u32 version | u32 section count
//   per section: u32 name bytes | name (UTF-8) | u32 layer count
//                per layer: u32 in | u32 out | u8 activation
//                u64 value count | values as IEEE-754 binary64
inline constexpr std::string_view kCheckpointMagic = "MAGI-CKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_integral_v<T>);
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<std::uint8_t>((u >> (8 * k)) & 0xFFu));
}

inline void put_f64(std::vector<std::uint8_t>& out, double value) {
  put_le(out, std::bit_cast<std::uint64_t>(value));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k)
      u |= static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + k]) << (8 * k);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  double get_f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Ordered collection of named parameter sets.
class Checkpoint {
 public:
  void add(std::string name, ParamSet params) {
    for (auto& [n, p] : sections_) {
      if (n == name) {
        p = std::move(params);
        return;
      }
    }
    sections_.emplace_back(std::move(name), std::move(params));
  }

  bool contains(std::string_view name) const {
    for (const auto& s : sections_)
      if (s.first == name) return true;
    return false;
  }

  const ParamSet& get(std::string_view name) const {
    for (const auto& s : sections_)
      if (s.first == name) return s.second;
    throw CheckpointError("checkpoint has no section '" + std::string(name) + "'");
  }

  // Fetches a section and checks that it matches the expected layout.
  const ParamSet& get(std::string_view name, const Layout& expected) const {
    const auto& p = get(name);
    if (p.layout() != expected)
      throw CheckpointError("section '" + std::string(name) + "' has layout " + describe(p.layout()) +
                            ", expected " + describe(expected));
    return p;
  }

  const std::vector<std::pair<std::string, ParamSet>>& sections() const { return sections_; }

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sections_.size()));
    for (const auto& [name, params] : sections_) {
      detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.insert(out.end(), name.begin(), name.end());
      detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.layout().size()));
      for (const auto& l : params.layout()) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.in));
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.out));
        out.push_back(static_cast<std::uint8_t>(l.act));
      }
      detail::put_le<std::uint64_t>(out, params.size());
      for (Eigen::Index k = 0; k < params.values().size(); ++k) detail::put_f64(out, params.values()[k]);
    }
    return out;
  }

  static Checkpoint from_bytes(std::span<const std::uint8_t> bytes) {
    detail::Reader r(bytes);
    if (r.get_string(kCheckpointMagic.size()) != kCheckpointMagic) throw CheckpointError("bad checkpoint magic");
    const auto version = r.get_le<std::uint32_t>();
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto count = r.get_le<std::uint32_t>();
    Checkpoint ck;
    for (std::uint32_t s = 0; s < count; ++s) {
      auto name = r.get_string(r.get_le<std::uint32_t>());
      const auto n_layers = r.get_le<std::uint32_t>();
      Layout layout;
      for (std::uint32_t k = 0; k < n_layers; ++k) {
        Layer l;
        l.in = static_cast<int>(r.get_le<std::uint32_t>());
        l.out = static_cast<int>(r.get_le<std::uint32_t>());
        l.act = activation_from_code(r.get_le<std::uint8_t>());
        layout.push_back(l);
      }
      const auto n_values = r.get_le<std::uint64_t>();
      if (n_values != param_count(layout))
        throw CheckpointError("section '" + name + "' value count does not match its layout");
      Eigen::VectorXd values(static_cast<Eigen::Index>(n_values));
      for (std::uint64_t k = 0; k < n_values; ++k) values[static_cast<Eigen::Index>(k)] = r.get_f64();
      ck.add(std::move(name), ParamSet(std::move(layout), std::move(values)));
    }
    if (!r.at_end()) throw CheckpointError("trailing bytes after last checkpoint section");
    return ck;
  }

  void save(const std::filesystem::path& path) const {
    const auto bytes = to_bytes();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("failed writing " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
  }

 private:
  std::vector<std::pair<std::string, ParamSet>> sections_;
};

}  // namespace magi::nn
