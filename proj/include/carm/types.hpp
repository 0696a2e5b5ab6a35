#ifndef CARM_TYPES_HPP_
#define CARM_TYPES_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "carm/error.hpp"

namespace carm {

enum class Precision { sp, dp };
enum class MemLevel { L1, L2, L3, DRAM };
enum class FpOp { add, mul, div, fma };
enum class Isa { scalar, sse, avx2, avx512, neon, rvv };
enum class Arch { x86_64, aarch64, riscv64 };

inline constexpr std::array kAllPrecisions{Precision::sp, Precision::dp};
inline constexpr std::array kAllLevels{MemLevel::L1, MemLevel::L2, MemLevel::L3, MemLevel::DRAM};
inline constexpr std::array kAllFpOps{FpOp::add, FpOp::mul, FpOp::div, FpOp::fma};
inline constexpr std::array kAllIsas{Isa::scalar, Isa::sse, Isa::avx2, Isa::avx512, Isa::neon, Isa::rvv};
inline constexpr std::array kAllArchs{Arch::x86_64, Arch::aarch64, Arch::riscv64};

constexpr unsigned element_bytes(Precision p) { return p == Precision::sp ? 4 : 8; }

constexpr std::string_view to_string(Precision p) { return p == Precision::sp ? "sp" : "dp"; }

constexpr std::string_view to_string(MemLevel l) {
  switch (l) {
    case MemLevel::L1: return "L1";
    case MemLevel::L2: return "L2";
    case MemLevel::L3: return "L3";
    case MemLevel::DRAM: return "DRAM";
  }
  return "?";
}

constexpr std::string_view to_string(FpOp op) {
  switch (op) {
    case FpOp::add: return "add";
    case FpOp::mul: return "mul";
    case FpOp::div: return "div";
    case FpOp::fma: return "fma";
  }
  return "?";
}

constexpr std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::sse: return "sse";
    case Isa::avx2: return "avx2";
    case Isa::avx512: return "avx512";
    case Isa::neon: return "neon";
    case Isa::rvv: return "rvv";
  }
  return "?";
}

constexpr std::string_view to_string(Arch a) {
  switch (a) {
    case Arch::x86_64: return "x86-64";
    case Arch::aarch64: return "aarch64";
    case Arch::riscv64: return "riscv64";
  }
  return "?";
}

namespace detail {
template <typename E, std::size_t N>
std::optional<E> parse_enum(std::string_view text, const std::array<E, N>& values) {
  for (E v : values)
    if (to_string(v) == text) return v;
  return std::nullopt;
}
}  // namespace detail

inline std::optional<Precision> parse_precision(std::string_view s) {
  if (s == "single") return Precision::sp;
  if (s == "double") return Precision::dp;
  return detail::parse_enum(s, kAllPrecisions);
}
inline std::optional<MemLevel> parse_level(std::string_view s) { return detail::parse_enum(s, kAllLevels); }
inline std::optional<FpOp> parse_fp_op(std::string_view s) { return detail::parse_enum(s, kAllFpOps); }
inline std::optional<Isa> parse_isa(std::string_view s) { return detail::parse_enum(s, kAllIsas); }
inline std::optional<Arch> parse_arch(std::string_view s) {
  if (s == "x86_64") return Arch::x86_64;
  return detail::parse_enum(s, kAllArchs);
}

/// Load:store instruction mix of a memory kernel. 2:1 means two loads per store.
struct LdStRatio {
  unsigned loads = 2;
  unsigned stores = 1;

  unsigned period() const { return loads + stores; }
  bool only_loads() const { return stores == 0; }
  bool only_stores() const { return loads == 0; }
  friend bool operator==(const LdStRatio&, const LdStRatio&) = default;

  std::string to_string() const { return std::to_string(loads) + ":" + std::to_string(stores); }

  /// Accepts "2:1", "2/1", or a bare "2" meaning 2:1.
  static LdStRatio parse(std::string_view text) {
    auto sep = text.find_first_of(":/");
    auto to_uint = [&](std::string_view part) -> unsigned {
      if (part.empty()) throw ConfigError("bad load/store ratio '" + std::string(text) + "'");
      unsigned v = 0;
      for (char c : part) {
        if (c < '0' || c > '9') throw ConfigError("bad load/store ratio '" + std::string(text) + "'");
        v = v * 10 + static_cast<unsigned>(c - '0');
        if (v > 1024) throw ConfigError("load/store ratio out of range: '" + std::string(text) + "'");
      }
      return v;
    };
    LdStRatio r;
    if (sep == std::string_view::npos) {
      r.loads = to_uint(text);
      r.stores = 1;
    } else {
      r.loads = to_uint(text.substr(0, sep));
      r.stores = to_uint(text.substr(sep + 1));
    }
    if (r.period() == 0) throw ConfigError("load/store ratio needs at least one instruction");
    return r;
  }
};

}  // namespace carm

#endif  // CARM_TYPES_HPP_
