#ifndef CARM_TOPOLOGY_HPP_
#define CARM_TOPOLOGY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#if defined(__x86_64__)
#include <cpuid.h>
#endif

#include "carm/error.hpp"
#include "carm/isa.hpp"
#include "carm/types.hpp"

namespace carm {

enum class TopologySource { cpuid, config_file, cli_override, preset };

constexpr std::string_view to_string(TopologySource s) {
  switch (s) {
    case TopologySource::cpuid: return "cpuid";
    case TopologySource::config_file: return "config-file";
    case TopologySource::cli_override: return "cli-override";
    case TopologySource::preset: return "preset";
  }
  return "?";
}

/// Per-core cache sizes in KiB; 0 means unknown.
struct CacheTopology {
  std::uint64_t l1d_kib = 0;
  std::uint64_t l2_kib = 0;
  std::uint64_t l3_total_kib = 0;
  std::uint64_t l3_slice_kib = 0;
  TopologySource source = TopologySource::cpuid;

  void validate() const {
    auto bad = [](std::uint64_t a, std::uint64_t b) { return a && b && a > b; };
    if (bad(l1d_kib, l2_kib) || bad(l2_kib, l3_total_kib) || bad(l1d_kib, l3_total_kib))
      throw ConfigError("inconsistent cache topology: expected l1d <= l2 <= l3 (got " + std::to_string(l1d_kib) +
                        ", " + std::to_string(l2_kib) + ", " + std::to_string(l3_total_kib) + " KiB)");
    if (bad(l3_slice_kib, l3_total_kib)) throw ConfigError("L3 slice larger than the whole L3");
  }
  std::uint64_t l3_effective_kib() const { return l3_slice_kib ? l3_slice_kib : l3_total_kib; }
  friend bool operator==(const CacheTopology&, const CacheTopology&) = default;
};

/// CLI cache-size flags; set fields win over detection and config.
struct CacheOverrides {
  std::optional<std::uint64_t> l1d_kib, l2_kib, l3_total_kib, l3_slice_kib;
  bool any() const { return l1d_kib || l2_kib || l3_total_kib || l3_slice_kib; }
};

/// One CPUID leaf-4 (or AMD 0x8000001D) sub-leaf: eax, ebx, ecx, edx.
using CpuidRegs = std::array<std::uint32_t, 4>;

struct CacheLevelInfo {
  unsigned level = 0;
  unsigned type = 0;  // 1 data, 2 instruction, 3 unified
  std::uint64_t bytes = 0;
  unsigned max_sharing_threads = 0;
};

inline CacheLevelInfo decode_cache_leaf(const CpuidRegs& r) {
  CacheLevelInfo c;
  c.type = r[0] & 0x1f;
  c.level = (r[0] >> 5) & 0x7;
  c.max_sharing_threads = ((r[0] >> 14) & 0xfff) + 1;
  std::uint64_t line = (r[1] & 0xfff) + 1;
  std::uint64_t partitions = ((r[1] >> 12) & 0x3ff) + 1;
  std::uint64_t ways = ((r[1] >> 22) & 0x3ff) + 1;
  std::uint64_t sets = static_cast<std::uint64_t>(r[2]) + 1;
  c.bytes = line * partitions * ways * sets;
  return c;
}

/// Decodes the deterministic cache-parameter sub-leaves (terminated by a null
/// type) into a topology; the L3 slice is the L3 divided by the cores sharing it.
inline CacheTopology topology_from_cpuid(const std::vector<CpuidRegs>& subleaves, unsigned cores_sharing_l3) {
  CacheTopology t;
  t.source = TopologySource::cpuid;
  for (const auto& r : subleaves) {
    auto c = decode_cache_leaf(r);
    if (c.type == 0) break;
    if (c.type == 2) continue;
    std::uint64_t kib = c.bytes / 1024;
    if (c.level == 1) t.l1d_kib = kib;
    if (c.level == 2) t.l2_kib = kib;
    if (c.level == 3) t.l3_total_kib = kib;
  }
  if (t.l3_total_kib) t.l3_slice_kib = t.l3_total_kib / std::max(1u, cores_sharing_l3);
  t.validate();
  return t;
}

/// key=value lines; '#' starts a comment. Keys are lowercased.
inline std::map<std::string, std::string> parse_key_value(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto c = line.find('#'); c != std::string::npos) line.resize(c);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) eq = line.find(':');
    if (eq == std::string::npos) throw ParseError("expected key=value, got '" + line + "'", n);
    std::string key = trim(line.substr(0, eq));
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (key.empty()) throw ParseError("empty key", n);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace detail {

inline std::optional<std::uint64_t> kib_value(const std::map<std::string, std::string>& kv,
                                              std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = kv.find(k);
    if (it == kv.end()) continue;
    try {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(it->second, &pos);
      std::string unit = it->second.substr(pos);
      unit.erase(0, unit.find_first_not_of(' '));
      std::transform(unit.begin(), unit.end(), unit.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (unit.empty() || unit == "k" || unit == "kb" || unit == "kib") return v;
      if (unit == "m" || unit == "mb" || unit == "mib") return v * 1024;
      throw ConfigError("unknown size unit in " + std::string(k) + "=" + it->second);
    } catch (const std::logic_error&) {
      throw ConfigError("invalid size for " + std::string(k) + ": '" + it->second + "'");
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Cache sizes from config text: l1 (or l1d), l2, l3, l3_slice in KiB (K/M suffix allowed).
inline CacheTopology topology_from_config(const std::map<std::string, std::string>& kv) {
  CacheTopology t;
  t.source = TopologySource::config_file;
  t.l1d_kib = detail::kib_value(kv, {"l1", "l1d", "l1_kib", "l1d_kib"}).value_or(0);
  t.l2_kib = detail::kib_value(kv, {"l2", "l2_kib"}).value_or(0);
  t.l3_total_kib = detail::kib_value(kv, {"l3", "l3_kib", "l3_total", "l3_total_kib"}).value_or(0);
  t.l3_slice_kib = detail::kib_value(kv, {"l3_slice", "l3_slice_kib"}).value_or(0);
  if (!t.l1d_kib && !t.l2_kib && !t.l3_total_kib) throw ConfigError("config file defines no cache sizes (l1, l2, l3)");
  t.validate();
  return t;
}

inline CacheTopology apply_overrides(CacheTopology t, const CacheOverrides& o) {
  if (!o.any()) return t;
  if (o.l1d_kib) t.l1d_kib = *o.l1d_kib;
  if (o.l2_kib) t.l2_kib = *o.l2_kib;
  if (o.l3_total_kib) t.l3_total_kib = *o.l3_total_kib;
  if (o.l3_slice_kib) t.l3_slice_kib = *o.l3_slice_kib;
  t.source = TopologySource::cli_override;
  t.validate();
  return t;
}

/// Physical cores in package 0 according to sysfs; 0 when unavailable.
inline unsigned physical_cores_in_package() {
  std::set<int> cores;
  for (int c = 0; c < 4096; ++c) {
    std::filesystem::path base = "/sys/devices/system/cpu/cpu" + std::to_string(c) + "/topology";
    std::ifstream pkg(base / "physical_package_id"), core(base / "core_id");
    int p, id;
    if (!(pkg >> p) || !(core >> id)) {
      if (c > 0 && !std::filesystem::exists(base)) break;
      continue;
    }
    if (p == 0) cores.insert(id);
  }
  return static_cast<unsigned>(cores.size());
}

inline bool cpuid_available() {
#if defined(__x86_64__)
  return true;
#else
  return false;
#endif
}

/// Raw cache-parameter sub-leaves from the running CPU (x86-64 only).
inline std::vector<CpuidRegs> read_cpuid_cache_leaves() {
  std::vector<CpuidRegs> out;
#if defined(__x86_64__)
  unsigned a, b, c, d;
  __cpuid(0, a, b, c, d);
  bool amd = b == 0x68747541;  // "Auth"
  unsigned leaf = 4;
  if (amd) {
    __cpuid(0x80000000, a, b, c, d);
    if (a < 0x8000001D) return out;
    leaf = 0x8000001D;
  } else if (a < 4) {
    return out;
  }
  for (unsigned sub = 0; sub < 16; ++sub) {
    __cpuid_count(leaf, sub, a, b, c, d);
    out.push_back({a, b, c, d});
    if ((a & 0x1f) == 0) break;
  }
#endif
  return out;
}

/// x86-64: CPUID, unless a config file is given. Elsewhere a config file is
/// required. CLI overrides are applied last.
inline CacheTopology detect_cache_topology(const std::optional<std::filesystem::path>& config = std::nullopt,
                                           const CacheOverrides& overrides = {}) {
  CacheTopology t;
  if (config) {
    std::ifstream f(*config);
    if (!f) throw ConfigError("cannot read config file " + config->string());
    std::stringstream ss;
    ss << f.rdbuf();
    t = topology_from_config(parse_key_value(ss.str()));
  } else if (cpuid_available()) {
    auto leaves = read_cpuid_cache_leaves();
    unsigned cores = physical_cores_in_package();
    if (!cores && !leaves.empty()) cores = ((leaves[0][0] >> 26) & 0x3f) + 1;
    t = topology_from_cpuid(leaves, cores);
  } else if (!overrides.any()) {
    throw ConfigError("cache sizes cannot be detected on " + std::string(to_string(host_arch())) +
                      "; supply them with --config <file> (l1=, l2=, l3= in KiB) or the --l1/--l2/--l3 flags");
  }
  return apply_overrides(t, overrides);
}

inline constexpr std::uint64_t kDramWorkingSetBytes = 512ULL << 20;

/// Bytes per thread for a memory-level benchmark: L1 half the L1d, L2/L3 the
/// geometric midpoint of the level and the level inside it (L3 uses the
/// per-core slice), DRAM 512 MiB.
inline std::uint64_t working_set_for_level(const CacheTopology& t, MemLevel level, unsigned threads = 1) {
  t.validate();
  (void)threads;
  auto need = [&](std::uint64_t kib, const char* what) {
    if (!kib) throw ConfigError(std::string("cache size for ") + what + " unknown; set it via config or CLI");
    return kib;
  };
  switch (level) {
    case MemLevel::L1: return need(t.l1d_kib, "L1") * 1024 / 2;
    case MemLevel::L2: {
      double mid = std::sqrt(static_cast<double>(need(t.l1d_kib, "L1")) * static_cast<double>(need(t.l2_kib, "L2")));
      return static_cast<std::uint64_t>(mid * 1024);
    }
    case MemLevel::L3: {
      std::uint64_t slice = need(t.l3_effective_kib(), "L3");
      std::uint64_t inner = need(t.l2_kib, "L2");
      if (slice <= inner) return slice * 1024;
      double mid = std::sqrt(static_cast<double>(inner) * static_cast<double>(slice)) * 1024;
      return std::clamp<std::uint64_t>(static_cast<std::uint64_t>(mid), inner * 1024 + 1, slice * 1024);
    }
    case MemLevel::DRAM: return kDramWorkingSetBytes;
  }
  throw ConfigError("unknown memory level");
}

/// Largest multiple of `granule` not above `bytes` (at least one granule).
inline std::uint64_t round_working_set(std::uint64_t bytes, std::uint64_t granule) {
  if (granule == 0) throw DomainError("granule must be > 0");
  return std::max(granule, bytes / granule * granule);
}

}  // namespace carm

#endif  // CARM_TOPOLOGY_HPP_
