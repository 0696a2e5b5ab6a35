#ifndef CARM_MODEL_HPP_
#define CARM_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "carm/error.hpp"
#include "carm/types.hpp"

namespace carm {

/// Sustained bandwidth of one memory level as seen from the core.
struct RoofMeasurement {
  MemLevel level = MemLevel::L1;
  double bandwidth_gbps = 0.0;
  double ipc = 0.0;
  LdStRatio ratio{};
  Isa isa = Isa::scalar;
  Precision precision = Precision::dp;
  unsigned threads = 1;
};

/// Peak throughput of one FP instruction kind.
struct FpCeiling {
  FpOp op = FpOp::fma;
  double gflops = 0.0;
  double ipc = 0.0;
  Isa isa = Isa::scalar;
  Precision precision = Precision::dp;
  unsigned threads = 1;
};

enum class AppSource { dbi, pmu, mixed_benchmark };

constexpr std::string_view to_string(AppSource s) {
  switch (s) {
    case AppSource::dbi: return "dbi";
    case AppSource::pmu: return "pmu";
    case AppSource::mixed_benchmark: return "mixed-benchmark";
  }
  return "?";
}

inline std::optional<AppSource> parse_app_source(std::string_view s) {
  for (auto v : {AppSource::dbi, AppSource::pmu, AppSource::mixed_benchmark})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

/// One application (or mixed benchmark) placed on the model.
struct AppPoint {
  double ai = 0.0;
  double gflops = 0.0;
  AppSource source = AppSource::dbi;
  std::string label;
};

enum class Region { memory_bound, mixed, compute_bound };

constexpr std::string_view to_string(Region r) {
  switch (r) {
    case Region::memory_bound: return "memory-bound";
    case Region::mixed: return "mixed";
    case Region::compute_bound: return "compute-bound";
  }
  return "?";
}

namespace detail {
inline void require_finite_nonneg(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) throw DomainError(std::string(what) + " must be finite and non-negative");
}
inline void require_positive(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0) throw DomainError(std::string(what) + " must be finite and positive");
}
}  // namespace detail

/// min(F_p, B * AI). GFLOP/s given GFLOP/s, GB/s and FLOP/byte.
inline double attainable_performance(double fp_peak, double bandwidth, double ai) {
  detail::require_positive(fp_peak, "fp_peak");
  detail::require_positive(bandwidth, "bandwidth");
  detail::require_finite_nonneg(ai, "arithmetic intensity");
  // Compared against the ridge directly so that the ridge AI maps to F_p exactly.
  if (ai >= fp_peak / bandwidth) return fp_peak;
  return std::min(fp_peak, bandwidth * ai);
}

/// AI where the bandwidth roof meets the compute ceiling.
inline double ridge_point(double fp_peak, double bandwidth) {
  detail::require_positive(fp_peak, "fp_peak");
  detail::require_positive(bandwidth, "bandwidth");
  return fp_peak / bandwidth;
}

inline double arithmetic_intensity(double flops, double bytes) {
  detail::require_finite_nonneg(flops, "flops");
  detail::require_positive(bytes, "bytes");
  return flops / bytes;
}

/// Immutable roofline description; construct through build_model().
class CarmModel {
 public:
  const std::vector<RoofMeasurement>& roofs() const { return roofs_; }
  const std::vector<FpCeiling>& ceilings() const { return ceilings_; }
  const std::string& machine() const { return machine_; }
  double frequency_ghz() const { return frequency_ghz_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  double peak_gflops() const {
    return std::max_element(ceilings_.begin(), ceilings_.end(),
                            [](const auto& a, const auto& b) { return a.gflops < b.gflops; })
        ->gflops;
  }
  const RoofMeasurement& fastest_roof() const {
    return *std::max_element(roofs_.begin(), roofs_.end(), [](const auto& a, const auto& b) {
      return a.bandwidth_gbps < b.bandwidth_gbps;
    });
  }
  const RoofMeasurement& slowest_roof() const {
    return *std::min_element(roofs_.begin(), roofs_.end(), [](const auto& a, const auto& b) {
      return a.bandwidth_gbps < b.bandwidth_gbps;
    });
  }

  /// Attainable GFLOP/s under the peak ceiling and the given roof.
  double attainable(const RoofMeasurement& roof, double ai) const {
    return attainable_performance(peak_gflops(), roof.bandwidth_gbps, ai);
  }

 private:
  CarmModel() = default;
  friend CarmModel build_model(std::vector<RoofMeasurement>, std::vector<FpCeiling>, std::string, double);

  std::vector<RoofMeasurement> roofs_;
  std::vector<FpCeiling> ceilings_;
  std::string machine_;
  double frequency_ghz_ = 0.0;
  std::vector<std::string> warnings_;
};

/// Validates and level-orders the measurements. Bandwidth inversions between
/// levels are kept and reported in warnings(); duplicates are rejected.
inline CarmModel build_model(std::vector<RoofMeasurement> roofs, std::vector<FpCeiling> ceilings,
                             std::string machine, double frequency_ghz) {
  if (roofs.empty()) throw ConfigError("model needs at least one memory roof");
  if (ceilings.empty()) throw ConfigError("model needs at least one FP ceiling");
  detail::require_positive(frequency_ghz, "frequency_ghz");
  for (const auto& r : roofs) {
    detail::require_positive(r.bandwidth_gbps, "roof bandwidth");
    detail::require_finite_nonneg(r.ipc, "roof ipc");
    if (r.ratio.period() == 0) throw DomainError("roof load/store ratio must contain an instruction");
    if (r.threads == 0) throw DomainError("roof thread count must be >= 1");
  }
  for (const auto& c : ceilings) {
    detail::require_positive(c.gflops, "ceiling gflops");
    detail::require_finite_nonneg(c.ipc, "ceiling ipc");
    if (c.threads == 0) throw DomainError("ceiling thread count must be >= 1");
  }

  std::stable_sort(roofs.begin(), roofs.end(),
                   [](const auto& a, const auto& b) { return a.level < b.level; });
  for (std::size_t i = 0; i < roofs.size(); ++i)
    for (std::size_t j = i + 1; j < roofs.size(); ++j)
      if (roofs[i].level == roofs[j].level && roofs[i].ratio == roofs[j].ratio && roofs[i].isa == roofs[j].isa)
        throw ConfigError("duplicate roof for " + std::string(to_string(roofs[i].level)) + " " +
                          roofs[i].ratio.to_string() + " " + std::string(to_string(roofs[i].isa)));

  CarmModel m;
  // Best bandwidth per level, then check it never grows going outward.
  double prev_bw = 0.0;
  MemLevel prev_level = roofs.front().level;
  bool have_prev = false;
  for (std::size_t i = 0; i < roofs.size();) {
    MemLevel lvl = roofs[i].level;
    double best = 0.0;
    for (; i < roofs.size() && roofs[i].level == lvl; ++i) best = std::max(best, roofs[i].bandwidth_gbps);
    if (have_prev && best > prev_bw)
      m.warnings_.push_back(std::string(to_string(lvl)) + " bandwidth " + std::to_string(best) +
                            " GB/s exceeds " + std::string(to_string(prev_level)) + " bandwidth " +
                            std::to_string(prev_bw) + " GB/s");
    prev_bw = best;
    prev_level = lvl;
    have_prev = true;
  }

  m.roofs_ = std::move(roofs);
  m.ceilings_ = std::move(ceilings);
  m.machine_ = std::move(machine);
  m.frequency_ghz_ = frequency_ghz;
  return m;
}

/// Region of the plot an AI falls in. Ridge points belong to the region on
/// their right: [0, r_fast) memory-bound, [r_fast, r_slow) mixed, the rest
/// compute-bound. r_fast/r_slow are the peak ceiling's ridges with the fastest
/// and slowest roofs present in the model.
inline Region classify_region(const CarmModel& model, double ai) {
  if (model.roofs().empty() || model.ceilings().empty()) throw ConfigError("empty model");
  detail::require_finite_nonneg(ai, "arithmetic intensity");
  double peak = model.peak_gflops();
  double fast = ridge_point(peak, model.fastest_roof().bandwidth_gbps);
  double slow = ridge_point(peak, model.slowest_roof().bandwidth_gbps);
  if (ai < fast) return Region::memory_bound;
  if (ai < slow) return Region::mixed;
  return Region::compute_bound;
}

}  // namespace carm

#endif  // CARM_MODEL_HPP_
