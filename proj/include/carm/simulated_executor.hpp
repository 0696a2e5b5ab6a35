#ifndef CARM_SIMULATED_EXECUTOR_HPP_
#define CARM_SIMULATED_EXECUTOR_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "carm/harness.hpp"
#include "carm/topology.hpp"

namespace carm {

/// Throughput description of an idealised core. Times are analytical, so every
/// run of the same plan produces identical samples.
struct SimulatedMachine {
  Arch arch = Arch::x86_64;
  double core_ghz = 3.0;
  double tsc_ghz = 2.3;  // 0: no TSC, wall clock only
  std::vector<double> per_thread_ghz;  // optional per-thread core clock override
  std::array<double, 4> bytes_per_cycle{192, 64, 16, 4.2};  // L1, L2, L3, DRAM per core
  double dram_total_bytes_per_cycle = 0;                    // 0: DRAM scales with threads
  double load_ipc = 2;
  double store_ipc = 1;
  double mem_ipc = 3;
  std::array<double, 4> fp_ipc{2, 2, 0.25, 2};  // add, mul, div, fma
  std::array<std::uint64_t, 3> cache_bytes{32u << 10, 1u << 20, 1408u << 10};  // L1, L2, L3 slice
  std::uint64_t l3_total_bytes = 25344u << 10;
  bool pinning_fails = false;

  /// Skylake-X: two load and one store unit, 64 B AVX-512 operands
  /// (192 B/cycle L1), two FMA units (32 DP FLOP/cycle).
  static SimulatedMachine skylake_x() { return SimulatedMachine{}; }

  /// Cache sizes as a topology, for working-set selection.
  CacheTopology topology() const {
    return {cache_bytes[0] >> 10, cache_bytes[1] >> 10, l3_total_bytes >> 10, cache_bytes[2] >> 10,
            TopologySource::preset};
  }

  MemLevel level_for(std::uint64_t array_bytes) const {
    for (std::size_t i = 0; i < cache_bytes.size(); ++i)
      if (array_bytes <= cache_bytes[i]) return kAllLevels[i];
    return MemLevel::DRAM;
  }

  double core_ghz_for(unsigned thread) const {
    return thread < per_thread_ghz.size() ? per_thread_ghz[thread] : core_ghz;
  }

  /// Core cycles for one outer iteration of `k` with `threads` concurrent copies.
  double cycles_per_outer_iter(const KernelSource& k, unsigned threads) const {
    const ExpectedCounts& e = k.expected;
    double mem = 0;
    if (e.mem_inst_per_outer_iter) {
      auto lvl = static_cast<std::size_t>(level_for(k.spec.array_bytes));
      double bpc = bytes_per_cycle[lvl];
      if (lvl == 3 && dram_total_bytes_per_cycle > 0)
        bpc = std::min(bpc, dram_total_bytes_per_cycle / std::max(1u, threads));
      mem = std::max({static_cast<double>(e.loads_per_outer_iter) / load_ipc,
                      static_cast<double>(e.stores_per_outer_iter) / store_ipc,
                      static_cast<double>(e.mem_inst_per_outer_iter) / mem_ipc,
                      static_cast<double>(e.bytes_per_outer_iter()) / bpc});
    }
    double fp = e.fp_inst_per_outer_iter
                    ? static_cast<double>(e.fp_inst_per_outer_iter) / fp_ipc[static_cast<std::size_t>(k.spec.fp_op)]
                    : 0;
    double chain = static_cast<double>(e.int_add_per_outer_iter);
    return std::max({mem, fp, chain});
  }
};

class SimulatedExecutor : public Executor {
 public:
  explicit SimulatedExecutor(SimulatedMachine m = SimulatedMachine::skylake_x()) : m_(std::move(m)) {}

  std::string name() const override { return "simulated"; }
  Arch arch() const override { return m_.arch; }
  TimeSource time_source() const override { return m_.tsc_ghz > 0 ? TimeSource::tsc : TimeSource::wall_clock; }
  const SimulatedMachine& machine() const { return m_; }

  void load(const KernelSource& kernel) override {
    if (kernel.isa.arch != m_.arch)
      throw ToolchainError("simulated " + std::string(to_string(m_.arch)) + " machine cannot run " +
                           std::string(to_string(kernel.isa.arch)) + " kernel " + kernel.file_name());
    kernel_ = kernel;
    loaded_ = true;
  }

  void prepare(unsigned threads, std::uint64_t) override {
    threads_ = std::max(1u, threads);
    clock_.assign(threads_, 0.0);
  }

  bool pin_current_thread(int) override { return !m_.pinning_fails; }

  void on_barrier() noexcept override {
    double t = clock_.empty() ? 0 : *std::max_element(clock_.begin(), clock_.end());
    std::fill(clock_.begin(), clock_.end(), t);
  }

  RunTiming run(unsigned thread, std::uint64_t outer_iters) override {
    if (!loaded_) throw ToolchainError("no kernel loaded");
    if (thread >= clock_.size()) throw ConfigError("thread index out of range");
    double cycles = m_.cycles_per_outer_iter(kernel_, threads_) * static_cast<double>(outer_iters);
    RunTiming t;
    t.start_s = clock_[thread];
    t.elapsed_s = cycles / (m_.core_ghz_for(thread) * 1e9);
    if (m_.tsc_ghz > 0) t.tsc_cycles = static_cast<std::uint64_t>(std::llround(t.elapsed_s * m_.tsc_ghz * 1e9));
    clock_[thread] += t.elapsed_s;
    return t;
  }

  std::vector<int> default_pinning(unsigned threads) const override {
    std::vector<int> v(threads);
    std::iota(v.begin(), v.end(), 0);
    return v;
  }

 private:
  SimulatedMachine m_;
  KernelSource kernel_;
  bool loaded_ = false;
  unsigned threads_ = 1;
  std::vector<double> clock_{0.0};
};

}  // namespace carm

#endif  // CARM_SIMULATED_EXECUTOR_HPP_
