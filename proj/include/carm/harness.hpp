#ifndef CARM_HARNESS_HPP_
#define CARM_HARNESS_HPP_

#include <algorithm>
#include <barrier>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "carm/codegen.hpp"
#include "carm/error.hpp"
#include "carm/verify.hpp"

namespace carm {

enum class TimeSource { tsc, wall_clock };

constexpr std::string_view to_string(TimeSource t) { return t == TimeSource::tsc ? "tsc" : "wall-clock"; }

/// One timed repetition as reported by an executor.
struct RunTiming {
  double start_s = 0;    // monotonic timestamp at the start of the timed region
  double elapsed_s = 0;  // wall-clock duration
  std::uint64_t tsc_cycles = 0;  // only meaningful for TSC executors
};

struct Sample {
  unsigned thread_id = 0;
  unsigned repetition = 0;
  double start_s = 0;
  double elapsed_s = 0;
  std::uint64_t tsc_cycles = 0;
  TimeSource source = TimeSource::wall_clock;

  /// Cycles for TSC samples, seconds otherwise.
  double elapsed() const { return source == TimeSource::tsc ? static_cast<double>(tsc_cycles) : elapsed_s; }
};

/// Runs generated kernels. Implementations: native (assemble + dlopen) and
/// simulated (deterministic analytical model).
class Executor {
 public:
  virtual ~Executor() = default;
  virtual std::string name() const = 0;
  virtual Arch arch() const = 0;
  virtual TimeSource time_source() const = 0;
  /// Makes `kernel` the active kernel. Throws ToolchainError on failure.
  virtual void load(const KernelSource& kernel) = 0;
  /// Allocates per-thread state; array_bytes is the per-thread working set.
  virtual void prepare(unsigned threads, std::uint64_t array_bytes) = 0;
  /// Pins the calling thread. Returns false when the OS refuses.
  virtual bool pin_current_thread(int cpu) = 0;
  /// Called once per rendezvous, after every thread arrived.
  virtual void on_barrier() noexcept {}
  /// One timed repetition of the active kernel on worker `thread`.
  virtual RunTiming run(unsigned thread, std::uint64_t outer_iters) = 0;
  virtual std::vector<int> default_pinning(unsigned threads) const = 0;
};

inline constexpr unsigned kDefaultRepetitions = 1024;
inline constexpr unsigned kInstrumentedRepetitions = 10;

struct HarnessOptions {
  double t_min_s = 0.010;
  double t_max_s = 0.200;
  unsigned max_probes = 40;
  std::uint64_t max_outer_iters = 1ULL << 40;
  unsigned repetitions = kDefaultRepetitions;
  bool instrumented = false;  // forces kInstrumentedRepetitions
  unsigned frequency_repetitions = 8;
  std::vector<int> pinning;   // empty: executor default

  unsigned effective_repetitions() const { return instrumented ? kInstrumentedRepetitions : repetitions; }
};

struct ExecutablePlan {
  KernelSource kernel;
  std::uint64_t outer_iters = 1;
  unsigned threads = 1;
  std::vector<int> pinning;
  unsigned repetitions = kDefaultRepetitions;

  void validate() const {
    if (threads == 0) throw ConfigError("threads must be >= 1");
    if (repetitions == 0) throw ConfigError("repetitions must be >= 1");
    if (outer_iters == 0) throw ConfigError("outer_iters must be >= 1");
    if (pinning.size() != threads)
      throw ConfigError("pinning lists " + std::to_string(pinning.size()) + " CPUs for " + std::to_string(threads) +
                        " threads");
    if (std::set<int>(pinning.begin(), pinning.end()).size() != pinning.size())
      throw ConfigError("pinned CPUs must be distinct");
  }
};

struct FrequencyReading {
  std::vector<double> per_thread_ghz;
  double real_ghz = 0;                // median of per_thread_ghz
  std::optional<double> nominal_ghz;  // TSC rate, x86-64 only
  double spread = 0;                  // (max - min) / median
  std::vector<std::string> warnings;
};

struct BenchResult {
  double bandwidth_gbps = 0;
  double gflops = 0;
  double ipc = 0;
  double elapsed_best_s = 0;
  double frequency_ghz = 0;
  std::uint64_t outer_iters = 0;
  KernelKind kind = KernelKind::memory;
  Isa isa = Isa::scalar;
  Precision precision = Precision::dp;
  LdStRatio ratio;
  FpOp fp_op = FpOp::add;
  unsigned fp_per_mem = 0;
  unsigned threads = 1;
  std::uint64_t array_bytes = 0;
  std::vector<std::string> warnings;
};

/// TSC cycles scaled to core cycles.
inline double real_cycles(double tsc_cycles, double real_ghz, double nominal_ghz) {
  if (!(real_ghz > 0) || !(nominal_ghz > 0)) throw DomainError("frequencies must be > 0");
  if (tsc_cycles < 0) throw DomainError("cycle count must be >= 0");
  return tsc_cycles * real_ghz / nominal_ghz;
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of empty set");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<int> resolve_pinning(const Executor& ex, unsigned threads, const HarnessOptions& opt) {
  if (!opt.pinning.empty()) {
    if (opt.pinning.size() < threads)
      throw ConfigError("pinning override lists " + std::to_string(opt.pinning.size()) + " CPUs for " +
                        std::to_string(threads) + " threads");
    return {opt.pinning.begin(), opt.pinning.begin() + threads};
  }
  return ex.default_pinning(threads);
}

}  // namespace detail

struct ExecutionResult {
  std::vector<Sample> samples;
  std::vector<std::string> warnings;
};

/// threads x repetitions samples; every repetition starts at a rendezvous.
inline ExecutionResult execute(Executor& ex, const ExecutablePlan& plan) {
  plan.validate();
  ExecutionResult out;
  const TimeSource src = ex.time_source();
  std::vector<std::vector<Sample>> per_thread(plan.threads);
  std::vector<std::exception_ptr> errors(plan.threads);
  std::mutex warn_mu;
  auto on_completion = [&ex]() noexcept { ex.on_barrier(); };
  std::barrier bar(static_cast<std::ptrdiff_t>(plan.threads), on_completion);

  auto worker = [&](unsigned tid) {
    try {
      if (!ex.pin_current_thread(plan.pinning[tid])) {
        std::lock_guard lk(warn_mu);
        out.warnings.push_back("could not pin thread " + std::to_string(tid) + " to CPU " +
                               std::to_string(plan.pinning[tid]) + "; running unpinned");
      }
      per_thread[tid].reserve(plan.repetitions);
      for (unsigned rep = 0; rep < plan.repetitions; ++rep) {
        bar.arrive_and_wait();
        RunTiming t = ex.run(tid, plan.outer_iters);
        per_thread[tid].push_back({tid, rep, t.start_s, t.elapsed_s, t.tsc_cycles, src});
      }
    } catch (...) {
      errors[tid] = std::current_exception();
      bar.arrive_and_drop();
    }
  };
  if (plan.threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < plan.threads; ++t) pool.emplace_back(worker, t);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (auto& v : per_thread) out.samples.insert(out.samples.end(), v.begin(), v.end());
  return out;
}

/// Doubles (or halves) the outer count until one repetition lands in the
/// window, bisecting if a step jumps over it.
inline std::uint64_t calibrate_outer_iterations(Executor& ex, const KernelSource& kernel,
                                                const HarnessOptions& opt = {}) {
  if (!(opt.t_min_s > 0) || opt.t_max_s < opt.t_min_s) throw ConfigError("invalid calibration window");
  std::uint64_t lo = 0, hi = 0;  // largest too-short and smallest too-long counts seen
  std::uint64_t iters = 1;
  for (unsigned probe = 0; probe < opt.max_probes; ++probe) {
    double t = ex.run(0, iters).elapsed_s;
    if (t >= opt.t_min_s && t <= opt.t_max_s) return iters;
    if (t < opt.t_min_s) {
      if (iters >= opt.max_outer_iters) break;
      lo = iters;
    } else {
      if (iters == 1) return 1;  // a single iteration already exceeds the window
      hi = iters;
    }
    if (hi && lo) {
      if (hi - lo <= 1) return hi;
      iters = lo + (hi - lo) / 2;
    } else if (hi) {
      iters = hi / 2;
    } else {
      iters = std::min(lo * 2, opt.max_outer_iters);
    }
  }
  throw BenchmarkError("calibration of " + kernel.file_name() + " could not reach " + std::to_string(opt.t_min_s) +
                       " s within " + std::to_string(opt.max_probes) + " probes (max outer iterations " +
                       std::to_string(opt.max_outer_iters) + ")");
}

/// Best per thread, median across threads, metrics from expected counts.
inline BenchResult aggregate(const std::vector<Sample>& samples, const ExpectedCounts& expected,
                             const FrequencyReading& freq, std::uint64_t outer_iters) {
  if (samples.empty()) throw DomainError("no samples to aggregate");
  if (!(freq.real_ghz > 0)) throw DomainError("frequency must be > 0");
  std::map<unsigned, double> best;
  const TimeSource src = samples.front().source;
  for (const auto& s : samples) {
    if (s.source != src) throw DomainError("samples mix time sources");
    double e = s.elapsed();
    if (!(e > 0)) throw DomainError("sample elapsed time must be > 0");
    auto [it, inserted] = best.try_emplace(s.thread_id, e);
    if (!inserted) it->second = std::min(it->second, e);
  }
  std::vector<double> bests;
  for (auto& [t, e] : best) bests.push_back(e);
  const double med = detail::median(bests);
  const double threads = static_cast<double>(best.size());

  double seconds, cycles;
  if (src == TimeSource::tsc) {
    if (!freq.nominal_ghz) throw DomainError("TSC samples need a nominal frequency");
    cycles = real_cycles(med, freq.real_ghz, *freq.nominal_ghz);
    seconds = cycles / (freq.real_ghz * 1e9);
  } else {
    seconds = med;
    cycles = seconds * freq.real_ghz * 1e9;
  }
  const double iters = static_cast<double>(outer_iters);
  BenchResult r;
  r.elapsed_best_s = seconds;
  r.frequency_ghz = freq.real_ghz;
  r.outer_iters = outer_iters;
  r.threads = static_cast<unsigned>(best.size());
  r.bandwidth_gbps = threads * static_cast<double>(expected.bytes_per_outer_iter()) * iters / seconds / 1e9;
  r.gflops = threads * static_cast<double>(expected.flops_per_outer_iter()) * iters / seconds / 1e9;
  const double total_inst = threads * static_cast<double>(expected.counted_inst_per_outer_iter()) * iters;
  r.ipc = total_inst / (cycles * threads);
  return r;
}

/// Runs the dependent-add probe on every thread at once.
inline FrequencyReading measure_frequency(Executor& ex, unsigned threads, const HarnessOptions& opt = {}) {
  KernelSource probe = generate_frequency_probe(ex.arch());
  ex.load(probe);
  ex.prepare(threads, 64);
  HarnessOptions popt = opt;
  std::uint64_t outer = calibrate_outer_iterations(ex, probe, popt);
  ExecutablePlan plan{probe, outer, threads, detail::resolve_pinning(ex, threads, opt),
                      std::max(1u, opt.frequency_repetitions)};
  auto res = execute(ex, plan);

  FrequencyReading fr;
  fr.warnings = res.warnings;
  std::map<unsigned, const Sample*> best;
  for (const auto& s : res.samples) {
    auto [it, ins] = best.try_emplace(s.thread_id, &s);
    if (!ins && s.elapsed_s < it->second->elapsed_s) it->second = &s;
  }
  const double adds = static_cast<double>(probe.expected.int_add_per_outer_iter) * static_cast<double>(outer);
  std::vector<double> nominal;
  for (auto& [t, s] : best) {
    if (!(s->elapsed_s > 0)) throw BenchmarkError("frequency probe reported zero elapsed time");
    fr.per_thread_ghz.push_back(adds / s->elapsed_s / 1e9);
    if (ex.time_source() == TimeSource::tsc) nominal.push_back(static_cast<double>(s->tsc_cycles) / s->elapsed_s / 1e9);
  }
  fr.real_ghz = detail::median(fr.per_thread_ghz);
  if (!nominal.empty()) fr.nominal_ghz = detail::median(nominal);
  auto [lo, hi] = std::minmax_element(fr.per_thread_ghz.begin(), fr.per_thread_ghz.end());
  fr.spread = (*hi - *lo) / fr.real_ghz;
  if (fr.spread > 0.10)
    fr.warnings.push_back("core frequency differs by " + std::to_string(fr.spread * 100) +
                          "% across threads; turbo or thermal throttling likely");
  return fr;
}

/// Verify, measure frequency, calibrate, execute, aggregate.
inline BenchResult run_benchmark(Executor& ex, const KernelSource& kernel, unsigned threads,
                                 const HarnessOptions& opt = {}, const FrequencyReading* known_freq = nullptr) {
  if (threads == 0) throw ConfigError("threads must be >= 1");
  require_verified(kernel);
  FrequencyReading freq = known_freq ? *known_freq : measure_frequency(ex, threads, opt);
  ex.load(kernel);
  ex.prepare(threads, std::max<std::uint64_t>(kernel.spec.array_bytes, 64));
  std::uint64_t outer = calibrate_outer_iterations(ex, kernel, opt);
  ExecutablePlan plan{kernel, outer, threads, detail::resolve_pinning(ex, threads, opt), opt.effective_repetitions()};
  auto res = execute(ex, plan);
  BenchResult r = aggregate(res.samples, kernel.expected, freq, outer);
  r.kind = kernel.spec.kind;
  r.isa = kernel.spec.isa;
  r.precision = kernel.spec.precision;
  r.ratio = kernel.spec.ratio;
  r.fp_op = kernel.spec.fp_op;
  r.fp_per_mem = kernel.spec.kind == KernelKind::mixed ? kernel.spec.fp_per_mem : 0;
  r.array_bytes = kernel.spec.array_bytes;
  r.warnings = kernel.warnings;
  r.warnings.insert(r.warnings.end(), freq.warnings.begin(), freq.warnings.end());
  r.warnings.insert(r.warnings.end(), res.warnings.begin(), res.warnings.end());
  return r;
}

}  // namespace carm

#endif  // CARM_HARNESS_HPP_
