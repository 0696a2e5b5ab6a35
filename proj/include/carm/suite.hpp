#ifndef CARM_SUITE_HPP_
#define CARM_SUITE_HPP_

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "carm/codegen.hpp"
#include "carm/harness.hpp"
#include "carm/records.hpp"
#include "carm/report.hpp"
#include "carm/topology.hpp"

namespace carm {

enum class TestKind { roofline, L1, L2, L3, DRAM, FP, MEM, mixedL1, mixedL2, mixedL3, mixedDRAM };

inline constexpr std::array kAllTests{TestKind::roofline, TestKind::L1,      TestKind::L2,      TestKind::L3,
                                      TestKind::DRAM,     TestKind::FP,      TestKind::MEM,     TestKind::mixedL1,
                                      TestKind::mixedL2,  TestKind::mixedL3, TestKind::mixedDRAM};

constexpr std::string_view to_string(TestKind t) {
  switch (t) {
    case TestKind::roofline: return "roofline";
    case TestKind::L1: return "L1";
    case TestKind::L2: return "L2";
    case TestKind::L3: return "L3";
    case TestKind::DRAM: return "DRAM";
    case TestKind::FP: return "FP";
    case TestKind::MEM: return "MEM";
    case TestKind::mixedL1: return "mixedL1";
    case TestKind::mixedL2: return "mixedL2";
    case TestKind::mixedL3: return "mixedL3";
    case TestKind::mixedDRAM: return "mixedDRAM";
  }
  return "?";
}

/// Case-insensitive.
inline std::optional<TestKind> parse_test(std::string_view s) {
  auto lower = [](std::string_view v) {
    std::string o(v);
    for (auto& c : o) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return o;
  };
  for (TestKind t : kAllTests)
    if (lower(to_string(t)) == lower(s)) return t;
  return std::nullopt;
}

inline bool is_mixed(TestKind t) {
  return t == TestKind::mixedL1 || t == TestKind::mixedL2 || t == TestKind::mixedL3 || t == TestKind::mixedDRAM;
}

inline std::optional<MemLevel> target_level(TestKind t) {
  switch (t) {
    case TestKind::L1:
    case TestKind::mixedL1: return MemLevel::L1;
    case TestKind::L2:
    case TestKind::mixedL2: return MemLevel::L2;
    case TestKind::L3:
    case TestKind::mixedL3: return MemLevel::L3;
    case TestKind::DRAM:
    case TestKind::mixedDRAM: return MemLevel::DRAM;
    default: return std::nullopt;
  }
}

struct SuiteConfig {
  TestKind test = TestKind::roofline;
  std::optional<Isa> isa;  // nullopt: auto
  Precision precision = Precision::dp;
  unsigned threads = 1;
  LdStRatio ratio{2, 1};
  FpOp fp_op = FpOp::add;
  std::optional<unsigned> fp_per_mem;  // mixed: nullopt sweeps 1..2 x ratio period
  int verbosity = 0;
  bool plot = false;
  std::map<MemLevel, std::uint64_t> working_set_bytes;  // per-level overrides

  void validate() const {
    if (threads == 0) throw ConfigError("threads must be >= 1");
    if (ratio.period() == 0) throw ConfigError("load/store ratio needs at least one instruction");
    if (fp_per_mem && *fp_per_mem == 0) throw ConfigError("fpldst must be >= 1");
    if (verbosity < 0 || verbosity > 3) throw ConfigError("verbosity must be 0..3");
  }
  friend bool operator==(const SuiteConfig&, const SuiteConfig&) = default;
};

struct Progress {
  std::string current;  // benchmark being run
  double fraction = 0;  // 0..1 across the whole suite
};

using ProgressFn = std::function<void(const Progress&)>;

/// Host name plus CPU model from /proc/cpuinfo.
inline MachineIdentity detect_machine_identity() {
  MachineIdentity m;
  char host[256] = {};
  m.hostname = gethostname(host, sizeof host - 1) == 0 ? host : "unknown";
  std::ifstream f("/proc/cpuinfo");
  std::string line;
  std::string fallback;
  while (std::getline(f, line)) {
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, line.find_last_not_of(" \t", colon - 1) + 1);
    std::string value = colon + 2 <= line.size() ? line.substr(colon + 2) : "";
    if (key == "model name" || key == "Model Name") {
      m.cpu_model = value;
      break;
    }
    if ((key == "uarch" || key == "CPU part" || key == "isa") && fallback.empty()) fallback = key + " " + value;
  }
  if (m.cpu_model.empty()) m.cpu_model = fallback.empty() ? "unknown" : fallback;
  return m;
}

inline std::string iso8601_utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline std::string random_run_id() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << rd() << std::setw(4) << (counter++ & 0xffff);
  return os.str();
}

/// Everything a suite run needs besides its configuration.
struct SuiteContext {
  Executor* executor = nullptr;
  CacheTopology topology;
  HarnessOptions harness;
  std::vector<Isa> available_isas;  // what "auto" expands to
  ResultArchive* archive = nullptr;
  MachineIdentity machine;
  ProgressFn progress;
  std::function<std::string()> clock = iso8601_utc_now;
  std::function<std::string()> make_run_id = random_run_id;
  std::ostream* log = nullptr;  // verbosity output
};

namespace detail {

inline Executor& need_executor(const SuiteContext& ctx) {
  if (!ctx.executor) throw ConfigError("suite context has no executor");
  return *ctx.executor;
}

inline std::vector<Isa> isas_for(const SuiteContext& ctx, const SuiteConfig& cfg) {
  Arch arch = need_executor(ctx).arch();
  if (cfg.isa) {
    auto cat = catalog_isas(arch);
    if (std::find(cat.begin(), cat.end(), *cfg.isa) == cat.end())
      throw UnsupportedIsaError("ISA " + std::string(to_string(*cfg.isa)) + " is not available on " +
                                std::string(to_string(arch)) + "; supported: " + supported_isa_list(arch));
    if (!ctx.available_isas.empty() &&
        std::find(ctx.available_isas.begin(), ctx.available_isas.end(), *cfg.isa) == ctx.available_isas.end()) {
      std::string list;
      for (Isa i : ctx.available_isas) list += (list.empty() ? "" : ", ") + std::string(to_string(i));
      throw UnsupportedIsaError("ISA " + std::string(to_string(*cfg.isa)) + " is not supported by this CPU; detected: " +
                                list);
    }
    return {*cfg.isa};
  }
  if (!ctx.available_isas.empty()) return ctx.available_isas;
  return {Isa::scalar};
}

inline void say(const SuiteContext& ctx, const SuiteConfig& cfg, int level, const std::string& msg) {
  if (ctx.log && cfg.verbosity >= level) *ctx.log << msg << "\n";
}

inline RecordHeader make_header(const SuiteContext& ctx, const std::string& run_id, const std::string& suffix) {
  return {run_id + "-" + suffix, run_id, ctx.machine, ctx.clock(), need_executor(ctx).name()};
}

}  // namespace detail

/// Per-thread working set for `level`, honouring overrides, rounded to whole
/// ld/st ratio blocks of the ISA's memory instruction size.
inline std::uint64_t level_working_set(const SuiteContext& ctx, const SuiteConfig& cfg, MemLevel level,
                                       const IsaDescriptor& d) {
  auto it = cfg.working_set_bytes.find(level);
  std::uint64_t bytes = it != cfg.working_set_bytes.end() ? it->second
                                                          : working_set_for_level(ctx.topology, level, cfg.threads);
  return round_working_set(bytes, static_cast<std::uint64_t>(cfg.ratio.period()) * emitted_mem_bytes(d));
}

inline KernelSpec memory_spec(const SuiteConfig& cfg, Isa isa, Arch arch, std::uint64_t bytes) {
  KernelSpec s;
  s.kind = KernelKind::memory;
  s.isa = isa;
  s.precision = cfg.precision;
  s.arch = arch;
  s.ratio = cfg.ratio;
  s.array_bytes = bytes;
  s.threads = cfg.threads;
  return s;
}

inline KernelSpec fp_spec(const SuiteConfig& cfg, Isa isa, Arch arch, FpOp op) {
  KernelSpec s;
  s.kind = KernelKind::fp;
  s.isa = isa;
  s.precision = cfg.precision;
  s.arch = arch;
  s.fp_op = op;
  s.threads = cfg.threads;
  return s;
}

/// Roofs for the requested levels plus the configured FP ceiling and FMA, for one ISA.
inline RooflineRecord run_roofline_for_isa(const SuiteContext& ctx, const SuiteConfig& cfg, Isa isa,
                                           const std::vector<MemLevel>& levels, bool with_fp,
                                           const std::string& run_id, double progress_base = 0,
                                           double progress_span = 1) {
  Executor& ex = detail::need_executor(ctx);
  const Arch arch = ex.arch();
  RooflineRecord rec;
  rec.header = detail::make_header(ctx, run_id, std::string(to_string(isa)));
  rec.isa = isa;
  rec.precision = cfg.precision;
  rec.threads = cfg.threads;
  rec.ratio = cfg.ratio;
  const IsaDescriptor d = lookup_isa(isa, cfg.precision, arch);

  const std::size_t steps = levels.size() + (with_fp ? 2 : 0) + 1;
  std::size_t step = 0;
  auto tick = [&](const std::string& what) {
    if (ctx.progress) ctx.progress({what, progress_base + progress_span * static_cast<double>(step) / steps});
    ++step;
  };

  tick("frequency " + std::string(to_string(isa)));
  FrequencyReading freq = measure_frequency(ex, cfg.threads, ctx.harness);
  rec.frequency_ghz = freq.real_ghz;
  rec.warnings.insert(rec.warnings.end(), freq.warnings.begin(), freq.warnings.end());
  detail::say(ctx, cfg, 2, "frequency: " + csv::format_double(freq.real_ghz) + " GHz");

  for (MemLevel lvl : levels) {
    std::string name = std::string(to_string(lvl)) + " " + std::string(to_string(isa));
    tick(name);
    try {
      std::uint64_t bytes = level_working_set(ctx, cfg, lvl, d);
      auto ks = generate_memory_kernel(memory_spec(cfg, isa, arch, bytes), d);
      auto r = run_benchmark(ex, ks, cfg.threads, ctx.harness, &freq);
      rec.level(lvl) = LevelResult{r.bandwidth_gbps, r.ipc, bytes};
      for (auto& w : r.warnings) rec.warnings.push_back(name + ": " + w);
      detail::say(ctx, cfg, 3,
                  name + ": " + csv::format_double(r.bandwidth_gbps) + " GB/s, IPC " + csv::format_double(r.ipc) +
                      ", " + std::to_string(bytes) + " B per thread, " + std::to_string(r.outer_iters) +
                      " outer iterations");
    } catch (const Error& e) {
      rec.warnings.push_back(name + " not measured: " + e.what());
    }
  }
  if (with_fp) {
    std::vector<std::pair<FpOp, std::optional<CeilingResult>*>> fps{{cfg.fp_op, &rec.fp}, {FpOp::fma, &rec.fma}};
    for (auto& [op, slot] : fps) {
      std::string name = "FP " + std::string(to_string(op)) + " " + std::string(to_string(isa));
      tick(name);
      try {
        auto ks = generate_fp_kernel(fp_spec(cfg, isa, arch, op), d);
        auto r = run_benchmark(ex, ks, cfg.threads, ctx.harness, &freq);
        *slot = CeilingResult{op, r.gflops, r.ipc};
        for (auto& w : r.warnings) rec.warnings.push_back(name + ": " + w);
        detail::say(ctx, cfg, 3,
                    name + ": " + csv::format_double(r.gflops) + " GFLOP/s, IPC " + csv::format_double(r.ipc));
      } catch (const Error& e) {
        rec.warnings.push_back(name + " not measured: " + e.what());
      }
    }
  }
  return rec;
}

/// Roofline (or single-level / FP) runs: one record per ISA, persisted when an
/// archive is attached.
inline std::vector<RooflineRecord> run_roofline_suite(const SuiteContext& ctx, const SuiteConfig& cfg) {
  cfg.validate();
  std::vector<MemLevel> levels;
  bool with_fp = true;
  switch (cfg.test) {
    case TestKind::roofline: levels.assign(kAllLevels.begin(), kAllLevels.end()); break;
    case TestKind::FP: break;
    case TestKind::L1:
    case TestKind::L2:
    case TestKind::L3:
    case TestKind::DRAM:
      levels = {*target_level(cfg.test)};
      with_fp = false;
      break;
    default: throw ConfigError("test " + std::string(to_string(cfg.test)) + " is not a roofline test");
  }
  auto isas = detail::isas_for(ctx, cfg);
  std::string run_id = ctx.make_run_id();
  std::vector<RooflineRecord> out;
  for (std::size_t i = 0; i < isas.size(); ++i) {
    double span = 1.0 / static_cast<double>(isas.size());
    auto rec = run_roofline_for_isa(ctx, cfg, isas[i], levels, with_fp, run_id, span * static_cast<double>(i), span);
    if (cfg.test != TestKind::roofline)
      rec.warnings.push_back("partial record: test " + std::string(to_string(cfg.test)) + " measures only part of the roofline");
    if (ctx.archive) ctx.archive->write(rec);
    out.push_back(std::move(rec));
  }
  if (ctx.progress) ctx.progress({"done", 1.0});
  return out;
}

inline constexpr std::uint64_t kCurveMinBytes = 2ULL << 10;
inline constexpr std::uint64_t kCurveMaxBytes = 512ULL << 20;
inline constexpr unsigned kCurvePointsPerOctave = 4;

/// 2 KiB .. 512 MiB, four points per octave (73 sizes).
inline std::vector<std::uint64_t> memory_curve_sizes() {
  std::vector<std::uint64_t> out;
  const double octaves = std::log2(static_cast<double>(kCurveMaxBytes) / static_cast<double>(kCurveMinBytes));
  const auto n = static_cast<unsigned>(std::lround(octaves * kCurvePointsPerOctave));
  for (unsigned k = 0; k <= n; ++k)
    out.push_back(static_cast<std::uint64_t>(
        std::llround(static_cast<double>(kCurveMinBytes) * std::exp2(static_cast<double>(k) / kCurvePointsPerOctave))));
  return out;
}

/// Bandwidth against working-set size, one record per ISA.
inline std::vector<MemoryCurveRecord> run_memory_curve(const SuiteContext& ctx, const SuiteConfig& cfg,
                                                       std::vector<std::uint64_t> sizes = memory_curve_sizes()) {
  cfg.validate();
  Executor& ex = detail::need_executor(ctx);
  auto isas = detail::isas_for(ctx, cfg);
  std::string run_id = ctx.make_run_id();
  std::vector<MemoryCurveRecord> out;
  const double total = static_cast<double>(isas.size() * sizes.size());
  std::size_t done = 0;
  for (Isa isa : isas) {
    const IsaDescriptor d = lookup_isa(isa, cfg.precision, ex.arch());
    MemoryCurveRecord rec;
    rec.header = detail::make_header(ctx, run_id, std::string(to_string(isa)));
    rec.isa = isa;
    rec.precision = cfg.precision;
    rec.threads = cfg.threads;
    rec.ratio = cfg.ratio;
    FrequencyReading freq = measure_frequency(ex, cfg.threads, ctx.harness);
    rec.warnings = freq.warnings;
    const std::uint64_t granule = static_cast<std::uint64_t>(cfg.ratio.period()) * emitted_mem_bytes(d);
    for (std::uint64_t size : sizes) {
      std::string name = "MEM " + std::string(to_string(isa)) + " " + std::to_string(size) + " B";
      if (ctx.progress) ctx.progress({name, static_cast<double>(done++) / total});
      try {
        std::uint64_t bytes = round_working_set(size, granule);
        auto ks = generate_memory_kernel(memory_spec(cfg, isa, ex.arch(), bytes), d);
        auto r = run_benchmark(ex, ks, cfg.threads, ctx.harness, &freq);
        rec.points.push_back({size, bytes, r.bandwidth_gbps, r.ipc});
        detail::say(ctx, cfg, 3, name + ": " + csv::format_double(r.bandwidth_gbps) + " GB/s");
      } catch (const Error& e) {
        rec.warnings.push_back(name + " skipped: " + e.what());
      }
    }
    if (ctx.archive && !rec.points.empty()) ctx.archive->write(rec);
    out.push_back(std::move(rec));
  }
  if (ctx.progress) ctx.progress({"done", 1.0});
  return out;
}

/// FP instructions per ratio block swept by a mixed run.
inline std::vector<unsigned> mixed_sweep(const SuiteConfig& cfg) {
  if (cfg.fp_per_mem) return {*cfg.fp_per_mem};
  std::vector<unsigned> v;
  for (unsigned k = 1; k <= 2 * cfg.ratio.period(); ++k) v.push_back(k);
  return v;
}

/// Mixed kernels sized for the target level; one record (and AppPoint) per FP:mem ratio.
inline std::vector<MixedRecord> run_mixed_suite(const SuiteContext& ctx, const SuiteConfig& cfg) {
  cfg.validate();
  if (!is_mixed(cfg.test)) throw ConfigError("test " + std::string(to_string(cfg.test)) + " is not a mixed test");
  Executor& ex = detail::need_executor(ctx);
  const MemLevel level = *target_level(cfg.test);
  auto isas = detail::isas_for(ctx, cfg);
  auto sweep = mixed_sweep(cfg);
  std::string run_id = ctx.make_run_id();
  std::vector<MixedRecord> out;
  const double total = static_cast<double>(isas.size() * sweep.size());
  std::size_t done = 0;
  for (Isa isa : isas) {
    const IsaDescriptor d = lookup_isa(isa, cfg.precision, ex.arch());
    FrequencyReading freq = measure_frequency(ex, cfg.threads, ctx.harness);
    std::uint64_t bytes = level_working_set(ctx, cfg, level, d);
    for (unsigned k : sweep) {
      std::string name = std::string(to_string(cfg.test)) + " " + std::string(to_string(isa)) + " x" + std::to_string(k);
      if (ctx.progress) ctx.progress({name, static_cast<double>(done++) / total});
      KernelSpec s = memory_spec(cfg, isa, ex.arch(), bytes);
      s.kind = KernelKind::mixed;
      s.fp_op = cfg.fp_op;
      s.fp_per_mem = k;
      MixedRecord rec;
      rec.header = detail::make_header(ctx, run_id, std::string(to_string(isa)) + "-" + std::to_string(k));
      rec.isa = isa;
      rec.precision = cfg.precision;
      rec.threads = cfg.threads;
      rec.ratio = cfg.ratio;
      rec.level = level;
      rec.fp_op = cfg.fp_op;
      rec.fp_per_mem = k;
      rec.array_bytes = bytes;
      try {
        auto ks = generate_mixed_kernel(s, d);
        Rational ai = nominal_ai(ks.expected);
        rec.ai_num = ai.num;
        rec.ai_den = ai.den;
        rec.ai = static_cast<double>(ai.num) / static_cast<double>(ai.den);
        auto r = run_benchmark(ex, ks, cfg.threads, ctx.harness, &freq);
        rec.gflops = r.gflops;
        rec.bandwidth_gbps = r.bandwidth_gbps;
        rec.warnings = r.warnings;
        detail::say(ctx, cfg, 3,
                    name + ": AI " + csv::format_double(rec.ai) + ", " + csv::format_double(r.gflops) + " GFLOP/s");
      } catch (const Error& e) {
        detail::say(ctx, cfg, 1, name + " skipped: " + e.what());
        continue;
      }
      if (ctx.archive) ctx.archive->write(rec);
      out.push_back(std::move(rec));
    }
  }
  if (ctx.progress) ctx.progress({"done", 1.0});
  return out;
}

/// Which archive suite a test writes to.
inline Suite suite_of(TestKind t) {
  if (t == TestKind::MEM) return Suite::memory_curve;
  if (is_mixed(t)) return Suite::mixed;
  return Suite::roofline;
}

/// Records produced by one test run.
struct SuiteOutcome {
  std::vector<RooflineRecord> roofline;
  std::vector<MemoryCurveRecord> curves;
  std::vector<MixedRecord> mixed;

  std::vector<std::string> record_ids() const {
    std::vector<std::string> v;
    for (const auto& r : roofline) v.push_back(r.header.id);
    for (const auto& r : curves) v.push_back(r.header.id);
    for (const auto& r : mixed) v.push_back(r.header.id);
    return v;
  }
};

/// Dispatches to the roofline, memory-curve or mixed suite.
inline SuiteOutcome run_suite(const SuiteContext& ctx, const SuiteConfig& cfg) {
  SuiteOutcome o;
  switch (suite_of(cfg.test)) {
    case Suite::memory_curve: o.curves = run_memory_curve(ctx, cfg); break;
    case Suite::mixed: o.mixed = run_mixed_suite(ctx, cfg); break;
    default: o.roofline = run_roofline_suite(ctx, cfg); break;
  }
  return o;
}

}  // namespace carm

#endif  // CARM_SUITE_HPP_
