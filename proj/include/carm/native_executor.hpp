#ifndef CARM_NATIVE_EXECUTOR_HPP_
#define CARM_NATIVE_EXECUTOR_HPP_

#include <dlfcn.h>
#include <sched.h>
#include <time.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#if defined(__x86_64__)
#include <x86intrin.h>
#endif

#include "carm/harness.hpp"
#include "carm/process.hpp"

namespace carm {

struct NativeOptions {
  std::string compiler = "cc";
  std::vector<std::string> extra_flags;
  std::filesystem::path work_dir;  // empty: a fresh directory under the system temp dir
  bool keep_files = false;
};

namespace detail {

inline double monotonic_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

inline std::uint64_t read_tsc() {
#if defined(__x86_64__)
  _mm_lfence();
  std::uint64_t t = __rdtsc();
  _mm_lfence();
  return t;
#else
  return 0;
#endif
}

inline int read_int_file(const std::filesystem::path& p, int fallback) {
  std::ifstream f(p);
  int v;
  return (f >> v) ? v : fallback;
}

/// Allowed logical CPUs ordered so one thread per physical core comes first,
/// SMT siblings afterwards, lowest ids first within each group.
inline std::vector<int> physical_first_cpu_order() {
  cpu_set_t set;
  CPU_ZERO(&set);
  std::vector<int> allowed;
  if (sched_getaffinity(0, sizeof set, &set) == 0) {
    for (int c = 0; c < CPU_SETSIZE; ++c)
      if (CPU_ISSET(c, &set)) allowed.push_back(c);
  }
  if (allowed.empty()) {
    long n = sysconf(_SC_NPROCESSORS_ONLN);
    for (int c = 0; c < n; ++c) allowed.push_back(c);
  }
  std::vector<std::tuple<int, int, int>> keyed;  // (sibling rank, cpu, ...)
  std::vector<std::pair<int, int>> seen_cores;   // (package, core)
  std::vector<int> rank_of_core;
  for (int c : allowed) {
    std::filesystem::path base = "/sys/devices/system/cpu/cpu" + std::to_string(c) + "/topology";
    std::pair<int, int> id{read_int_file(base / "physical_package_id", 0), read_int_file(base / "core_id", c)};
    auto it = std::find(seen_cores.begin(), seen_cores.end(), id);
    int rank;
    if (it == seen_cores.end()) {
      seen_cores.push_back(id);
      rank_of_core.push_back(1);
      rank = 0;
    } else {
      rank = rank_of_core[static_cast<std::size_t>(it - seen_cores.begin())]++;
    }
    keyed.emplace_back(rank, c, 0);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> out;
  for (auto& k : keyed) out.push_back(std::get<1>(k));
  return out;
}

struct AlignedFree {
  void operator()(void* p) const { std::free(p); }
};

}  // namespace detail

/// Assembles kernels with the system compiler driver into a shared object and
/// calls them through the fixed kernel signature.
class NativeExecutor : public Executor {
 public:
  using KernelFn = void (*)(void*, std::uint64_t, const std::uint64_t*);

  explicit NativeExecutor(NativeOptions opt = {}) : opt_(std::move(opt)) {
    if (!host_arch_supported()) throw ConfigError("native execution is not supported on this host architecture");
    if (opt_.work_dir.empty()) {
      std::string tmpl = (std::filesystem::temp_directory_path() / "carm-XXXXXX").string();
      if (!mkdtemp(tmpl.data())) throw ToolchainError("cannot create a temporary directory");
      opt_.work_dir = tmpl;
      owns_dir_ = true;
    } else {
      std::filesystem::create_directories(opt_.work_dir);
    }
  }
  ~NativeExecutor() override {
    unload();
    if (owns_dir_ && !opt_.keep_files) {
      std::error_code ec;
      std::filesystem::remove_all(opt_.work_dir, ec);
    }
  }
  NativeExecutor(const NativeExecutor&) = delete;
  NativeExecutor& operator=(const NativeExecutor&) = delete;

  std::string name() const override { return "native"; }
  Arch arch() const override { return host_arch(); }
  TimeSource time_source() const override {
    return host_arch() == Arch::x86_64 ? TimeSource::tsc : TimeSource::wall_clock;
  }

  /// Writes the .S file, builds the shared object and resolves the kernel symbol.
  void load(const KernelSource& kernel) override {
    if (kernel.isa.arch != host_arch())
      throw ToolchainError("cannot run " + std::string(to_string(kernel.isa.arch)) + " kernel on this host");
    unload();
    auto stem = "k" + std::to_string(++counter_) + "_" + kernel.file_name();
    auto src = opt_.work_dir / stem;
    auto so = opt_.work_dir / (stem + ".so");
    {
      std::ofstream f(src);
      f << kernel.assembly_text;
      if (!f) throw ToolchainError("cannot write " + src.string());
    }
    std::vector<std::string> cmd{opt_.compiler, "-shared", "-fPIC", "-nostdlib"};
    if (kernel.isa.isa == Isa::rvv) cmd.push_back("-march=rv64gcv");
    cmd.insert(cmd.end(), opt_.extra_flags.begin(), opt_.extra_flags.end());
    cmd.insert(cmd.end(), {"-o", so.string(), src.string()});
    auto res = run_process(cmd);
    if (res.exit_code != 0)
      throw ToolchainError("assembling " + kernel.file_name() + " failed (exit " + std::to_string(res.exit_code) +
                           "):\n" + res.output);
    handle_ = dlopen(so.c_str(), RTLD_NOW | RTLD_LOCAL);
    if (!handle_) throw ToolchainError(std::string("dlopen failed: ") + dlerror());
    fn_ = reinterpret_cast<KernelFn>(dlsym(handle_, std::string(kKernelSymbol).c_str()));
    if (!fn_) throw ToolchainError("symbol " + std::string(kKernelSymbol) + " missing from " + so.string());
    slot_ = kernel.plan.inner_iters;
    if (!opt_.keep_files) {
      std::error_code ec;
      std::filesystem::remove(src, ec);
      std::filesystem::remove(so, ec);
    }
  }

  /// One private, zeroed, 64-byte aligned array per thread.
  void prepare(unsigned threads, std::uint64_t array_bytes) override {
    std::uint64_t bytes = (std::max<std::uint64_t>(array_bytes, 64) + 63) / 64 * 64;
    arrays_.clear();
    for (unsigned t = 0; t < std::max(1u, threads); ++t) {
      void* p = std::aligned_alloc(64, bytes);
      if (!p) throw BenchmarkError("cannot allocate " + std::to_string(bytes) + " bytes");
      std::memset(p, 0, bytes);
      arrays_.emplace_back(p);
    }
  }

  bool pin_current_thread(int cpu) override {
    if (cpu < 0 || cpu >= CPU_SETSIZE) return false;
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    return sched_setaffinity(0, sizeof set, &set) == 0;
  }

  RunTiming run(unsigned thread, std::uint64_t outer_iters) override {
    if (!fn_) throw ToolchainError("no kernel loaded");
    if (thread >= arrays_.size()) throw ConfigError("thread index out of range");
    void* a = arrays_[thread].get();
    RunTiming t;
    t.start_s = detail::monotonic_seconds();
    std::uint64_t c0 = detail::read_tsc();
    fn_(a, outer_iters, &slot_);
    std::uint64_t c1 = detail::read_tsc();
    double end = detail::monotonic_seconds();
    t.elapsed_s = end - t.start_s;
    t.tsc_cycles = c1 - c0;
    return t;
  }

  std::vector<int> default_pinning(unsigned threads) const override {
    auto order = detail::physical_first_cpu_order();
    std::vector<int> v;
    for (unsigned i = 0; i < threads; ++i) {
      if (i < order.size())
        v.push_back(order[i]);
      else
        v.push_back((order.empty() ? 0 : order.back()) + static_cast<int>(i - order.size()) + 1);
    }
    return v;
  }

 private:
  void unload() {
    fn_ = nullptr;
    if (handle_) dlclose(handle_);
    handle_ = nullptr;
  }

  NativeOptions opt_;
  bool owns_dir_ = false;
  void* handle_ = nullptr;
  KernelFn fn_ = nullptr;
  std::uint64_t slot_ = 0;
  unsigned counter_ = 0;
  std::vector<std::unique_ptr<void, detail::AlignedFree>> arrays_;
};

}  // namespace carm

#endif  // CARM_NATIVE_EXECUTOR_HPP_
