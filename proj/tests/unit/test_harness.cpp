#include <gtest/gtest.h>

#include <random>

#include "carm/harness.hpp"
#include "carm/simulated_executor.hpp"

using namespace carm;

namespace {

/// Best per thread, median across threads, computed the slow way.
double brute_force_median_of_best(const std::vector<Sample>& s) {
  std::vector<unsigned> ids;
  for (const auto& x : s)
    if (std::find(ids.begin(), ids.end(), x.thread_id) == ids.end()) ids.push_back(x.thread_id);
  std::vector<double> bests;
  for (unsigned id : ids) {
    double b = std::numeric_limits<double>::infinity();
    for (const auto& x : s)
      if (x.thread_id == id && x.elapsed() < b) b = x.elapsed();
    bests.push_back(b);
  }
  for (std::size_t i = 0; i < bests.size(); ++i)
    for (std::size_t j = i + 1; j < bests.size(); ++j)
      if (bests[j] < bests[i]) std::swap(bests[i], bests[j]);
  std::size_t n = bests.size();
  return n % 2 ? bests[n / 2] : (bests[n / 2 - 1] + bests[n / 2]) / 2;
}

ExpectedCounts counts(std::uint64_t mem, unsigned bytes, std::uint64_t fp, unsigned flops) {
  ExpectedCounts e;
  e.loads_per_outer_iter = mem;
  e.mem_inst_per_outer_iter = mem;
  e.bytes_per_mem_inst = bytes;
  e.fp_inst_per_outer_iter = fp;
  e.flops_per_fp_inst = flops;
  return e;
}

}  // namespace

TEST(RealCycles, ExactProducts) {
  EXPECT_EQ(real_cycles(1000, 3.0, 2.0), 1500.0);
  EXPECT_EQ(real_cycles(2300, 2.3, 2.3), 2300.0);
  EXPECT_EQ(real_cycles(0, 1.0, 2.0), 0.0);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> cyc(0, 1ull << 40);
  std::uniform_real_distribution<double> ghz(0.5, 5.0);
  for (int i = 0; i < 10000; ++i) {
    double c = static_cast<double>(cyc(rng)), r = ghz(rng), n = ghz(rng);
    ASSERT_EQ(real_cycles(c, r, n), c * r / n);
  }
  EXPECT_THROW(real_cycles(1, 0, 1), DomainError);
  EXPECT_THROW(real_cycles(1, 1, -1), DomainError);
  EXPECT_THROW(real_cycles(-1, 1, 1), DomainError);
}

TEST(Aggregate, MatchesBruteForceReference) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<unsigned> nthreads(1, 8), nreps(1, 12);
  std::uniform_real_distribution<double> t(1e-4, 1e-2);
  auto e = counts(255, 64, 0, 0);
  FrequencyReading f;
  f.real_ghz = 3.0;
  for (int c = 0; c < 10000; ++c) {
    std::vector<Sample> s;
    unsigned th = nthreads(rng), reps = nreps(rng);
    for (unsigned r = 0; r < reps; ++r)
      for (unsigned i = 0; i < th; ++i) s.push_back({i, r, 0, t(rng), 0, TimeSource::wall_clock});
    std::shuffle(s.begin(), s.end(), rng);
    auto res = aggregate(s, e, f, 100);
    double med = brute_force_median_of_best(s);
    ASSERT_EQ(res.elapsed_best_s, med);
    ASSERT_EQ(res.threads, th);
    ASSERT_DOUBLE_EQ(res.bandwidth_gbps, th * 255.0 * 64 * 100 / med / 1e9);
  }
}

TEST(Aggregate, TscSamplesScaleByFrequencyRatio) {
  std::vector<Sample> s{{0, 0, 0, 0, 2300, TimeSource::tsc}, {0, 1, 0, 0, 4600, TimeSource::tsc}};
  FrequencyReading f;
  f.real_ghz = 3.0;
  f.nominal_ghz = 2.3;
  auto r = aggregate(s, counts(0, 0, 256, 2), f, 10);
  EXPECT_DOUBLE_EQ(r.elapsed_best_s, real_cycles(2300, 3.0, 2.3) / 3e9);
  EXPECT_DOUBLE_EQ(r.ipc, 2560.0 / 3000.0);
  f.nominal_ghz.reset();
  EXPECT_THROW(aggregate(s, counts(0, 0, 256, 2), f, 10), DomainError);
}

TEST(Aggregate, RejectsBadSamples) {
  FrequencyReading f;
  f.real_ghz = 1;
  EXPECT_THROW(aggregate({}, counts(1, 8, 0, 0), f, 1), DomainError);
  std::vector<Sample> mixed{{0, 0, 0, 1, 0, TimeSource::wall_clock}, {1, 0, 0, 0, 5, TimeSource::tsc}};
  EXPECT_THROW(aggregate(mixed, counts(1, 8, 0, 0), f, 1), DomainError);
  std::vector<Sample> zero{{0, 0, 0, 0, 0, TimeSource::wall_clock}};
  EXPECT_THROW(aggregate(zero, counts(1, 8, 0, 0), f, 1), DomainError);
}

TEST(Calibrate, LandsInsideWindow) {
  SimulatedExecutor ex;
  KernelSpec s;
  s.kind = KernelKind::memory;
  s.isa = Isa::avx512;
  s.arch = Arch::x86_64;
  s.array_bytes = 16320;
  auto k = generate_memory_kernel(s);
  ex.load(k);
  ex.prepare(1, k.spec.array_bytes);
  HarnessOptions o;
  auto n = calibrate_outer_iterations(ex, k, o);
  double t = ex.run(0, n).elapsed_s;
  EXPECT_GE(t, o.t_min_s);
  EXPECT_LE(t, o.t_max_s);
  o.max_probes = 2;
  EXPECT_THROW(calibrate_outer_iterations(ex, k, o), BenchmarkError);
  o.t_min_s = 0;
  EXPECT_THROW(calibrate_outer_iterations(ex, k, o), ConfigError);
}

TEST(Execute, SamplesPerThreadAndRepetition) {
  SimulatedExecutor ex;
  KernelSpec s;
  s.kind = KernelKind::fp;
  s.isa = Isa::avx2;
  s.arch = Arch::x86_64;
  auto k = generate_fp_kernel(s);
  ex.load(k);
  ex.prepare(4, 64);
  auto r = execute(ex, {k, 10, 4, {0, 1, 2, 3}, 5});
  EXPECT_EQ(r.samples.size(), 20u);
  EXPECT_TRUE(r.warnings.empty());
  EXPECT_THROW(execute(ex, {k, 10, 2, {0, 0}, 5}), ConfigError);
  EXPECT_THROW(execute(ex, {k, 10, 2, {0}, 5}), ConfigError);
}

TEST(Execute, PinningFailureIsAWarning) {
  SimulatedMachine m;
  m.pinning_fails = true;
  SimulatedExecutor ex(m);
  KernelSpec s;
  s.kind = KernelKind::fp;
  s.arch = Arch::x86_64;
  auto k = generate_fp_kernel(s);
  ex.load(k);
  ex.prepare(2, 64);
  auto r = execute(ex, {k, 10, 2, {0, 1}, 3});
  EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(Frequency, SimulatedClockRecovered) {
  SimulatedExecutor ex;
  auto f = measure_frequency(ex, 2);
  EXPECT_NEAR(f.real_ghz, 3.0, 1e-9);
  ASSERT_TRUE(f.nominal_ghz);
  EXPECT_NEAR(*f.nominal_ghz, 2.3, 1e-6);
  EXPECT_TRUE(f.warnings.empty());
}

TEST(Frequency, SpreadWarning) {
  SimulatedMachine m;
  m.per_thread_ghz = {3.0, 2.0};
  SimulatedExecutor ex(m);
  auto f = measure_frequency(ex, 2);
  EXPECT_FALSE(f.warnings.empty());
  EXPECT_GT(f.spread, 0.1);
}
