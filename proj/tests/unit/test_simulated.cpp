#include <gtest/gtest.h>

#include "carm/simulated_executor.hpp"
#include "carm/suite.hpp"

using namespace carm;

namespace {

SuiteContext context(SimulatedExecutor& ex) {
  SuiteContext ctx;
  ctx.executor = &ex;
  ctx.topology = ex.machine().topology();
  ctx.available_isas = catalog_isas(Arch::x86_64);
  ctx.harness.repetitions = 8;
  ctx.machine = {"sim", "Skylake-X preset"};
  return ctx;
}

}  // namespace

TEST(SimulatedMachine, PresetTopology) {
  auto t = SimulatedMachine::skylake_x().topology();
  EXPECT_EQ(t.l1d_kib, 32u);
  EXPECT_EQ(t.l2_kib, 1024u);
  EXPECT_EQ(t.l3_total_kib, 25344u);
  EXPECT_EQ(t.l3_slice_kib, 1408u);
  EXPECT_EQ(t.source, TopologySource::preset);
}

TEST(SimulatedMachine, DeterministicTiming) {
  SimulatedExecutor a, b;
  KernelSpec s;
  s.kind = KernelKind::memory;
  s.isa = Isa::avx512;
  s.arch = Arch::x86_64;
  s.array_bytes = 16320;
  auto k = generate_memory_kernel(s);
  a.load(k);
  b.load(k);
  a.prepare(1, s.array_bytes);
  b.prepare(1, s.array_bytes);
  EXPECT_EQ(a.run(0, 1000).tsc_cycles, b.run(0, 1000).tsc_cycles);
}

TEST(SimulatedMachine, RejectsForeignKernels) {
  SimulatedExecutor ex;
  KernelSpec s;
  s.kind = KernelKind::fp;
  s.isa = Isa::neon;
  s.arch = Arch::aarch64;
  EXPECT_THROW(ex.load(generate_fp_kernel(s)), ToolchainError);
}

TEST(SimulatedPipeline, SkylakeRooflineOracle) {
  SimulatedExecutor ex;
  auto ctx = context(ex);
  SuiteConfig cfg;
  cfg.isa = Isa::avx512;
  auto recs = run_roofline_suite(ctx, cfg);
  ASSERT_EQ(recs.size(), 1u);
  const auto& r = recs[0];
  auto m = r.to_model();
  EXPECT_NEAR(ridge_point(m.peak_gflops(), m.fastest_roof().bandwidth_gbps), 0.1667, 1e-3);
  EXPECT_NEAR(r.level(MemLevel::L1)->ipc, 3.0, 1e-6);
  EXPECT_NEAR(r.fp->ipc, 2.0, 1e-6);
  EXPECT_NEAR(r.fma->ipc, 2.0, 1e-6);
  EXPECT_NEAR(r.fma->gflops, 96.0, 1e-6);
  EXPECT_NEAR(r.level(MemLevel::L1)->bandwidth_gbps, 576.0, 1e-3);
  EXPECT_NEAR(r.frequency_ghz, 3.0, 1e-9);
}

TEST(SimulatedPipeline, AutoRunsEveryCatalogIsa) {
  SimulatedExecutor ex;
  auto ctx = context(ex);
  auto recs = run_roofline_suite(ctx, SuiteConfig{});
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_EQ(recs[0].isa, Isa::scalar);
  EXPECT_EQ(recs[3].isa, Isa::avx512);
  for (const auto& r : recs) EXPECT_NEAR(r.fp->ipc, 2.0, 1e-6) << to_string(r.isa);
}

TEST(SimulatedPipeline, LoadOnlyL1UsesBothLoadPorts) {
  SimulatedExecutor ex;
  auto ctx = context(ex);
  SuiteConfig cfg;
  cfg.isa = Isa::avx512;
  cfg.test = TestKind::L1;
  cfg.ratio = {1, 0};
  auto recs = run_roofline_suite(ctx, cfg);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_NEAR(recs[0].level(MemLevel::L1)->ipc, 2.0, 1e-6);
  EXPECT_FALSE(recs[0].level(MemLevel::L2));
}
