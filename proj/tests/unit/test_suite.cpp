#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "carm/simulated_executor.hpp"
#include "carm/suite.hpp"

using namespace carm;

namespace {

struct Fixture {
  SimulatedExecutor ex;
  SuiteContext ctx;
  std::vector<Progress> seen;

  Fixture() {
    ctx.executor = &ex;
    ctx.topology = ex.machine().topology();
    ctx.available_isas = catalog_isas(Arch::x86_64);
    ctx.harness.repetitions = 3;
    ctx.machine = {"sim", "preset"};
    ctx.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
    ctx.make_run_id = [] { return std::string("run0"); };
    ctx.progress = [this](const Progress& p) { seen.push_back(p); };
  }

  void expect_monotonic_progress() const {
    ASSERT_FALSE(seen.empty());
    for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_GE(seen[i].fraction, seen[i - 1].fraction);
    EXPECT_EQ(seen.back().fraction, 1.0);
  }
};

}  // namespace

TEST(TestKinds, ParseAndSuite) {
  EXPECT_EQ(parse_test("roofline"), TestKind::roofline);
  EXPECT_EQ(parse_test("MEM"), TestKind::MEM);
  EXPECT_EQ(parse_test("mixedl2"), TestKind::mixedL2);
  EXPECT_FALSE(parse_test("L4"));
  EXPECT_EQ(suite_of(TestKind::MEM), Suite::memory_curve);
  EXPECT_EQ(suite_of(TestKind::mixedDRAM), Suite::mixed);
  EXPECT_EQ(suite_of(TestKind::FP), Suite::roofline);
  EXPECT_EQ(suite_of(TestKind::L3), Suite::roofline);
}

TEST(Config, Validation) {
  SuiteConfig c;
  c.threads = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.ratio = {0, 0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.fp_per_mem = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.verbosity = 4;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Roofline, RecordsArchivedWithProgress) {
  Fixture f;
  auto dir = std::filesystem::temp_directory_path() / "carm_suite_roofline";
  std::filesystem::remove_all(dir);
  ResultArchive archive(dir);
  f.ctx.archive = &archive;
  SuiteConfig cfg;
  cfg.isa = Isa::avx2;
  auto out = run_suite(f.ctx, cfg);
  ASSERT_EQ(out.roofline.size(), 1u);
  EXPECT_EQ(out.record_ids(), std::vector<std::string>{out.roofline[0].header.id});
  EXPECT_EQ(archive.read_roofline(), out.roofline);
  EXPECT_EQ(out.roofline[0].header.run_id, "run0");
  for (MemLevel l : kAllLevels) EXPECT_TRUE(out.roofline[0].level(l)) << to_string(l);
  f.expect_monotonic_progress();
}

TEST(Roofline, SingleTestLimitsOutput) {
  Fixture f;
  SuiteConfig cfg;
  cfg.isa = Isa::sse;
  cfg.test = TestKind::FP;
  auto r = run_roofline_suite(f.ctx, cfg).at(0);
  EXPECT_TRUE(r.fp);
  EXPECT_FALSE(r.level(MemLevel::L1));
}

TEST(Roofline, UnsupportedIsaNamesSupportedSet) {
  Fixture f;
  SuiteConfig cfg;
  cfg.isa = Isa::neon;
  try {
    run_roofline_suite(f.ctx, cfg);
    FAIL();
  } catch (const UnsupportedIsaError& e) {
    EXPECT_NE(std::string(e.what()).find("avx512"), std::string::npos);
  }
  f.ctx.available_isas = {Isa::scalar, Isa::sse};
  cfg.isa = Isa::avx512;
  EXPECT_THROW(run_roofline_suite(f.ctx, cfg), UnsupportedIsaError);
}

TEST(MemoryCurve, SizesSpanTwoKibToHalfGib) {
  auto s = memory_curve_sizes();
  EXPECT_EQ(s.size(), 73u);
  EXPECT_EQ(s.front(), 2048u);
  EXPECT_EQ(s.back(), 512ull << 20);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s[i], s[i - 1]);
}

TEST(MemoryCurve, BandwidthStepsDownThroughHierarchy) {
  Fixture f;
  SuiteConfig cfg;
  cfg.test = TestKind::MEM;
  cfg.isa = Isa::avx512;
  auto recs = run_memory_curve(f.ctx, cfg, {4096, 16384, 262144, 1200u << 10, 256u << 20});
  ASSERT_EQ(recs.size(), 1u);
  const auto& p = recs[0].points;
  ASSERT_EQ(p.size(), 5u);
  EXPECT_EQ(p[1].array_bytes, 16320u);
  EXPECT_NEAR(p[0].bandwidth_gbps, p[1].bandwidth_gbps, 1e-6 * p[0].bandwidth_gbps);
  EXPECT_GT(p[1].bandwidth_gbps, p[2].bandwidth_gbps);
  EXPECT_GT(p[2].bandwidth_gbps, p[3].bandwidth_gbps);
  EXPECT_GT(p[3].bandwidth_gbps, p[4].bandwidth_gbps);
  f.expect_monotonic_progress();
}

TEST(Mixed, RecordsCarryExactNominalAi) {
  Fixture f;
  SuiteConfig cfg;
  cfg.test = TestKind::mixedL1;
  cfg.isa = Isa::avx2;
  auto recs = run_mixed_suite(f.ctx, cfg);
  ASSERT_EQ(recs.size(), 6u);
  for (unsigned k = 0; k < 6; ++k) {
    Rational ai = Rational::make(recs[k].ai_num, recs[k].ai_den);
    EXPECT_EQ(ai, Rational::make(k + 1, 24));
    EXPECT_GT(recs[k].gflops, 0);
  }
  f.expect_monotonic_progress();
  f.seen.clear();
  cfg.fp_op = FpOp::fma;
  recs = run_mixed_suite(f.ctx, cfg);
  EXPECT_EQ(Rational::make(recs.front().ai_num, recs.front().ai_den), Rational::make(1, 12));
  EXPECT_EQ(Rational::make(recs.back().ai_num, recs.back().ai_den), Rational::make(1, 2));
  f.expect_monotonic_progress();
}

TEST(Mixed, ExplicitRatioAndLevel) {
  Fixture f;
  SuiteConfig cfg;
  cfg.test = TestKind::mixedL2;
  cfg.isa = Isa::avx512;
  cfg.fp_per_mem = 3;
  auto recs = run_mixed_suite(f.ctx, cfg);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].level, MemLevel::L2);
  EXPECT_EQ(recs[0].fp_per_mem, 3u);
  cfg.test = TestKind::L1;
  EXPECT_THROW(run_mixed_suite(f.ctx, cfg), ConfigError);
}

TEST(Verbosity, LevelsGateOutput) {
  Fixture f;
  std::ostringstream log;
  f.ctx.log = &log;
  SuiteConfig cfg;
  cfg.isa = Isa::avx512;
  cfg.test = TestKind::FP;
  run_roofline_suite(f.ctx, cfg);
  EXPECT_TRUE(log.str().empty());
  cfg.verbosity = 3;
  run_roofline_suite(f.ctx, cfg);
  EXPECT_FALSE(log.str().empty());
}

TEST(Context, MissingExecutorIsConfigError) {
  SuiteContext ctx;
  EXPECT_THROW(run_roofline_suite(ctx, SuiteConfig{}), ConfigError);
}
