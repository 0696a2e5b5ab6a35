#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "carm/cli.hpp"

using namespace carm;

namespace {

const std::filesystem::path kFixtures = CARM_FIXTURES;
const std::filesystem::path kGolden = CARM_GOLDEN;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("carm_cli_" + name);
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST(ParseArgs, Defaults) {
  auto v = parse_args({});
  EXPECT_EQ(v.action, CliAction::run);
  EXPECT_EQ(v.config, SuiteConfig{});
  EXPECT_EQ(v.config.test, TestKind::roofline);
  EXPECT_FALSE(v.config.isa);
  EXPECT_EQ(v.config.precision, Precision::dp);
  EXPECT_EQ(v.config.threads, 1u);
  EXPECT_EQ(v.config.ratio, (LdStRatio{2, 1}));
  EXPECT_EQ(v.config.fp_op, FpOp::add);
  EXPECT_EQ(v.executor, "native");
}

TEST(ParseArgs, RooflineAvx512Verbose) {
  auto v = parse_args({"--isa", "avx512", "-v", "3"});
  EXPECT_EQ(v.config.test, TestKind::roofline);
  EXPECT_EQ(v.config.isa, Isa::avx512);
  EXPECT_EQ(v.config.verbosity, 3);
}

TEST(ParseArgs, MemoryCurveWithPlot) {
  auto v = parse_args({"--test", "MEM", "--plot"});
  EXPECT_EQ(v.config.test, TestKind::MEM);
  EXPECT_TRUE(v.config.plot);
}

TEST(ParseArgs, MixedL1SingleRatio) {
  auto v = parse_args({"--test", "mixedL1", "--fpldst", "1"});
  EXPECT_EQ(v.config.test, TestKind::mixedL1);
  EXPECT_EQ(v.config.fp_per_mem, 1u);
  EXPECT_EQ(parse_args({"--test", "mixedL1", "-fpldst", "1"}), v);
}

TEST(ParseArgs, SpellingAliases) {
  auto a = parse_args({"--ld_st_ratio", "4:1"});
  EXPECT_EQ(a.config.ratio, (LdStRatio{4, 1}));
  EXPECT_EQ(parse_args({"-ldst", "4:1"}), a);
  EXPECT_EQ(parse_args({"--LD_ST_RATIO", "4:1"}), a);
  EXPECT_EQ(parse_args({"--ISA", "avx2"}).config.isa, Isa::avx2);
  EXPECT_EQ(parse_args({"--ld_st_ratio", "3"}).config.ratio, (LdStRatio{3, 1}));
  EXPECT_EQ(parse_args({"--only_ld"}).config.ratio, (LdStRatio{1, 0}));
  EXPECT_EQ(parse_args({"--only_st"}).config.ratio, (LdStRatio{0, 1}));
}

TEST(ParseArgs, UsageErrors) {
  EXPECT_THROW(parse_args({"--only_ld", "--only_st"}), UsageError);
  EXPECT_THROW(parse_args({"--test", "L4"}), UsageError);
  EXPECT_THROW(parse_args({"--isa", "mmx"}), UsageError);
  EXPECT_THROW(parse_args({"--precision", "hp"}), UsageError);
  EXPECT_THROW(parse_args({"--threads", "0"}), UsageError);
  EXPECT_THROW(parse_args({"-v", "4"}), UsageError);
  EXPECT_THROW(parse_args({"--ld_st_ratio", "a:b"}), UsageError);
  EXPECT_THROW(parse_args({"--executor", "qemu"}), UsageError);
  EXPECT_THROW(parse_args({"--bogus"}), UsageError);
  EXPECT_THROW(parse_args({"profile", "--dbi", "--pmu", "--", "/bin/true"}), UsageError);
}

TEST(ParseArgs, Subcommands) {
  auto p = parse_args({"profile", "--pmu", "--label", "spmv", "--operand_bytes", "64", "-v", "1", "--", "./app", "-n",
                       "3"});
  EXPECT_EQ(p.action, CliAction::profile);
  EXPECT_EQ(p.profile.mode, "pmu");
  EXPECT_EQ(p.profile.label, "spmv");
  EXPECT_EQ(p.profile.operand_bytes, 64u);
  EXPECT_EQ(p.config.verbosity, 1);
  EXPECT_EQ(p.profile.command, (std::vector<std::string>{"./app", "-n", "3"}));
  auto s = parse_args({"--executor", "simulated", "serve", "--port", "0"});
  EXPECT_EQ(s.action, CliAction::serve);
  EXPECT_EQ(s.port, 0);
  EXPECT_EQ(s.executor, "simulated");
}

TEST(Serialize, RoundTripsEveryFlag) {
  std::vector<std::vector<std::string>> lines{
      {},
      {"--isa", "avx512", "-v", "3"},
      {"--test", "MEM", "--plot"},
      {"--test", "mixedL2", "--fpldst", "2", "--inst", "fma", "--precision", "sp", "--threads", "4"},
      {"--only_st", "--l1", "48", "--l2", "2048", "--l3", "30720", "--l3_slice", "1280"},
      {"--config", "/etc/carm.cfg", "--results", "/tmp/r", "--executor", "simulated", "--repetitions", "16"},
      {"profile", "--dbi", "--backend", "sde", "--sde", "/opt/sde", "--replay", "r.txt", "--label", "x"},
      {"profile", "--dbi", "--dynamorio", "/opt/dr", "--dr_client", "/opt/libopcodes.so", "--", "./a", "b"},
      {"serve", "--host", "0.0.0.0", "--port", "9000"},
  };
  for (const auto& l : lines) {
    auto v = parse_args(l);
    auto canon = serialize_args(v);
    EXPECT_EQ(parse_args(canon), v) << ::testing::PrintToString(l);
    EXPECT_EQ(serialize_args(parse_args(canon)), canon);
  }
}

TEST(Help, MatchesGoldenFile) { EXPECT_EQ(cli_help(), slurp(kGolden / "help.txt")); }

TEST(Help, EnumeratesSupportedFlags) {
  std::set<std::string> flags;
  std::regex re("--[a-z_0-9]+");
  auto h = cli_help();
  for (auto it = std::sregex_iterator(h.begin(), h.end(), re); it != std::sregex_iterator(); ++it)
    flags.insert(it->str());
  const std::set<std::string> expected{"--help",  "--test",    "--isa",      "--precision", "--threads",
                                       "--ld_st_ratio", "--only_ld", "--only_st", "--inst", "--fpldst",
                                       "--verbose", "--plot", "--l1", "--l2", "--l3", "--l3_slice",
                                       "--config", "--results", "--executor", "--repetitions"};
  EXPECT_EQ(flags, expected);
  auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, h);
}

TEST(Main, SimulatedRooflinePrintsCsvPath) {
  auto dir = scratch("run");
  auto r = cli({"--executor", "simulated", "--repetitions", "2", "--isa", "avx512", "--results", dir.string(), "--plot"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("results: " + (dir / "Roofline" / "roofline.csv").string()), std::string::npos) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "Roofline" / "roofline.csv"));
  bool svg = false;
  for (const auto& e : std::filesystem::directory_iterator(dir / "Roofline")) svg |= e.path().extension() == ".svg";
  EXPECT_TRUE(svg);
}

TEST(Main, UnsupportedIsaExitsTwoWithList) {
  auto r = cli({"--executor", "simulated", "--isa", "rvv", "--results", scratch("rvv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("avx512"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"--only_ld", "--only_st"}).code, 2);
}

TEST(Main, ReplayedProfilePrintsPoint) {
  auto dir = scratch("profile");
  auto r = cli({"--results", dir.string(), "profile", "--dbi", "--backend", "sde", "--label", "spmv", "--replay",
                (kFixtures / "dbi" / "spmv_sde.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("point: spmv: AI "), std::string::npos) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "Applications" / "applications.csv"));
  auto bad = cli({"--results", dir.string(), "profile", "--dbi", "--replay", "/nonexistent.txt"});
  EXPECT_EQ(bad.code, 1);
}

TEST(Main, BinaryExitCodes) {
  auto dir = scratch("bin");
  std::string bin = CARM_BIN;
  EXPECT_EQ(std::system((bin + " --help >/dev/null").c_str()), 0);
  int rc = std::system((bin + " --executor simulated --isa neon --results " + dir.string() + " 2>/dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(rc), 2);
}
