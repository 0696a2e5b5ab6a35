#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "carm/topology.hpp"

using namespace carm;

namespace {

/// Skylake-X 18-core leaf-4 sub-leaves: 32 KiB L1d, 32 KiB L1i, 1 MiB L2, 24.75 MiB L3.
std::vector<CpuidRegs> skx_leaves() {
  return {{0x00004021u, 0x01C0003Fu, 63u, 0u},
          {0x00004022u, 0x01C0003Fu, 63u, 0u},
          {0x00004043u, 0x03C0003Fu, 1023u, 0u},
          {0x000FC063u, 0x0280003Fu, 36863u, 0u},
          {0u, 0u, 0u, 0u}};
}

}  // namespace

TEST(Cpuid, DecodesSkylakeLeaves) {
  auto t = topology_from_cpuid(skx_leaves(), 18);
  EXPECT_EQ(t.l1d_kib, 32u);
  EXPECT_EQ(t.l2_kib, 1024u);
  EXPECT_EQ(t.l3_total_kib, 25344u);
  EXPECT_EQ(t.l3_slice_kib, 1408u);
  EXPECT_EQ(t.source, TopologySource::cpuid);
}

TEST(Cpuid, LeafDecoding) {
  auto c = decode_cache_leaf(skx_leaves()[3]);
  EXPECT_EQ(c.level, 3u);
  EXPECT_EQ(c.type, 3u);
  EXPECT_EQ(c.bytes, 25344u * 1024u);
  EXPECT_EQ(c.max_sharing_threads, 64u);
}

TEST(Config, ParsesSizesAndUnits) {
  auto t = topology_from_config(parse_key_value("# thunderx2\nl1=32\nl2 = 256K\nL3=32M\nl3_slice=1M\n"));
  EXPECT_EQ(t.l1d_kib, 32u);
  EXPECT_EQ(t.l2_kib, 256u);
  EXPECT_EQ(t.l3_total_kib, 32768u);
  EXPECT_EQ(t.l3_slice_kib, 1024u);
  EXPECT_EQ(t.source, TopologySource::config_file);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_key_value("l1 32\n"), ParseError);
  try {
    parse_key_value("l1=32\nbogus\n");
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(topology_from_config(parse_key_value("l1=32X\n")), ConfigError);
  EXPECT_THROW(topology_from_config(parse_key_value("foo=1\n")), ConfigError);
  EXPECT_THROW(topology_from_config(parse_key_value("l1=2048\nl2=1024\n")), ConfigError);
}

TEST(Overrides, CliWinsOverConfig) {
  auto t = topology_from_config(parse_key_value("l1=32\nl2=512\nl3=8192\n"));
  CacheOverrides o;
  o.l2_kib = 1024;
  auto u = apply_overrides(t, o);
  EXPECT_EQ(u.l2_kib, 1024u);
  EXPECT_EQ(u.l1d_kib, 32u);
  EXPECT_EQ(u.source, TopologySource::cli_override);
  EXPECT_EQ(apply_overrides(t, {}), t);
}

TEST(Detect, ConfigFileAndOverrides) {
  auto p = std::filesystem::temp_directory_path() / "carm_topology_test.cfg";
  std::ofstream(p) << "l1=64\nl2=1024\nl3=16384\n";
  CacheOverrides o;
  o.l3_slice_kib = 2048;
  auto t = detect_cache_topology(p, o);
  EXPECT_EQ(t.l1d_kib, 64u);
  EXPECT_EQ(t.l3_slice_kib, 2048u);
  EXPECT_THROW(detect_cache_topology(std::filesystem::path("/nonexistent/carm.cfg")), ConfigError);
}

TEST(Detect, HostCpuidIsConsistent) {
  if (!cpuid_available()) GTEST_SKIP() << "no cpuid";
  auto t = detect_cache_topology();
  EXPECT_GT(t.l1d_kib, 0u);
  EXPECT_GE(t.l2_kib, t.l1d_kib);
  EXPECT_EQ(t, topology_from_cpuid(read_cpuid_cache_leaves(), physical_cores_in_package()));
}

TEST(WorkingSet, LevelSizes) {
  CacheTopology t{32, 1024, 25344, 1408, TopologySource::cpuid};
  EXPECT_EQ(working_set_for_level(t, MemLevel::L1), 16384u);
  EXPECT_EQ(working_set_for_level(t, MemLevel::L2), 185363u);
  std::uint64_t l3 = working_set_for_level(t, MemLevel::L3);
  EXPECT_GT(l3, 1024u * 1024u);
  EXPECT_LE(l3, 1408u * 1024u);
  EXPECT_EQ(working_set_for_level(t, MemLevel::DRAM), 512ull << 20);
  EXPECT_THROW(working_set_for_level(CacheTopology{}, MemLevel::L2), ConfigError);
  EXPECT_EQ(round_working_set(16384, 96), 16320u);
  EXPECT_EQ(round_working_set(10, 96), 96u);
}
