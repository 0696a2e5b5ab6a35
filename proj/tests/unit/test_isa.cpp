#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "carm/isa.hpp"

using namespace carm;

TEST(Catalog, IsasPerArch) {
  EXPECT_EQ(catalog_isas(Arch::x86_64), (std::vector<Isa>{Isa::scalar, Isa::sse, Isa::avx2, Isa::avx512}));
  EXPECT_EQ(catalog_isas(Arch::aarch64), (std::vector<Isa>{Isa::scalar, Isa::neon}));
  EXPECT_EQ(catalog_isas(Arch::riscv64), (std::vector<Isa>{Isa::scalar, Isa::rvv}));
}

TEST(Catalog, FlopsPerInstruction) {
  EXPECT_EQ(flops_per_instruction(Isa::avx512, Precision::dp, OpClass::fma, Arch::x86_64), 16u);
  EXPECT_EQ(flops_per_instruction(Isa::avx512, Precision::sp, OpClass::add, Arch::x86_64), 16u);
  EXPECT_EQ(flops_per_instruction(Isa::avx2, Precision::dp, OpClass::add, Arch::x86_64), 4u);
  EXPECT_EQ(flops_per_instruction(Isa::sse, Precision::dp, OpClass::mul, Arch::x86_64), 2u);
  EXPECT_EQ(flops_per_instruction(Isa::scalar, Precision::dp, OpClass::fma, Arch::x86_64), 2u);
  EXPECT_EQ(flops_per_instruction(Isa::neon, Precision::dp, OpClass::add, Arch::aarch64), 2u);
  EXPECT_EQ(flops_per_instruction(Isa::neon, Precision::sp, OpClass::fma, Arch::aarch64), 8u);
  EXPECT_THROW(flops_per_instruction(Isa::avx2, Precision::dp, OpClass::load, Arch::x86_64), DomainError);
}

TEST(Catalog, BytesPerMemInstruction) {
  EXPECT_EQ(bytes_per_mem_instruction(Isa::avx512, Precision::dp, Arch::x86_64), 64u);
  EXPECT_EQ(bytes_per_mem_instruction(Isa::avx2, Precision::sp, Arch::x86_64), 32u);
  EXPECT_EQ(bytes_per_mem_instruction(Isa::sse, Precision::dp, Arch::x86_64), 16u);
  EXPECT_EQ(bytes_per_mem_instruction(Isa::scalar, Precision::sp, Arch::x86_64), 4u);
  EXPECT_EQ(bytes_per_mem_instruction(Isa::neon, Precision::dp, Arch::aarch64), 16u);
}

TEST(Catalog, OffsetLimits) {
  EXPECT_EQ(lookup_isa(Isa::neon, Precision::dp, Arch::aarch64).max_inner_immediate, 4095u);
  EXPECT_EQ(lookup_isa(Isa::scalar, Precision::dp, Arch::riscv64).max_mem_offset, 2048u);
}

TEST(Catalog, UnknownAndForeignIsasRejected) {
  EXPECT_THROW(lookup_isa("avx1024", Precision::dp, Arch::x86_64), UnsupportedIsaError);
  EXPECT_THROW(lookup_isa("neon", Precision::dp, Arch::x86_64), UnsupportedIsaError);
  try {
    lookup_isa("rvv", Precision::dp, Arch::x86_64);
    FAIL();
  } catch (const UnsupportedIsaError& e) {
    EXPECT_NE(std::string(e.what()).find("scalar, sse, avx2, avx512"), std::string::npos);
  }
}

TEST(Catalog, RvvVectorLength) {
  EXPECT_EQ(vector_length_from_vlen(128, 64), 2u);
  EXPECT_EQ(vector_length_from_vlen(256, 32, 4), 4u);
  auto d = with_vector_bytes(lookup_isa(Isa::rvv, Precision::dp, Arch::riscv64), 32);
  EXPECT_EQ(d.elements(), 4u);
  EXPECT_THROW(with_vector_bytes(d, 24), ConfigError);
  EXPECT_THROW(with_vector_bytes(lookup_isa(Isa::avx2, Precision::dp, Arch::x86_64), 32), ConfigError);
}

TEST(Features, MapToIsas) {
  EXPECT_EQ(isas_from_features(Arch::x86_64, {"sse2", "avx2", "fma", "avx512f"}),
            (std::vector<Isa>{Isa::scalar, Isa::sse, Isa::avx2, Isa::avx512}));
  EXPECT_EQ(isas_from_features(Arch::x86_64, {"sse2", "avx2"}), (std::vector<Isa>{Isa::scalar, Isa::sse}));
  EXPECT_EQ(isas_from_features(Arch::aarch64, {"asimd"}), (std::vector<Isa>{Isa::scalar, Isa::neon}));
  EXPECT_EQ(isas_from_features(Arch::riscv64, {}), (std::vector<Isa>{Isa::scalar}));
}

TEST(Features, HostDetectionMatchesOsListing) {
  if (host_arch() != Arch::x86_64) GTEST_SKIP() << "cpuinfo flag spelling checked on x86-64 only";
  std::ifstream f("/proc/cpuinfo");
  std::string line;
  FeatureSet flags;
  while (std::getline(f, line)) {
    if (line.rfind("flags", 0) != 0) continue;
    std::istringstream ss(line.substr(line.find(':') + 1));
    std::string w;
    while (ss >> w) flags.insert(w);
    break;
  }
  ASSERT_FALSE(flags.empty());
  EXPECT_EQ(detect_supported_isas(), isas_from_features(Arch::x86_64, flags));
}
