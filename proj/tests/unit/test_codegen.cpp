#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "carm/codegen.hpp"
#include "carm/verify.hpp"

using namespace carm;

namespace {

KernelSpec mem_spec(Isa isa, Arch arch, std::uint64_t bytes, LdStRatio ratio = {2, 1}) {
  KernelSpec s;
  s.kind = KernelKind::memory;
  s.isa = isa;
  s.arch = arch;
  s.ratio = ratio;
  s.array_bytes = bytes;
  return s;
}

KernelSpec mixed_spec(Isa isa, FpOp op, unsigned fp_per_mem) {
  KernelSpec s = mem_spec(isa, Arch::x86_64, 16320);
  s.kind = KernelKind::mixed;
  s.fp_op = op;
  s.fp_per_mem = fp_per_mem;
  return s;
}

bool have(const std::string& tool) { return std::system(("command -v " + tool + " >/dev/null 2>&1").c_str()) == 0; }

}  // namespace

TEST(Plan, UnrollRoundsToWholeRatioPeriods) {
  auto d = lookup_isa(Isa::avx512, Precision::dp, Arch::x86_64);
  auto p = plan_loops(mem_spec(Isa::avx512, Arch::x86_64, 16320), d);
  EXPECT_EQ(p.inner_unroll, 255u);
  EXPECT_EQ(p.inner_iters, 1u);
  EXPECT_EQ(p.remainder_inst, 0u);
  auto q = plan_loops(mem_spec(Isa::avx2, Arch::x86_64, 65536, {1, 0}), lookup_isa(Isa::avx2, Precision::dp, Arch::x86_64));
  EXPECT_EQ(q.inner_unroll, 256u);
  EXPECT_EQ(q.inner_iters, 8u);
}

TEST(Plan, CoversArrayExactlyOnce) {
  for (Arch a : kAllArchs)
    for (Isa isa : catalog_isas(a)) {
      auto d = lookup_isa(isa, Precision::dp, a);
      const std::uint64_t per = emitted_mem_bytes(d);
      for (std::uint64_t n : {1ull, 7ull, 300ull, 4097ull, 100000ull}) {
        auto p = plan_loops(mem_spec(isa, a, n * per), d);
        EXPECT_EQ(p.inner_unroll * p.inner_iters + p.remainder_inst, n) << to_string(isa) << " n=" << n;
        for (auto off : p.offsets) EXPECT_LT(off, d.max_mem_offset);
        EXPECT_TRUE(p.inner_iters <= d.max_inner_immediate || p.pointer_loaded_counter);
      }
    }
}

TEST(Plan, Aarch64LargeArraysUsePointerLoadedCounter) {
  auto d = lookup_isa(Isa::neon, Precision::dp, Arch::aarch64);
  auto p = plan_loops(mem_spec(Isa::neon, Arch::aarch64, 512ull << 20), d);
  EXPECT_GT(p.inner_iters, 4095u);
  EXPECT_TRUE(p.pointer_loaded_counter);
  auto small = plan_loops(mem_spec(Isa::neon, Arch::aarch64, 16384), d);
  EXPECT_FALSE(small.pointer_loaded_counter);
}

TEST(Plan, RejectsMisalignedArrays) {
  auto d = lookup_isa(Isa::avx2, Precision::dp, Arch::x86_64);
  EXPECT_THROW(plan_loops(mem_spec(Isa::avx2, Arch::x86_64, 100), d), ConfigError);
  EXPECT_THROW(plan_loops(mem_spec(Isa::avx2, Arch::x86_64, 0), d), ConfigError);
}

TEST(Generate, ExpectedCountsForL1LoadOnly) {
  auto ks = generate_memory_kernel(mem_spec(Isa::neon, Arch::aarch64, 16384, {1, 0}));
  EXPECT_EQ(ks.expected.loads_per_outer_iter, 1024u);
  EXPECT_EQ(ks.expected.stores_per_outer_iter, 0u);
  EXPECT_EQ(ks.expected.bytes_per_mem_inst, 16u);
  EXPECT_EQ(ks.file_name(), "kernel_memory_neon_dp_1-0.S");
}

TEST(Generate, FpKernelCounts) {
  KernelSpec s;
  s.kind = KernelKind::fp;
  s.isa = Isa::neon;
  s.arch = Arch::aarch64;
  auto ks = generate_fp_kernel(s);
  EXPECT_EQ(ks.expected.fp_inst_per_outer_iter, 256u);
  EXPECT_EQ(ks.expected.flops_per_fp_inst, 2u);
  EXPECT_EQ(ks.expected.mem_inst_per_outer_iter, 0u);
  s.fp_op = FpOp::fma;
  s.isa = Isa::avx512;
  s.arch = Arch::x86_64;
  EXPECT_EQ(generate_fp_kernel(s).expected.flops_per_fp_inst, 16u);
}

TEST(Generate, MixedNominalAiEndpointsAvx2) {
  std::vector<Rational> add, fma;
  for (unsigned k = 1; k <= 6; ++k) {
    add.push_back(nominal_ai(generate_mixed_kernel(mixed_spec(Isa::avx2, FpOp::add, k)).expected));
    fma.push_back(nominal_ai(generate_mixed_kernel(mixed_spec(Isa::avx2, FpOp::fma, k)).expected));
  }
  EXPECT_EQ(add.front(), Rational::make(1, 24));
  EXPECT_EQ(add.back(), Rational::make(1, 4));
  EXPECT_EQ(fma.front(), Rational::make(1, 12));
  EXPECT_EQ(fma.back(), Rational::make(1, 2));
  for (unsigned k = 0; k < 6; ++k) EXPECT_EQ(add[k], Rational::make(k + 1, 24));
}

TEST(Generate, DeterministicText) {
  auto a = generate_memory_kernel(mem_spec(Isa::avx512, Arch::x86_64, 1u << 20));
  auto b = generate_memory_kernel(mem_spec(Isa::avx512, Arch::x86_64, 1u << 20));
  EXPECT_EQ(a.assembly_text, b.assembly_text);
}

TEST(Generate, FrequencyProbeIsDependentChain) {
  auto p = generate_frequency_probe(Arch::x86_64);
  EXPECT_EQ(p.expected.int_add_per_outer_iter, kDefaultUnroll);
  EXPECT_TRUE(verify_kernel(p).match);
}

TEST(Generate, KernelsAssembleForEveryArch) {
  const bool cc = have("cc"), clang = have("clang");
  if (!cc && !clang) GTEST_SKIP() << "no assembler";
  auto dir = std::filesystem::temp_directory_path() / "carm_codegen_asm";
  std::filesystem::create_directories(dir);
  int checked = 0;
  for (Arch a : kAllArchs) {
    std::string cmd;
    if (a == Arch::x86_64 && host_arch() == Arch::x86_64 && cc)
      cmd = "cc -c";
    else if (clang)
      cmd = a == Arch::x86_64 ? "clang --target=x86_64-linux-gnu -c"
            : a == Arch::aarch64 ? "clang --target=aarch64-linux-gnu -c"
                                 : "clang --target=riscv64-linux-gnu -march=rv64gcv -c";
    else
      continue;
    for (Isa isa : catalog_isas(a))
      for (KernelKind k : {KernelKind::memory, KernelKind::mixed, KernelKind::fp}) {
        KernelSpec s = mem_spec(isa, a, isa == Isa::rvv ? 1u << 20 : 512u << 20);
        s.kind = k;
        s.fp_op = FpOp::fma;
        s.fp_per_mem = 3;
        auto ks = generate_kernel(s);
        auto f = dir / (std::string(to_string(a)) + "_" + ks.file_name());
        std::ofstream(f) << ks.assembly_text;
        std::string full = cmd + " " + f.string() + " -o " + (dir / "k.o").string() + " 2>&1";
        EXPECT_EQ(std::system(full.c_str()), 0) << full;
        ++checked;
      }
  }
  EXPECT_GT(checked, 0);
}
