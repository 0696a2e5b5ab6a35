#include <gtest/gtest.h>

#include "carm/verify.hpp"

using namespace carm;

namespace {

std::uint64_t size_for(const IsaDescriptor& d, std::uint64_t target) {
  std::uint64_t g = emitted_mem_bytes(d);
  return std::max(g, target / g * g);
}

KernelSource make(Arch a, Isa isa, Precision p, KernelKind k, LdStRatio r, std::uint64_t bytes) {
  KernelSpec s;
  s.kind = k;
  s.isa = isa;
  s.arch = a;
  s.precision = p;
  s.ratio = r;
  s.fp_op = FpOp::fma;
  s.fp_per_mem = 2;
  auto d = lookup_isa(isa, p, a);
  s.array_bytes = k == KernelKind::fp ? 0 : size_for(d, bytes);
  return generate_kernel(s, d);
}

}  // namespace

TEST(Verify, GenerativeSweepMatches) {
  int n = 0;
  for (Arch a : kAllArchs)
    for (Isa isa : catalog_isas(a))
      for (Precision p : kAllPrecisions)
        for (LdStRatio r : {LdStRatio{2, 1}, LdStRatio{1, 1}, LdStRatio{1, 0}, LdStRatio{0, 1}, LdStRatio{3, 1}})
          for (std::uint64_t bytes : {4096ull, 16384ull, 1ull << 20, 8ull << 20}) {
            auto ks = make(a, isa, p, KernelKind::memory, r, bytes);
            auto rep = verify_kernel(ks);
            ASSERT_TRUE(rep.match) << ks.file_name() << " " << to_string(a) << ": "
                                   << (rep.problems.empty() ? "" : rep.problems.front());
            EXPECT_EQ(rep.measured.loads_per_outer_iter, ks.expected.loads_per_outer_iter);
            EXPECT_EQ(rep.measured.stores_per_outer_iter, ks.expected.stores_per_outer_iter);
            EXPECT_EQ(rep.bytes_covered, ks.spec.array_bytes);
            if (a == Arch::aarch64) {
              EXPECT_LE(rep.max_offset, 4095u);
            }
            if (a == Arch::riscv64 && isa == Isa::scalar) {
              EXPECT_LE(rep.max_offset, 2048u);
            }
            ++n;
          }
  EXPECT_EQ(n, 8 * 2 * 5 * 4);
}

TEST(Verify, MixedAndFpKernelsMatch) {
  for (Arch a : kAllArchs)
    for (Isa isa : catalog_isas(a))
      for (KernelKind k : {KernelKind::mixed, KernelKind::fp}) {
        auto ks = make(a, isa, Precision::dp, k, {2, 1}, 1u << 20);
        auto rep = verify_kernel(ks);
        EXPECT_TRUE(rep.match) << ks.file_name() << " " << (rep.problems.empty() ? "" : rep.problems.front());
        EXPECT_TRUE(rep.reuse_ok);
      }
}

TEST(Verify, DroppedLoadIsDetected) {
  auto ks = make(Arch::x86_64, Isa::avx2, Precision::dp, KernelKind::memory, {1, 0}, 8192);
  auto pos = ks.assembly_text.find("\tvmovapd\t");
  ASSERT_NE(pos, std::string::npos);
  auto end = ks.assembly_text.find('\n', pos);
  ks.assembly_text.erase(pos, end - pos + 1);
  auto rep = verify_kernel(ks);
  EXPECT_FALSE(rep.match);
  EXPECT_EQ(rep.load_delta, -1);
  EXPECT_FALSE(rep.coverage_ok);
  EXPECT_THROW(require_verified(ks), VerificationError);
}

TEST(Verify, PointerLoadedCounterReported) {
  auto ks = make(Arch::aarch64, Isa::neon, Precision::dp, KernelKind::memory, {2, 1}, 512ull << 20);
  auto rep = verify_kernel(ks);
  EXPECT_TRUE(rep.match);
  EXPECT_TRUE(rep.pointer_loaded_counter);
  EXPECT_TRUE(rep.counter_immediates_ok);
}

TEST(Verify, HistogramCountsOuterLoopBody) {
  auto ks = make(Arch::aarch64, Isa::neon, Precision::dp, KernelKind::memory, {1, 0}, 16384);
  auto rep = verify_kernel(ks);
  ASSERT_TRUE(rep.match);
  EXPECT_EQ(rep.opcode_histogram.at("ldr.q"), 1024u);
}
