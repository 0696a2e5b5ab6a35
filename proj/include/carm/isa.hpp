#ifndef CARM_ISA_HPP_
#define CARM_ISA_HPP_

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "carm/error.hpp"
#include "carm/types.hpp"

#if defined(__linux__) && (defined(__aarch64__) || defined(__riscv))
#include <sys/auxv.h>
#endif

namespace carm {

enum class OpClass { load, store, add, mul, div, fma };

constexpr std::string_view to_string(OpClass k) {
  switch (k) {
    case OpClass::load: return "load";
    case OpClass::store: return "store";
    case OpClass::add: return "add";
    case OpClass::mul: return "mul";
    case OpClass::div: return "div";
    case OpClass::fma: return "fma";
  }
  return "?";
}

constexpr OpClass op_class(FpOp op) {
  switch (op) {
    case FpOp::add: return OpClass::add;
    case FpOp::mul: return OpClass::mul;
    case FpOp::div: return OpClass::div;
    case FpOp::fma: return OpClass::fma;
  }
  return OpClass::add;
}

constexpr bool is_fp(OpClass k) { return k != OpClass::load && k != OpClass::store; }

/// An instruction kind at a given precision.
struct OpKind {
  OpClass kind = OpClass::add;
  Precision precision = Precision::dp;
};

enum class PointerBump { per_block, per_instruction, per_group_of_8 };

constexpr std::string_view to_string(PointerBump p) {
  switch (p) {
    case PointerBump::per_block: return "per-block";
    case PointerBump::per_instruction: return "per-instruction";
    case PointerBump::per_group_of_8: return "per-group-of-8";
  }
  return "?";
}

/// Everything codegen and analysis need to know about one ISA at one precision.
struct IsaDescriptor {
  Isa isa = Isa::scalar;
  Arch arch = Arch::x86_64;
  Precision precision = Precision::dp;
  unsigned vector_bytes = 8;  // one architectural register; m1 for RVV
  unsigned group = 1;         // registers moved per emitted instruction (RVV LMUL)
  std::string load_mnemonic;
  std::string store_mnemonic;
  std::array<std::string, 4> fp_mnemonics;  // indexed by FpOp
  std::string zero_mnemonic;
  std::vector<std::string> register_pool;
  std::uint64_t max_mem_offset = 0;       // immediate offsets must stay below this
  std::uint64_t max_inner_immediate = 0;  // largest loop count encodable as an immediate
  PointerBump pointer_bump = PointerBump::per_block;
  bool has_vector_div = true;

  unsigned elements() const { return vector_bytes / element_bytes(precision); }
  const std::string& fp_mnemonic(FpOp op) const { return fp_mnemonics[static_cast<std::size_t>(op)]; }

  /// Registers usable as operands of one emitted instruction (every group-th
  /// register of the pool when instructions operate on register groups).
  std::vector<std::string> operand_pool() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < register_pool.size(); i += group) out.push_back(register_pool[i]);
    return out;
  }
};

namespace detail {

inline std::vector<std::string> numbered(std::string_view prefix, unsigned n) {
  std::vector<std::string> v;
  for (unsigned i = 0; i < n; ++i) v.push_back(std::string(prefix) + std::to_string(i));
  return v;
}

inline constexpr std::uint64_t kX86Imm32 = 0x7fffffffULL;

inline IsaDescriptor make_descriptor(Isa isa, Arch arch, Precision p) {
  const bool dp = p == Precision::dp;
  IsaDescriptor d;
  d.isa = isa;
  d.arch = arch;
  d.precision = p;
  switch (arch) {
    case Arch::x86_64: {
      d.max_mem_offset = kX86Imm32;
      d.max_inner_immediate = kX86Imm32;
      d.pointer_bump = PointerBump::per_block;
      const char* pd = dp ? "pd" : "ps";
      const char* sd = dp ? "sd" : "ss";
      switch (isa) {
        case Isa::scalar:
          d.vector_bytes = element_bytes(p);
          d.load_mnemonic = d.store_mnemonic = dp ? "movsd" : "movss";
          d.fp_mnemonics = {std::string("add") + sd, std::string("mul") + sd, std::string("div") + sd,
                            std::string("vfmadd231") + sd};
          d.zero_mnemonic = "xorpd";
          d.register_pool = numbered("%xmm", 16);
          break;
        case Isa::sse:
          d.vector_bytes = 16;
          d.load_mnemonic = d.store_mnemonic = dp ? "movapd" : "movaps";
          d.fp_mnemonics = {std::string("add") + pd, std::string("mul") + pd, std::string("div") + pd,
                            std::string("vfmadd231") + pd};
          d.zero_mnemonic = "xorpd";
          d.register_pool = numbered("%xmm", 16);
          break;
        case Isa::avx2:
        case Isa::avx512: {
          bool wide = isa == Isa::avx512;
          d.vector_bytes = wide ? 64 : 32;
          d.load_mnemonic = d.store_mnemonic = dp ? "vmovapd" : "vmovaps";
          d.fp_mnemonics = {std::string("vadd") + pd, std::string("vmul") + pd, std::string("vdiv") + pd,
                            std::string("vfmadd231") + pd};
          d.zero_mnemonic = wide ? "vpxorq" : "vxorpd";
          d.register_pool = numbered(wide ? "%zmm" : "%ymm", wide ? 32 : 16);
          break;
        }
        default:
          throw UnsupportedIsaError(std::string(to_string(isa)) + " is not an x86-64 ISA");
      }
      break;
    }
    case Arch::aarch64: {
      d.max_mem_offset = 4095;
      d.max_inner_immediate = 4095;
      d.pointer_bump = PointerBump::per_block;
      switch (isa) {
        case Isa::scalar:
          d.vector_bytes = element_bytes(p);
          d.register_pool = numbered(dp ? "d" : "s", 32);
          d.fp_mnemonics = {"fadd", "fmul", "fdiv", "fmadd"};
          break;
        case Isa::neon:
          d.vector_bytes = 16;
          d.register_pool = numbered("v", 32);
          d.fp_mnemonics = {"fadd", "fmul", "fdiv", "fmla"};
          break;
        default:
          throw UnsupportedIsaError(std::string(to_string(isa)) + " is not an aarch64 ISA");
      }
      d.load_mnemonic = "ldr";
      d.store_mnemonic = "str";
      d.zero_mnemonic = "movi";
      break;
    }
    case Arch::riscv64: {
      d.max_mem_offset = 2048;
      d.max_inner_immediate = 2047;
      switch (isa) {
        case Isa::scalar: {
          const char* s = dp ? ".d" : ".s";
          d.vector_bytes = element_bytes(p);
          d.register_pool = numbered("f", 32);
          d.load_mnemonic = dp ? "fld" : "flw";
          d.store_mnemonic = dp ? "fsd" : "fsw";
          d.fp_mnemonics = {std::string("fadd") + s, std::string("fmul") + s, std::string("fdiv") + s,
                            std::string("fmadd") + s};
          d.zero_mnemonic = dp ? "fmv.d.x" : "fmv.w.x";
          d.pointer_bump = PointerBump::per_block;
          break;
        }
        case Isa::rvv:
          d.vector_bytes = 16;
          d.group = 8;
          d.register_pool = numbered("v", 32);
          d.load_mnemonic = dp ? "vle64.v" : "vle32.v";
          d.store_mnemonic = dp ? "vse64.v" : "vse32.v";
          d.fp_mnemonics = {"vfadd.vv", "vfmul.vv", "vfdiv.vv", "vfmacc.vv"};
          d.zero_mnemonic = "vmv.v.i";
          d.pointer_bump = PointerBump::per_group_of_8;
          break;
        default:
          throw UnsupportedIsaError(std::string(to_string(isa)) + " is not a riscv64 ISA");
      }
      break;
    }
  }
  return d;
}

}  // namespace detail

constexpr Arch host_arch() {
#if defined(__x86_64__)
  return Arch::x86_64;
#elif defined(__aarch64__)
  return Arch::aarch64;
#elif defined(__riscv) && __riscv_xlen == 64
  return Arch::riscv64;
#else
  return Arch::x86_64;
#endif
}

constexpr bool host_arch_supported() {
#if defined(__x86_64__) || defined(__aarch64__) || (defined(__riscv) && __riscv_xlen == 64)
  return true;
#else
  return false;
#endif
}

/// ISAs the catalog knows for an architecture, narrowest first.
inline std::vector<Isa> catalog_isas(Arch arch) {
  switch (arch) {
    case Arch::x86_64: return {Isa::scalar, Isa::sse, Isa::avx2, Isa::avx512};
    case Arch::aarch64: return {Isa::scalar, Isa::neon};
    case Arch::riscv64: return {Isa::scalar, Isa::rvv};
  }
  return {};
}

inline std::string supported_isa_list(Arch arch) {
  std::string out;
  for (Isa i : catalog_isas(arch)) {
    if (!out.empty()) out += ", ";
    out += to_string(i);
  }
  return out;
}

inline IsaDescriptor lookup_isa(Isa isa, Precision p, Arch arch = host_arch()) {
  return detail::make_descriptor(isa, arch, p);
}

inline IsaDescriptor lookup_isa(std::string_view name, Precision p, Arch arch = host_arch()) {
  auto isa = parse_isa(name);
  if (!isa) {
    throw UnsupportedIsaError("unknown ISA '" + std::string(name) + "'; supported on " +
                              std::string(to_string(arch)) + ": " + supported_isa_list(arch));
  }
  try {
    return lookup_isa(*isa, p, arch);
  } catch (const UnsupportedIsaError&) {
    throw UnsupportedIsaError("ISA '" + std::string(name) + "' is not available on " +
                              std::string(to_string(arch)) + "; supported: " + supported_isa_list(arch));
  }
}

/// RVV descriptor resized to a probed vector register width.
inline IsaDescriptor with_vector_bytes(IsaDescriptor d, unsigned vector_bytes) {
  if (d.isa != Isa::rvv) throw ConfigError("only RVV descriptors have a configurable vector length");
  if (vector_bytes < element_bytes(d.precision) || (vector_bytes & (vector_bytes - 1)) != 0)
    throw ConfigError("vector length must be a power of two of at least one element");
  d.vector_bytes = vector_bytes;
  return d;
}

inline unsigned flops_per_instruction(const IsaDescriptor& d, OpClass op) {
  if (!is_fp(op)) throw DomainError(std::string(to_string(op)) + " is not an FP operation");
  return d.elements() * (op == OpClass::fma ? 2u : 1u);
}

inline unsigned flops_per_instruction(Isa isa, Precision p, OpClass op, Arch arch = host_arch()) {
  return flops_per_instruction(lookup_isa(isa, p, arch), op);
}

inline unsigned bytes_per_mem_instruction(Isa isa, Precision p, Arch arch = host_arch()) {
  return lookup_isa(isa, p, arch).vector_bytes;
}

/// CPU feature names as the OS reports them (x86 /proc/cpuinfo spelling).
using FeatureSet = std::set<std::string>;

/// Maps feature flags onto catalog ISAs. Scalar is always present.
inline std::vector<Isa> isas_from_features(Arch arch, const FeatureSet& f) {
  std::vector<Isa> out{Isa::scalar};
  auto has = [&](const char* n) { return f.count(n) != 0; };
  switch (arch) {
    case Arch::x86_64:
      if (has("sse2")) out.push_back(Isa::sse);
      if (has("avx2") && has("fma")) out.push_back(Isa::avx2);
      if (has("avx512f")) out.push_back(Isa::avx512);
      break;
    case Arch::aarch64:
      if (has("asimd")) out.push_back(Isa::neon);
      break;
    case Arch::riscv64:
      if (has("v")) out.push_back(Isa::rvv);
      break;
  }
  return out;
}

/// Host features through the OS-backed query for each architecture.
inline FeatureSet host_features() {
  FeatureSet f;
#if defined(__x86_64__)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("sse2")) f.insert("sse2");
  if (__builtin_cpu_supports("avx2")) f.insert("avx2");
  if (__builtin_cpu_supports("fma")) f.insert("fma");
  if (__builtin_cpu_supports("avx512f")) f.insert("avx512f");
#elif defined(__aarch64__) && defined(__linux__)
  if (getauxval(AT_HWCAP) & (1UL << 1)) f.insert("asimd");  // HWCAP_ASIMD
#elif defined(__riscv) && defined(__linux__)
  if (getauxval(AT_HWCAP) & (1UL << ('V' - 'A'))) f.insert("v");
#endif
  return f;
}

inline std::vector<Isa> detect_supported_isas() {
  if (!host_arch_supported()) throw ConfigError("unsupported host: only x86-64, aarch64 and riscv64 are handled");
  return isas_from_features(host_arch(), host_features());
}

/// Elements granted by vsetvli for a request: min(requested, VLEN / SEW).
constexpr unsigned vector_length_from_vlen(unsigned vlen_bits, unsigned element_bits, unsigned requested = 8192) {
  unsigned max = vlen_bits / element_bits;
  return requested < max ? requested : max;
}

/// Maximum e64 elements per vector register, read with vsetvli at m1.
inline unsigned probe_max_vector_length() {
#if defined(__riscv) && defined(__riscv_vector)
  unsigned long vl = 0;
  __asm__ __volatile__(
      "li t0, 8192\n\t"
      "vsetvli t0, t0, e64, m1, ta, ma\n\t"
      "mv %0, t0\n\t"
      : "=r"(vl)
      :
      : "t0");
  return static_cast<unsigned>(vl);
#else
  throw ConfigError("vector length probe needs a riscv64 host with the V extension");
#endif
}

}  // namespace carm

#endif  // CARM_ISA_HPP_
