#ifndef CARM_CODEGEN_HPP_
#define CARM_CODEGEN_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "carm/error.hpp"
#include "carm/isa.hpp"
#include "carm/types.hpp"

namespace carm {

enum class KernelKind { memory, fp, mixed, freq_probe, vlen_probe };

constexpr std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::memory: return "memory";
    case KernelKind::fp: return "fp";
    case KernelKind::mixed: return "mixed";
    case KernelKind::freq_probe: return "freq-probe";
    case KernelKind::vlen_probe: return "vlen-probe";
  }
  return "?";
}

/// Symbol every generated kernel exports. Signature:
///   void carm_kernel(void* array, uint64_t outer_iters, const uint64_t* inner_iters);
inline constexpr std::string_view kKernelSymbol = "carm_kernel";
inline constexpr unsigned kDefaultUnroll = 256;

struct KernelSpec {
  KernelKind kind = KernelKind::memory;
  Isa isa = Isa::scalar;
  Precision precision = Precision::dp;
  Arch arch = host_arch();
  LdStRatio ratio{2, 1};
  FpOp fp_op = FpOp::add;
  unsigned fp_per_mem = 1;        // FP instructions per ratio block (mixed only)
  std::uint64_t array_bytes = 0;  // working set (memory/mixed only)
  unsigned threads = 1;
  unsigned unroll = kDefaultUnroll;
};

struct LoopPlan {
  unsigned inner_unroll = 0;        // memory instructions (or FP for fp kernels) per inner body
  std::uint64_t inner_iters = 0;
  unsigned remainder_inst = 0;      // memory instructions after the inner loop
  bool pointer_loaded_counter = false;
  std::uint64_t per_iter_pointer_bump = 0;
  std::vector<std::uint64_t> offsets;  // immediate offset of each inner-body memory instruction
  std::string outer_iters_symbol;      // register receiving the runtime outer count
  unsigned fp_inner = 0;               // FP instructions per inner body
  unsigned fp_remainder = 0;           // FP instructions after the inner loop
};

/// Statically known instruction counts per outer-loop iteration.
struct ExpectedCounts {
  std::uint64_t loads_per_outer_iter = 0;
  std::uint64_t stores_per_outer_iter = 0;
  std::uint64_t mem_inst_per_outer_iter = 0;
  std::uint64_t fp_inst_per_outer_iter = 0;
  std::uint64_t int_add_per_outer_iter = 0;  // frequency probe chain
  unsigned flops_per_fp_inst = 0;
  unsigned bytes_per_mem_inst = 0;

  std::uint64_t flops_per_outer_iter() const { return fp_inst_per_outer_iter * flops_per_fp_inst; }
  std::uint64_t bytes_per_outer_iter() const { return mem_inst_per_outer_iter * bytes_per_mem_inst; }
  std::uint64_t counted_inst_per_outer_iter() const {
    return mem_inst_per_outer_iter + fp_inst_per_outer_iter + int_add_per_outer_iter;
  }
  friend bool operator==(const ExpectedCounts&, const ExpectedCounts&) = default;
};

/// Exact flops/bytes fraction in lowest terms.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Rational make(std::uint64_t n, std::uint64_t d) {
    if (d == 0) throw DomainError("zero denominator");
    std::uint64_t g = std::gcd(n, d);
    if (g == 0) g = 1;
    return {n / g, d / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Flops per byte the kernel issues by construction.
inline Rational nominal_ai(const ExpectedCounts& c) {
  return Rational::make(c.flops_per_outer_iter(), c.bytes_per_outer_iter());
}

struct KernelSource {
  KernelSpec spec;
  IsaDescriptor isa;
  std::string assembly_text;
  LoopPlan plan;
  ExpectedCounts expected;
  std::vector<std::string> warnings;
  std::vector<std::string> fp_register_pool;  // destinations FP instructions cycle through

  /// kernel_<kind>_<isa>_<precision>_<ratio>.S; FP kernels use the op in the ratio slot.
  std::string file_name() const {
    std::string tail;
    switch (spec.kind) {
      case KernelKind::fp: tail = std::string(to_string(spec.fp_op)); break;
      case KernelKind::mixed:
        tail = std::to_string(spec.ratio.loads) + "-" + std::to_string(spec.ratio.stores) + "-" +
               std::string(to_string(spec.fp_op)) + std::to_string(spec.fp_per_mem);
        break;
      case KernelKind::memory:
        tail = std::to_string(spec.ratio.loads) + "-" + std::to_string(spec.ratio.stores);
        break;
      default: tail = "probe"; break;
    }
    std::string kind(to_string(spec.kind));
    std::replace(kind.begin(), kind.end(), '-', '_');
    return "kernel_" + kind + "_" + std::string(to_string(spec.isa)) + "_" +
           std::string(to_string(spec.precision)) + "_" + tail + ".S";
  }
};

/// Bytes one emitted memory instruction moves.
inline unsigned emitted_mem_bytes(const IsaDescriptor& d) { return d.vector_bytes * d.group; }
inline unsigned emitted_flops(const IsaDescriptor& d, FpOp op) {
  return flops_per_instruction(d, op_class(op)) * d.group;
}

/// Loop structure for a memory, mixed or FP kernel. Unroll is first reduced to
/// keep immediate offsets encodable and to whole ratio blocks, inner iterations
/// absorb the rest, and any leftover goes after the inner loop.
inline LoopPlan plan_loops(const KernelSpec& spec, const IsaDescriptor& isa) {
  LoopPlan plan;
  switch (isa.arch) {
    case Arch::x86_64: plan.outer_iters_symbol = "%rsi"; break;
    case Arch::aarch64: plan.outer_iters_symbol = "x1"; break;
    case Arch::riscv64: plan.outer_iters_symbol = "a1"; break;
  }
  if (spec.unroll == 0) throw ConfigError("unroll must be >= 1");

  if (spec.kind == KernelKind::fp) {
    plan.inner_unroll = spec.unroll;
    plan.inner_iters = 1;
    plan.fp_inner = spec.unroll;
    return plan;
  }
  if (spec.kind != KernelKind::memory && spec.kind != KernelKind::mixed)
    throw ConfigError("plan_loops handles memory, mixed and fp kernels");

  const std::uint64_t bytes = emitted_mem_bytes(isa);
  if (spec.array_bytes == 0 || spec.array_bytes % bytes != 0)
    throw ConfigError("array size " + std::to_string(spec.array_bytes) + " B is not a positive multiple of " +
                      std::to_string(bytes) + " B for " + std::string(to_string(isa.isa)));
  if (spec.ratio.period() == 0) throw ConfigError("load/store ratio needs at least one instruction");
  if (spec.kind == KernelKind::mixed && spec.fp_per_mem == 0) throw ConfigError("mixed kernels need fp_per_mem >= 1");

  const std::uint64_t total = spec.array_bytes / bytes;
  const std::uint64_t period = spec.ratio.period();

  std::uint64_t unroll = spec.unroll;
  if (isa.pointer_bump == PointerBump::per_block) {
    // Largest unroll whose last offset (unroll-1)*bytes stays below the limit.
    std::uint64_t offset_cap = (isa.max_mem_offset - 1) / bytes + 1;
    unroll = std::min(unroll, offset_cap);
  }
  if (unroll >= period) unroll -= unroll % period;
  if (total < unroll) unroll = total >= period ? total - total % period : total;

  plan.inner_unroll = static_cast<unsigned>(unroll);
  plan.inner_iters = total / unroll;
  plan.remainder_inst = static_cast<unsigned>(total % unroll);
  plan.per_iter_pointer_bump = unroll * bytes;
  plan.pointer_loaded_counter = plan.inner_iters > isa.max_inner_immediate;
  for (std::uint64_t i = 0; i < unroll; ++i)
    plan.offsets.push_back(isa.pointer_bump == PointerBump::per_block ? i * bytes : 0);
  if (spec.kind == KernelKind::mixed) {
    plan.fp_inner = static_cast<unsigned>((unroll / period) * spec.fp_per_mem);
    plan.fp_remainder = static_cast<unsigned>((plan.remainder_inst / period) * spec.fp_per_mem);
  }
  return plan;
}

namespace detail {

/// Appends tab-indented instructions and labels.
class AsmWriter {
 public:
  void line(std::string_view s) {
    text_ += '\t';
    text_ += s;
    text_ += '\n';
  }
  void label(std::string_view s) {
    text_ += s;
    text_ += ":\n";
  }
  void raw(std::string_view s) {
    text_ += s;
    text_ += '\n';
  }
  std::string take() { return std::move(text_); }

 private:
  std::string text_;
};

inline std::string hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  do {
    s.insert(s.begin(), digits[v & 0xf]);
    v >>= 4;
  } while (v);
  return "0x" + s;
}

// Per-architecture fixed registers.
struct ArchRegs {
  std::string array, outer, slot, ptr, inner, scratch;
};

inline ArchRegs arch_regs(Arch a) {
  switch (a) {
    case Arch::x86_64: return {"%rdi", "%rsi", "%rdx", "%rax", "%rcx", "%r8"};
    case Arch::aarch64: return {"x0", "x1", "x2", "x9", "x10", "x11"};
    case Arch::riscv64: return {"a0", "a1", "a2", "t0", "t1", "t2"};
  }
  return {};
}

inline std::string neon_arrangement(Precision p) { return p == Precision::dp ? ".2d" : ".4s"; }

inline std::string mem_instruction(const IsaDescriptor& d, bool load, const std::string& reg, std::uint64_t offset,
                                   const ArchRegs& r) {
  switch (d.arch) {
    case Arch::x86_64: {
      std::string mem = (offset ? std::to_string(offset) : std::string("0")) + "(" + r.ptr + ")";
      return load ? d.load_mnemonic + "\t" + mem + ", " + reg : d.store_mnemonic + "\t" + reg + ", " + mem;
    }
    case Arch::aarch64: {
      std::string name = reg;
      if (d.isa == Isa::neon) name = "q" + reg.substr(1);
      std::string mem = "[" + r.ptr + ", #" + std::to_string(offset) + "]";
      return (load ? d.load_mnemonic : d.store_mnemonic) + "\t" + name + ", " + mem;
    }
    case Arch::riscv64: {
      if (d.isa == Isa::rvv) return (load ? d.load_mnemonic : d.store_mnemonic) + "\t" + reg + ", (" + r.ptr + ")";
      return (load ? d.load_mnemonic : d.store_mnemonic) + "\t" + reg + ", " + std::to_string(offset) + "(" + r.ptr +
             ")";
    }
  }
  return {};
}

// dst = dst (op) dst keeps each register its own dependency chain.
inline std::string fp_instruction(const IsaDescriptor& d, FpOp op, const std::string& reg) {
  const std::string& m = d.fp_mnemonic(op);
  switch (d.arch) {
    case Arch::x86_64:
      if (m[0] == 'v') return m + "\t" + reg + ", " + reg + ", " + reg;
      return m + "\t" + reg + ", " + reg;
    case Arch::aarch64: {
      std::string r = reg;
      if (d.isa == Isa::neon) r += neon_arrangement(d.precision);
      if (op == FpOp::fma && d.isa == Isa::scalar) return m + "\t" + r + ", " + r + ", " + r + ", " + r;
      return m + "\t" + r + ", " + r + ", " + r;
    }
    case Arch::riscv64:
      if (op == FpOp::fma && d.isa == Isa::scalar) return m + "\t" + reg + ", " + reg + ", " + reg + ", " + reg;
      return m + "\t" + reg + ", " + reg + ", " + reg;
  }
  return {};
}

inline std::string zero_instruction(const IsaDescriptor& d, const std::string& reg) {
  switch (d.arch) {
    case Arch::x86_64:
      if (d.zero_mnemonic[0] == 'v') return d.zero_mnemonic + "\t" + reg + ", " + reg + ", " + reg;
      return d.zero_mnemonic + "\t" + reg + ", " + reg;
    case Arch::aarch64: return "movi\tv" + reg.substr(1) + ".16b, #0";
    case Arch::riscv64:
      if (d.isa == Isa::rvv) return "vmv.v.i\t" + reg + ", 0";
      return d.zero_mnemonic + "\t" + reg + ", zero";
  }
  return {};
}

/// Caller-saved FP registers only: RISC-V fs0-fs11 are left out of the scalar pool.
inline std::vector<std::string> usable_pool(const IsaDescriptor& d) {
  auto pool = d.operand_pool();
  if (d.arch == Arch::riscv64 && d.isa == Isa::scalar) {
    std::vector<std::string> out;
    for (const auto& r : pool) {
      int n = std::stoi(r.substr(1));
      if (n == 8 || n == 9 || (n >= 18 && n <= 27)) continue;
      out.push_back(r);
    }
    return out;
  }
  return pool;
}

inline void emit_header(AsmWriter& w, const IsaDescriptor& d, std::string_view title) {
  w.raw(std::string(d.arch == Arch::aarch64 ? "// " : "# ") + std::string(title));
  w.line(".text");
  w.line(".globl\t" + std::string(kKernelSymbol));
  w.line(std::string(".type\t") + std::string(kKernelSymbol) + (d.arch == Arch::aarch64 ? ", %function" : ", @function"));
  w.line(".p2align\t6");
  w.label(std::string(kKernelSymbol));
}

inline void emit_footer(AsmWriter& w, const IsaDescriptor& d) {
  w.line(".size\t" + std::string(kKernelSymbol) + ", .-" + std::string(kKernelSymbol));
  w.line(std::string(".section\t.note.GNU-stack,\"\",") + (d.arch == Arch::aarch64 ? "%progbits" : "@progbits"));
}

inline std::string serialize_instruction(Arch a) {
  switch (a) {
    case Arch::x86_64: return "lfence";
    case Arch::aarch64: return "isb";
    case Arch::riscv64: return "fence";
  }
  return {};
}

inline bool aarch64_add_imm(std::uint64_t v, std::string& operand) {
  if (v <= 4095) {
    operand = "#" + std::to_string(v);
    return true;
  }
  if (v % 4096 == 0 && v / 4096 <= 4095) {
    operand = "#" + std::to_string(v / 4096) + ", lsl #12";
    return true;
  }
  return false;
}

inline void aarch64_load_constant(AsmWriter& w, const std::string& reg, std::uint64_t v) {
  w.line("movz\t" + reg + ", #" + std::to_string(v & 0xffff));
  for (unsigned shift = 16; shift < 64; shift += 16)
    if ((v >> shift) & 0xffff)
      w.line("movk\t" + reg + ", #" + std::to_string((v >> shift) & 0xffff) + ", lsl #" + std::to_string(shift));
}

/// Memory (and interleaved FP) instructions for `count` memory slots starting
/// at slot `first` (ratio position and register indices continue from there).
inline void emit_mem_stream(AsmWriter& w, const KernelSpec& spec, const IsaDescriptor& d, const ArchRegs& r,
                            unsigned count, const std::vector<std::string>& mem_pool,
                            const std::vector<std::string>& fp_pool, unsigned& fp_cursor, bool with_fp) {
  const unsigned period = spec.ratio.period();
  const std::uint64_t bytes = emitted_mem_bytes(d);
  const bool per_block = d.pointer_bump == PointerBump::per_block;
  for (unsigned i = 0; i < count; ++i) {
    bool load = (i % period) < spec.ratio.loads;
    std::uint64_t offset = per_block ? i * bytes : 0;
    w.line(mem_instruction(d, load, mem_pool[i % mem_pool.size()], offset, r));
    if (!per_block) {
      if (d.arch == Arch::riscv64)
        w.line("addi\t" + r.ptr + ", " + r.ptr + ", " + std::to_string(bytes));
    }
    if (with_fp && (i % period) == period - 1)
      for (unsigned k = 0; k < spec.fp_per_mem; ++k)
        w.line(fp_instruction(d, spec.fp_op, fp_pool[fp_cursor++ % fp_pool.size()]));
  }
}

inline void emit_prologue(AsmWriter& w, const IsaDescriptor& d, const std::vector<std::string>& zero_regs) {
  if (d.arch == Arch::aarch64) {
    w.line("stp\td8, d9, [sp, #-64]!");
    w.line("stp\td10, d11, [sp, #16]");
    w.line("stp\td12, d13, [sp, #32]");
    w.line("stp\td14, d15, [sp, #48]");
  }
  if (d.isa == Isa::rvv) {
    std::uint64_t avl = static_cast<std::uint64_t>(d.elements()) * d.group;
    w.line("li\tt3, " + std::to_string(avl));
    w.line(std::string("vsetvli\tt3, t3, ") + (d.precision == Precision::dp ? "e64" : "e32") + ", m" +
           std::to_string(d.group) + ", ta, ma");
  }
  for (const auto& reg : zero_regs) w.line(zero_instruction(d, reg));
}

inline void emit_epilogue(AsmWriter& w, const IsaDescriptor& d) {
  w.line(serialize_instruction(d.arch));
  if (d.arch == Arch::x86_64 && (d.isa == Isa::avx2 || d.isa == Isa::avx512)) w.line("vzeroupper");
  if (d.arch == Arch::aarch64) {
    w.line("ldp\td14, d15, [sp, #48]");
    w.line("ldp\td12, d13, [sp, #32]");
    w.line("ldp\td10, d11, [sp, #16]");
    w.line("ldp\td8, d9, [sp], #64");
  }
  w.line("ret");
}

inline void emit_counter_init(AsmWriter& w, const IsaDescriptor& d, const ArchRegs& r, const LoopPlan& plan) {
  switch (d.arch) {
    case Arch::x86_64:
      w.line(plan.pointer_loaded_counter ? "movq\t(" + r.slot + "), " + r.inner
                                         : "movq\t$" + std::to_string(plan.inner_iters) + ", " + r.inner);
      break;
    case Arch::aarch64:
      w.line(plan.pointer_loaded_counter ? "ldr\t" + r.inner + ", [" + r.slot + "]"
                                         : "mov\t" + r.inner + ", #" + std::to_string(plan.inner_iters));
      break;
    case Arch::riscv64:
      w.line(plan.pointer_loaded_counter ? "ld\t" + r.inner + ", 0(" + r.slot + ")"
                                         : "li\t" + r.inner + ", " + std::to_string(plan.inner_iters));
      break;
  }
}

inline void emit_pointer_reset(AsmWriter& w, Arch a, const ArchRegs& r) {
  switch (a) {
    case Arch::x86_64: w.line("movq\t" + r.array + ", " + r.ptr); break;
    case Arch::aarch64: w.line("mov\t" + r.ptr + ", " + r.array); break;
    case Arch::riscv64: w.line("mv\t" + r.ptr + ", " + r.array); break;
  }
}

inline void emit_count_down(AsmWriter& w, Arch a, const std::string& reg, const std::string& label) {
  switch (a) {
    case Arch::x86_64:
      w.line("subq\t$1, " + reg);
      w.line("jnz\t" + label);
      break;
    case Arch::aarch64:
      w.line("subs\t" + reg + ", " + reg + ", #1");
      w.line("b.ne\t" + label);
      break;
    case Arch::riscv64:
      w.line("addi\t" + reg + ", " + reg + ", -1");
      w.line("bnez\t" + reg + ", " + label);
      break;
  }
}

/// Emits the bump (if any) for a per-block pointer policy. Large AArch64/RISC-V
/// constants live in the scratch register, loaded by the prologue.
inline void emit_block_bump(AsmWriter& w, const IsaDescriptor& d, const ArchRegs& r, std::uint64_t bump) {
  if (bump == 0 || d.pointer_bump != PointerBump::per_block) return;
  switch (d.arch) {
    case Arch::x86_64: w.line("addq\t$" + std::to_string(bump) + ", " + r.ptr); break;
    case Arch::aarch64: {
      std::string imm;
      if (aarch64_add_imm(bump, imm))
        w.line("add\t" + r.ptr + ", " + r.ptr + ", " + imm);
      else
        w.line("add\t" + r.ptr + ", " + r.ptr + ", " + r.scratch);
      break;
    }
    case Arch::riscv64:
      if (bump <= 2047)
        w.line("addi\t" + r.ptr + ", " + r.ptr + ", " + std::to_string(bump));
      else
        w.line("add\t" + r.ptr + ", " + r.ptr + ", " + r.scratch);
      break;
  }
}

inline void emit_bump_constant(AsmWriter& w, const IsaDescriptor& d, const ArchRegs& r, std::uint64_t bump) {
  if (bump == 0 || d.pointer_bump != PointerBump::per_block) return;
  std::string imm;
  if (d.arch == Arch::aarch64 && !aarch64_add_imm(bump, imm)) aarch64_load_constant(w, r.scratch, bump);
  if (d.arch == Arch::riscv64 && bump > 2047) w.line("li\t" + r.scratch + ", " + std::to_string(bump));
}

inline IsaDescriptor resolve(const KernelSpec& spec) { return lookup_isa(spec.isa, spec.precision, spec.arch); }

inline std::string title(const KernelSpec& spec, const LoopPlan& p) {
  return std::string(to_string(spec.kind)) + " kernel " + std::string(to_string(spec.isa)) + " " +
         std::string(to_string(spec.precision)) + " ratio " + spec.ratio.to_string() + " array " +
         std::to_string(spec.array_bytes) + " B: unroll " + std::to_string(p.inner_unroll) + " x " +
         std::to_string(p.inner_iters) + " + " + std::to_string(p.remainder_inst);
}

/// Shared generator for memory and mixed kernels.
inline KernelSource generate_streaming_kernel(const KernelSpec& spec, const IsaDescriptor& d, bool with_fp) {
  KernelSource ks;
  ks.spec = spec;
  ks.isa = d;
  ks.plan = plan_loops(spec, d);
  const ArchRegs r = arch_regs(d.arch);

  auto pool = usable_pool(d);
  std::vector<std::string> mem_pool = pool, fp_pool;
  if (with_fp) {
    std::size_t half = pool.size() / 2;
    mem_pool.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(half));
    fp_pool.assign(pool.begin() + static_cast<std::ptrdiff_t>(half), pool.end());
  }
  ks.fp_register_pool = fp_pool;

  AsmWriter w;
  emit_header(w, d, title(spec, ks.plan));
  emit_prologue(w, d, pool);
  emit_bump_constant(w, d, r, ks.plan.per_iter_pointer_bump);
  w.line(serialize_instruction(d.arch));
  w.label(".Lcarm_outer");
  emit_pointer_reset(w, d.arch, r);
  emit_counter_init(w, d, r, ks.plan);
  w.label(".Lcarm_inner");
  unsigned fp_cursor = 0;
  emit_mem_stream(w, spec, d, r, ks.plan.inner_unroll, mem_pool, fp_pool, fp_cursor, with_fp);
  emit_block_bump(w, d, r, ks.plan.per_iter_pointer_bump);
  emit_count_down(w, d.arch, r.inner, ".Lcarm_inner");
  if (ks.plan.remainder_inst) {
    fp_cursor = 0;
    emit_mem_stream(w, spec, d, r, ks.plan.remainder_inst, mem_pool, fp_pool, fp_cursor, with_fp);
  }
  emit_count_down(w, d.arch, r.outer, ".Lcarm_outer");
  emit_epilogue(w, d);
  emit_footer(w, d);
  ks.assembly_text = w.take();

  const unsigned period = spec.ratio.period();
  auto loads_in = [&](std::uint64_t n) {
    return (n / period) * spec.ratio.loads + std::min<std::uint64_t>(n % period, spec.ratio.loads);
  };
  const auto& p = ks.plan;
  ExpectedCounts& e = ks.expected;
  e.mem_inst_per_outer_iter = static_cast<std::uint64_t>(p.inner_unroll) * p.inner_iters + p.remainder_inst;
  e.loads_per_outer_iter = loads_in(p.inner_unroll) * p.inner_iters + loads_in(p.remainder_inst);
  e.stores_per_outer_iter = e.mem_inst_per_outer_iter - e.loads_per_outer_iter;
  e.bytes_per_mem_inst = emitted_mem_bytes(d);
  if (with_fp) {
    e.fp_inst_per_outer_iter = static_cast<std::uint64_t>(p.fp_inner) * p.inner_iters + p.fp_remainder;
    e.flops_per_fp_inst = emitted_flops(d, spec.fp_op);
  }
  return ks;
}

}  // namespace detail

inline KernelSource generate_memory_kernel(const KernelSpec& spec, const IsaDescriptor& d) {
  if (spec.kind != KernelKind::memory) throw ConfigError("generate_memory_kernel needs a memory spec");
  return detail::generate_streaming_kernel(spec, d, false);
}
inline KernelSource generate_memory_kernel(const KernelSpec& spec) {
  return generate_memory_kernel(spec, detail::resolve(spec));
}

inline KernelSource generate_mixed_kernel(const KernelSpec& spec, const IsaDescriptor& d) {
  if (spec.kind != KernelKind::mixed) throw ConfigError("generate_mixed_kernel needs a mixed spec");
  if (spec.fp_per_mem == 0) throw ConfigError("mixed kernels need fp_per_mem >= 1");
  return detail::generate_streaming_kernel(spec, d, true);
}
inline KernelSource generate_mixed_kernel(const KernelSpec& spec) {
  return generate_mixed_kernel(spec, detail::resolve(spec));
}

/// 256 (spec.unroll) independent FP instructions per inner body, no memory operands.
inline KernelSource generate_fp_kernel(const KernelSpec& spec, const IsaDescriptor& requested) {
  if (spec.kind != KernelKind::fp) throw ConfigError("generate_fp_kernel needs an fp spec");
  KernelSource ks;
  ks.spec = spec;
  IsaDescriptor d = requested;
  if (spec.fp_op == FpOp::div && !d.has_vector_div && d.isa != Isa::scalar) {
    ks.warnings.push_back(std::string(to_string(d.isa)) + " has no vector divide; falling back to scalar");
    d = lookup_isa(Isa::scalar, d.precision, d.arch);
    ks.spec.isa = Isa::scalar;
  }
  ks.isa = d;
  ks.plan = plan_loops(ks.spec, d);
  const auto r = detail::arch_regs(d.arch);
  auto pool = detail::usable_pool(d);
  ks.fp_register_pool = pool;

  detail::AsmWriter w;
  detail::emit_header(w, d, detail::title(ks.spec, ks.plan));
  detail::emit_prologue(w, d, pool);
  w.line(detail::serialize_instruction(d.arch));
  w.label(".Lcarm_outer");
  detail::emit_counter_init(w, d, r, ks.plan);
  w.label(".Lcarm_inner");
  for (unsigned i = 0; i < ks.plan.inner_unroll; ++i)
    w.line(detail::fp_instruction(d, spec.fp_op, pool[i % pool.size()]));
  detail::emit_count_down(w, d.arch, r.inner, ".Lcarm_inner");
  detail::emit_count_down(w, d.arch, r.outer, ".Lcarm_outer");
  detail::emit_epilogue(w, d);
  detail::emit_footer(w, d);
  ks.assembly_text = w.take();

  ks.expected.fp_inst_per_outer_iter = static_cast<std::uint64_t>(ks.plan.inner_unroll) * ks.plan.inner_iters;
  ks.expected.flops_per_fp_inst = emitted_flops(d, spec.fp_op);
  return ks;
}
inline KernelSource generate_fp_kernel(const KernelSpec& spec) { return generate_fp_kernel(spec, detail::resolve(spec)); }

/// Chain of dependent scalar adds on one register: IPC 1 by construction, so
/// adds / elapsed gives the core clock. Outer count comes in the second argument.
inline KernelSource generate_frequency_probe(Arch arch, unsigned unroll = kDefaultUnroll) {
  if (unroll == 0) throw ConfigError("unroll must be >= 1");
  KernelSource ks;
  ks.spec.kind = KernelKind::freq_probe;
  ks.spec.isa = Isa::scalar;
  ks.spec.arch = arch;
  ks.spec.unroll = unroll;
  ks.isa = lookup_isa(Isa::scalar, Precision::dp, arch);
  const auto r = detail::arch_regs(arch);
  ks.plan.inner_unroll = unroll;
  ks.plan.inner_iters = 1;
  ks.plan.outer_iters_symbol = r.outer;

  detail::AsmWriter w;
  detail::emit_header(w, ks.isa, "frequency probe: " + std::to_string(unroll) + " dependent adds per iteration");
  switch (arch) {
    case Arch::x86_64: w.line("movq\t$1, " + r.scratch); break;
    case Arch::aarch64: w.line("mov\t" + r.scratch + ", #1"); break;
    case Arch::riscv64: w.line("li\t" + r.scratch + ", 1"); break;
  }
  w.label(".Lclktest_loop");
  for (unsigned i = 0; i < unroll; ++i) {
    switch (arch) {
      case Arch::x86_64: w.line("addq\t" + r.scratch + ", " + r.ptr); break;
      case Arch::aarch64:
      case Arch::riscv64: w.line("add\t" + r.ptr + ", " + r.ptr + ", " + r.scratch); break;
    }
  }
  detail::emit_count_down(w, arch, r.outer, ".Lclktest_loop");
  w.line("ret");
  detail::emit_footer(w, ks.isa);
  ks.assembly_text = w.take();
  ks.expected.int_add_per_outer_iter = unroll;
  return ks;
}

/// RVV only: stores the e64/m1 element count granted for a request of 8192
/// into *array.
inline KernelSource generate_vector_length_probe() {
  KernelSource ks;
  ks.spec.kind = KernelKind::vlen_probe;
  ks.spec.isa = Isa::rvv;
  ks.spec.arch = Arch::riscv64;
  ks.isa = lookup_isa(Isa::rvv, Precision::dp, Arch::riscv64);
  detail::AsmWriter w;
  detail::emit_header(w, ks.isa, "vector length probe");
  w.line("li\tt0, 8192");
  w.line("vsetvli\tt0, t0, e64, m1, ta, ma");
  w.line("sd\tt0, 0(a0)");
  w.line("ret");
  detail::emit_footer(w, ks.isa);
  ks.assembly_text = w.take();
  return ks;
}

/// Dispatches on spec.kind.
inline KernelSource generate_kernel(const KernelSpec& spec, const IsaDescriptor& d) {
  switch (spec.kind) {
    case KernelKind::memory: return generate_memory_kernel(spec, d);
    case KernelKind::fp: return generate_fp_kernel(spec, d);
    case KernelKind::mixed: return generate_mixed_kernel(spec, d);
    case KernelKind::freq_probe: return generate_frequency_probe(d.arch, spec.unroll);
    case KernelKind::vlen_probe: return generate_vector_length_probe();
  }
  throw ConfigError("unknown kernel kind");
}
inline KernelSource generate_kernel(const KernelSpec& spec) { return generate_kernel(spec, detail::resolve(spec)); }

}  // namespace carm

#endif  // CARM_CODEGEN_HPP_
