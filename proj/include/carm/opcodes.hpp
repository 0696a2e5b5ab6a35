#ifndef CARM_OPCODES_HPP_
#define CARM_OPCODES_HPP_

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "carm/types.hpp"

namespace carm {

/// Per-opcode contribution to FLOP and byte totals.
///
/// Opcode names use the instrumentation report spelling:
/// `<mnemonic>[.<width>][.load|.store]`, e.g. `vmovapd.ymm.load`,
/// `vfmadd231pd.zmm`, `ldr.q`, `fadd.2d`, `fmadd.d`, `sub`.
struct OpcodeClass {
  bool known = false;
  unsigned flops = 0;
  unsigned bytes = 0;
  bool is_load = false;
  bool is_store = false;
  bool is_fp = false;
  std::string family;  // scalar, sse, avx2, avx512, neon, integer, unclassified
};

namespace detail::op {

inline std::string lower(std::string_view s) {
  std::string o(s);
  for (auto& c : o) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return o;
}

inline std::vector<std::string> split_dots(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == '.') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool one_of(std::string_view s, std::initializer_list<std::string_view> l) {
  return std::find(l.begin(), l.end(), s) != l.end();
}

inline bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
inline bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

inline const std::vector<std::string_view>& integer_ops() {
  static const std::vector<std::string_view> v{
      // x86-64
      "add", "sub", "inc", "dec", "imul", "mul", "div", "idiv", "neg", "cmp", "test", "and", "or", "xor", "not", "shl",
      "shr", "sar", "rol", "ror", "lea", "mov", "movzx", "movsx", "movsxd", "push", "pop", "call", "ret", "jmp", "jnz",
      "jne", "jz", "je", "jb", "jnb", "jae", "ja", "jbe", "jl", "jnl", "jge", "jg", "jle", "js", "jns", "nop", "lfence",
      "mfence", "sfence", "rdtsc", "rdtscp", "cpuid", "vzeroupper", "vzeroall", "xorps", "xorpd", "vxorps", "vxorpd",
      "pxor", "vpxor", "vpxorq", "vpxord", "cmovz", "cmovnz", "cmove", "cmovne", "sete", "setne", "cqo", "cdq",
      "endbr64", "syscall", "leave", "hlt", "pause", "xchg", "bt", "bsf", "bsr", "tzcnt", "lzcnt", "popcnt",
      // AArch64
      "adds", "subs", "b", "bl", "blr", "br", "cbz", "cbnz", "tbz", "tbnz", "movz", "movk", "movn", "movi", "isb",
      "dmb", "dsb", "mrs", "msr", "csel", "csinc", "cset", "orr", "eor", "ands", "bic", "lsl", "lsr", "asr", "madd",
      "msub", "umull", "smull", "udiv", "sdiv", "adrp", "adr", "cmn", "tst", "ubfm", "sbfm", "ubfx", "sxtw", "uxtw",
      "dup", "ins", "umov", "fmov", "paciasp", "autiasp", "bti", "hint", "svc",
      // RISC-V
      "addi", "addiw", "addw", "subw", "li", "mv", "lui", "auipc", "bnez", "beqz", "beq", "bne", "blt", "bge", "bltu",
      "bgeu", "j", "jal", "jalr", "slli", "srli", "srai", "andi", "ori", "xori", "fence", "vsetvli", "vsetivli",
      "vsetvl", "vmv", "fmv", "ecall", "csrr", "rdcycle", "rdtime", "sext", "zext"};
  return v;
}

inline unsigned x86_width(const std::vector<std::string>& quals) {
  for (const auto& q : quals) {
    if (q == "zmm") return 64;
    if (q == "ymm") return 32;
    if (q == "xmm") return 16;
  }
  return 16;
}

inline std::string x86_family(unsigned width) {
  return width == 64 ? "avx512" : width == 32 ? "avx2" : "sse";
}

inline OpcodeClass classify_x86_vector(const std::string& base, const std::vector<std::string>& quals, bool load,
                                       bool store) {
  OpcodeClass c;
  std::string m = base;
  if (m.size() > 1 && m[0] == 'v') m = m.substr(1);
  const unsigned width = x86_width(quals);
  auto suffix = [&](std::string_view s) { return ends_with(m, s); };
  const bool packed_d = suffix("pd"), packed_s = suffix("ps"), scalar_d = suffix("sd"), scalar_s = suffix("ss");
  const bool typed = packed_d || packed_s || scalar_d || scalar_s;
  const std::string stem = typed ? m.substr(0, m.size() - 2) : m;

  auto elements = [&]() -> unsigned {
    if (scalar_d || scalar_s) return 1;
    return width / (packed_d ? 8 : 4);
  };
  auto value_bytes = [&]() -> unsigned {
    if (scalar_d) return 8;
    if (scalar_s) return 4;
    return width;
  };
  if (typed && one_of(stem, {"add", "sub", "mul", "div", "sqrt"})) {
    c.known = c.is_fp = true;
    c.flops = elements();
  } else if (typed && (starts_with(stem, "fmadd") || starts_with(stem, "fmsub") || starts_with(stem, "fnmadd") ||
                       starts_with(stem, "fnmsub") || starts_with(stem, "fmaddsub") || starts_with(stem, "fmsubadd"))) {
    c.known = c.is_fp = true;
    c.flops = 2 * elements();
  } else if (typed && one_of(stem, {"mova", "movu", "mov", "movnt", "movl", "movh", "min", "max", "and", "andn", "or",
                                    "xor", "shuf", "unpckl", "unpckh", "blend", "broadcasts", "cmp"})) {
    c.known = true;
  } else if (one_of(m, {"movdqa", "movdqu", "movdqa32", "movdqa64", "movdqu8", "movdqu16", "movdqu32", "movdqu64",
                        "movntdq", "broadcastsd", "broadcastss", "pbroadcastq"})) {
    c.known = true;
  } else if (one_of(m, {"movq", "movd"})) {
    c.known = true;
    if (load || store) {
      c.bytes = m == "movq" ? 8 : 4;
      c.is_load = load;
      c.is_store = store;
      c.family = "integer";
      return c;
    }
  }
  if (!c.known) return c;
  if (load || store) {
    c.bytes = value_bytes();
    c.is_load = load;
    c.is_store = store;
  }
  c.family = (scalar_d || scalar_s) ? "scalar" : x86_family(width);
  return c;
}

inline unsigned a64_bytes(const std::vector<std::string>& quals) {
  for (const auto& q : quals) {
    if (q == "q") return 16;
    if (q == "d" || q == "x") return 8;
    if (q == "s" || q == "w") return 4;
    if (q == "h") return 2;
    if (q == "b") return 1;
    if (q == "2d" || q == "4s" || q == "8h" || q == "16b") return 16;
    if (q == "1d" || q == "2s" || q == "4h" || q == "8b") return 8;
  }
  return 0;
}

inline unsigned a64_elements(const std::vector<std::string>& quals, bool& vector) {
  vector = false;
  for (const auto& q : quals) {
    if (q == "2d" || q == "2s") return vector = true, 2;
    if (q == "4s" || q == "4h") return vector = true, 4;
    if (q == "8h") return vector = true, 8;
    if (q == "d" || q == "s" || q == "h") return 1;
  }
  return 1;
}

}  // namespace detail::op

/// Classifies one canonical opcode name; unknown names come back with
/// known == false and contribute nothing.
inline OpcodeClass classify_opcode(std::string_view name) {
  using namespace detail::op;
  auto parts = split_dots(lower(name));
  OpcodeClass c;
  if (parts.empty() || parts[0].empty()) return c;
  std::string base = parts[0];
  std::vector<std::string> quals(parts.begin() + 1, parts.end());
  bool load = std::find(quals.begin(), quals.end(), "load") != quals.end();
  bool store = std::find(quals.begin(), quals.end(), "store") != quals.end();

  // AArch64 and RISC-V loads/stores carry the access width in the mnemonic or qualifier.
  struct Mem {
    std::string_view name;
    bool load;
    unsigned bytes;  // 0: from qualifier
    unsigned regs;
  };
  static constexpr std::array mems{
      Mem{"ldr", true, 0, 1},  Mem{"str", false, 0, 1}, Mem{"ldur", true, 0, 1}, Mem{"stur", false, 0, 1},
      Mem{"ldp", true, 0, 2},  Mem{"stp", false, 0, 2}, Mem{"ld1", true, 0, 1},  Mem{"st1", false, 0, 1},
      Mem{"ldrb", true, 1, 1}, Mem{"strb", false, 1, 1}, Mem{"ldrh", true, 2, 1}, Mem{"strh", false, 2, 1},
      Mem{"ldrsw", true, 4, 1}, Mem{"fld", true, 8, 1}, Mem{"fsd", false, 8, 1}, Mem{"flw", true, 4, 1},
      Mem{"fsw", false, 4, 1}, Mem{"ld", true, 8, 1},   Mem{"sd", false, 8, 1},  Mem{"lw", true, 4, 1},
      Mem{"sw", false, 4, 1},  Mem{"lwu", true, 4, 1},  Mem{"lh", true, 2, 1},  Mem{"sh", false, 2, 1},
      Mem{"lb", true, 1, 1},   Mem{"sb", false, 1, 1},  Mem{"lbu", true, 1, 1}, Mem{"lhu", true, 2, 1}};
  for (const auto& m : mems) {
    if (m.name != base) continue;
    unsigned b = m.bytes ? m.bytes : a64_bytes(quals);
    if (!b) return c;
    c.known = true;
    c.bytes = b * m.regs;
    c.is_load = m.load;
    c.is_store = !m.load;
    bool x_or_w = std::find_if(quals.begin(), quals.end(), [](const std::string& q) { return q == "x" || q == "w"; }) !=
                  quals.end();
    if (base == "fld" || base == "fsd" || base == "flw" || base == "fsw")
      c.family = "scalar";
    else if (m.bytes || x_or_w)
      c.family = "integer";
    else
      c.family = b == 16 ? "neon" : "scalar";
    return c;
  }

  // AArch64 / RISC-V scalar and NEON FP arithmetic.
  if (one_of(base, {"fadd", "fsub", "fmul", "fdiv", "fsqrt", "fnmul", "fabd"}) && !quals.empty()) {
    bool vec;
    unsigned e = a64_elements(quals, vec);
    c.known = c.is_fp = true;
    c.flops = e;
    c.family = vec ? "neon" : "scalar";
    return c;
  }
  if (one_of(base, {"fmla", "fmls"}) && !quals.empty()) {
    bool vec;
    unsigned e = a64_elements(quals, vec);
    c.known = c.is_fp = true;
    c.flops = 2 * e;
    c.family = vec ? "neon" : "scalar";
    return c;
  }
  if (one_of(base, {"fmadd", "fmsub", "fnmadd", "fnmsub"}) && !quals.empty() &&
      (quals[0] == "d" || quals[0] == "s" || quals[0] == "h")) {
    c.known = c.is_fp = true;
    c.flops = 2;
    c.family = "scalar";
    return c;
  }

  auto x86 = classify_x86_vector(base, quals, load, store);
  if (x86.known) return x86;

  const auto& ints = integer_ops();
  if (std::find(ints.begin(), ints.end(), base) != ints.end()) {
    c.known = true;
    c.family = "integer";
    if (load || store) {
      c.bytes = 8;
      for (const auto& q : quals) {
        if (q == "b") c.bytes = 1;
        if (q == "w") c.bytes = 2;
        if (q == "d") c.bytes = 4;
      }
      c.is_load = load;
      c.is_store = store;
    }
    return c;
  }
  // x86 conditional moves / set instructions and AArch64 conditional branches.
  if (starts_with(base, "cmov") || starts_with(base, "set") || starts_with(base, "j") ||
      (base == "b" && !quals.empty())) {
    c.known = true;
    c.family = "integer";
    return c;
  }
  c.family = "unclassified";
  return c;
}

/// Canonical opcode name for one assembly instruction of a generated kernel.
inline std::string canonical_opcode(Arch arch, std::string_view mnemonic, const std::vector<std::string>& operands) {
  using namespace detail::op;
  std::string m = lower(mnemonic);
  switch (arch) {
    case Arch::x86_64: {
      std::string width;
      int mem_pos = -1;
      for (std::size_t i = 0; i < operands.size(); ++i) {
        const auto& o = operands[i];
        if (o.find('(') != std::string::npos) mem_pos = static_cast<int>(i);
        if (width.empty())
          for (std::string_view w : {"xmm", "ymm", "zmm"})
            if (o.find(std::string("%") + std::string(w)) != std::string::npos) width = w;
      }
      if (width.empty()) {
        for (std::string_view s : {"addq", "subq", "movq", "andq", "xorq", "cmpq", "incq", "decq", "leaq"})
          if (m == s) m.pop_back();
      }
      std::string out = m;
      if (!width.empty()) out += "." + width;
      if (mem_pos >= 0) out += mem_pos == 0 ? ".load" : ".store";
      return out;
    }
    case Arch::aarch64: {
      if (operands.empty()) return m;
      std::string r = lower(operands[0]);
      auto dot = r.find('.');
      if (dot != std::string::npos && r.size() > 1 && r[0] == 'v' && std::isdigit(static_cast<unsigned char>(r[1])))
        return m + "." + r.substr(dot + 1);
      if (!r.empty() && one_of(std::string_view(&r[0], 1), {"q", "d", "s", "h", "b", "x", "w"}) && r != "sp" &&
          r.size() > 1 && std::isdigit(static_cast<unsigned char>(r[1])))
        return m + "." + r.substr(0, 1);
      return m;
    }
    case Arch::riscv64: return m;
  }
  return m;
}

/// Canonical name for an Intel SDE iform such as
/// `VMOVAPD_ZMMf64_MASKmskw_MEMf64_AVX512` or `ADD_GPRv_IMMb`.
inline std::string canonical_from_iform(std::string_view iform) {
  using namespace detail::op;
  std::string s = lower(iform);
  std::vector<std::string> tok;
  std::string cur;
  for (char ch : s) {
    if (ch == '_') {
      tok.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  tok.push_back(cur);
  if (tok.empty()) return s;
  std::string out = tok[0];
  std::string width, mem_size;
  int mem_pos = -1, operand_index = 0;
  for (std::size_t i = 1; i < tok.size(); ++i) {
    const auto& t = tok[i];
    bool operand = true;
    if (starts_with(t, "zmm")) {
      if (width.empty()) width = "zmm";
    } else if (starts_with(t, "ymm")) {
      if (width.empty()) width = "ymm";
    } else if (starts_with(t, "xmm")) {
      if (width.empty()) width = "xmm";
    } else if (starts_with(t, "mem")) {
      if (mem_pos < 0) {
        mem_pos = operand_index;
        std::string_view sz = std::string_view(t).substr(3);
        mem_size = sz == "b" ? "b" : sz == "w" ? "w" : sz == "d" ? "d" : "";
      }
    } else if (starts_with(t, "mask") || starts_with(t, "gpr") || starts_with(t, "imm") || starts_with(t, "rel") ||
               starts_with(t, "agen") || starts_with(t, "one")) {
    } else {
      operand = false;  // ISA-set suffix such as avx512 or fma
    }
    if (operand) ++operand_index;
  }
  if (!width.empty()) out += "." + width;
  else if (!mem_size.empty()) out += "." + mem_size;
  if (mem_pos >= 0) out += mem_pos == 0 && operand_index > 1 ? ".store" : ".load";
  return out;
}

}  // namespace carm

#endif  // CARM_OPCODES_HPP_
