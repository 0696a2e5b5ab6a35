#ifndef CARM_VERIFY_HPP_
#define CARM_VERIFY_HPP_

#include <cctype>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "carm/codegen.hpp"
#include "carm/error.hpp"
#include "carm/opcodes.hpp"

namespace carm {

/// Result of re-reading a kernel's assembly and executing it symbolically for
/// one outer iteration.
struct VerificationReport {
  bool match = false;
  ExpectedCounts measured;
  std::int64_t load_delta = 0;
  std::int64_t store_delta = 0;
  std::int64_t mem_delta = 0;
  std::int64_t fp_delta = 0;
  std::int64_t int_add_delta = 0;
  std::uint64_t max_offset = 0;
  bool offsets_ok = true;
  bool counter_immediates_ok = true;
  bool coverage_ok = true;
  std::uint64_t bytes_covered = 0;
  std::size_t min_reuse_distance = 0;  // smallest distance between repeats of an FP destination
  std::size_t required_reuse_distance = 0;
  bool reuse_ok = true;
  bool pointer_loaded_counter = false;
  std::map<std::string, std::uint64_t> opcode_histogram;  // canonical opcode -> count inside the outer loop
  std::vector<std::string> problems;
};

namespace detail::asmv {

inline constexpr std::int64_t kArrayBase = 0x100000000000LL;
inline constexpr std::int64_t kSlotAddr = 0x200000000000LL;
inline constexpr std::uint64_t kStepLimit = 2'000'000'000ULL;

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  bool neg = false;
  std::size_t i = 0;
  if (t[0] == '-' || t[0] == '+') {
    neg = t[0] == '-';
    i = 1;
  }
  int base = 10;
  if (t.size() > i + 1 && t[i] == '0' && (t[i + 1] == 'x' || t[i + 1] == 'X')) {
    base = 16;
    i += 2;
  }
  if (i >= t.size()) return std::nullopt;
  std::int64_t v = 0;
  for (; i < t.size(); ++i) {
    int d;
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(t[i])));
    if (c >= '0' && c <= '9')
      d = c - '0';
    else if (base == 16 && c >= 'a' && c <= 'f')
      d = c - 'a' + 10;
    else
      return std::nullopt;
    v = v * base + d;
  }
  return neg ? -v : v;
}

inline std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

struct Operand {
  enum Kind { reg, imm, mem, shift, label } kind = label;
  std::string name;  // register (without arrangement suffix) or label
  std::int64_t value = 0;  // immediate, displacement or shift amount
  std::string base;        // memory base register
};

inline Operand parse_operand(Arch arch, const std::string& t) {
  Operand o;
  if (arch == Arch::x86_64) {
    if (!t.empty() && t[0] == '%') {
      o.kind = Operand::reg;
      o.name = t;
    } else if (!t.empty() && t[0] == '$') {
      o.kind = Operand::imm;
      o.value = parse_int(t.substr(1)).value_or(0);
    } else if (auto lp = t.find('('); lp != std::string::npos) {
      o.kind = Operand::mem;
      o.value = lp ? parse_int(t.substr(0, lp)).value_or(0) : 0;
      o.base = trim(t.substr(lp + 1, t.find(')') - lp - 1));
    } else {
      o.name = t;
    }
    return o;
  }
  if (arch == Arch::aarch64) {
    if (!t.empty() && t[0] == '[') {
      o.kind = Operand::mem;
      auto inner = t.substr(1, t.find(']') - 1);
      auto parts = split_operands(inner);
      o.base = parts.empty() ? "" : parts[0];
      if (parts.size() > 1 && parts[1][0] == '#') o.value = parse_int(parts[1].substr(1)).value_or(0);
    } else if (!t.empty() && t[0] == '#') {
      o.kind = Operand::imm;
      o.value = parse_int(t.substr(1)).value_or(0);
    } else if (t.rfind("lsl", 0) == 0) {
      o.kind = Operand::shift;
      auto h = t.find('#');
      o.value = h == std::string::npos ? 0 : parse_int(t.substr(h + 1)).value_or(0);
    } else if (!t.empty() && t[0] == '.') {
      o.name = t;
    } else {
      o.kind = Operand::reg;
      o.name = t.substr(0, t.find('.'));
    }
    return o;
  }
  // riscv64
  if (auto lp = t.find('('); lp != std::string::npos) {
    o.kind = Operand::mem;
    o.value = lp ? parse_int(t.substr(0, lp)).value_or(0) : 0;
    o.base = trim(t.substr(lp + 1, t.find(')') - lp - 1));
  } else if (auto v = parse_int(t)) {
    o.kind = Operand::imm;
    o.value = *v;
  } else if (!t.empty() && t[0] == '.') {
    o.name = t;
  } else {
    o.kind = Operand::reg;
    o.name = t;
  }
  return o;
}

enum class Op {
  other,
  mov_reg,     // dst = src
  mov_imm,     // dst = imm
  movk,        // dst |= imm << shift (after clearing that field)
  add_imm,     // dst = src + imm (x86: dst += imm)
  add_reg,     // dst = src + src2
  sub_imm,     // dst = src - imm
  load_int,    // dst = *(base + disp)
  vec_load,
  vec_store,
  fp,
  branch_nz,   // flags (x86/aarch64) or register (riscv) not zero
  branch_z,
  jump,
  ret,
};

struct Decoded {
  Op op = Op::other;
  int dst = -1, src = -1, src2 = -1, base = -1;
  std::int64_t imm = 0;
  bool sets_flags = false;
  int target = -1;  // instruction index
  std::string fp_reg;
  std::size_t line = 0;
  bool is_branch_like = false;
  std::string canonical;
};

struct Program {
  std::vector<Decoded> code;
  std::vector<std::size_t> label_boundaries;  // instruction indices where labels start
  int entry = 0;
  int loop_begin = -1, loop_end = -1;  // outer loop body, inclusive
  std::unordered_map<std::string, int> reg_ids;
};

inline int reg_id(Program& p, const std::string& name) {
  auto [it, inserted] = p.reg_ids.try_emplace(name, static_cast<int>(p.reg_ids.size()));
  return it->second;
}

inline bool is_vector_register(Arch arch, const std::string& r) {
  switch (arch) {
    case Arch::x86_64: return r.rfind("%xmm", 0) == 0 || r.rfind("%ymm", 0) == 0 || r.rfind("%zmm", 0) == 0;
    case Arch::aarch64:
      return !r.empty() && (r[0] == 'q' || r[0] == 'd' || r[0] == 's' || r[0] == 'v') && r != "sp";
    case Arch::riscv64: return !r.empty() && (r[0] == 'f' || r[0] == 'v') && r != "fp";
  }
  return false;
}

inline Program decode(const KernelSource& ks, std::vector<std::string>& problems) {
  const Arch arch = ks.isa.arch;
  const IsaDescriptor& d = ks.isa;
  Program p;
  std::map<std::string, int> labels;
  struct Pending {
    std::size_t index;
    std::string label;
    std::size_t line;
  };
  std::vector<Pending> pending;
  std::vector<std::pair<std::string, std::vector<std::string>>> raw;

  std::size_t line_no = 0;
  std::string_view text = ks.assembly_text;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    // Comments: '//' on aarch64, '#' elsewhere ('#' marks immediates on aarch64).
    if (arch == Arch::aarch64) {
      if (auto c = line.find("//"); c != std::string::npos) line.resize(c);
    } else {
      if (auto c = line.find('#'); c != std::string::npos) line.resize(c);
    }
    std::string t = trim(line);
    if (t.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    if (t.back() == ':') {
      labels[t.substr(0, t.size() - 1)] = static_cast<int>(p.code.size());
      p.label_boundaries.push_back(p.code.size());
      continue;
    }
    if (t[0] == '.') continue;  // directive
    std::string mnemonic, rest;
    auto sp = t.find_first_of(" \t");
    if (sp == std::string::npos) {
      mnemonic = t;
    } else {
      mnemonic = t.substr(0, sp);
      rest = trim(t.substr(sp));
    }
    auto ops_text = split_operands(rest);
    std::vector<Operand> ops;
    for (const auto& o : ops_text) ops.push_back(parse_operand(arch, o));

    Decoded di;
    di.line = line_no;
    di.canonical = canonical_opcode(arch, mnemonic, ops_text);
    auto R = [&](const Operand& o) { return reg_id(p, o.name); };
    auto branch_to = [&](Op op, const std::string& label) {
      di.op = op;
      di.is_branch_like = true;
      pending.push_back({p.code.size(), label, line_no});
    };
    const bool is_load_mn = mnemonic == d.load_mnemonic;
    const bool is_store_mn = mnemonic == d.store_mnemonic;
    bool is_fp_mn = false;
    for (const auto& m : d.fp_mnemonics) is_fp_mn = is_fp_mn || m == mnemonic;

    if (arch == Arch::x86_64) {
      if ((is_load_mn || is_store_mn) && ops.size() == 2 &&
          (ops[0].kind == Operand::mem || ops[1].kind == Operand::mem)) {
        bool load = ops[0].kind == Operand::mem;
        const Operand& m = load ? ops[0] : ops[1];
        di.op = load ? Op::vec_load : Op::vec_store;
        di.base = reg_id(p, m.base);
        di.imm = m.value;
      } else if (is_fp_mn && !ops.empty()) {
        di.op = Op::fp;
        di.fp_reg = ops.back().name;
      } else if (mnemonic == "movq" && ops.size() == 2 && ops[1].kind == Operand::reg) {
        if (ops[0].kind == Operand::reg) {
          di.op = Op::mov_reg;
          di.src = R(ops[0]);
        } else if (ops[0].kind == Operand::imm) {
          di.op = Op::mov_imm;
          di.imm = ops[0].value;
        } else if (ops[0].kind == Operand::mem) {
          di.op = Op::load_int;
          di.base = reg_id(p, ops[0].base);
          di.imm = ops[0].value;
        }
        di.dst = R(ops[1]);
      } else if ((mnemonic == "addq" || mnemonic == "subq") && ops.size() == 2 && ops[1].kind == Operand::reg) {
        di.dst = R(ops[1]);
        di.src = di.dst;
        di.sets_flags = true;
        if (ops[0].kind == Operand::imm) {
          di.op = mnemonic == "addq" ? Op::add_imm : Op::sub_imm;
          di.imm = ops[0].value;
        } else if (mnemonic == "addq" && ops[0].kind == Operand::reg) {
          di.op = Op::add_reg;
          di.src2 = R(ops[0]);
        }
      } else if (mnemonic == "jnz" || mnemonic == "jne") {
        branch_to(Op::branch_nz, ops.empty() ? "" : ops[0].name);
      } else if (mnemonic == "jz" || mnemonic == "je") {
        branch_to(Op::branch_z, ops.empty() ? "" : ops[0].name);
      } else if (mnemonic == "jmp") {
        branch_to(Op::jump, ops.empty() ? "" : ops[0].name);
      } else if (mnemonic == "ret") {
        di.op = Op::ret;
      }
    } else if (arch == Arch::aarch64) {
      bool vec_reg = !ops.empty() && ops[0].kind == Operand::reg && is_vector_register(arch, ops[0].name);
      if ((is_load_mn || is_store_mn) && ops.size() == 2 && ops[1].kind == Operand::mem && vec_reg) {
        di.op = is_load_mn ? Op::vec_load : Op::vec_store;
        di.base = reg_id(p, ops[1].base);
        di.imm = ops[1].value;
      } else if (is_load_mn && ops.size() == 2 && ops[1].kind == Operand::mem) {
        di.op = Op::load_int;
        di.dst = R(ops[0]);
        di.base = reg_id(p, ops[1].base);
        di.imm = ops[1].value;
      } else if (is_fp_mn && vec_reg) {
        di.op = Op::fp;
        di.fp_reg = ops[0].name;
      } else if ((mnemonic == "mov" || mnemonic == "movz") && ops.size() >= 2 && ops[0].kind == Operand::reg) {
        di.dst = R(ops[0]);
        if (ops[1].kind == Operand::imm) {
          di.op = Op::mov_imm;
          di.imm = ops[1].value << (ops.size() > 2 ? ops[2].value : 0);
        } else if (ops[1].kind == Operand::reg) {
          di.op = Op::mov_reg;
          di.src = R(ops[1]);
        }
      } else if (mnemonic == "movk" && ops.size() >= 2) {
        di.op = Op::movk;
        di.dst = R(ops[0]);
        di.imm = ops[1].value;
        di.src2 = static_cast<int>(ops.size() > 2 ? ops[2].value : 0);
      } else if ((mnemonic == "add" || mnemonic == "adds" || mnemonic == "sub" || mnemonic == "subs") &&
                 ops.size() >= 3 && ops[0].kind == Operand::reg && ops[1].kind == Operand::reg) {
        di.dst = R(ops[0]);
        di.src = R(ops[1]);
        di.sets_flags = mnemonic.back() == 's';
        bool add = mnemonic[0] == 'a';
        if (ops[2].kind == Operand::imm) {
          di.op = add ? Op::add_imm : Op::sub_imm;
          di.imm = ops[2].value << (ops.size() > 3 ? ops[3].value : 0);
        } else if (add && ops[2].kind == Operand::reg) {
          di.op = Op::add_reg;
          di.src2 = R(ops[2]);
        }
      } else if (mnemonic == "b.ne") {
        branch_to(Op::branch_nz, ops.empty() ? "" : ops[0].name);
      } else if (mnemonic == "b.eq") {
        branch_to(Op::branch_z, ops.empty() ? "" : ops[0].name);
      } else if (mnemonic == "cbnz" || mnemonic == "cbz") {
        branch_to(mnemonic == "cbnz" ? Op::branch_nz : Op::branch_z, ops.size() > 1 ? ops[1].name : "");
        di.src = ops.empty() ? -1 : R(ops[0]);
      } else if (mnemonic == "b") {
        branch_to(Op::jump, ops.empty() ? "" : ops[0].name);
      } else if (mnemonic == "ret") {
        di.op = Op::ret;
      }
    } else {  // riscv64
      bool vec_reg = !ops.empty() && ops[0].kind == Operand::reg && is_vector_register(arch, ops[0].name);
      if ((is_load_mn || is_store_mn) && ops.size() == 2 && ops[1].kind == Operand::mem && vec_reg) {
        di.op = is_load_mn ? Op::vec_load : Op::vec_store;
        di.base = reg_id(p, ops[1].base);
        di.imm = ops[1].value;
      } else if (is_fp_mn && vec_reg) {
        di.op = Op::fp;
        di.fp_reg = ops[0].name;
      } else if (mnemonic == "ld" && ops.size() == 2 && ops[1].kind == Operand::mem) {
        di.op = Op::load_int;
        di.dst = R(ops[0]);
        di.base = reg_id(p, ops[1].base);
        di.imm = ops[1].value;
      } else if (mnemonic == "mv" && ops.size() == 2) {
        di.op = Op::mov_reg;
        di.dst = R(ops[0]);
        di.src = R(ops[1]);
      } else if (mnemonic == "li" && ops.size() == 2) {
        di.op = Op::mov_imm;
        di.dst = R(ops[0]);
        di.imm = ops[1].value;
      } else if (mnemonic == "addi" && ops.size() == 3) {
        di.op = Op::add_imm;
        di.dst = R(ops[0]);
        di.src = R(ops[1]);
        di.imm = ops[2].value;
      } else if (mnemonic == "add" && ops.size() == 3) {
        di.op = Op::add_reg;
        di.dst = R(ops[0]);
        di.src = R(ops[1]);
        di.src2 = R(ops[2]);
      } else if (mnemonic == "bnez" || mnemonic == "beqz") {
        branch_to(mnemonic == "bnez" ? Op::branch_nz : Op::branch_z, ops.size() > 1 ? ops[1].name : "");
        di.src = ops.empty() ? -1 : R(ops[0]);
      } else if (mnemonic == "j") {
        branch_to(Op::jump, ops.empty() ? "" : ops[0].name);
      } else if (mnemonic == "ret") {
        di.op = Op::ret;
      }
    }
    p.code.push_back(std::move(di));
    if (nl == text.size()) break;
  }
  for (const auto& pend : pending) {
    auto it = labels.find(pend.label);
    if (it == labels.end()) {
      problems.push_back("line " + std::to_string(pend.line) + ": branch to unknown label '" + pend.label + "'");
      continue;
    }
    p.code[pend.index].target = it->second;
    if (pend.label == ".Lcarm_outer" || pend.label == ".Lclktest_loop") {
      p.loop_begin = it->second;
      p.loop_end = static_cast<int>(pend.index);
    }
  }
  auto entry = labels.find(std::string(kKernelSymbol));
  p.entry = entry == labels.end() ? 0 : entry->second;
  if (entry == labels.end()) problems.push_back("kernel symbol " + std::string(kKernelSymbol) + " not found");
  return p;
}

}  // namespace detail::asmv

/// Re-reads the assembly text, executes one outer iteration symbolically and
/// compares what it saw with the kernel's plan and expected counts.
inline VerificationReport verify_kernel(const KernelSource& ks) {
  namespace v = detail::asmv;
  VerificationReport rep;
  const IsaDescriptor& d = ks.isa;
  v::Program prog = v::decode(ks, rep.problems);
  const auto regs = detail::arch_regs(d.arch);
  const int array_r = v::reg_id(prog, regs.array);
  const int outer_r = v::reg_id(prog, regs.outer);
  const int slot_r = v::reg_id(prog, regs.slot);
  const int inner_r = v::reg_id(prog, regs.inner);
  const int chain_r = v::reg_id(prog, regs.ptr);
  const bool probe = ks.spec.kind == KernelKind::freq_probe;
  const bool streaming = ks.spec.kind == KernelKind::memory || ks.spec.kind == KernelKind::mixed;
  const std::uint64_t mem_bytes = emitted_mem_bytes(d);

  std::vector<std::int64_t> r(prog.reg_ids.size() + 1, 0);
  r[array_r] = v::kArrayBase;
  r[outer_r] = 1;
  r[slot_r] = v::kSlotAddr;
  bool zf = false;

  std::uint64_t cursor = 0;
  std::uint64_t loads = 0, stores = 0, fps = 0, adds = 0;
  auto problem = [&](std::string msg) {
    if (rep.problems.size() < 32) rep.problems.push_back(std::move(msg));
  };

  std::uint64_t steps = 0;
  std::size_t pc = static_cast<std::size_t>(prog.entry);
  bool returned = false;
  while (pc < prog.code.size()) {
    if (++steps > v::kStepLimit) {
      problem("step limit exceeded; kernel does not terminate after one outer iteration");
      break;
    }
    const auto& in = prog.code[pc];
    std::size_t next = pc + 1;
    if (static_cast<int>(pc) >= prog.loop_begin && static_cast<int>(pc) <= prog.loop_end)
      ++rep.opcode_histogram[in.canonical];
    switch (in.op) {
      case v::Op::mov_reg: r[in.dst] = r[in.src]; break;
      case v::Op::mov_imm:
        r[in.dst] = in.imm;
        if (in.dst == inner_r && static_cast<std::uint64_t>(in.imm) > d.max_inner_immediate) {
          rep.counter_immediates_ok = false;
          problem("line " + std::to_string(in.line) + ": inner-loop count " + std::to_string(in.imm) +
                  " exceeds immediate limit " + std::to_string(d.max_inner_immediate));
        }
        break;
      case v::Op::movk: {
        std::uint64_t mask = 0xffffULL << in.src2;
        r[in.dst] = static_cast<std::int64_t>((static_cast<std::uint64_t>(r[in.dst]) & ~mask) |
                                              (static_cast<std::uint64_t>(in.imm) << in.src2));
        break;
      }
      case v::Op::add_imm:
        r[in.dst] = r[in.src] + in.imm;
        if (in.sets_flags) zf = r[in.dst] == 0;
        if (probe && in.dst == chain_r) ++adds;
        break;
      case v::Op::add_reg:
        r[in.dst] = r[in.src] + r[in.src2];
        if (in.sets_flags) zf = r[in.dst] == 0;
        if (probe && in.dst == chain_r) ++adds;
        break;
      case v::Op::sub_imm:
        r[in.dst] = r[in.src] - in.imm;
        if (in.sets_flags) zf = r[in.dst] == 0;
        break;
      case v::Op::load_int: {
        std::int64_t addr = r[in.base] + in.imm;
        if (addr != v::kSlotAddr) {
          problem("line " + std::to_string(in.line) + ": integer load from unexpected address");
          r[in.dst] = 0;
        } else {
          r[in.dst] = static_cast<std::int64_t>(ks.plan.inner_iters);
          if (in.dst == inner_r) rep.pointer_loaded_counter = true;
        }
        break;
      }
      case v::Op::vec_load:
      case v::Op::vec_store: {
        (in.op == v::Op::vec_load ? loads : stores)++;
        if (in.imm < 0 || static_cast<std::uint64_t>(in.imm) >= d.max_mem_offset) {
          if (rep.offsets_ok)
            problem("line " + std::to_string(in.line) + ": offset " + std::to_string(in.imm) + " outside [0, " +
                    std::to_string(d.max_mem_offset) + ")");
          rep.offsets_ok = false;
        }
        if (in.imm > 0) rep.max_offset = std::max<std::uint64_t>(rep.max_offset, static_cast<std::uint64_t>(in.imm));
        std::int64_t rel = r[in.base] + in.imm - v::kArrayBase;
        if (rep.coverage_ok && (rel < 0 || static_cast<std::uint64_t>(rel) != cursor)) {
          problem("line " + std::to_string(in.line) + ": access at byte " + std::to_string(rel) + ", expected " +
                  std::to_string(cursor));
          rep.coverage_ok = false;
        }
        cursor += mem_bytes;
        break;
      }
      case v::Op::fp: ++fps; break;
      case v::Op::branch_nz:
      case v::Op::branch_z: {
        bool nz = (d.arch == Arch::riscv64 || in.src >= 0) ? r[in.src] != 0 : !zf;
        bool take = in.op == v::Op::branch_nz ? nz : !nz;
        if (take && in.target >= 0) next = static_cast<std::size_t>(in.target);
        break;
      }
      case v::Op::jump:
        if (in.target >= 0) next = static_cast<std::size_t>(in.target);
        break;
      case v::Op::ret: returned = true; break;
      case v::Op::other: break;
    }
    if (returned) break;
    pc = next;
  }
  if (!returned) problem("kernel never reached ret");

  rep.measured.loads_per_outer_iter = loads;
  rep.measured.stores_per_outer_iter = stores;
  rep.measured.mem_inst_per_outer_iter = loads + stores;
  rep.measured.fp_inst_per_outer_iter = fps;
  rep.measured.int_add_per_outer_iter = adds;
  rep.measured.bytes_per_mem_inst = ks.expected.bytes_per_mem_inst;
  rep.measured.flops_per_fp_inst = ks.expected.flops_per_fp_inst;
  rep.bytes_covered = cursor;

  auto delta = [](std::uint64_t a, std::uint64_t b) { return static_cast<std::int64_t>(a) - static_cast<std::int64_t>(b); };
  rep.load_delta = delta(loads, ks.expected.loads_per_outer_iter);
  rep.store_delta = delta(stores, ks.expected.stores_per_outer_iter);
  rep.mem_delta = delta(loads + stores, ks.expected.mem_inst_per_outer_iter);
  rep.fp_delta = delta(fps, ks.expected.fp_inst_per_outer_iter);
  rep.int_add_delta = delta(adds, ks.expected.int_add_per_outer_iter);

  if (streaming && rep.coverage_ok && cursor != ks.spec.array_bytes) {
    rep.coverage_ok = false;
    problem("covered " + std::to_string(cursor) + " B of " + std::to_string(ks.spec.array_bytes) + " B array");
  }
  if (rep.pointer_loaded_counter != ks.plan.pointer_loaded_counter && streaming) {
    problem("pointer-loaded counter flag disagrees with plan");
  }

  // FP destination reuse over the static text, per straight-line segment.
  std::size_t pool = ks.fp_register_pool.size();
  rep.required_reuse_distance = pool;
  rep.min_reuse_distance = std::numeric_limits<std::size_t>::max();
  {
    std::unordered_map<std::string, std::size_t> last;
    std::size_t idx = 0, boundary = 0;
    for (std::size_t i = 0; i < prog.code.size(); ++i) {
      while (boundary < prog.label_boundaries.size() && prog.label_boundaries[boundary] <= i) {
        if (prog.label_boundaries[boundary] == i) last.clear();
        ++boundary;
      }
      const auto& in = prog.code[i];
      if (in.is_branch_like) last.clear();
      if (in.op != v::Op::fp) continue;
      auto it = last.find(in.fp_reg);
      if (it != last.end()) rep.min_reuse_distance = std::min(rep.min_reuse_distance, idx - it->second);
      last[in.fp_reg] = idx++;
    }
  }
  if (rep.min_reuse_distance != std::numeric_limits<std::size_t>::max() && rep.min_reuse_distance < pool) {
    rep.reuse_ok = false;
    problem("FP destination reused after " + std::to_string(rep.min_reuse_distance) + " instructions (pool " +
            std::to_string(pool) + ")");
  }
  if (rep.min_reuse_distance == std::numeric_limits<std::size_t>::max()) rep.min_reuse_distance = 0;

  if (rep.load_delta || rep.store_delta || rep.fp_delta || rep.int_add_delta)
    problem("instruction counts differ from plan: loads " + std::to_string(rep.load_delta) + ", stores " +
            std::to_string(rep.store_delta) + ", fp " + std::to_string(rep.fp_delta) + ", adds " +
            std::to_string(rep.int_add_delta));

  rep.match = rep.problems.empty() && rep.offsets_ok && rep.coverage_ok && rep.reuse_ok &&
              rep.counter_immediates_ok;
  return rep;
}

/// verify_kernel() that throws VerificationError on any disagreement.
inline VerificationReport require_verified(const KernelSource& ks) {
  auto rep = verify_kernel(ks);
  if (!rep.match) {
    std::string msg = "kernel " + ks.file_name() + " failed verification:";
    for (const auto& p : rep.problems) msg += "\n  " + p;
    throw VerificationError(msg);
  }
  return rep;
}

}  // namespace carm

#endif  // CARM_VERIFY_HPP_
