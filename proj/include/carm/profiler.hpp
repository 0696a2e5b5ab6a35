#ifndef CARM_PROFILER_HPP_
#define CARM_PROFILER_HPP_

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "carm/error.hpp"
#include "carm/isa.hpp"
#include "carm/model.hpp"
#include "carm/opcodes.hpp"
#include "carm/process.hpp"
#include "carm/records.hpp"
#include "carm/report.hpp"

namespace carm {

/// Line printed by carm_roi_end() with the ROI wall-clock time in seconds.
inline constexpr std::string_view kRoiElapsedTag = "CARM_ROI_ELAPSED";
/// Counter-library region name used by carm_roi.h.
inline constexpr std::string_view kRoiRegionName = "carm_roi";

enum class DbiBackend { dynamorio, sde };

constexpr std::string_view to_string(DbiBackend b) { return b == DbiBackend::dynamorio ? "dynamorio" : "sde"; }

inline DbiBackend parse_dbi_backend(std::string_view s) {
  std::string l = detail::op::lower(s);
  if (l == "dynamorio" || l == "dr") return DbiBackend::dynamorio;
  if (l == "sde") return DbiBackend::sde;
  throw ConfigError("unknown DBI backend '" + std::string(s) + "' (expected dynamorio or sde)");
}

/// Dynamic opcode histogram of one profiled region.
struct OpcodeCounts {
  std::map<std::string, std::uint64_t> counts;
  std::optional<double> elapsed_seconds;
  std::string backend;

  double require_elapsed() const {
    if (!elapsed_seconds) throw ParseError("report carries no " + std::string(kRoiElapsedTag) + " line", 0);
    return *elapsed_seconds;
  }

  OpcodeCounts& operator+=(const OpcodeCounts& o) {
    for (const auto& [k, v] : o.counts) counts[k] += v;
    return *this;
  }
  friend OpcodeCounts operator+(OpcodeCounts a, const OpcodeCounts& b) { return a += b; }
};

namespace detail::prof {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    out.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

inline std::optional<std::uint64_t> to_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Parses a "CARM_ROI_ELAPSED <seconds>" line; nullopt when the line is something else.
inline std::optional<double> roi_elapsed(const std::string& t, std::size_t line_no) {
  if (t.rfind(kRoiElapsedTag, 0) != 0) return std::nullopt;
  std::string rest = trim(std::string_view(t).substr(kRoiElapsedTag.size()));
  if (!rest.empty() && (rest[0] == ':' || rest[0] == '=')) rest = trim(rest.substr(1));
  double v = 0;
  auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
  if (ec != std::errc() || p != rest.data() + rest.size() || !(v > 0))
    throw ParseError("malformed " + std::string(kRoiElapsedTag) + " value '" + rest + "'", line_no);
  return v;
}

inline void add_roi(OpcodeCounts& c, double v, std::size_t line_no) {
  if (c.elapsed_seconds) throw ParseError("duplicate " + std::string(kRoiElapsedTag) + " line", line_no);
  c.elapsed_seconds = v;
}

// DynamoRIO client: "<count> : <opcode>" lines under "... counts ...:" headers.
inline OpcodeCounts parse_dynamorio(std::string_view text) {
  OpcodeCounts c;
  c.backend = std::string(to_string(DbiBackend::dynamorio));
  auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    std::string t = trim(lines[i]);
    if (t.empty() || t[0] == '#') continue;
    if (auto e = roi_elapsed(t, ln)) {
      add_roi(c, *e, ln);
      continue;
    }
    auto sep = t.find(" : ");
    if (sep == std::string::npos) {
      if (t.back() == ':') continue;  // section header
      throw ParseError("expected '<count> : <opcode>', got '" + t + "'", ln);
    }
    auto count = to_u64(trim(std::string_view(t).substr(0, sep)));
    std::string name = trim(std::string_view(t).substr(sep + 3));
    if (!count) throw ParseError("invalid count in '" + t + "'", ln);
    if (name.empty() || name.find_first_of(" \t") != std::string::npos)
      throw ParseError("invalid opcode name in '" + t + "'", ln);
    c.counts[name] += *count;
  }
  return c;
}

// Intel SDE -mix output: "<ICLASS_operands> <count>" lines of the $global-dynamic-counts section.
inline OpcodeCounts parse_sde(std::string_view text) {
  OpcodeCounts c;
  c.backend = std::string(to_string(DbiBackend::sde));
  auto lines = lines_of(text);
  bool in_section = false, seen_section = false;
  std::size_t first_content = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    std::string t = trim(lines[i]);
    if (t.empty()) continue;
    if (auto e = roi_elapsed(t, ln)) {
      add_roi(c, *e, ln);
      continue;
    }
    if (t.find("$global-dynamic-counts") != std::string::npos) {
      in_section = seen_section = true;
      continue;
    }
    if (in_section && (t.find("END_GLOBAL_DYNAMIC") != std::string::npos ||
                       (t[0] == '#' && t.find('$') != std::string::npos))) {
      in_section = false;
      continue;
    }
    if (!in_section) {
      if (!first_content && t[0] != '#') first_content = ln;
      continue;
    }
    if (t[0] == '#' || t[0] == '*') continue;  // comments and category aggregates
    std::istringstream is(t);
    std::string iform, count_s, extra;
    is >> iform >> count_s;
    if (is >> extra) throw ParseError("expected '<iform> <count>', got '" + t + "'", ln);
    auto count = to_u64(count_s);
    if (!count) throw ParseError("invalid count in '" + t + "'", ln);
    c.counts[iform] += *count;
  }
  if (!seen_section && first_content)
    throw ParseError("no $global-dynamic-counts section in SDE report", first_content);
  return c;
}

}  // namespace detail::prof

/// Parses a DBI report in the backend's histogram format.
inline OpcodeCounts parse_dbi_report(DbiBackend backend, std::string_view text) {
  return backend == DbiBackend::dynamorio ? detail::prof::parse_dynamorio(text) : detail::prof::parse_sde(text);
}

/// Opcode classification table: built-in rules plus per-name overrides.
struct OpClassification {
  std::map<std::string, OpcodeClass> overrides;

  OpcodeClass classify(std::string_view backend, const std::string& name) const {
    if (auto it = overrides.find(name); it != overrides.end()) return it->second;
    if (backend == to_string(DbiBackend::sde)) return classify_opcode(canonical_from_iform(name));
    return classify_opcode(name);
  }
};

struct ClassTotals {
  std::uint64_t instructions = 0;
  std::uint64_t flops = 0;
  std::uint64_t bytes = 0;
  std::uint64_t loads = 0;
  std::uint64_t stores = 0;
  std::uint64_t fp_instructions = 0;

  ClassTotals& operator+=(const ClassTotals& o) {
    instructions += o.instructions;
    flops += o.flops;
    bytes += o.bytes;
    loads += o.loads;
    stores += o.stores;
    fp_instructions += o.fp_instructions;
    return *this;
  }
  friend bool operator==(const ClassTotals&, const ClassTotals&) = default;
};

/// FLOP and byte totals of one histogram, overall and per ISA class.
struct DbiTotals {
  ClassTotals all;
  std::map<std::string, ClassTotals> breakdown;
  std::uint64_t unclassified_instructions = 0;
  std::vector<std::pair<std::string, std::uint64_t>> unclassified;  // most frequent first
  std::vector<std::string> warnings;

  std::uint64_t flops() const { return all.flops; }
  std::uint64_t bytes() const { return all.bytes; }
  ClassTotals family(const std::string& name) const {
    auto it = breakdown.find(name);
    return it == breakdown.end() ? ClassTotals{} : it->second;
  }
};

/// Share of unclassified dynamic instructions above which a warning is issued.
inline constexpr double kUnclassifiedWarnFraction = 0.01;

/// Applies the classification to every histogram entry and sums the results.
inline DbiTotals classify_and_total(const OpcodeCounts& counts, const OpClassification& table = {}) {
  DbiTotals t;
  for (const auto& [name, n] : counts.counts) {
    OpcodeClass c = table.classify(counts.backend, name);
    ClassTotals x;
    x.instructions = n;
    x.flops = n * c.flops;
    x.bytes = n * c.bytes;
    x.loads = c.is_load ? n : 0;
    x.stores = c.is_store ? n : 0;
    x.fp_instructions = c.is_fp ? n : 0;
    t.all += x;
    t.breakdown[c.known ? c.family : "unclassified"] += x;
    if (!c.known) {
      t.unclassified_instructions += n;
      t.unclassified.emplace_back(name, n);
    }
  }
  std::stable_sort(t.unclassified.begin(), t.unclassified.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (t.all.instructions &&
      static_cast<double>(t.unclassified_instructions) > kUnclassifiedWarnFraction * static_cast<double>(t.all.instructions)) {
    std::ostringstream os;
    os.precision(3);
    os << "unclassified opcodes make up "
       << 100.0 * static_cast<double>(t.unclassified_instructions) / static_cast<double>(t.all.instructions)
       << "% of dynamic instructions; top:";
    for (std::size_t i = 0; i < t.unclassified.size() && i < 5; ++i)
      os << (i ? ", " : " ") << t.unclassified[i].first << " (" << t.unclassified[i].second << ")";
    t.warnings.push_back(os.str());
  }
  return t;
}

/// Relative deviation of a measured count from its expected value, in percent.
inline double count_deviation_percent(std::uint64_t measured, std::uint64_t expected) {
  if (!expected) throw DomainError("expected count must be positive");
  return (static_cast<double>(measured) - static_cast<double>(expected)) / static_cast<double>(expected) * 100.0;
}

/// Canonical-opcode histogram of `outer_iters` outer iterations of a verified kernel.
inline OpcodeCounts replay_kernel_counts(const std::map<std::string, std::uint64_t>& per_outer_iter,
                                         std::uint64_t outer_iters) {
  OpcodeCounts c;
  c.backend = std::string(to_string(DbiBackend::dynamorio));
  for (const auto& [k, v] : per_outer_iter) c.counts[k] = v * outer_iters;
  return c;
}

/// Renders counts in the DynamoRIO client's report format.
inline std::string format_dynamorio_report(const OpcodeCounts& c, std::string_view mode = "AArch64") {
  std::ostringstream os;
  if (c.elapsed_seconds) os << kRoiElapsedTag << ' ' << csv::format_double(*c.elapsed_seconds) << '\n';
  os << "Opcode execution counts in " << mode << " mode:\n";
  std::vector<std::pair<std::string, std::uint64_t>> v(c.counts.begin(), c.counts.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [k, n] : v) {
    std::string num = std::to_string(n);
    os << std::string(num.size() < 15 ? 15 - num.size() : 0, ' ') << num << " : " << k << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Hardware counters

/// Event totals of one ROI region merged across the counter passes.
struct PmuCounts {
  std::uint64_t lst_ins = 0;
  std::uint64_t sp_ops = 0;
  std::uint64_t dp_ops = 0;
  double elapsed_seconds = 0;
  std::string region;
  std::vector<double> pass_elapsed_seconds;
  std::vector<std::string> warnings;

  std::uint64_t flops() const { return sp_ops + dp_ops; }
};

/// Events of one counter pass, keyed by lowercase short name (lst_ins, dp_ops, ...).
struct PmuPass {
  std::map<std::string, std::uint64_t> events;
  double elapsed_seconds = 0;
  std::string region;
};

inline constexpr std::array<std::string_view, 3> kPmuEvents{"lst_ins", "dp_ops", "sp_ops"};

/// Full counter-library name of a short event name.
inline std::string papi_event_name(std::string_view short_name) {
  std::string s = "PAPI_";
  for (char c : short_name) s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

namespace detail::prof {

inline std::string short_event(std::string_view key) {
  std::string k = detail::op::lower(key);
  if (k.rfind("papi_", 0) == 0) k = k.substr(5);
  return k;
}

inline std::optional<double> json_number(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    double d = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec == std::errc() && p == s.data() + s.size()) return d;
  }
  return std::nullopt;
}

inline std::vector<std::pair<std::string, const nlohmann::json*>> regions_of(const nlohmann::json& thread) {
  std::vector<std::pair<std::string, const nlohmann::json*>> out;
  const nlohmann::json* regs = &thread;
  if (thread.is_object() && thread.contains("regions")) regs = &thread["regions"];
  auto add = [&](const std::string& key, const nlohmann::json& v) {
    if (!v.is_object()) return;
    if (v.contains("name") && v["name"].is_string())
      out.emplace_back(v["name"].get<std::string>(), &v);
    else
      out.emplace_back(key, &v);
  };
  if (regs->is_object()) {
    for (auto it = regs->begin(); it != regs->end(); ++it) add(it.key(), it.value());
  } else if (regs->is_array()) {
    for (const auto& r : *regs) {
      if (r.is_object() && r.contains("name"))
        add("", r);
      else if (r.is_object() && r.size() == 1)
        add(r.begin().key(), r.begin().value());
    }
  }
  return out;
}

}  // namespace detail::prof

/// Parses one counter-library high-level JSON output (one pass).
inline PmuPass parse_pmu_pass(std::string_view text) {
  namespace p = detail::prof;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
    throw ParseError(std::string("counter report is not valid JSON: ") + e.what(), line);
  }
  if (!doc.is_object() || !doc.contains("threads")) throw SchemaError("counter report has no 'threads' member");
  std::vector<const nlohmann::json*> threads;
  const auto& th = doc["threads"];
  if (th.is_object())
    for (auto it = th.begin(); it != th.end(); ++it) threads.push_back(&it.value());
  else if (th.is_array())
    for (const auto& t : th) threads.push_back(&t);
  else
    throw SchemaError("'threads' must be an object or an array");

  PmuPass pass;
  bool found = false;
  std::set<std::string> names;
  for (const auto* t : threads) {
    auto regs = p::regions_of(*t);
    for (const auto& [name, r] : regs) names.insert(name);
    const nlohmann::json* chosen = nullptr;
    std::string chosen_name;
    for (const auto& [name, r] : regs)
      if (name == kRoiRegionName) chosen = r, chosen_name = name;
    if (!chosen && regs.size() == 1) chosen = regs[0].second, chosen_name = regs[0].first;
    if (!chosen) continue;
    found = true;
    pass.region = chosen_name;
    for (auto it = chosen->begin(); it != chosen->end(); ++it) {
      const std::string& key = it.key();
      auto v = p::json_number(it.value());
      if (!v) continue;
      if (key == "real_time_nsec") {
        pass.elapsed_seconds = std::max(pass.elapsed_seconds, *v * 1e-9);
      } else if (key.rfind("PAPI_", 0) == 0 || key.rfind("papi_", 0) == 0) {
        if (*v < 0) throw SchemaError("negative value for event " + key);
        pass.events[p::short_event(key)] += static_cast<std::uint64_t>(*v);
      }
    }
  }
  if (!found) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw SchemaError("counter report has no '" + std::string(kRoiRegionName) + "' region" +
                      (list.empty() ? std::string() : " (found: " + list + ")"));
  }
  return pass;
}

/// Relative spread of pass timings at or above which a warning is issued.
inline constexpr double kPmuElapsedSpreadWarn = 0.02;

/// Merges one-event-per-pass results; later passes win on duplicated events.
inline PmuCounts merge_pmu_passes(const std::vector<PmuPass>& passes) {
  PmuCounts c;
  std::map<std::string, std::uint64_t> merged;
  std::vector<double> times;
  for (std::size_t i = 0; i < passes.size(); ++i) {
    for (const auto& [k, v] : passes[i].events) {
      if (merged.count(k))
        c.warnings.push_back("event " + k + " present in several passes; using pass " + std::to_string(i + 1));
      merged[k] = v;
    }
    if (passes[i].elapsed_seconds > 0) times.push_back(passes[i].elapsed_seconds);
    if (c.region.empty()) c.region = passes[i].region;
  }
  for (auto e : kPmuEvents)
    if (!merged.count(std::string(e)))
      throw SchemaError("counter passes are missing event " + std::string(e) + " (" + papi_event_name(e) + ")");
  c.lst_ins = merged["lst_ins"];
  c.dp_ops = merged["dp_ops"];
  c.sp_ops = merged["sp_ops"];
  if (times.empty()) throw SchemaError("counter passes carry no real_time_nsec");
  c.pass_elapsed_seconds = times;
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  c.elapsed_seconds = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double spread = (sorted.back() - sorted.front()) / c.elapsed_seconds;
  if (spread >= kPmuElapsedSpreadWarn) {
    std::ostringstream os;
    os.precision(3);
    os << "ROI time varies by " << spread * 100 << "% across counter passes; using the median";
    c.warnings.push_back(os.str());
  }
  return c;
}

/// Parses and merges the per-pass counter reports.
inline PmuCounts parse_pmu_report(const std::vector<std::string>& pass_texts) {
  std::vector<PmuPass> passes;
  for (const auto& t : pass_texts) passes.push_back(parse_pmu_pass(t));
  return merge_pmu_passes(passes);
}

/// Bytes per load/store instruction used to turn lst_ins into bytes.
struct OperandWidth {
  unsigned bytes = 8;
  std::string origin = "default (scalar double)";
};

/// Dominant FP vector width of a disassembly listing (objdump -d format).
inline std::optional<unsigned> dominant_vector_width(Arch arch, std::string_view disassembly) {
  std::map<unsigned, std::uint64_t> votes;
  for (const auto& raw : detail::prof::lines_of(disassembly)) {
    auto tab = raw.find(":\t");
    if (tab == std::string::npos) continue;
    std::string ins = detail::prof::trim(std::string_view(raw).substr(tab + 2));
    if (auto t2 = ins.find('\t'); t2 != std::string::npos &&
                                   std::all_of(ins.begin(), ins.begin() + t2, [](char ch) {
                                     return std::isxdigit(static_cast<unsigned char>(ch)) || ch == ' ';
                                   }))
      ins = detail::prof::trim(ins.substr(t2 + 1));  // raw bytes present
    if (auto c = ins.find_first_of("#<"); c != std::string::npos && arch == Arch::x86_64) ins.resize(c);
    if (auto c = ins.find("//"); c != std::string::npos) ins.resize(c);
    auto sp = ins.find_first_of(" \t");
    std::string mn = ins.substr(0, sp);
    std::vector<std::string> ops;
    if (sp != std::string::npos) {
      std::string rest = ins.substr(sp + 1);
      int depth = 0;
      std::string cur;
      for (char ch : rest) {
        if (ch == '(' || ch == '[') ++depth;
        if (ch == ')' || ch == ']') --depth;
        if (ch == ',' && depth == 0) {
          ops.push_back(detail::prof::trim(cur));
          cur.clear();
        } else {
          cur += ch;
        }
      }
      if (!detail::prof::trim(cur).empty()) ops.push_back(detail::prof::trim(cur));
    }
    OpcodeClass c = classify_opcode(canonical_opcode(arch, mn, ops));
    if (!c.known || !c.is_fp) continue;
    unsigned w = c.family == "avx512" ? 64 : c.family == "avx2" ? 32 : (c.family == "sse" || c.family == "neon") ? 16 : 8;
    ++votes[w];
  }
  if (votes.empty()) return std::nullopt;
  return std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

/// Operand width for an executable: override, else objdump-based detection, else scalar double.
inline OperandWidth detect_operand_width(const std::string& executable, std::optional<unsigned> override_bytes = {}) {
  if (override_bytes) {
    if (!*override_bytes) throw ConfigError("operand width must be positive");
    return {*override_bytes, "override"};
  }
  try {
    auto r = run_process({"objdump", "-d", "--no-show-raw-insn", executable});
    if (r.exit_code == 0)
      if (auto w = dominant_vector_width(host_arch(), r.output)) return {*w, "detected from disassembly"};
  } catch (const Error&) {
  }
  return {8, "default (scalar double)"};
}

/// Places a profiled region on the model.
inline AppPoint compute_app_point(double flops, double bytes, double seconds, std::string label, AppSource source) {
  if (!(bytes > 0)) throw DomainError("bytes must be positive to compute arithmetic intensity");
  if (!(seconds > 0)) throw DomainError("elapsed time must be positive");
  if (flops < 0) throw DomainError("FLOP count must be non-negative");
  return {flops / bytes, flops / seconds / 1e9, source, std::move(label)};
}

// ---------------------------------------------------------------------------
// Profiling runs

/// Installation paths and command templates of the external profilers.
///
/// Template placeholders: {drrun} {client} {sde} {out} {exe}; {args} expands
/// to the application arguments.
struct ProfilerPaths {
  std::filesystem::path dynamorio_root;
  std::filesystem::path dynamorio_client;
  std::filesystem::path sde_root;
  std::vector<std::string> dynamorio_template{"{drrun}", "-c", "{client}", "-out", "{out}", "--", "{exe}", "{args}"};
  std::vector<std::string> sde_template{"{sde}", "-mix", "-iform", "-omix", "{out}", "-start_ssc_mark", "111:repeat",
                                        "-stop_ssc_mark", "222:repeat", "--", "{exe}", "{args}"};
  bool timing_run = true;  // time the ROI in an uninstrumented run
};

struct ProfileRequest {
  std::string executable;
  std::vector<std::string> args;
  std::string label;
  std::optional<std::filesystem::path> replay_report;  // DBI: recorded report instead of a live run
  std::vector<std::filesystem::path> replay_passes;     // PMU: recorded per-pass JSON files
  std::optional<unsigned> operand_bytes;               // PMU: bytes per load/store
  std::filesystem::path work_dir;                      // scratch directory for live runs
};

struct ProfileResult {
  std::optional<AppPoint> point;  // empty when the region moved no bytes
  std::string backend;
  double flops = 0;
  double bytes = 0;
  double seconds = 0;
  std::string byte_accounting;
  std::optional<DbiTotals> dbi;
  std::optional<PmuCounts> pmu;
  std::string raw_report;  // backend output as captured or replayed
  std::vector<std::string> warnings;
};

namespace detail::prof {

inline std::string read_file(const std::filesystem::path& p, std::string_view what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + std::string(what) + " " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::vector<std::string> expand(const std::vector<std::string>& tmpl, const std::map<std::string, std::string>& vars,
                                       const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const auto& t : tmpl) {
    if (t == "{args}") {
      out.insert(out.end(), args.begin(), args.end());
      continue;
    }
    std::string s = t;
    for (const auto& [k, v] : vars) {
      const std::string key = "{" + k + "}";
      for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + v.size())) s.replace(pos, key.size(), v);
    }
    out.push_back(s);
  }
  return out;
}

inline std::optional<double> scan_roi_elapsed(std::string_view output) {
  std::optional<double> v;
  auto ls = lines_of(output);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    std::string t = trim(ls[i]);
    if (auto e = roi_elapsed(t, i + 1)) v = e;
  }
  return v;
}

inline void require_executable(const std::string& exe) {
  if (exe.empty()) throw ConfigError("no application executable given");
  if (!std::filesystem::exists(exe)) throw ConfigError("application executable not found: " + exe);
}

inline std::filesystem::path scratch_dir(const std::filesystem::path& work_dir) {
  auto base = work_dir.empty() ? std::filesystem::temp_directory_path() : work_dir;
  std::string tmpl = (base / "carm-profile-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw ToolchainError("cannot create scratch directory under " + base.string());
  return tmpl;
}

inline ProfileResult finish_dbi(OpcodeCounts counts, const ProfileRequest& req, std::string raw) {
  ProfileResult r;
  r.backend = counts.backend;
  r.seconds = counts.require_elapsed();
  DbiTotals t = classify_and_total(counts);
  r.flops = static_cast<double>(t.flops());
  r.bytes = static_cast<double>(t.bytes());
  r.byte_accounting = "opcode operand widths";
  r.warnings = t.warnings;
  if (r.bytes > 0)
    r.point = compute_app_point(r.flops, r.bytes, r.seconds, req.label.empty() ? req.executable : req.label, AppSource::dbi);
  else
    r.warnings.push_back("region moved no bytes; arithmetic intensity is undefined");
  r.dbi = std::move(t);
  r.raw_report = std::move(raw);
  return r;
}

}  // namespace detail::prof

/// Runs (or replays) a DBI opcode-count profile of an ROI-instrumented binary.
inline ProfileResult run_dbi_profile(const ProfileRequest& req, DbiBackend backend, const ProfilerPaths& paths = {}) {
  namespace p = detail::prof;
  if (req.replay_report) {
    std::string text = p::read_file(*req.replay_report, "recorded report");
    auto counts = parse_dbi_report(backend, text);
    return p::finish_dbi(std::move(counts), req, std::move(text));
  }
  std::map<std::string, std::string> vars;
  const std::vector<std::string>* tmpl = nullptr;
  if (backend == DbiBackend::dynamorio) {
    auto drrun = paths.dynamorio_root / "bin64" / "drrun";
    if (paths.dynamorio_root.empty() || !std::filesystem::exists(drrun))
      throw ConfigError("DynamoRIO not found" +
                        (paths.dynamorio_root.empty() ? std::string() : " at " + paths.dynamorio_root.string()) +
                        "; pass its installation directory with --dynamorio");
    if (paths.dynamorio_client.empty() || !std::filesystem::exists(paths.dynamorio_client))
      throw ConfigError("DynamoRIO opcode client not found" +
                        (paths.dynamorio_client.empty() ? std::string() : " at " + paths.dynamorio_client.string()) +
                        "; pass it with --dr_client");
    vars = {{"drrun", drrun.string()}, {"client", paths.dynamorio_client.string()}};
    tmpl = &paths.dynamorio_template;
  } else {
    auto sde = paths.sde_root / "sde64";
    if (paths.sde_root.empty() || !std::filesystem::exists(sde))
      throw ConfigError("Intel SDE not found" + (paths.sde_root.empty() ? std::string() : " at " + paths.sde_root.string()) +
                        "; pass its installation directory with --sde");
    vars = {{"sde", sde.string()}};
    tmpl = &paths.sde_template;
  }
  p::require_executable(req.executable);
  auto dir = p::scratch_dir(req.work_dir);
  auto out = dir / "opcodes.txt";
  vars["out"] = out.string();
  vars["exe"] = req.executable;

  std::optional<double> elapsed;
  std::string timing_output;
  if (paths.timing_run) {
    std::vector<std::string> argv{req.executable};
    argv.insert(argv.end(), req.args.begin(), req.args.end());
    auto t = run_process(argv);
    if (t.exit_code != 0)
      throw ToolchainError("application exited with status " + std::to_string(t.exit_code) + ":\n" + t.output);
    elapsed = p::scan_roi_elapsed(t.output);
    timing_output = t.output;
  }
  auto res = run_process(p::expand(*tmpl, vars, req.args));
  if (res.exit_code != 0)
    throw ToolchainError(std::string(to_string(backend)) + " exited with status " + std::to_string(res.exit_code) +
                         ":\n" + res.output);
  if (!elapsed) elapsed = p::scan_roi_elapsed(res.output);
  std::string report = std::filesystem::exists(out) ? p::read_file(out, "profiler output") : res.output;
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  auto counts = parse_dbi_report(backend, report);
  if (!counts.elapsed_seconds && elapsed) {
    counts.elapsed_seconds = elapsed;
    report = std::string(kRoiElapsedTag) + " " + csv::format_double(*elapsed) + "\n" + report;
  }
  return p::finish_dbi(std::move(counts), req, std::move(report));
}

namespace detail::prof {

inline std::string permission_hint() {
  std::string v = "unknown";
  std::ifstream in("/proc/sys/kernel/perf_event_paranoid");
  if (in) std::getline(in, v);
  return "hardware counter access denied; check /proc/sys/kernel/perf_event_paranoid (currently " + v +
         ", counters need <= 2 for user-space measurement, or run with CAP_PERFMON)";
}

inline bool looks_like_permission_error(std::string_view out) {
  for (std::string_view k : {"Permission denied", "PAPI_EPERM", "perf_event_paranoid", "Insufficient permissions"})
    if (out.find(k) != std::string_view::npos) return true;
  return false;
}

}  // namespace detail::prof

/// Runs (or replays) the three one-event counter passes of an ROI-instrumented binary.
inline ProfileResult run_pmu_profile(const ProfileRequest& req) {
  namespace p = detail::prof;
  std::vector<std::string> texts;
  std::string raw;
  if (!req.replay_passes.empty()) {
    for (const auto& f : req.replay_passes) texts.push_back(p::read_file(f, "recorded counter pass"));
  } else {
    p::require_executable(req.executable);
    auto dir = p::scratch_dir(req.work_dir);
    for (auto ev : kPmuEvents) {
      auto pass_dir = dir / std::string(ev);
      std::vector<std::string> argv{req.executable};
      argv.insert(argv.end(), req.args.begin(), req.args.end());
      auto r = run_process(argv, {{"PAPI_EVENTS", papi_event_name(ev)}, {"PAPI_OUTPUT_DIRECTORY", pass_dir.string()}});
      if (p::looks_like_permission_error(r.output)) throw ToolchainError(p::permission_hint());
      if (r.exit_code != 0)
        throw ToolchainError("application exited with status " + std::to_string(r.exit_code) + " in the " +
                             std::string(ev) + " pass:\n" + r.output);
      std::optional<std::filesystem::path> json;
      if (std::filesystem::exists(pass_dir))
        for (const auto& e : std::filesystem::recursive_directory_iterator(pass_dir))
          if (e.is_regular_file() && e.path().extension() == ".json") json = e.path();
      if (!json)
        throw ToolchainError("no counter report written in the " + std::string(ev) +
                             " pass; is the binary linked against the counter library with carm_roi.h?");
      texts.push_back(p::read_file(*json, "counter report"));
    }
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
  PmuCounts c = parse_pmu_report(texts);
  OperandWidth w = req.replay_passes.empty() || req.operand_bytes
                       ? detect_operand_width(req.executable, req.operand_bytes)
                       : OperandWidth{};
  ProfileResult r;
  r.backend = "papi";
  r.flops = static_cast<double>(c.flops());
  r.bytes = static_cast<double>(c.lst_ins) * w.bytes;
  r.seconds = c.elapsed_seconds;
  r.byte_accounting = "lst_ins x " + std::to_string(w.bytes) + " B (" + w.origin + ")";
  r.warnings = c.warnings;
  if (r.bytes > 0)
    r.point = compute_app_point(r.flops, r.bytes, r.seconds, req.label.empty() ? req.executable : req.label, AppSource::pmu);
  else
    r.warnings.push_back("region executed no loads or stores; arithmetic intensity is undefined");
  for (std::size_t i = 0; i < texts.size(); ++i) raw += (i ? "\n" : "") + texts[i];
  r.raw_report = std::move(raw);
  r.pmu = std::move(c);
  return r;
}

/// Stores the raw report beside the results and appends the application record.
inline ApplicationRecord archive_profile(ResultArchive& archive, const ProfileResult& r, const RecordHeader& header) {
  if (!r.point) throw DomainError("profile has no application point to archive (zero bytes moved)");
  ApplicationRecord rec;
  rec.header = header;
  rec.label = r.point->label;
  rec.source = r.point->source;
  rec.backend = r.backend;
  rec.ai = r.point->ai;
  rec.gflops = r.point->gflops;
  rec.flops = r.flops;
  rec.bytes = r.bytes;
  rec.seconds = r.seconds;
  rec.byte_accounting = r.byte_accounting;
  rec.warnings = r.warnings;
  auto dir = archive.suite_dir(Suite::applications) / "raw";
  std::filesystem::create_directories(dir);
  auto file = dir / (header.id + "-" + r.backend + ".txt");
  std::ofstream(file, std::ios::binary) << r.raw_report;
  rec.raw_report = std::filesystem::relative(file, archive.root()).generic_string();
  archive.write(rec);
  return rec;
}

}  // namespace carm

#endif  // CARM_PROFILER_HPP_
