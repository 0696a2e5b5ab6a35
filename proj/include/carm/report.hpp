#ifndef CARM_REPORT_HPP_
#define CARM_REPORT_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "carm/error.hpp"
#include "carm/records.hpp"

namespace carm {

inline constexpr int kCsvSchemaVersion = 1;

enum class Suite { roofline, memory_curve, mixed, applications };

inline constexpr std::array kAllSuites{Suite::roofline, Suite::memory_curve, Suite::mixed, Suite::applications};

constexpr std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::roofline: return "roofline";
    case Suite::memory_curve: return "memory-curve";
    case Suite::mixed: return "mixed";
    case Suite::applications: return "applications";
  }
  return "?";
}

inline std::optional<Suite> parse_suite(std::string_view s) {
  for (Suite x : kAllSuites)
    if (to_string(x) == s) return x;
  if (s == "memory_curve" || s == "mem") return Suite::memory_curve;
  return std::nullopt;
}

namespace csv {

inline std::string escape(const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) s += ',';
    s += escape(fields[i]);
  }
  return s + "\n";
}

struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// RFC 4180 reader; quoted fields may contain separators and newlines.
inline std::vector<Row> parse(const std::string& text) {
  std::vector<Row> rows;
  Row cur;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  cur.line = 1;
  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      quoted = field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      end_field();
      rows.push_back(std::move(cur));
      cur = Row{};
      cur.line = ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line);
  if (field_started || !field.empty() || !cur.fields.empty()) {
    end_field();
    rows.push_back(std::move(cur));
  }
  return rows;
}

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw DomainError("cannot store a non-finite value");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, std::size_t line, const std::string& col) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("column " + col + ": '" + s + "' is not a number", line);
  return v;
}

inline std::uint64_t parse_u64(const std::string& s, std::size_t line, const std::string& col) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("column " + col + ": '" + s + "' is not a non-negative integer", line);
  return v;
}

/// Named access to one CSV row during decoding.
class RowReader {
 public:
  RowReader(const std::map<std::string, std::size_t>& index, const Row& row) : index_(index), row_(row) {}
  const std::string& str(const std::string& col) const {
    auto it = index_.find(col);
    if (it == index_.end() || it->second >= row_.fields.size())
      throw ParseError("missing value for column " + col, row_.line);
    return row_.fields[it->second];
  }
  double num(const std::string& col) const { return parse_double(str(col), row_.line, col); }
  std::optional<double> opt_num(const std::string& col) const {
    const auto& s = str(col);
    if (s.empty()) return std::nullopt;
    return parse_double(s, row_.line, col);
  }
  std::uint64_t u64(const std::string& col) const { return parse_u64(str(col), row_.line, col); }
  template <class E, class F>
  E enumeration(const std::string& col, F parse) const {
    auto v = parse(str(col));
    if (!v) throw ParseError("column " + col + ": unknown value '" + str(col) + "'", row_.line);
    return *v;
  }
  std::vector<std::string> list(const std::string& col) const {
    const auto& s = str(col);
    if (s.empty()) return {};
    try {
      return nlohmann::json::parse(s).get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
      throw ParseError("column " + col + ": malformed list", row_.line);
    }
  }
  std::size_t line() const { return row_.line; }

 private:
  const std::map<std::string, std::size_t>& index_;
  const Row& row_;
};

/// Builds one CSV row in column order.
class RowWriter {
 public:
  explicit RowWriter(const std::vector<std::string>& columns) : columns_(columns) {}
  RowWriter& set(const std::string& col, std::string v) {
    values_[col] = std::move(v);
    return *this;
  }
  RowWriter& num(const std::string& col, double v) { return set(col, format_double(v)); }
  RowWriter& opt_num(const std::string& col, const std::optional<double>& v) {
    return set(col, v ? format_double(*v) : std::string());
  }
  RowWriter& u64(const std::string& col, std::uint64_t v) { return set(col, std::to_string(v)); }
  RowWriter& list(const std::string& col, const std::vector<std::string>& v) {
    return set(col, v.empty() ? std::string() : nlohmann::json(v).dump());
  }
  std::vector<std::string> fields() const {
    std::vector<std::string> f;
    for (const auto& c : columns_) {
      auto it = values_.find(c);
      f.push_back(it == values_.end() ? std::string() : it->second);
    }
    return f;
  }

 private:
  const std::vector<std::string>& columns_;
  std::map<std::string, std::string> values_;
};

}  // namespace csv

namespace detail {

inline const std::vector<std::string>& header_columns() {
  static const std::vector<std::string> c{"schema_version", "id", "run_id", "machine", "cpu_model", "date", "executor"};
  return c;
}

inline std::vector<std::string> with_header(std::initializer_list<std::string> rest) {
  std::vector<std::string> c = header_columns();
  c.insert(c.end(), rest);
  return c;
}

inline const std::vector<std::string>& columns_for(Suite s) {
  static const auto roofline = with_header(
      {"isa", "precision", "threads", "ld_st_ratio", "frequency_ghz", "l1_gbps", "l1_ipc", "l1_bytes", "l2_gbps",
       "l2_ipc", "l2_bytes", "l3_gbps", "l3_ipc", "l3_bytes", "dram_gbps", "dram_ipc", "dram_bytes", "fp_op",
       "fp_gflops", "fp_ipc", "fma_gflops", "fma_ipc", "warnings"});
  static const auto curve = with_header({"isa", "precision", "threads", "ld_st_ratio", "requested_bytes",
                                         "array_bytes", "bandwidth_gbps", "ipc", "warnings"});
  static const auto mixed = with_header({"isa", "precision", "threads", "ld_st_ratio", "level", "fp_op",
                                         "fp_per_mem", "array_bytes", "ai_num", "ai_den", "ai", "gflops",
                                         "bandwidth_gbps", "warnings"});
  static const auto apps = with_header({"label", "source", "backend", "ai", "gflops", "flops", "bytes", "seconds",
                                        "byte_accounting", "raw_report", "warnings"});
  switch (s) {
    case Suite::roofline: return roofline;
    case Suite::memory_curve: return curve;
    case Suite::mixed: return mixed;
    case Suite::applications: return apps;
  }
  return roofline;
}

inline std::string level_prefix(MemLevel l) {
  switch (l) {
    case MemLevel::L1: return "l1";
    case MemLevel::L2: return "l2";
    case MemLevel::L3: return "l3";
    case MemLevel::DRAM: return "dram";
  }
  return "?";
}

inline void write_header(csv::RowWriter& w, const RecordHeader& h) {
  w.set("schema_version", std::to_string(kCsvSchemaVersion))
      .set("id", h.id)
      .set("run_id", h.run_id)
      .set("machine", h.machine.hostname)
      .set("cpu_model", h.machine.cpu_model)
      .set("date", h.date)
      .set("executor", h.executor);
}

inline RecordHeader read_header(const csv::RowReader& r) {
  if (r.str("schema_version") != std::to_string(kCsvSchemaVersion))
    throw SchemaError("row at line " + std::to_string(r.line()) + " was written with schema version " +
                      r.str("schema_version") + "; this build reads version " + std::to_string(kCsvSchemaVersion) +
                      " and needs the file migrated");
  return {r.str("id"), r.str("run_id"), {r.str("machine"), r.str("cpu_model")}, r.str("date"), r.str("executor")};
}

inline LdStRatio read_ratio(const csv::RowReader& r) {
  try {
    return LdStRatio::parse(r.str("ld_st_ratio"));
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), r.line());
  }
}

template <class Common>
void write_common(csv::RowWriter& w, const Common& c) {
  w.set("isa", std::string(to_string(c.isa)))
      .set("precision", std::string(to_string(c.precision)))
      .u64("threads", c.threads)
      .set("ld_st_ratio", c.ratio.to_string());
}

template <class Common>
void read_common(const csv::RowReader& r, Common& c) {
  c.isa = r.enumeration<Isa>("isa", parse_isa);
  c.precision = r.enumeration<Precision>("precision", parse_precision);
  c.threads = static_cast<unsigned>(r.u64("threads"));
  c.ratio = read_ratio(r);
}

inline std::vector<std::vector<std::string>> to_rows(const RooflineRecord& rec) {
  const auto& cols = columns_for(Suite::roofline);
  csv::RowWriter w(cols);
  write_header(w, rec.header);
  write_common(w, rec);
  w.num("frequency_ghz", rec.frequency_ghz);
  for (MemLevel l : kAllLevels) {
    const auto& lv = rec.level(l);
    auto p = level_prefix(l);
    w.opt_num(p + "_gbps", lv ? std::optional(lv->bandwidth_gbps) : std::nullopt);
    w.opt_num(p + "_ipc", lv ? std::optional(lv->ipc) : std::nullopt);
    w.set(p + "_bytes", lv ? std::to_string(lv->working_set_bytes) : std::string());
  }
  w.set("fp_op", rec.fp ? std::string(to_string(rec.fp->op)) : std::string());
  w.opt_num("fp_gflops", rec.fp ? std::optional(rec.fp->gflops) : std::nullopt);
  w.opt_num("fp_ipc", rec.fp ? std::optional(rec.fp->ipc) : std::nullopt);
  w.opt_num("fma_gflops", rec.fma ? std::optional(rec.fma->gflops) : std::nullopt);
  w.opt_num("fma_ipc", rec.fma ? std::optional(rec.fma->ipc) : std::nullopt);
  w.list("warnings", rec.warnings);
  return {w.fields()};
}

inline RooflineRecord roofline_from_row(const csv::RowReader& r) {
  RooflineRecord rec;
  rec.header = read_header(r);
  read_common(r, rec);
  rec.frequency_ghz = r.num("frequency_ghz");
  for (MemLevel l : kAllLevels) {
    auto p = level_prefix(l);
    auto bw = r.opt_num(p + "_gbps");
    if (!bw) continue;
    rec.level(l) = LevelResult{*bw, r.opt_num(p + "_ipc").value_or(0),
                               r.str(p + "_bytes").empty() ? 0 : r.u64(p + "_bytes")};
  }
  if (auto g = r.opt_num("fp_gflops"))
    rec.fp = CeilingResult{r.enumeration<FpOp>("fp_op", parse_fp_op), *g, r.opt_num("fp_ipc").value_or(0)};
  if (auto g = r.opt_num("fma_gflops")) rec.fma = CeilingResult{FpOp::fma, *g, r.opt_num("fma_ipc").value_or(0)};
  rec.warnings = r.list("warnings");
  return rec;
}

inline std::vector<std::vector<std::string>> to_rows(const MemoryCurveRecord& rec) {
  const auto& cols = columns_for(Suite::memory_curve);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < rec.points.size(); ++i) {
    const auto& p = rec.points[i];
    csv::RowWriter w(cols);
    write_header(w, rec.header);
    write_common(w, rec);
    w.u64("requested_bytes", p.requested_bytes)
        .u64("array_bytes", p.array_bytes)
        .num("bandwidth_gbps", p.bandwidth_gbps)
        .num("ipc", p.ipc);
    if (i == 0) w.list("warnings", rec.warnings);
    rows.push_back(w.fields());
  }
  if (rec.points.empty()) throw ConfigError("memory curve record has no points");
  return rows;
}

inline std::vector<std::vector<std::string>> to_rows(const MixedRecord& rec) {
  const auto& cols = columns_for(Suite::mixed);
  csv::RowWriter w(cols);
  write_header(w, rec.header);
  write_common(w, rec);
  w.set("level", std::string(to_string(rec.level)))
      .set("fp_op", std::string(to_string(rec.fp_op)))
      .u64("fp_per_mem", rec.fp_per_mem)
      .u64("array_bytes", rec.array_bytes)
      .u64("ai_num", rec.ai_num)
      .u64("ai_den", rec.ai_den)
      .num("ai", rec.ai)
      .num("gflops", rec.gflops)
      .num("bandwidth_gbps", rec.bandwidth_gbps)
      .list("warnings", rec.warnings);
  return {w.fields()};
}

inline MixedRecord mixed_from_row(const csv::RowReader& r) {
  MixedRecord rec;
  rec.header = read_header(r);
  read_common(r, rec);
  rec.level = r.enumeration<MemLevel>("level", parse_level);
  rec.fp_op = r.enumeration<FpOp>("fp_op", parse_fp_op);
  rec.fp_per_mem = static_cast<unsigned>(r.u64("fp_per_mem"));
  rec.array_bytes = r.u64("array_bytes");
  rec.ai_num = r.u64("ai_num");
  rec.ai_den = r.u64("ai_den");
  rec.ai = r.num("ai");
  rec.gflops = r.num("gflops");
  rec.bandwidth_gbps = r.num("bandwidth_gbps");
  rec.warnings = r.list("warnings");
  return rec;
}

inline std::vector<std::vector<std::string>> to_rows(const ApplicationRecord& rec) {
  const auto& cols = columns_for(Suite::applications);
  csv::RowWriter w(cols);
  write_header(w, rec.header);
  w.set("label", rec.label)
      .set("source", std::string(to_string(rec.source)))
      .set("backend", rec.backend)
      .num("ai", rec.ai)
      .num("gflops", rec.gflops)
      .num("flops", rec.flops)
      .num("bytes", rec.bytes)
      .num("seconds", rec.seconds)
      .set("byte_accounting", rec.byte_accounting)
      .set("raw_report", rec.raw_report)
      .list("warnings", rec.warnings);
  return {w.fields()};
}

inline ApplicationRecord application_from_row(const csv::RowReader& r) {
  ApplicationRecord rec;
  rec.header = read_header(r);
  rec.label = r.str("label");
  rec.source = r.enumeration<AppSource>("source", parse_app_source);
  rec.backend = r.str("backend");
  rec.ai = r.num("ai");
  rec.gflops = r.num("gflops");
  rec.flops = r.num("flops");
  rec.bytes = r.num("bytes");
  rec.seconds = r.num("seconds");
  rec.byte_accounting = r.str("byte_accounting");
  rec.raw_report = r.str("raw_report");
  rec.warnings = r.list("warnings");
  return rec;
}

}  // namespace detail

/// CSV results tree: <root>/Roofline, MemoryCurve, Mixed, Applications, one
/// append-only file per suite.
class ResultArchive {
 public:
  explicit ResultArchive(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  static std::string directory_name(Suite s) {
    switch (s) {
      case Suite::roofline: return "Roofline";
      case Suite::memory_curve: return "MemoryCurve";
      case Suite::mixed: return "Mixed";
      case Suite::applications: return "Applications";
    }
    return "?";
  }
  static std::string file_name(Suite s) {
    switch (s) {
      case Suite::roofline: return "roofline.csv";
      case Suite::memory_curve: return "memory_curve.csv";
      case Suite::mixed: return "mixed.csv";
      case Suite::applications: return "applications.csv";
    }
    return "?";
  }
  std::filesystem::path suite_dir(Suite s) const { return root_ / directory_name(s); }
  std::filesystem::path suite_file(Suite s) const { return suite_dir(s) / file_name(s); }

  std::filesystem::path write(const RooflineRecord& r) { return append(Suite::roofline, detail::to_rows(r)); }
  std::filesystem::path write(const MemoryCurveRecord& r) { return append(Suite::memory_curve, detail::to_rows(r)); }
  std::filesystem::path write(const MixedRecord& r) { return append(Suite::mixed, detail::to_rows(r)); }
  std::filesystem::path write(const ApplicationRecord& r) { return append(Suite::applications, detail::to_rows(r)); }

  std::vector<RooflineRecord> read_roofline() const {
    std::vector<RooflineRecord> out;
    for_each_row(Suite::roofline, [&](const csv::RowReader& r) { out.push_back(detail::roofline_from_row(r)); });
    return out;
  }
  std::vector<MixedRecord> read_mixed() const {
    std::vector<MixedRecord> out;
    for_each_row(Suite::mixed, [&](const csv::RowReader& r) { out.push_back(detail::mixed_from_row(r)); });
    return out;
  }
  std::vector<ApplicationRecord> read_applications() const {
    std::vector<ApplicationRecord> out;
    for_each_row(Suite::applications,
                 [&](const csv::RowReader& r) { out.push_back(detail::application_from_row(r)); });
    return out;
  }
  /// Consecutive rows sharing an id form one curve.
  std::vector<MemoryCurveRecord> read_memory_curves() const {
    std::vector<MemoryCurveRecord> out;
    for_each_row(Suite::memory_curve, [&](const csv::RowReader& r) {
      RecordHeader h = detail::read_header(r);
      if (out.empty() || out.back().header.id != h.id) {
        MemoryCurveRecord rec;
        rec.header = h;
        detail::read_common(r, rec);
        rec.warnings = r.list("warnings");
        out.push_back(std::move(rec));
      }
      out.back().points.push_back({r.u64("requested_bytes"), r.u64("array_bytes"), r.num("bandwidth_gbps"),
                                   r.num("ipc")});
    });
    return out;
  }

  std::optional<RooflineRecord> find_roofline(const std::string& id) const {
    for (auto& r : read_roofline())
      if (r.header.id == id) return r;
    return std::nullopt;
  }

 private:
  std::filesystem::path append(Suite s, const std::vector<std::vector<std::string>>& rows) {
    std::lock_guard lk(mu_);
    auto path = suite_file(s);
    std::filesystem::create_directories(path.parent_path());
    bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    if (!fresh) check_header(s, path);
    std::ofstream f(path, std::ios::app | std::ios::binary);
    if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
    if (fresh) f << csv::join(detail::columns_for(s));
    for (const auto& r : rows) f << csv::join(r);
    if (!f) throw ConfigError("write to " + path.string() + " failed");
    return path;
  }

  static std::map<std::string, std::size_t> header_index(Suite s, const csv::Row& header,
                                                         const std::filesystem::path& path) {
    const auto& cols = detail::columns_for(s);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.fields.size(); ++i) {
      const auto& name = header.fields[i];
      if (std::find(cols.begin(), cols.end(), name) == cols.end())
        throw SchemaError(path.string() + ": unknown column '" + name + "'");
      index[name] = i;
    }
    for (const auto& c : cols)
      if (!index.count(c)) throw SchemaError(path.string() + ": missing column '" + c + "'");
    return index;
  }

  void check_header(Suite s, const std::filesystem::path& path) const {
    std::ifstream f(path, std::ios::binary);
    std::string first;
    std::getline(f, first);
    header_index(s, csv::parse(first + "\n").at(0), path);
  }

  template <class F>
  void for_each_row(Suite s, F&& fn) const {
    std::lock_guard lk(mu_);
    auto path = suite_file(s);
    if (!std::filesystem::exists(path)) return;
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    auto rows = csv::parse(ss.str());
    if (rows.empty()) return;
    auto index = header_index(s, rows[0], path);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].fields.size() == 1 && rows[i].fields[0].empty()) continue;
      if (rows[i].fields.size() != rows[0].fields.size())
        throw ParseError("expected " + std::to_string(rows[0].fields.size()) + " fields, found " +
                             std::to_string(rows[i].fields.size()),
                         rows[i].line);
      fn(csv::RowReader(index, rows[i]));
    }
  }

  std::filesystem::path root_;
  mutable std::mutex mu_;
};

/// CARM_RESULTS_DIR, else ./Results.
inline std::filesystem::path default_results_root() {
  if (const char* env = std::getenv("CARM_RESULTS_DIR"); env && *env) return env;
  return "Results";
}

}  // namespace carm

#endif  // CARM_REPORT_HPP_
