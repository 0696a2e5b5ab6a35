#ifndef CARM_JSON_IO_HPP_
#define CARM_JSON_IO_HPP_

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "carm/model.hpp"
#include "carm/profiler.hpp"
#include "carm/records.hpp"
#include "carm/suite.hpp"
#include "carm/topology.hpp"

namespace carm {

/// Version stamped on every JSON body the service emits.
inline constexpr int kJsonSchemaVersion = 1;

using json = nlohmann::json;

namespace detail::js {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json level_json(const std::optional<LevelResult>& l) {
  if (!l) return nullptr;
  return {{"bandwidth_gbps", l->bandwidth_gbps}, {"ipc", l->ipc}, {"working_set_bytes", l->working_set_bytes}};
}

inline json ceiling_json(const std::optional<CeilingResult>& c) {
  if (!c) return nullptr;
  return {{"op", std::string(to_string(c->op))}, {"gflops", c->gflops}, {"ipc", c->ipc}};
}

inline json header_json(const RecordHeader& h) {
  return {{"id", h.id},
          {"run_id", h.run_id},
          {"machine", {{"hostname", h.machine.hostname}, {"cpu_model", h.machine.cpu_model}}},
          {"date", h.date},
          {"executor", h.executor}};
}

inline json ratio_json(const LdStRatio& r) { return {{"loads", r.loads}, {"stores", r.stores}}; }

}  // namespace detail::js

inline json to_json(const LdStRatio& r) { return detail::js::ratio_json(r); }

inline json to_json(const CacheTopology& t) {
  return {{"l1d_kib", t.l1d_kib},
          {"l2_kib", t.l2_kib},
          {"l3_total_kib", t.l3_total_kib},
          {"l3_slice_kib", t.l3_slice_kib},
          {"source", std::string(to_string(t.source))}};
}

inline json to_json(const AppPoint& p) {
  return {{"ai", p.ai}, {"gflops", p.gflops}, {"source", std::string(to_string(p.source))}, {"label", p.label}};
}

inline json to_json(const RooflineRecord& r) {
  json j = detail::js::header_json(r.header);
  j["isa"] = std::string(to_string(r.isa));
  j["precision"] = std::string(to_string(r.precision));
  j["threads"] = r.threads;
  j["ld_st_ratio"] = to_json(r.ratio);
  j["frequency_ghz"] = r.frequency_ghz;
  json levels = json::object();
  for (MemLevel l : kAllLevels) levels[std::string(to_string(l))] = detail::js::level_json(r.level(l));
  j["levels"] = levels;
  j["fp"] = detail::js::ceiling_json(r.fp);
  j["fma"] = detail::js::ceiling_json(r.fma);
  j["warnings"] = r.warnings;
  return j;
}

inline json to_json(const MemoryCurveRecord& r) {
  json j = detail::js::header_json(r.header);
  j["isa"] = std::string(to_string(r.isa));
  j["precision"] = std::string(to_string(r.precision));
  j["threads"] = r.threads;
  j["ld_st_ratio"] = to_json(r.ratio);
  json pts = json::array();
  for (const auto& p : r.points)
    pts.push_back({{"requested_bytes", p.requested_bytes},
                   {"array_bytes", p.array_bytes},
                   {"bandwidth_gbps", p.bandwidth_gbps},
                   {"ipc", p.ipc}});
  j["points"] = pts;
  j["warnings"] = r.warnings;
  return j;
}

inline json to_json(const MixedRecord& r) {
  json j = detail::js::header_json(r.header);
  j["isa"] = std::string(to_string(r.isa));
  j["precision"] = std::string(to_string(r.precision));
  j["threads"] = r.threads;
  j["ld_st_ratio"] = to_json(r.ratio);
  j["level"] = std::string(to_string(r.level));
  j["fp_op"] = std::string(to_string(r.fp_op));
  j["fp_per_mem"] = r.fp_per_mem;
  j["array_bytes"] = r.array_bytes;
  j["ai_num"] = r.ai_num;
  j["ai_den"] = r.ai_den;
  j["ai"] = r.ai;
  j["gflops"] = r.gflops;
  j["bandwidth_gbps"] = r.bandwidth_gbps;
  j["warnings"] = r.warnings;
  return j;
}

inline json to_json(const ApplicationRecord& r) {
  json j = detail::js::header_json(r.header);
  j["label"] = r.label;
  j["source"] = std::string(to_string(r.source));
  j["backend"] = r.backend;
  j["ai"] = r.ai;
  j["gflops"] = r.gflops;
  j["flops"] = r.flops;
  j["bytes"] = r.bytes;
  j["seconds"] = r.seconds;
  j["byte_accounting"] = r.byte_accounting;
  j["raw_report"] = r.raw_report;
  j["warnings"] = r.warnings;
  return j;
}

inline json to_json(const ClassTotals& t) {
  return {{"instructions", t.instructions}, {"flops", t.flops},   {"bytes", t.bytes},
          {"loads", t.loads},               {"stores", t.stores}, {"fp_instructions", t.fp_instructions}};
}

inline json to_json(const SuiteConfig& c) {
  json j{{"test", std::string(to_string(c.test))},
         {"isa", c.isa ? std::string(to_string(*c.isa)) : std::string("auto")},
         {"precision", std::string(to_string(c.precision))},
         {"threads", c.threads},
         {"ld_st_ratio", to_json(c.ratio)},
         {"inst", std::string(to_string(c.fp_op))},
         {"fpldst", detail::js::opt(c.fp_per_mem)},
         {"verbosity", c.verbosity}};
  json ws = json::object();
  for (const auto& [l, b] : c.working_set_bytes) ws[std::string(to_string(l))] = b;
  j["working_set_bytes"] = ws;
  return j;
}

/// One rejected request field.
struct FieldError {
  std::string field;
  std::string message;
};

/// Reads a SuiteConfig from a JSON object; problems are collected per field.
inline SuiteConfig suite_config_from_json(const json& j, std::vector<FieldError>& errors) {
  SuiteConfig c;
  if (!j.is_object()) {
    errors.push_back({"", "request body must be a JSON object"});
    return c;
  }
  static const std::set<std::string> known{"test",      "isa",   "precision", "threads",           "ld_st_ratio",
                                           "inst",      "fpldst", "verbosity", "working_set_bytes", "executor"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) errors.push_back({it.key(), "unknown field"});
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) {
      errors.push_back({key, "must be a string"});
      return std::nullopt;
    }
    return j[key].get<std::string>();
  };
  auto uint = [&](const json& v, const std::string& key, unsigned min) -> std::optional<unsigned> {
    if (!v.is_number_integer() || v.get<long long>() < min || v.get<long long>() > 1'000'000) {
      errors.push_back({key, "must be an integer >= " + std::to_string(min)});
      return std::nullopt;
    }
    return static_cast<unsigned>(v.get<long long>());
  };
  if (auto s = str("test")) {
    if (auto t = parse_test(*s))
      c.test = *t;
    else
      errors.push_back({"test", "unknown test '" + *s + "'"});
  }
  if (auto s = str("isa")) {
    if (*s != "auto") {
      if (auto i = parse_isa(*s))
        c.isa = *i;
      else
        errors.push_back({"isa", "unknown ISA '" + *s + "'"});
    }
  }
  if (auto s = str("precision")) {
    if (auto p = parse_precision(*s))
      c.precision = *p;
    else
      errors.push_back({"precision", "must be sp or dp"});
  }
  if (auto s = str("inst")) {
    if (auto o = parse_fp_op(*s))
      c.fp_op = *o;
    else
      errors.push_back({"inst", "must be add, mul, div or fma"});
  }
  if (j.contains("threads"))
    if (auto v = uint(j["threads"], "threads", 1)) c.threads = *v;
  if (j.contains("verbosity")) {
    if (auto v = uint(j["verbosity"], "verbosity", 0)) {
      if (*v > 3)
        errors.push_back({"verbosity", "must be 0..3"});
      else
        c.verbosity = static_cast<int>(*v);
    }
  }
  if (j.contains("fpldst") && !j["fpldst"].is_null())
    if (auto v = uint(j["fpldst"], "fpldst", 1)) c.fp_per_mem = *v;
  if (j.contains("ld_st_ratio")) {
    const auto& r = j["ld_st_ratio"];
    if (!r.is_object() || !r.contains("loads") || !r.contains("stores")) {
      errors.push_back({"ld_st_ratio", "must be an object with loads and stores"});
    } else {
      auto l = uint(r["loads"], "ld_st_ratio.loads", 0);
      auto s = uint(r["stores"], "ld_st_ratio.stores", 0);
      if (l && s) {
        if (*l + *s == 0)
          errors.push_back({"ld_st_ratio", "needs at least one load or store"});
        else
          c.ratio = {*l, *s};
      }
    }
  }
  if (j.contains("working_set_bytes")) {
    const auto& w = j["working_set_bytes"];
    if (!w.is_object()) {
      errors.push_back({"working_set_bytes", "must be an object keyed by level"});
    } else {
      for (auto it = w.begin(); it != w.end(); ++it) {
        auto lvl = parse_level(it.key());
        const std::string key = "working_set_bytes." + it.key();
        if (!lvl) {
          errors.push_back({key, "unknown memory level"});
        } else if (!it.value().is_number_unsigned() || it.value().get<std::uint64_t>() == 0) {
          errors.push_back({key, "must be a positive integer"});
        } else {
          c.working_set_bytes[*lvl] = it.value().get<std::uint64_t>();
        }
      }
    }
  }
  if (errors.empty()) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      errors.push_back({"", e.what()});
    }
  }
  return c;
}

}  // namespace carm

#endif  // CARM_JSON_IO_HPP_
