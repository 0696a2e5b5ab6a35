#ifndef CARM_RECORDS_HPP_
#define CARM_RECORDS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "carm/model.hpp"
#include "carm/types.hpp"

namespace carm {

/// Hostname plus CPU model string, stamped on every stored record.
struct MachineIdentity {
  std::string hostname;
  std::string cpu_model;
  friend bool operator==(const MachineIdentity&, const MachineIdentity&) = default;
};

struct LevelResult {
  double bandwidth_gbps = 0;
  double ipc = 0;
  std::uint64_t working_set_bytes = 0;
  friend bool operator==(const LevelResult&, const LevelResult&) = default;
};

struct CeilingResult {
  FpOp op = FpOp::add;
  double gflops = 0;
  double ipc = 0;
  friend bool operator==(const CeilingResult&, const CeilingResult&) = default;
};

/// Common keys of every stored record.
struct RecordHeader {
  std::string id;
  std::string run_id;
  MachineIdentity machine;
  std::string date;  // ISO-8601 UTC
  std::string executor;
  friend bool operator==(const RecordHeader&, const RecordHeader&) = default;
};

/// One roofline run for one ISA: four roofs and two FP ceilings.
struct RooflineRecord {
  RecordHeader header;
  Isa isa = Isa::scalar;
  Precision precision = Precision::dp;
  unsigned threads = 1;
  LdStRatio ratio;
  double frequency_ghz = 0;
  std::array<std::optional<LevelResult>, 4> levels;  // indexed by MemLevel
  std::optional<CeilingResult> fp;
  std::optional<CeilingResult> fma;
  std::vector<std::string> warnings;

  std::optional<LevelResult>& level(MemLevel l) { return levels[static_cast<std::size_t>(l)]; }
  const std::optional<LevelResult>& level(MemLevel l) const { return levels[static_cast<std::size_t>(l)]; }
  bool complete() const {
    for (const auto& l : levels)
      if (!l) return false;
    return fp && fma;
  }

  /// CARM built from whatever roofs and ceilings the record holds.
  CarmModel to_model() const {
    std::vector<RoofMeasurement> roofs;
    for (MemLevel l : kAllLevels)
      if (const auto& r = level(l)) roofs.push_back({l, r->bandwidth_gbps, r->ipc, ratio, isa, precision, threads});
    std::vector<FpCeiling> ceilings;
    for (const auto* c : {&fp, &fma})
      if (*c) ceilings.push_back({(*c)->op, (*c)->gflops, (*c)->ipc, isa, precision, threads});
    return build_model(std::move(roofs), std::move(ceilings), header.machine.hostname, frequency_ghz);
  }
  friend bool operator==(const RooflineRecord&, const RooflineRecord&) = default;
};

struct CurvePoint {
  std::uint64_t requested_bytes = 0;
  std::uint64_t array_bytes = 0;
  double bandwidth_gbps = 0;
  double ipc = 0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct MemoryCurveRecord {
  RecordHeader header;
  Isa isa = Isa::scalar;
  Precision precision = Precision::dp;
  unsigned threads = 1;
  LdStRatio ratio;
  std::vector<CurvePoint> points;
  std::vector<std::string> warnings;
  friend bool operator==(const MemoryCurveRecord&, const MemoryCurveRecord&) = default;
};

/// One mixed-benchmark execution: a point of known nominal AI.
struct MixedRecord {
  RecordHeader header;
  Isa isa = Isa::scalar;
  Precision precision = Precision::dp;
  unsigned threads = 1;
  LdStRatio ratio;
  MemLevel level = MemLevel::L1;
  FpOp fp_op = FpOp::add;
  unsigned fp_per_mem = 1;
  std::uint64_t array_bytes = 0;
  std::uint64_t ai_num = 0;
  std::uint64_t ai_den = 1;
  double ai = 0;
  double gflops = 0;
  double bandwidth_gbps = 0;
  std::vector<std::string> warnings;

  AppPoint point() const {
    return {ai, gflops, AppSource::mixed_benchmark,
            std::string("mixed") + std::string(to_string(level)) + " " + std::string(to_string(isa)) + " " +
                std::string(to_string(fp_op)) + " x" + std::to_string(fp_per_mem)};
  }
  friend bool operator==(const MixedRecord&, const MixedRecord&) = default;
};

/// One profiled application region.
struct ApplicationRecord {
  RecordHeader header;
  std::string label;
  AppSource source = AppSource::dbi;
  std::string backend;
  double ai = 0;
  double gflops = 0;
  double flops = 0;
  double bytes = 0;
  double seconds = 0;
  std::string byte_accounting;  // how bytes were derived
  std::string raw_report;       // path of the archived profiler output
  std::vector<std::string> warnings;

  AppPoint point() const { return {ai, gflops, source, label}; }
  friend bool operator==(const ApplicationRecord&, const ApplicationRecord&) = default;
};

}  // namespace carm

#endif  // CARM_RECORDS_HPP_
