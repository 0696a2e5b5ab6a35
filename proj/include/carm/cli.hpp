#ifndef CARM_CLI_HPP_
#define CARM_CLI_HPP_

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carm/profiler.hpp"
#include "carm/report.hpp"
#include "carm/service.hpp"
#include "carm/setup.hpp"
#include "carm/suite.hpp"
#include "carm/svg.hpp"

namespace carm {

enum class CliAction { run, profile, serve };

struct ProfileOptions {
  std::string mode = "dbi";  // dbi | pmu
  DbiBackend backend = DbiBackend::dynamorio;
  ProfilerPaths paths;
  std::vector<std::string> replay;
  std::string label;
  std::optional<unsigned> operand_bytes;
  std::vector<std::string> command;  // executable then its arguments
  friend bool operator==(const ProfileOptions& a, const ProfileOptions& b) {
    return a.mode == b.mode && a.backend == b.backend && a.replay == b.replay && a.label == b.label &&
           a.operand_bytes == b.operand_bytes && a.command == b.command &&
           a.paths.dynamorio_root == b.paths.dynamorio_root && a.paths.dynamorio_client == b.paths.dynamorio_client &&
           a.paths.sde_root == b.paths.sde_root;
  }
};

/// One parsed command line; exactly one action.
struct CliInvocation {
  CliAction action = CliAction::run;
  SuiteConfig config;
  std::string executor = "native";
  std::optional<std::string> results;
  std::optional<std::string> cache_config;
  CacheOverrides overrides;
  std::optional<unsigned> repetitions;
  ProfileOptions profile;
  std::string host = "127.0.0.1";
  int port = kDefaultServicePort;
  bool help = false;
  std::string help_text;

  std::filesystem::path results_root() const { return results ? std::filesystem::path(*results) : default_results_root(); }
  SetupOptions setup_options() const {
    SetupOptions s;
    if (cache_config) s.cache_config = *cache_config;
    s.overrides = overrides;
    s.repetitions = repetitions;
    return s;
  }
};

inline bool operator==(const CacheOverrides& a, const CacheOverrides& b) {
  return a.l1d_kib == b.l1d_kib && a.l2_kib == b.l2_kib && a.l3_total_kib == b.l3_total_kib &&
         a.l3_slice_kib == b.l3_slice_kib;
}

inline bool operator==(const CliInvocation& a, const CliInvocation& b) {
  return a.action == b.action && a.config == b.config && a.executor == b.executor && a.results == b.results &&
         a.cache_config == b.cache_config && a.overrides == b.overrides && a.repetitions == b.repetitions &&
         a.profile == b.profile && a.host == b.host && a.port == b.port && a.help == b.help;
}

namespace detail::cli {

inline const std::set<std::string>& single_dash_aliases() {
  static const std::set<std::string> s{"ldst", "fpldst", "only_ld", "only_st", "ld_st_ratio", "test", "isa",
                                       "precision", "threads", "inst", "plot", "verbose"};
  return s;
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Lowercases flag names, accepts single-dash long spellings and maps -ldst to --ld_st_ratio.
inline std::vector<std::string> normalize_argv(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  bool passthrough = false;
  for (const auto& a : args) {
    if (passthrough || a.size() < 2 || a[0] != '-') {
      out.push_back(a);
      continue;
    }
    if (a == "--") {
      passthrough = true;
      out.push_back(a);
      continue;
    }
    auto eq = a.find('=');
    std::string name = lower(a.substr(0, eq));
    std::string rest = eq == std::string::npos ? "" : a.substr(eq);
    if (name[1] != '-' && name.size() > 2 && single_dash_aliases().count(name.substr(1))) name = "-" + name;
    if (name == "--ldst") name = "--ld_st_ratio";
    out.push_back(name + rest);
  }
  return out;
}

template <typename E, std::size_t N>
std::vector<std::string> names_of(const std::array<E, N>& values) {
  std::vector<std::string> v;
  for (E e : values) v.emplace_back(to_string(e));
  return v;
}

}  // namespace detail::cli

/// Flag surface shared by parsing and --help.
class CliParser {
 public:
  CliParser() : app_("Cache-aware roofline model benchmarks and application profiling", "carm") {
    app_.set_help_flag("-h,--help", "Print this help message and exit");
    app_.option_defaults()->always_capture_default();
    app_.require_subcommand(0, 1);
    app_.add_option("--test", test_, "Benchmark: roofline, L1, L2, L3, DRAM, FP, MEM, mixedL1, mixedL2, mixedL3, mixedDRAM")
        ->default_str("roofline");
    app_.add_option("--isa", isa_, "ISA extension: auto, scalar, sse, avx2, avx512, neon, rvv")->default_str("auto");
    app_.add_option("--precision", precision_, "FP precision: dp or sp")->default_str("dp");
    app_.add_option("--threads", inv_.config.threads, "Worker threads")->default_str("1");
    app_.add_option("--ld_st_ratio", ratio_, "Loads per store, as L:S or L (alias -ldst)")->default_str("2:1");
    app_.add_flag("--only_ld", only_ld_, "Memory benchmarks issue loads only");
    app_.add_flag("--only_st", only_st_, "Memory benchmarks issue stores only");
    app_.add_option("--inst", inst_, "First FP ceiling and mixed FP instruction: add, mul, div, fma")->default_str("add");
    app_.add_option("--fpldst", fpldst_, "Mixed: FP instructions per memory instruction (default: sweep)");
    app_.add_option("-v,--verbose", inv_.config.verbosity, "Output detail 0..3")->default_str("0");
    app_.add_flag("--plot", inv_.config.plot, "Write an SVG plot next to the CSV results");
    app_.add_option("--l1", l1_, "L1D size in KiB (overrides detection)");
    app_.add_option("--l2", l2_, "L2 size in KiB (overrides detection)");
    app_.add_option("--l3", l3_, "Total L3 size in KiB (overrides detection)");
    app_.add_option("--l3_slice", l3s_, "Per-core L3 slice in KiB (overrides detection)");
    app_.add_option("--config", cache_config_, "Cache size file with l1=, l2=, l3=, l3_slice= lines in KiB");
    app_.add_option("--results", results_, "Results directory (default: $CARM_RESULTS_DIR or ./Results)");
    app_.add_option("--executor", inv_.executor, "Benchmark executor: native or simulated")->default_str("native");
    app_.add_option("--repetitions", reps_, "Timed repetitions per benchmark (default 1024)");

    prof_ = app_.add_subcommand("profile", "Place an application on the model from opcode counts or PMU counters");
    auto* mode = prof_->add_option_group("mode");
    mode->add_flag("--dbi", dbi_, "Dynamic binary instrumentation opcode counts (default)");
    mode->add_flag("--pmu", pmu_, "Hardware performance counters through PAPI");
    mode->require_option(0, 1);
    prof_->add_option("--backend", backend_, "DBI backend: dynamorio or sde")->default_str("dynamorio");
    prof_->add_option("--dynamorio", dr_root_, "DynamoRIO installation directory (bin64/drrun)");
    prof_->add_option("--dr_client", dr_client_, "Opcode-count client library for DynamoRIO");
    prof_->add_option("--sde", sde_root_, "Intel SDE installation directory (sde64)");
    prof_->add_option("--replay", inv_.profile.replay, "Use saved profiler output instead of running (PMU: one per pass)");
    prof_->add_option("--label", inv_.profile.label, "Name stored with the application point");
    prof_->add_option("--operand_bytes", operand_bytes_, "PMU: bytes per load/store instruction");
    prof_->add_option("command", inv_.profile.command, "Executable and its arguments (after --)");

    prof_->fallthrough();
    serve_ = app_.add_subcommand("serve", "Start the local HTTP service");
    serve_->fallthrough();
    serve_->add_option("--host", inv_.host, "Bind address")->default_str("127.0.0.1");
    serve_->add_option("--port", inv_.port, "TCP port (0: any free port)")->default_str(std::to_string(kDefaultServicePort));
  }

  std::string help() const { return app_.help(); }

  /// Throws UsageError on malformed or conflicting flags.
  CliInvocation parse(const std::vector<std::string>& argv) {
    std::vector<std::string> norm = detail::cli::normalize_argv(argv);
    std::vector<std::string> rev(norm.rbegin(), norm.rend());
    try {
      app_.parse(rev);
    } catch (const CLI::CallForHelp&) {
      inv_.help = true;
      inv_.help_text = prof_->parsed() ? prof_->help() : serve_->parsed() ? serve_->help() : app_.help();
      return inv_;
    } catch (const CLI::ParseError& e) {
      throw UsageError(e.what());
    }
    return finish();
  }

 private:
  CliInvocation finish() {
    CliInvocation& v = inv_;
    v.action = prof_->parsed() ? CliAction::profile : serve_->parsed() ? CliAction::serve : CliAction::run;
    SuiteConfig& c = v.config;
    if (auto t = parse_test(test_))
      c.test = *t;
    else
      throw UsageError("unknown --test '" + test_ + "' (expected one of roofline, L1, L2, L3, DRAM, FP, MEM, mixedL1, "
                       "mixedL2, mixedL3, mixedDRAM)");
    std::string isa = detail::cli::lower(isa_);
    if (isa != "auto") {
      if (auto i = parse_isa(isa))
        c.isa = *i;
      else
        throw UsageError("unknown --isa '" + isa_ + "'");
    }
    if (auto p = parse_precision(detail::cli::lower(precision_)))
      c.precision = *p;
    else
      throw UsageError("--precision must be dp or sp");
    if (auto o = parse_fp_op(detail::cli::lower(inst_)))
      c.fp_op = *o;
    else
      throw UsageError("--inst must be add, mul, div or fma");
    if (only_ld_ && only_st_) throw UsageError("--only_ld and --only_st are mutually exclusive");
    try {
      c.ratio = LdStRatio::parse(ratio_);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    if (only_ld_) c.ratio = {1, 0};
    if (only_st_) c.ratio = {0, 1};
    if (fpldst_) c.fp_per_mem = *fpldst_;
    v.overrides = {l1_, l2_, l3_, l3s_};
    for (auto o : {l1_, l2_, l3_, l3s_})
      if (o && *o == 0) throw UsageError("cache size overrides must be positive");
    v.cache_config = cache_config_;
    v.results = results_;
    v.repetitions = reps_;
    if (reps_ && *reps_ == 0) throw UsageError("--repetitions must be >= 1");
    if (!is_executor_name(v.executor)) throw UsageError("--executor must be native or simulated");
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    if (v.action == CliAction::profile) {
      ProfileOptions& p = v.profile;
      p.mode = pmu_ ? "pmu" : "dbi";
      try {
        p.backend = parse_dbi_backend(backend_);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
      if (dr_root_) p.paths.dynamorio_root = *dr_root_;
      if (dr_client_) p.paths.dynamorio_client = *dr_client_;
      if (sde_root_) p.paths.sde_root = *sde_root_;
      p.operand_bytes = operand_bytes_;
      if (operand_bytes_ && *operand_bytes_ == 0) throw UsageError("--operand_bytes must be positive");
      if (p.replay.empty() && p.command.empty())
        throw UsageError("profile needs an executable (after --) or --replay <file>");
      if (p.mode == "dbi" && p.replay.size() > 1) throw UsageError("DBI replay takes a single report file");
      if (p.label.empty())
        p.label = !p.command.empty() ? std::filesystem::path(p.command.front()).filename().string()
                                     : std::filesystem::path(p.replay.front()).stem().string();
    }
    if (v.action == CliAction::serve && (v.port < 0 || v.port > 65535)) throw UsageError("--port must be 0..65535");
    return v;
  }

  CLI::App app_;
  CLI::App* prof_ = nullptr;
  CLI::App* serve_ = nullptr;
  CliInvocation inv_;
  std::string test_ = "roofline", isa_ = "auto", precision_ = "dp", ratio_ = "2:1", inst_ = "add";
  bool only_ld_ = false, only_st_ = false, dbi_ = false, pmu_ = false;
  std::optional<unsigned> fpldst_, reps_;
  std::optional<std::uint64_t> l1_, l2_, l3_, l3s_;
  std::optional<std::string> cache_config_, results_, dr_root_, dr_client_, sde_root_;
  std::string backend_ = "dynamorio";
  std::optional<unsigned> operand_bytes_;
};

/// argv[0] excluded.
inline CliInvocation parse_args(const std::vector<std::string>& args) { return CliParser().parse(args); }

inline std::string cli_help() { return CliParser().help(); }

/// Canonical command line (argv[0] excluded) that parses back to `v`.
inline std::vector<std::string> serialize_args(const CliInvocation& v) {
  const SuiteConfig& c = v.config;
  std::vector<std::string> a{"--test", std::string(to_string(c.test)), "--isa",
                             c.isa ? std::string(to_string(*c.isa)) : "auto", "--precision",
                             std::string(to_string(c.precision)), "--threads", std::to_string(c.threads),
                             "--ld_st_ratio", c.ratio.to_string(), "--inst", std::string(to_string(c.fp_op))};
  if (c.fp_per_mem) a.insert(a.end(), {"--fpldst", std::to_string(*c.fp_per_mem)});
  a.insert(a.end(), {"-v", std::to_string(c.verbosity)});
  if (c.plot) a.push_back("--plot");
  auto kib = [&](const char* flag, const std::optional<std::uint64_t>& o) {
    if (o) a.insert(a.end(), {flag, std::to_string(*o)});
  };
  kib("--l1", v.overrides.l1d_kib);
  kib("--l2", v.overrides.l2_kib);
  kib("--l3", v.overrides.l3_total_kib);
  kib("--l3_slice", v.overrides.l3_slice_kib);
  if (v.cache_config) a.insert(a.end(), {"--config", *v.cache_config});
  if (v.results) a.insert(a.end(), {"--results", *v.results});
  a.insert(a.end(), {"--executor", v.executor});
  if (v.repetitions) a.insert(a.end(), {"--repetitions", std::to_string(*v.repetitions)});
  if (v.action == CliAction::profile) {
    const ProfileOptions& p = v.profile;
    a.insert(a.end(), {"profile", "--" + p.mode, "--backend", std::string(to_string(p.backend))});
    if (!p.paths.dynamorio_root.empty()) a.insert(a.end(), {"--dynamorio", p.paths.dynamorio_root.string()});
    if (!p.paths.dynamorio_client.empty()) a.insert(a.end(), {"--dr_client", p.paths.dynamorio_client.string()});
    if (!p.paths.sde_root.empty()) a.insert(a.end(), {"--sde", p.paths.sde_root.string()});
    for (const auto& r : p.replay) a.insert(a.end(), {"--replay", r});
    a.insert(a.end(), {"--label", p.label});
    if (p.operand_bytes) a.insert(a.end(), {"--operand_bytes", std::to_string(*p.operand_bytes)});
    if (!p.command.empty()) {
      a.push_back("--");
      a.insert(a.end(), p.command.begin(), p.command.end());
    }
  } else if (v.action == CliAction::serve) {
    a.insert(a.end(), {"serve", "--host", v.host, "--port", std::to_string(v.port)});
  }
  return a;
}

namespace detail::cli {

inline std::string point_line(const AppPoint& p) {
  return p.label + ": AI " + csv::format_double(p.ai) + " FLOP/B, " + csv::format_double(p.gflops) + " GFLOP/s";
}

inline std::filesystem::path write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
  return p;
}

inline std::vector<AppPoint> overlay_for(const ResultArchive& archive, const RooflineRecord& rec) {
  std::vector<AppPoint> pts;
  for (const auto& m : archive.read_mixed())
    if (m.header.machine == rec.header.machine && m.isa == rec.isa && m.precision == rec.precision)
      pts.push_back(m.point());
  for (const auto& ap : archive.read_applications())
    if (ap.header.machine.hostname == rec.header.machine.hostname) pts.push_back(ap.point());
  return pts;
}

inline PlotOptions plot_title(const RooflineRecord& r) {
  PlotOptions o;
  o.title = r.header.machine.cpu_model + " " + std::string(to_string(r.isa)) + " " +
            std::string(to_string(r.precision)) + " " + std::to_string(r.threads) + "T";
  return o;
}

inline int run_suites(const CliInvocation& v, std::ostream& out) {
  ResultArchive archive(v.results_root());
  ExecutorSetup setup = make_executor_setup(v.executor, v.setup_options());
  SuiteContext ctx;
  ctx.executor = setup.executor.get();
  ctx.topology = setup.topology;
  ctx.available_isas = setup.isas;
  ctx.harness = setup.harness;
  ctx.archive = &archive;
  ctx.machine = detect_machine_identity();
  ctx.log = &out;
  if (v.config.verbosity >= 1) {
    ctx.progress = [&out](const Progress& p) {
      out << "[" << static_cast<int>(p.fraction * 100 + 0.5) << "%] " << p.current << "\n";
    };
    out << "cache sizes (KiB): L1 " << ctx.topology.l1d_kib << ", L2 " << ctx.topology.l2_kib << ", L3 "
        << ctx.topology.l3_total_kib << " (slice " << ctx.topology.l3_slice_kib << ", "
        << to_string(ctx.topology.source) << ")\n";
  }
  SuiteOutcome o = run_suite(ctx, v.config);
  Suite s = suite_of(v.config.test);
  out << "results: " << archive.suite_file(s).string() << "\n";
  for (const auto& id : o.record_ids()) out << "record: " << id << "\n";
  for (const auto& r : o.roofline)
    for (const auto& w : r.warnings) out << "warning: " << r.header.id << ": " << w << "\n";
  if (!v.config.plot) return 0;
  for (const auto& r : o.roofline) {
    auto path = archive.suite_dir(Suite::roofline) / (r.header.id + ".svg");
    try {
      write_text(path, render_roofline_svg(r.to_model(), overlay_for(archive, r), plot_title(r)));
      out << "plot: " << path.string() << "\n";
    } catch (const DomainError& e) {
      out << "plot skipped for " << r.header.id << ": " << e.what() << "\n";
    }
  }
  for (const auto& c : o.curves) {
    auto path = archive.suite_dir(Suite::memory_curve) / (c.header.id + ".svg");
    write_text(path, render_memcurve_svg(c, &ctx.topology));
    out << "plot: " << path.string() << "\n";
  }
  if (!o.mixed.empty()) {
    std::optional<RooflineRecord> base;
    for (const auto& r : archive.read_roofline())
      if (r.header.machine == ctx.machine && r.isa == o.mixed.front().isa &&
          r.precision == o.mixed.front().precision && r.to_model().roofs().size() > 0)
        base = r;
    if (!base) {
      out << "plot skipped: no stored roofline for " << to_string(o.mixed.front().isa)
          << "; run --test roofline first\n";
    } else {
      auto path = archive.suite_dir(Suite::mixed) / (o.mixed.front().header.run_id + ".svg");
      write_text(path, render_roofline_svg(base->to_model(), overlay_for(archive, *base), plot_title(*base)));
      out << "plot: " << path.string() << "\n";
    }
  }
  return 0;
}

inline int run_profile(const CliInvocation& v, std::ostream& out) {
  const ProfileOptions& p = v.profile;
  ProfileRequest req;
  req.label = p.label;
  req.operand_bytes = p.operand_bytes;
  if (!p.command.empty()) {
    req.executable = p.command.front();
    req.args.assign(p.command.begin() + 1, p.command.end());
  }
  if (p.mode == "dbi") {
    if (!p.replay.empty()) req.replay_report = p.replay.front();
  } else {
    for (const auto& r : p.replay) req.replay_passes.emplace_back(r);
  }
  ProfileResult r = p.mode == "dbi" ? run_dbi_profile(req, p.backend, p.paths) : run_pmu_profile(req);
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  if (v.config.verbosity >= 2) {
    out << "flops: " << csv::format_double(r.flops) << "\nbytes: " << csv::format_double(r.bytes) << " ("
        << r.byte_accounting << ")\nseconds: " << csv::format_double(r.seconds) << "\n";
    if (r.dbi)
      for (const auto& [fam, t] : r.dbi->breakdown)
        out << "  " << fam << ": " << t.instructions << " instructions, " << t.flops << " FLOP, " << t.bytes
            << " B\n";
  }
  if (!r.point) {
    out << "no application point: " << r.flops << " FLOP over " << r.bytes << " B\n";
    return 1;
  }
  out << "point: " << point_line(*r.point) << "\n";
  ResultArchive archive(v.results_root());
  std::string id = random_run_id();
  RecordHeader h{id + "-app", id, detect_machine_identity(), iso8601_utc_now(), p.mode};
  archive_profile(archive, r, h);
  out << "results: " << archive.suite_file(Suite::applications).string() << "\nrecord: " << h.id << "\n";
  return 0;
}

inline int run_serve(const CliInvocation& v, std::ostream& out) {
  ServiceOptions o;
  o.host = v.host;
  o.port = v.port;
  o.results_root = v.results_root();
  o.default_executor = v.executor;
  Service svc(o, default_setup_factory(v.setup_options()));
  int port = svc.bind();
  out << "serving on http://" << v.host << ":" << port << "\n" << std::flush;
  svc.serve();
  return 0;
}

}  // namespace detail::cli

/// Runs the invocation; returns the process exit code.
inline int run_cli(const CliInvocation& v, std::ostream& out, std::ostream& err) {
  try {
    if (v.help) {
      out << v.help_text;
      return 0;
    }
    switch (v.action) {
      case CliAction::run: return detail::cli::run_suites(v, out);
      case CliAction::profile: return detail::cli::run_profile(v, out);
      case CliAction::serve: return detail::cli::run_serve(v, out);
    }
  } catch (const UnsupportedIsaError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

/// Parses then runs; exit codes 0 ok, 1 runtime failure, 2 usage.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliInvocation v;
  try {
    v = parse_args(args);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for the flag list.\n";
    return 2;
  }
  return run_cli(v, out, err);
}

}  // namespace carm

#endif  // CARM_CLI_HPP_
