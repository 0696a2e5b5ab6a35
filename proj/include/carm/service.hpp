#ifndef CARM_SERVICE_HPP_
#define CARM_SERVICE_HPP_

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "carm/json_io.hpp"
#include "carm/profiler.hpp"
#include "carm/setup.hpp"
#include "carm/svg.hpp"
#include "carm/suite.hpp"

namespace carm {

inline constexpr int kDefaultServicePort = 8642;

enum class RunState { queued, running, done, failed };

constexpr std::string_view to_string(RunState s) {
  switch (s) {
    case RunState::queued: return "queued";
    case RunState::running: return "running";
    case RunState::done: return "done";
    case RunState::failed: return "failed";
  }
  return "?";
}

/// Status of one submitted suite run.
struct RunHandle {
  std::string id;
  RunState state = RunState::queued;
  SuiteConfig config;
  std::string executor;
  Progress progress;
  std::vector<std::string> result_ids;
  std::optional<std::string> error;
  std::string submitted_at;
};

inline json to_json(const RunHandle& h) {
  return {{"schema_version", kJsonSchemaVersion},
          {"id", h.id},
          {"state", std::string(to_string(h.state))},
          {"config", to_json(h.config)},
          {"executor", h.executor},
          {"suite", std::string(to_string(suite_of(h.config.test)))},
          {"progress", {{"current", h.progress.current}, {"fraction", h.progress.fraction}}},
          {"result_ids", h.result_ids},
          {"error", h.error ? json(*h.error) : json(nullptr)},
          {"submitted_at", h.submitted_at}};
}

/// A hardware run is already in flight.
class BusyError : public Error {
 public:
  explicit BusyError(std::string active_id)
      : Error("a run is already active: " + active_id), active_id_(std::move(active_id)) {}
  const std::string& active_id() const { return active_id_; }

 private:
  std::string active_id_;
};

inline SetupFactory default_setup_factory(SetupOptions opt = {}) {
  return [opt](const std::string& name) { return make_executor_setup(name, opt); };
}

/// Single-worker run queue; at most one run is queued or running at a time.
class RunManager {
 public:
  RunManager(ResultArchive& archive, SetupFactory factory = default_setup_factory(),
             MachineIdentity machine = detect_machine_identity())
      : archive_(archive), factory_(std::move(factory)), machine_(std::move(machine)) {
    worker_ = std::jthread([this](std::stop_token st) { loop(st); });
  }
  ~RunManager() {
    worker_.request_stop();
    cv_.notify_all();
  }
  RunManager(const RunManager&) = delete;
  RunManager& operator=(const RunManager&) = delete;

  RunHandle submit(const SuiteConfig& cfg, const std::string& executor) {
    cfg.validate();
    if (!is_executor_name(executor))
      throw ConfigError("unknown executor '" + executor + "'");
    std::lock_guard lk(mu_);
    if (active_) throw BusyError(*active_);
    RunHandle h;
    h.id = random_run_id();
    h.config = cfg;
    h.executor = executor;
    h.progress = {"queued", 0.0};
    h.submitted_at = iso8601_utc_now();
    runs_[h.id] = h;
    active_ = h.id;
    cv_.notify_all();
    return h;
  }

  std::optional<RunHandle> get(const std::string& id) const {
    std::lock_guard lk(mu_);
    auto it = runs_.find(id);
    if (it == runs_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::string> active() const {
    std::lock_guard lk(mu_);
    return active_;
  }

  /// Blocks until no run is queued or running.
  void wait_idle() {
    std::unique_lock lk(mu_);
    idle_cv_.wait(lk, [&] { return !active_; });
  }

 private:
  void update(const std::string& id, const std::function<void(RunHandle&)>& f) {
    std::lock_guard lk(mu_);
    f(runs_[id]);
  }

  void loop(std::stop_token st) {
    while (!st.stop_requested()) {
      std::string id;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return st.stop_requested() || (active_ && runs_[*active_].state == RunState::queued); });
        if (st.stop_requested()) return;
        id = *active_;
        runs_[id].state = RunState::running;
        runs_[id].progress = {"starting", 0.0};
      }
      RunHandle snapshot = *get(id);
      try {
        ExecutorSetup setup = factory_(snapshot.executor);
        SuiteContext ctx;
        ctx.executor = setup.executor.get();
        ctx.topology = setup.topology;
        ctx.available_isas = setup.isas;
        ctx.harness = setup.harness;
        ctx.archive = &archive_;
        ctx.machine = machine_;
        ctx.make_run_id = [id] { return id; };
        ctx.progress = [this, id](const Progress& p) {
          update(id, [&](RunHandle& h) {
            h.progress.current = p.current;
            h.progress.fraction = std::clamp(std::max(h.progress.fraction, p.fraction), 0.0, 1.0);
          });
        };
        SuiteOutcome out = run_suite(ctx, snapshot.config);
        update(id, [&](RunHandle& h) {
          h.result_ids = out.record_ids();
          h.progress = {"done", 1.0};
          h.state = RunState::done;
        });
      } catch (const std::exception& e) {
        update(id, [&](RunHandle& h) {
          h.error = e.what();
          h.state = RunState::failed;
        });
      }
      {
        std::lock_guard lk(mu_);
        active_.reset();
      }
      idle_cv_.notify_all();
    }
  }

  ResultArchive& archive_;
  SetupFactory factory_;
  MachineIdentity machine_;
  mutable std::mutex mu_;
  std::condition_variable cv_, idle_cv_;
  std::map<std::string, RunHandle> runs_;
  std::optional<std::string> active_;
  std::jthread worker_;
};

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = kDefaultServicePort;  // 0: any free port
  std::filesystem::path results_root = default_results_root();
  std::string default_executor = "native";
  ProfilerPaths profiler;
};

/// Machine description served by /api/machine.
inline json machine_json() {
  json j{{"schema_version", kJsonSchemaVersion}};
  auto id = detect_machine_identity();
  j["hostname"] = id.hostname;
  j["cpu_model"] = id.cpu_model;
  j["arch"] = std::string(to_string(host_arch()));
  json warnings = json::array();
  try {
    j["topology"] = to_json(detect_cache_topology());
  } catch (const Error& e) {
    j["topology"] = nullptr;
    warnings.push_back(e.what());
  }
  json isas = json::array();
  for (Isa i : detect_supported_isas()) isas.push_back(std::string(to_string(i)));
  j["isas"] = isas;
  j["executors"] = executor_names();
  j["warnings"] = warnings;
  return j;
}

/// Model plus overlay points of one roofline record, as served to the dashboard.
inline json roofline_plot_json(const RooflineRecord& rec, const std::vector<AppPoint>& points) {
  CarmModel m = rec.to_model();
  const double peak = m.peak_gflops();
  json roofs = json::array();
  for (const auto& r : m.roofs())
    roofs.push_back({{"level", std::string(to_string(r.level))},
                     {"bandwidth_gbps", r.bandwidth_gbps},
                     {"ipc", r.ipc},
                     {"ridge_ai", ridge_point(peak, r.bandwidth_gbps)}});
  json ceilings = json::array();
  for (const auto& c : m.ceilings())
    ceilings.push_back({{"op", std::string(to_string(c.op))}, {"gflops", c.gflops}, {"ipc", c.ipc}});
  json pts = json::array();
  for (const auto& p : points) {
    json pj = to_json(p);
    pj["region"] = std::string(to_string(classify_region(m, p.ai)));
    pj["anomalous"] = is_anomalous(m, p);
    pts.push_back(pj);
  }
  return {{"schema_version", kJsonSchemaVersion},
          {"id", rec.header.id},
          {"machine", rec.header.machine.hostname},
          {"isa", std::string(to_string(rec.isa))},
          {"precision", std::string(to_string(rec.precision))},
          {"threads", rec.threads},
          {"peak_gflops", peak},
          {"regions",
           {{"memory_bound_below", ridge_point(peak, m.fastest_roof().bandwidth_gbps)},
            {"compute_bound_from", ridge_point(peak, m.slowest_roof().bandwidth_gbps)}}},
          {"roofs", roofs},
          {"ceilings", ceilings},
          {"points", pts},
          {"warnings", m.warnings()}};
}

/// Runs an analysis request (replay or live) and shapes the response body.
inline json run_analysis(const json& body, const ProfilerPaths& paths, ResultArchive* archive,
                         std::vector<FieldError>& errors) {
  if (!body.is_object()) {
    errors.push_back({"", "request body must be a JSON object"});
    return nullptr;
  }
  static const std::set<std::string> known{"mode",          "backend",       "label", "executable", "args",
                                           "replay_report", "replay_passes", "operand_bytes", "expected", "archive"};
  for (auto it = body.begin(); it != body.end(); ++it)
    if (!known.count(it.key())) errors.push_back({it.key(), "unknown field"});
  std::string mode = body.value("mode", std::string("dbi"));
  if (mode != "dbi" && mode != "pmu") errors.push_back({"mode", "must be dbi or pmu"});
  ProfileRequest req;
  auto get_str = [&](const char* k, std::string& out) {
    if (!body.contains(k)) return;
    if (!body[k].is_string())
      errors.push_back({k, "must be a string"});
    else
      out = body[k].get<std::string>();
  };
  get_str("label", req.label);
  get_str("executable", req.executable);
  std::string replay;
  get_str("replay_report", replay);
  if (!replay.empty()) req.replay_report = replay;
  if (body.contains("args")) {
    if (!body["args"].is_array() || !std::all_of(body["args"].begin(), body["args"].end(), [](const json& a) {
          return a.is_string();
        }))
      errors.push_back({"args", "must be an array of strings"});
    else
      req.args = body["args"].get<std::vector<std::string>>();
  }
  if (body.contains("replay_passes")) {
    if (!body["replay_passes"].is_array())
      errors.push_back({"replay_passes", "must be an array of paths"});
    else
      for (const auto& f : body["replay_passes"]) {
        if (!f.is_string())
          errors.push_back({"replay_passes", "must be an array of paths"});
        else
          req.replay_passes.emplace_back(f.get<std::string>());
      }
  }
  if (body.contains("operand_bytes")) {
    if (!body["operand_bytes"].is_number_unsigned() || body["operand_bytes"].get<unsigned>() == 0)
      errors.push_back({"operand_bytes", "must be a positive integer"});
    else
      req.operand_bytes = body["operand_bytes"].get<unsigned>();
  }
  DbiBackend backend = DbiBackend::dynamorio;
  if (body.contains("backend")) {
    try {
      backend = parse_dbi_backend(body["backend"].is_string() ? body["backend"].get<std::string>() : "");
    } catch (const ConfigError&) {
      errors.push_back({"backend", "must be dynamorio or sde"});
    }
  }
  std::optional<std::pair<std::string, std::uint64_t>> expected;
  if (body.contains("expected")) {
    const auto& e = body["expected"];
    static const std::set<std::string> kinds{"loads", "stores", "fp_instructions", "instructions", "flops", "bytes"};
    if (!e.is_object() || !e.contains("kind") || !e["kind"].is_string() || !kinds.count(e["kind"].get<std::string>()) ||
        !e.contains("count") || !e["count"].is_number_unsigned() || e["count"].get<std::uint64_t>() == 0)
      errors.push_back({"expected", "must be {kind: loads|stores|fp_instructions|instructions|flops|bytes, count > 0}"});
    else
      expected = {e["kind"].get<std::string>(), e["count"].get<std::uint64_t>()};
  }
  if (mode == "pmu" && expected) errors.push_back({"expected", "only available for dbi analyses"});
  bool do_archive = body.value("archive", true);
  if (!errors.empty()) return nullptr;

  ProfileResult r = mode == "dbi" ? run_dbi_profile(req, backend, paths) : run_pmu_profile(req);
  json out{{"schema_version", kJsonSchemaVersion},
           {"mode", mode},
           {"backend", r.backend},
           {"point", r.point ? to_json(*r.point) : json(nullptr)},
           {"flops", r.flops},
           {"bytes", r.bytes},
           {"seconds", r.seconds},
           {"byte_accounting", r.byte_accounting},
           {"warnings", r.warnings}};
  if (r.dbi) {
    out["totals"] = to_json(r.dbi->all);
    json b = json::object();
    for (const auto& [k, v] : r.dbi->breakdown) b[k] = to_json(v);
    out["breakdown"] = b;
    out["unclassified_instructions"] = r.dbi->unclassified_instructions;
  } else {
    out["totals"] = nullptr;
    out["breakdown"] = nullptr;
    out["unclassified_instructions"] = nullptr;
  }
  if (r.pmu)
    out["pmu"] = {{"lst_ins", r.pmu->lst_ins},
                  {"sp_ops", r.pmu->sp_ops},
                  {"dp_ops", r.pmu->dp_ops},
                  {"elapsed_seconds", r.pmu->elapsed_seconds},
                  {"region", r.pmu->region}};
  else
    out["pmu"] = nullptr;
  out["measured_count"] = nullptr;
  out["deviation_percent"] = nullptr;
  if (expected && r.dbi) {
    const auto& t = r.dbi->all;
    const std::map<std::string, std::uint64_t> by_kind{{"loads", t.loads},
                                                       {"stores", t.stores},
                                                       {"fp_instructions", t.fp_instructions},
                                                       {"instructions", t.instructions},
                                                       {"flops", t.flops},
                                                       {"bytes", t.bytes}};
    std::uint64_t measured = by_kind.at(expected->first);
    out["measured_count"] = measured;
    out["deviation_percent"] = count_deviation_percent(measured, expected->second);
  }
  out["record_id"] = nullptr;
  if (archive && do_archive && r.point) {
    std::string id = random_run_id();
    RecordHeader h{id + "-app", id, detect_machine_identity(), iso8601_utc_now(), mode};
    out["record_id"] = archive_profile(*archive, r, h).header.id;
  }
  return out;
}

/// Local HTTP front end over the suites, the archive and the profiler.
class Service {
 public:
  explicit Service(ServiceOptions opt, SetupFactory factory = default_setup_factory())
      : opt_(std::move(opt)), archive_(opt_.results_root), runs_(archive_, std::move(factory)) {
    routes();
  }
  ~Service() { stop(); }

  /// Binds the socket; returns the bound port.
  int bind() {
    if (opt_.port == 0) {
      port_ = server_.bind_to_any_port(opt_.host);
    } else {
      if (!server_.bind_to_port(opt_.host, opt_.port))
        throw ConfigError("cannot bind " + opt_.host + ":" + std::to_string(opt_.port));
      port_ = opt_.port;
    }
    if (port_ <= 0) throw ConfigError("cannot bind " + opt_.host);
    return port_;
  }

  /// Serves until stop(); bind() must have succeeded.
  void serve() { server_.listen_after_bind(); }

  /// bind() plus serve() on a background thread.
  int start() {
    int p = bind();
    thread_ = std::thread([this] { serve(); });
    server_.wait_until_ready();
    return p;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  RunManager& runs() { return runs_; }
  ResultArchive& archive() { return archive_; }

 private:
  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static json error_body(const std::string& msg, const std::vector<FieldError>& fields = {}) {
    json f = json::array();
    for (const auto& e : fields) f.push_back({{"field", e.field}, {"message", e.message}});
    return {{"schema_version", kJsonSchemaVersion}, {"error", msg}, {"fields", f}};
  }

  static std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      reply(res, 400, error_body("malformed JSON body", {{"", e.what()}}));
      return std::nullopt;
    }
  }

  std::vector<AppPoint> overlay_points(const RooflineRecord& rec) const {
    std::vector<AppPoint> pts;
    for (const auto& m : archive_.read_mixed())
      if (m.header.machine == rec.header.machine && m.isa == rec.isa && m.precision == rec.precision)
        pts.push_back(m.point());
    for (const auto& a : archive_.read_applications())
      if (a.header.machine.hostname == rec.header.machine.hostname) pts.push_back(a.point());
    return pts;
  }

  void routes() {
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      }
      reply(res, 500, error_body(msg));
    });

    server_.Get("/api/machine", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, machine_json()); });

    server_.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      std::vector<FieldError> errors;
      SuiteConfig cfg = suite_config_from_json(*body, errors);
      std::string executor = opt_.default_executor;
      if (body->is_object() && body->contains("executor")) {
        const auto& e = (*body)["executor"];
        if (!e.is_string() || !is_executor_name(e.get<std::string>()))
          errors.push_back({"executor", "must be native or simulated"});
        else
          executor = e.get<std::string>();
      }
      if (!errors.empty()) return reply(res, 400, error_body("invalid run configuration", errors));
      try {
        reply(res, 202, to_json(runs_.submit(cfg, executor)));
      } catch (const BusyError& e) {
        json b = error_body(e.what());
        b["active_run_id"] = e.active_id();
        reply(res, 409, b);
      } catch (const ConfigError& e) {
        reply(res, 400, error_body("invalid run configuration", {{"", e.what()}}));
      }
    });

    server_.Get(R"(/api/runs/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto h = runs_.get(req.matches[1]);
      if (!h) return reply(res, 404, error_body("unknown run id " + std::string(req.matches[1])));
      reply(res, 200, to_json(*h));
    });

    server_.Get("/api/results", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("suite"))
        return reply(res, 400, error_body("missing query parameter", {{"suite", "required"}}));
      auto s = parse_suite(req.get_param_value("suite"));
      if (!s)
        return reply(res, 400,
                     error_body("unknown suite", {{"suite", "must be roofline, memory-curve, mixed or applications"}}));
      json recs = json::array();
      switch (*s) {
        case Suite::roofline:
          for (const auto& r : archive_.read_roofline()) recs.push_back(to_json(r));
          break;
        case Suite::memory_curve:
          for (const auto& r : archive_.read_memory_curves()) recs.push_back(to_json(r));
          break;
        case Suite::mixed:
          for (const auto& r : archive_.read_mixed()) recs.push_back(to_json(r));
          break;
        case Suite::applications:
          for (const auto& r : archive_.read_applications()) recs.push_back(to_json(r));
          break;
      }
      reply(res, 200, {{"schema_version", kJsonSchemaVersion}, {"suite", std::string(to_string(*s))}, {"records", recs}});
    });

    server_.Post("/api/analysis", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      std::vector<FieldError> errors;
      try {
        json out = run_analysis(*body, opt_.profiler, &archive_, errors);
        if (!errors.empty()) return reply(res, 400, error_body("invalid analysis request", errors));
        reply(res, 200, out);
      } catch (const ConfigError& e) {
        reply(res, 400, error_body(e.what()));
      } catch (const Error& e) {
        reply(res, 422, error_body(e.what()));
      }
    });

    server_.Get(R"(/api/plots/roofline/([A-Za-z0-9_.:-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto rec = archive_.find_roofline(req.matches[1]);
      if (!rec) return reply(res, 404, error_body("unknown roofline record " + std::string(req.matches[1])));
      try {
        reply(res, 200, roofline_plot_json(*rec, overlay_points(*rec)));
      } catch (const Error& e) {
        reply(res, 422, error_body(std::string("record cannot be plotted: ") + e.what()));
      }
    });
  }

  ServiceOptions opt_;
  ResultArchive archive_;
  RunManager runs_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace carm

#endif  // CARM_SERVICE_HPP_
