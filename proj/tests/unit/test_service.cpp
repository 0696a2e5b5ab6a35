#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <future>
#include <thread>

#include "carm/service.hpp"

using namespace carm;
using nlohmann::json;

namespace {

const std::filesystem::path kFixtures = CARM_FIXTURES;

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("carm_service_" + name);
  std::filesystem::remove_all(d);
  return d;
}

SetupFactory simulated_factory() {
  SetupOptions o;
  o.repetitions = 2;
  return default_setup_factory(o);
}

/// Holds every run inside the factory until release() is called.
struct Gate {
  std::promise<void> open;
  std::shared_future<void> opened = open.get_future().share();
  void release() { open.set_value(); }

  SetupFactory factory() {
    auto inner = simulated_factory();
    auto f = opened;
    return [inner, f](const std::string&) {
      f.wait();
      return inner("simulated");
    };
  }
};

struct Server {
  Service svc;
  httplib::Client client;

  Server(const std::string& name, SetupFactory factory) : svc(options(name), std::move(factory)), client("127.0.0.1", svc.start()) {}

  static ServiceOptions options(const std::string& name) {
    ServiceOptions o;
    o.port = 0;
    o.results_root = scratch(name);
    o.default_executor = "simulated";
    return o;
  }

  std::pair<int, json> get(const std::string& path) {
    auto r = client.Get(path);
    EXPECT_TRUE(r) << path;
    return {r->status, r->body.empty() ? json() : json::parse(r->body)};
  }
  std::pair<int, json> post(const std::string& path, const std::string& body) {
    auto r = client.Post(path, body, "application/json");
    EXPECT_TRUE(r) << path;
    return {r->status, json::parse(r->body)};
  }

  json wait_for(const std::string& id) {
    for (int i = 0; i < 6000; ++i) {
      auto [code, h] = get("/api/runs/" + id);
      if (h["state"] == "done" || h["state"] == "failed") return h;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ADD_FAILURE() << "run " << id << " did not finish";
    return {};
  }
};

}  // namespace

TEST(RunManager, LifecycleAndResultIds) {
  ResultArchive archive(scratch("manager"));
  RunManager m(archive, simulated_factory(), {"h", "c"});
  SuiteConfig cfg;
  cfg.isa = Isa::avx512;
  cfg.test = TestKind::FP;
  auto h = m.submit(cfg, "simulated");
  EXPECT_EQ(h.state, RunState::queued);
  m.wait_idle();
  auto done = *m.get(h.id);
  EXPECT_EQ(done.state, RunState::done);
  EXPECT_EQ(done.progress.fraction, 1.0);
  ASSERT_EQ(done.result_ids.size(), 1u);
  EXPECT_TRUE(archive.find_roofline(done.result_ids[0]));
  EXPECT_FALSE(m.get("nope"));
  EXPECT_THROW(m.submit(cfg, "qemu"), ConfigError);
}

TEST(RunManager, FailureRecorded) {
  ResultArchive archive(scratch("failure"));
  RunManager m(archive, simulated_factory(), {"h", "c"});
  SuiteConfig cfg;
  cfg.isa = Isa::neon;
  auto h = m.submit(cfg, "simulated");
  m.wait_idle();
  auto r = *m.get(h.id);
  EXPECT_EQ(r.state, RunState::failed);
  ASSERT_TRUE(r.error);
  EXPECT_NE(r.error->find("neon"), std::string::npos);
}

TEST(Service, SecondRunRejectedWhileFirstActive) {
  Gate gate;
  Server s("busy", gate.factory());
  auto [c1, first] = s.post("/api/runs", R"({"test":"FP","isa":"avx512"})");
  ASSERT_EQ(c1, 202);
  auto [c2, second] = s.post("/api/runs", R"({"test":"FP","isa":"avx2"})");
  EXPECT_EQ(c2, 409);
  EXPECT_EQ(second["active_run_id"], first["id"]);
  EXPECT_EQ(second["schema_version"], kJsonSchemaVersion);
  auto [c3, during] = s.get("/api/runs/" + first["id"].get<std::string>());
  EXPECT_EQ(c3, 200);
  EXPECT_EQ(during["state"], "running");
  gate.release();
  EXPECT_EQ(s.wait_for(first["id"])["state"], "done");
  auto [c4, third] = s.post("/api/runs", R"({"test":"FP","isa":"avx2"})");
  EXPECT_EQ(c4, 202);
  s.wait_for(third["id"]);
}

TEST(Service, RunProducesResultsAndPlot) {
  Server s("results", simulated_factory());
  auto [code, h] = s.post("/api/runs", R"({"isa":"avx512","executor":"simulated"})");
  ASSERT_EQ(code, 202);
  EXPECT_EQ(h["state"], "queued");
  auto done = s.wait_for(h["id"]);
  ASSERT_EQ(done["state"], "done");
  ASSERT_EQ(done["result_ids"].size(), 1u);
  std::string rid = done["result_ids"][0];
  auto [rc, results] = s.get("/api/results?suite=roofline");
  EXPECT_EQ(rc, 200);
  ASSERT_EQ(results["records"].size(), 1u);
  EXPECT_EQ(results["records"][0]["id"], rid);
  auto [pc, plot] = s.get("/api/plots/roofline/" + rid);
  EXPECT_EQ(pc, 200);
  EXPECT_EQ(plot["roofs"].size(), 4u);
  EXPECT_NEAR(plot["regions"]["memory_bound_below"].get<double>(), 96.0 / 576.0, 1e-3);
  auto [ec, empty] = s.get("/api/results?suite=mixed");
  EXPECT_EQ(ec, 200);
  EXPECT_TRUE(empty["records"].empty());
}

TEST(Service, MachineMatchesDetection) {
  Server s("machine", simulated_factory());
  auto [code, m] = s.get("/api/machine");
  EXPECT_EQ(code, 200);
  try {
    EXPECT_EQ(m["topology"], to_json(detect_cache_topology()));
  } catch (const Error&) {
    EXPECT_TRUE(m["topology"].is_null());
  }
  EXPECT_EQ(m["executors"], json(executor_names()));
  EXPECT_EQ(m["arch"], std::string(to_string(host_arch())));
}

TEST(Service, ErrorResponses) {
  Server s("errors", simulated_factory());
  auto [c1, b1] = s.post("/api/runs", R"({"isa":"mmx","threads":0,"executor":"qemu"})");
  EXPECT_EQ(c1, 400);
  std::set<std::string> fields;
  for (const auto& f : b1["fields"]) fields.insert(f["field"]);
  EXPECT_EQ(fields, (std::set<std::string>{"isa", "threads", "executor"}));
  EXPECT_EQ(s.post("/api/runs", "{not json").first, 400);
  EXPECT_EQ(s.get("/api/runs/unknown").first, 404);
  EXPECT_EQ(s.get("/api/results").first, 400);
  EXPECT_EQ(s.get("/api/results?suite=bogus").first, 400);
  EXPECT_EQ(s.get("/api/plots/roofline/unknown").first, 404);
}

TEST(Service, AnalysisReplays) {
  Server s("analysis", simulated_factory());
  json dbi{{"mode", "dbi"},
           {"backend", "dynamorio"},
           {"label", "l1"},
           {"archive", false},
           {"replay_report", (kFixtures / "dbi" / "armq_l1_load_only.txt").string()},
           {"expected", {{"kind", "loads"}, {"count", 4830192640ull}}}};
  auto [c1, a] = s.post("/api/analysis", dbi.dump());
  ASSERT_EQ(c1, 200) << a.dump();
  EXPECT_NEAR(a["deviation_percent"].get<double>(), 1.178, 0.01);
  EXPECT_FALSE(a.contains("record_id") && !a["record_id"].is_null());
  json pmu{{"mode", "pmu"},
           {"label", "spmv"},
           {"archive", true},
           {"replay_passes",
            {(kFixtures / "pmu" / "spmv_pass1.json").string(), (kFixtures / "pmu" / "spmv_pass2.json").string(),
             (kFixtures / "pmu" / "spmv_pass3.json").string()}}};
  auto [c2, p] = s.post("/api/analysis", pmu.dump());
  ASSERT_EQ(c2, 200) << p.dump();
  EXPECT_NEAR(p["point"]["ai"].get<double>(), 0.0830965, 1e-7);
  EXPECT_TRUE(p.contains("record_id"));
  EXPECT_EQ(s.get("/api/results?suite=applications").second["records"].size(), 1u);
  EXPECT_EQ(s.post("/api/analysis", R"({"mode":"quantum"})").first, 400);
  auto [c3, missing] = s.post("/api/analysis", R"({"mode":"dbi","replay_report":"/nonexistent"})");
  EXPECT_GE(c3, 400);
  EXPECT_LT(c3, 500);
}
