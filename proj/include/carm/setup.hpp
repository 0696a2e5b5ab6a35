#ifndef CARM_SETUP_HPP_
#define CARM_SETUP_HPP_

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "carm/harness.hpp"
#include "carm/isa.hpp"
#include "carm/native_executor.hpp"
#include "carm/simulated_executor.hpp"
#include "carm/topology.hpp"

namespace carm {

/// Executor plus the machine facts the suites need alongside it.
struct ExecutorSetup {
  std::unique_ptr<Executor> executor;
  CacheTopology topology;
  std::vector<Isa> isas;
  HarnessOptions harness;
};

struct SetupOptions {
  std::optional<std::filesystem::path> cache_config;
  CacheOverrides overrides;
  std::optional<unsigned> repetitions;
  NativeOptions native;
};

using SetupFactory = std::function<ExecutorSetup(const std::string& name)>;

inline const std::vector<std::string>& executor_names() {
  static const std::vector<std::string> v{"native", "simulated"};
  return v;
}

inline bool is_executor_name(const std::string& name) {
  return std::find(executor_names().begin(), executor_names().end(), name) != executor_names().end();
}

/// "simulated": the Skylake-X preset; "native": generated kernels on this host.
inline ExecutorSetup make_executor_setup(const std::string& name, const SetupOptions& opt = {}) {
  ExecutorSetup s;
  if (name == "simulated") {
    auto m = SimulatedMachine::skylake_x();
    s.topology = opt.cache_config ? detect_cache_topology(opt.cache_config, opt.overrides)
                                  : apply_overrides(m.topology(), opt.overrides);
    s.isas = catalog_isas(m.arch);
    s.executor = std::make_unique<SimulatedExecutor>(m);
  } else if (name == "native") {
    s.topology = detect_cache_topology(opt.cache_config, opt.overrides);
    s.isas = detect_supported_isas();
    s.executor = std::make_unique<NativeExecutor>(opt.native);
  } else {
    throw ConfigError("unknown executor '" + name + "' (expected native or simulated)");
  }
  if (opt.repetitions) s.harness.repetitions = *opt.repetitions;
  return s;
}

}  // namespace carm

#endif  // CARM_SETUP_HPP_
