#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crowdkm/scenario.hpp"
#include "crowdkm/state.hpp"

namespace crowdkm {

struct SimOptions {
  bool record_draws = false;  // capture each agent's raw draw stream
};

struct RunResult {
  std::vector<MetaEvent> log;
  EngineState final_state;
  std::string digest;
  bool deadlocked = false;
  Json deadlock_report;
  std::map<std::string, std::vector<std::uint64_t>> draw_logs;
};

// Seeded discrete-event execution of the configured KM process with
// behavior-modeled agents standing in for the human communities. Output is
// fully determined by (config, seed); pathological configs end in a deadlock
// report, never a hang.
RunResult run_simulation(const ScenarioConfig& config, const SimOptions& options = {});

}  // namespace crowdkm
