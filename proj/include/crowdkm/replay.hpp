#pragma once

#include <string>
#include <vector>

#include "crowdkm/state.hpp"

namespace crowdkm {

struct ReplayResult {
  EngineState state;
  std::string digest;
};

// Folds a parsed log into fresh state. Event-sourced by construction: the
// result equals the live engine's final state, digest included.
ReplayResult replay_events(const std::vector<MetaEvent>& events);

// Reads and parses a log file. Throws IoError (unreadable) or CorruptLog
// (gap / schema violation, with position).
std::vector<MetaEvent> read_log_file(const std::string& path);

}  // namespace crowdkm
