#pragma once

#include <string>
#include <vector>

#include "crowdkm/events.hpp"

namespace crowdkm {

// Post-run invariant harness. Independently re-derives from the raw log:
// task state-machine legality, stage/phase ordering, redundancy coverage and
// conflict rules, rule-firing bounds, credit balances and knowing rankings,
// then compares against the replayed state. Returns one message per
// violation; empty means the log is sound.
std::vector<std::string> check_invariants(const std::vector<MetaEvent>& log);

}  // namespace crowdkm
