#include "crowdkm/replay.hpp"

#include <fstream>
#include <sstream>

#include "crowdkm/errors.hpp"

namespace crowdkm {

ReplayResult replay_events(const std::vector<MetaEvent>& events) {
  ReplayResult result;
  for (const auto& event : events) {
    apply_event(result.state, event);
  }
  result.digest = result.state.digest();
  return result;
}

std::vector<MetaEvent> read_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw KmError(Errc::IoError, "cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_log(buffer.str());
}

}  // namespace crowdkm
