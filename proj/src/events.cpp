#include "crowdkm/events.hpp"

#include <sstream>

#include "crowdkm/errors.hpp"

namespace crowdkm {

Json MetaEvent::to_json() const {
  return Json{{"seq", seq},       {"sim_time", sim_time}, {"actor", actor},
              {"kind", kind},     {"subject", subject},   {"payload", payload}};
}

MetaEvent MetaEvent::from_json(const Json& j) {
  MetaEvent event;
  event.seq = j.at("seq").get<std::uint64_t>();
  event.sim_time = j.at("sim_time").get<SimTime>();
  event.actor = j.at("actor").get<std::string>();
  event.kind = j.at("kind").get<std::string>();
  event.subject = j.at("subject").get<std::string>();
  event.payload = j.at("payload");
  return event;
}

std::string to_log_line(const MetaEvent& event) { return event.to_json().dump(); }

std::string serialize_log(const std::vector<MetaEvent>& events) {
  std::string out;
  for (const auto& event : events) {
    out += to_log_line(event);
    out += '\n';
  }
  return out;
}

std::vector<MetaEvent> parse_log(const std::string& body) {
  std::vector<MetaEvent> events;
  std::istringstream in(body);
  std::string line;
  std::uint64_t expected_seq = 1;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MetaEvent event;
    try {
      event = MetaEvent::from_json(Json::parse(line));
    } catch (const Json::exception& e) {
      throw KmError(Errc::CorruptLog,
                    "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (event.seq != expected_seq) {
      throw KmError(Errc::CorruptLog, "seq gap at line " + std::to_string(line_no) +
                                          ": expected " + std::to_string(expected_seq) +
                                          ", found " + std::to_string(event.seq));
    }
    if (!events.empty() && event.sim_time < events.back().sim_time) {
      throw KmError(Errc::CorruptLog,
                    "sim_time regression at seq " + std::to_string(event.seq));
    }
    ++expected_seq;
    events.push_back(std::move(event));
  }
  return events;
}

}  // namespace crowdkm
