#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace crowdkm {

using SimTime = std::uint64_t;
using Json = nlohmann::json;

// Append-only control-mart record. seq is gapless from 1; records are never
// mutated or deleted. One JSON object per line on disk, stable field names:
// seq, sim_time, actor, kind, subject, payload.
struct MetaEvent {
  std::uint64_t seq = 0;
  SimTime sim_time = 0;
  std::string actor;    // worker id or "engine"
  std::string kind;     // e.g. "task.transition", "grade.recorded"
  std::string subject;  // entity id the event is about
  Json payload = Json::object();

  Json to_json() const;
  static MetaEvent from_json(const Json& j);
};

// Event kind labels used across the engine. Kept in one place so log
// consumers (metrics, invariant checks, the simulator) match on the same
// strings the writer emits.
namespace ev {
inline constexpr const char* run_config = "run.config";
inline constexpr const char* run_deadlock = "run.deadlock";
inline constexpr const char* community_created = "community.created";
inline constexpr const char* worker_registered = "worker.registered";
inline constexpr const char* worker_deactivated = "worker.deactivated";
inline constexpr const char* cloudlet_formed = "cloudlet.formed";
inline constexpr const char* assessment_created = "assessment.created";
inline constexpr const char* process_instantiated = "process.instantiated";
inline constexpr const char* stage_eligible = "stage.eligible";
inline constexpr const char* stage_completed = "stage.completed";
inline constexpr const char* task_created = "task.created";
inline constexpr const char* task_transition = "task.transition";
inline constexpr const char* item_uploaded = "item.uploaded";
inline constexpr const char* feedback_submitted = "feedback.submitted";
inline constexpr const char* criteria_set = "criteria.set";
inline constexpr const char* vab_generated = "vab.generated";
inline constexpr const char* vab_extended = "vab.extended";
inline constexpr const char* item_reassigned = "item.reassigned";
inline constexpr const char* coverage_degraded = "coverage.degraded";
inline constexpr const char* threshold_violation = "threshold.violation";
inline constexpr const char* grade_recorded = "grade.recorded";
inline constexpr const char* grade_spawned = "grade.spawned";
inline constexpr const char* results_published = "results.published";
inline constexpr const char* lesson_recorded = "lesson.recorded";
inline constexpr const char* rule_fired = "rule.fired";
inline constexpr const char* rule_skipped = "rule.skipped";
inline constexpr const char* notification = "notification.emitted";
}  // namespace ev

// Serialize one event per line; the whole log round-trips byte-identically.
std::string to_log_line(const MetaEvent& event);
std::string serialize_log(const std::vector<MetaEvent>& events);

// Parses a log file body. Throws KmError(CorruptLog) with the offending
// line/seq on schema violations or seq gaps.
std::vector<MetaEvent> parse_log(const std::string& body);

}  // namespace crowdkm
