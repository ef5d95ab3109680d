#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crowdkm/aggregation.hpp"
#include "crowdkm/allocation.hpp"
#include "crowdkm/assessment.hpp"
#include "crowdkm/communities.hpp"
#include "crowdkm/events.hpp"
#include "crowdkm/rational.hpp"
#include "crowdkm/workflow.hpp"

namespace crowdkm {

// Declarative adaptation rule bound at config load. variance_escalation is
// the built-in: on grade.recorded, when the item's mark range exceeds
// `threshold`, spawn one extra redundant grade (below r_max) or notify the
// coordinator (at the ceiling). The generic forms cover notification and
// task-retraction triggers.
struct AdaptationRuleCfg {
  std::string id;
  std::string type;       // variance_escalation | notify_coordinator | cancel_task
  int threshold = 0;      // variance_escalation: mark-range trigger
  std::string on_kind;    // notify_coordinator / cancel_task: event kind to match
  std::string reason;     // notify_coordinator
  std::string task_field; // cancel_task: payload field naming the task
  int fire_limit = 1;     // per (rule, subject)

  Json to_json() const;
  static AdaptationRuleCfg from_json(const Json& j);
};

// The fold-relevant slice of the effective scenario config. Travels as the
// run.config event payload so a log replays without any external input.
struct EngineConfig {
  std::uint64_t seed = 0;
  std::map<std::string, Rational> credit_weights;  // TaskKind name -> weight
  Rational referral_bonus = Rational(1, 4);
  std::vector<AdaptationRuleCfg> rules;
  std::string workflow_name;
  std::vector<WorkflowStage> workflow_stages;
  Json raw;  // full effective config as loaded

  Rational weight_for(TaskKind kind) const;

  Json to_json() const;
  static EngineConfig from_json(const Json& j);
};

enum class NotificationKind { WhoKnowsWhat, WhereIsWhat, WhoHasWhat, TaskOffer, Progress, Violation };

const char* notification_kind_name(NotificationKind kind);
NotificationKind notification_kind_from_name(const std::string& name);

struct Notification {
  std::string recipient;
  NotificationKind kind = NotificationKind::TaskOffer;
  Json body;
  std::uint64_t cause_seq = 0;  // the MetaEvent that caused it
};

struct CreditEntry {
  std::uint64_t seq = 0;
  Rational delta;
  std::string reason;
};

struct ProcessInstance {
  std::string assessment;
  std::set<std::string> eligible;
  std::map<std::string, SimTime> completed_stages;
};

struct AssessmentState {
  std::string id;
  std::string course;
  std::map<std::string, Clo> clos;
  std::map<std::string, Question> questions;
  std::map<std::string, AnswerItem> items;
  std::map<std::string, std::string> item_index;  // "student|question" -> item id
  std::vector<FeedbackRecord> feedback;
  bool criteria_bound = false;
  DistributionCriteria criteria;
  std::map<std::string, CoverageEntry> coverage;      // item id -> entry
  std::map<std::string, Vab> vabs;
  std::map<std::string, std::string> open_vab_of;     // grader -> open vab id
  std::map<std::string, GradeRecord> grades;
  std::map<std::string, std::vector<std::string>> grades_by_item;
  std::set<std::string> grading_started;              // items with an accepted grade task
  std::set<std::string> declined_graders;
  bool published = false;
  AggregationPolicy policy = AggregationPolicy::Average;
  std::map<std::string, FinalScore> final_scores;     // "student|question"
  std::vector<LessonLearned> lessons;
};

// Everything the engine knows. Mutated exclusively by apply_event, so the
// state is always the fold of the event log.
struct EngineState {
  bool configured = false;
  EngineConfig config;
  KmWorkflow workflow;
  std::map<std::string, Community> communities;
  std::map<std::string, Worker> workers;
  std::map<std::string, Cloudlet> cloudlets;
  std::map<std::string, AssessmentState> assessments;
  std::map<std::string, TaskInstance> tasks;
  std::map<std::string, std::string> task_forwarder;  // task -> who forwarded it last
  std::map<std::string, ProcessInstance> processes;   // keyed by assessment id

  std::map<std::string, std::vector<CreditEntry>> credit_entries;
  std::map<std::string, Rational> credit_balance;

  // who-knows-what index, maintained incrementally: clo -> worker -> count
  std::map<std::string, std::map<std::string, int>> topic_interactions;

  std::map<std::string, int> rule_fires;  // "rule|subject" -> count
  std::vector<Notification> notifications;

  bool deadlocked = false;
  Json deadlock_report;

  // Canonical serialization (sorted keys throughout) used for the digest.
  Json to_json() const;
  std::string digest() const;
};

// The pure fold step. Throws KmError(CorruptLog) on events that cannot be
// applied to the given state (schema drift, unknown references).
void apply_event(EngineState& state, const MetaEvent& event);

// Question-level CLO consensus pooled over every grade touching the
// question's items. Tagged set = teacher tags plus pre-review student tags.
// Throws NoGrades when nothing was graded.
CloConsensus assessment_consensus(const AssessmentState& assessment,
                                  const std::string& question);

// Gap between the student's latest pre-review tags and the consensus
// Confirmed set. Requires published results upstream.
GapReport assessment_gap(const AssessmentState& assessment, const std::string& student,
                         const std::string& question);

}  // namespace crowdkm
