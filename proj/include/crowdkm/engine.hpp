#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crowdkm/state.hpp"

namespace crowdkm {

// Single-writer engine: every command validates against current state, emits
// MetaEvents, folds them via apply_event, then runs live post-processing
// (notifications, decline redistribution, adaptation rules, stage sweeps).
// Replay re-applies the recorded events without post-processing, so the
// final state is the fold of the log in both modes.
class Engine {
 public:
  void begin_run(const EngineConfig& config);

  void set_time(SimTime t) { clock_ = t; }
  SimTime time() const { return clock_; }

  // communities
  void create_community(const std::string& id, CommunityKind kind,
                        const std::string& label = "");
  const Worker& register_worker(const std::string& id, const std::string& community,
                                const std::set<WorkerRole>& roles,
                                const std::set<std::string>& skills);
  void deactivate_worker(const std::string& id);
  const Worker& forward_invite(const std::string& from, const std::string& to_label,
                               const std::string& task_id);
  const Cloudlet& form_cloudlet(const std::string& id, const CloudletSelector& selector);

  // assessment
  void create_assessment(const std::string& id, const std::string& course,
                         const std::vector<Clo>& clos, const std::vector<Question>& questions);
  void instantiate_process(const std::string& assessment);
  const AnswerItem& upload_answer_item(const std::string& student, const std::string& question,
                                       const std::string& artifact);
  const FeedbackRecord& submit_self_review(const std::string& student,
                                           const std::string& question,
                                           const std::string& narrative,
                                           const std::set<std::string>& student_clos,
                                           const std::string& issues);
  const FeedbackRecord& submit_post_feedback(const std::string& student,
                                             const std::string& question,
                                             const std::string& narrative);
  GapReport compute_gap_report(const std::string& assessment, const std::string& student,
                               const std::string& question) const;

  // workflow
  void transition(const std::string& task_id, TaskEvent event, const std::string& actor);
  void decline_task(const std::string& task_id, const std::string& actor);
  bool stage_complete(const std::string& assessment, const std::string& stage) const;

  // allocation
  void set_distribution_criteria(const std::string& assessment,
                                 const DistributionCriteria& criteria,
                                 const std::string& actor);
  struct CoverageSummary {
    Rational progress;         // Σ completed / Σ target, exact
    int total_completed = 0;
    int total_target = 0;
    int degraded_items = 0;
  };
  CoverageSummary coverage(const std::string& assessment) const;

  // aggregation
  const GradeRecord& record_grade(const std::string& grader, const std::string& item,
                                  int marks,
                                  const std::map<std::string, CloVerdict>& annotations,
                                  const std::string& narrative);
  CloConsensus consensus_for(const std::string& assessment, const std::string& question) const;
  void publish(const std::string& assessment, AggregationPolicy policy,
               const std::string& actor);
  const LessonLearned& record_lesson_learned(const std::string& author,
                                             const std::string& assessment,
                                             const std::string& notes,
                                             const std::set<std::string>& clos,
                                             const std::string& proposal);

  // knowing
  std::vector<std::pair<std::string, int>> who_knows_what(const std::string& clo) const;
  Json where_is_what(const std::string& artifact) const;
  Json who_has_what(const std::string& worker) const;
  Rational credit_of(const std::string& worker) const;
  void notify_knowing(const std::string& recipient, NotificationKind kind,
                      const std::string& topic);

  // simulation hooks
  void report_deadlock(const std::string& assessment, const Json& report);

  const EngineState& state() const { return state_; }
  const std::vector<MetaEvent>& log() const { return log_; }

 private:
  const MetaEvent& emit(const std::string& kind, const std::string& actor,
                        const std::string& subject, Json payload);
  void post_process();
  bool sweep_stages();
  void react(const MetaEvent& event);
  void emit_notification(const std::string& recipient, NotificationKind kind, Json body,
                         std::uint64_t cause_seq);
  void evaluate_rules(const MetaEvent& event);
  void run_variance_rule(const AdaptationRuleCfg& rule, const MetaEvent& event);
  void redistribute_after_loss(const MetaEvent& event);
  void generate_stage_tasks(const std::string& assessment, const WorkflowStage& stage);
  void run_machine_step(const std::string& assessment, const WorkflowStage& stage);
  void create_and_offer_task(const std::string& assessment, const std::string& stage,
                             const std::string& task_id, const std::string& assignee,
                             const std::string& payload);
  void emit_transition(const std::string& task_id, TaskEvent event, const std::string& actor,
                       Json extra = Json::object());
  void complete_task_if_open(const std::string& task_id, const std::string& actor);
  bool grade_stage_ready(const AssessmentState& assessment) const;
  std::string coordinator(const std::string& assessment) const;
  const WorkflowStage* stage_of_kind(TaskKind kind) const;
  // Active, non-declined members of the Grade-stage communities with their
  // total assigned load in this assessment.
  std::map<std::string, std::size_t> grading_pool(const AssessmentState& assessment) const;
  std::string assessment_of_task(const std::string& task_id) const;
  // Adds `item` to `grader`'s open Vab, or opens a supplemental one (with a
  // fresh Grade task when the stage is already eligible).
  void assign_item_to_grader(const std::string& assessment, const std::string& grader,
                             const std::vector<std::string>& items);
  void check_threshold(const std::string& assessment);

  EngineState state_;
  std::vector<MetaEvent> log_;
  SimTime clock_ = 0;
  std::size_t processed_ = 0;
  // Events emitted while a rule action is executing never re-enter rule
  // evaluation; cascades stay bounded by the organic command stream.
  int rule_action_depth_ = 0;
  std::set<std::uint64_t> rule_caused_;

  struct StageStats {
    int total = 0;
    int terminal = 0;
  };
  std::map<std::string, std::map<std::string, StageStats>> stage_stats_;  // assessment -> stage
  std::map<std::string, std::string> task_assessment_;
};

}  // namespace crowdkm
