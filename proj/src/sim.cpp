#include "crowdkm/sim.hpp"

#include <algorithm>

#include "crowdkm/engine.hpp"
#include "crowdkm/errors.hpp"
#include "crowdkm/rng.hpp"

namespace crowdkm {

namespace {

enum class ActionType {
  RespondOffer,
  Upload,
  SelfReview,
  SetCriteria,
  Grade,
  Publish,
  PostFeedback,
  Lesson,
};

struct Action {
  ActionType type;
  std::string worker;
  std::string task;
  std::string vab;       // Grade
  std::string question;  // Upload / SelfReview / PostFeedback
};

struct SimAgent {
  BehaviorModel model;
  Rng rng;
  std::vector<std::uint64_t> draws;
  int forwards_made = 0;
};

class Simulation {
 public:
  Simulation(const ScenarioConfig& config, const SimOptions& options)
      : config_(config), options_(options) {}

  RunResult run() {
    setup();
    loop();
    return finish();
  }

 private:
  SimTime now_ = 0;

  void setup() {
    engine_.set_time(0);
    engine_.begin_run(config_.engine_config());
    for (const auto& community : config_.communities) {
      engine_.create_community(community.id, community.kind, community.label);
    }
    std::size_t pad = 0;
    for (const auto& group : config_.worker_groups) {
      pad = std::max(pad, std::to_string(group.count).size());
    }
    for (const auto& group : config_.worker_groups) {
      for (int i = 1; i <= group.count; ++i) {
        std::string number = std::to_string(i);
        std::string id = group.prefix + std::string(pad - std::min(pad, number.size()), '0') + number;
        engine_.register_worker(id, group.community, group.roles, group.skills);
        add_agent(id, config_.behaviors.at(group.behavior));
      }
    }
    engine_.create_assessment(config_.assessment_id, config_.course, config_.clos,
                              config_.questions);
    engine_.instantiate_process(config_.assessment_id);
    poll();
  }

  void loop() {
    // Hard cap: a run can only shrink its pending work, but guard anyway.
    const std::size_t action_cap = 4'000'000;
    std::size_t executed = 0;
    while (!queue_.empty() && executed < action_cap) {
      auto entry = *queue_.begin();
      queue_.erase(queue_.begin());
      now_ = entry.first.first;
      engine_.set_time(now_);
      execute(entry.second);
      poll();
      ++executed;
    }
  }

  RunResult finish() {
    const ProcessInstance& process = engine_.state().processes.at(config_.assessment_id);
    std::vector<std::string> pending;
    for (const auto& stage_id : engine_.state().workflow.topological_order) {
      if (!process.completed_stages.count(stage_id)) pending.push_back(stage_id);
    }
    if (!pending.empty()) {
      engine_.report_deadlock(config_.assessment_id,
                              Json{{"assessment", config_.assessment_id},
                                   {"pending_stages", pending},
                                   {"reason", "no runnable actions remain"}});
    }
    RunResult result;
    result.log = engine_.log();
    result.final_state = engine_.state();
    result.digest = engine_.state().digest();
    result.deadlocked = engine_.state().deadlocked;
    result.deadlock_report = engine_.state().deadlock_report;
    if (options_.record_draws) {
      for (auto& [id, agent] : agents_) result.draw_logs[id] = agent.draws;
    }
    return result;
  }

  void add_agent(const std::string& id, const BehaviorModel& model) {
    auto [it, inserted] = agents_.try_emplace(id);
    if (!inserted) return;
    it->second.model = model;
    it->second.rng = Rng(config_.seed, id);
    if (options_.record_draws) it->second.rng.record_into(&it->second.draws);
  }

  void schedule(SimTime at, Action action) {
    queue_.emplace(std::make_pair(at, action_seq_++), std::move(action));
  }

  SimTime latency(SimAgent& agent) {
    return static_cast<SimTime>(
        agent.rng.uniform_int(static_cast<std::int64_t>(agent.model.latency_lo),
                              static_cast<std::int64_t>(agent.model.latency_hi)));
  }

  std::string teacher() const {
    const WorkflowStage* stage = nullptr;
    for (const auto& stage_id : engine_.state().workflow.topological_order) {
      const WorkflowStage* candidate = engine_.state().workflow.find_stage(stage_id);
      if (candidate && candidate->kind == TaskKind::SetDistribution) { stage = candidate; break; }
    }
    if (!stage) return "";
    for (const auto& community : stage->community_binding) {
      auto it = engine_.state().communities.find(community);
      if (it == engine_.state().communities.end()) continue;
      for (const auto& member : it->second.members) {
        if (engine_.state().workers.at(member).active) return member;
      }
    }
    return "";
  }

  TaskKind kind_of_stage(const std::string& stage_id) const {
    const WorkflowStage* stage = engine_.state().workflow.find_stage(stage_id);
    return stage ? stage->kind : TaskKind::MachineStep;
  }

  // Log consumption: schedules agent reactions to fresh engine events.
  void poll() {
    const auto& log = engine_.log();
    while (poll_index_ < log.size()) {
      const MetaEvent& event = log[poll_index_];
      ++poll_index_;
      if (event.kind == ev::notification &&
          event.payload.at("kind").get<std::string>() == "task_offer") {
        auto agent_it = agents_.find(event.subject);
        if (agent_it != agents_.end()) {
          Action action;
          action.type = ActionType::RespondOffer;
          action.worker = event.subject;
          action.task = event.payload.at("body").at("task").get<std::string>();
          schedule(now_ + latency(agent_it->second), std::move(action));
        }
      } else if (event.kind == ev::worker_registered &&
                 event.payload.at("origin").get<std::string>() == "forwarded") {
        BehaviorModel model;
        if (!config_.forwarded_behavior.empty()) {
          model = config_.behaviors.at(config_.forwarded_behavior);
        } else {
          const std::string forwarder = event.payload.at("forwarded_by").get<std::string>();
          model = agents_.at(forwarder).model;
        }
        add_agent(event.subject, model);
      } else if (event.kind == ev::vab_extended) {
        const std::string assessment = event.payload.at("assessment").get<std::string>();
        const Vab& vab = engine_.state().assessments.at(assessment).vabs.at(event.subject);
        auto task_it = engine_.state().tasks.find(vab.task);
        if (task_it != engine_.state().tasks.end() &&
            !task_state_terminal(task_it->second.state)) {
          auto agent_it = agents_.find(vab.grader);
          if (agent_it != agents_.end()) {
            Action action;
            action.type = ActionType::Grade;
            action.worker = vab.grader;
            action.task = vab.task;
            action.vab = vab.id;
            schedule(now_ + latency(agent_it->second), std::move(action));
          }
        }
      } else if (event.kind == ev::stage_completed &&
                 kind_of_stage(event.subject) == TaskKind::Grade) {
        std::string coordinator = teacher();
        auto agent_it = agents_.find(coordinator);
        if (agent_it != agents_.end()) {
          Action action;
          action.type = ActionType::Publish;
          action.worker = coordinator;
          schedule(now_ + latency(agent_it->second), std::move(action));
        }
      }
    }
  }

  void execute(const Action& action) {
    switch (action.type) {
      case ActionType::RespondOffer: respond_to_offer(action); break;
      case ActionType::Upload: do_upload(action); break;
      case ActionType::SelfReview: do_self_review(action); break;
      case ActionType::SetCriteria: do_set_criteria(action); break;
      case ActionType::Grade: do_grade(action); break;
      case ActionType::Publish: do_publish(action); break;
      case ActionType::PostFeedback: do_post_feedback(action); break;
      case ActionType::Lesson: do_lesson(action); break;
    }
  }

  void respond_to_offer(const Action& action) {
    auto task_it = engine_.state().tasks.find(action.task);
    if (task_it == engine_.state().tasks.end()) return;
    const TaskInstance& task = task_it->second;
    if (task.state != TaskState::Offered || task.assignee != action.worker) return;

    SimAgent& agent = agents_.at(action.worker);
    TaskKind kind = kind_of_stage(task.stage);

    if (!agent.rng.chance(agent.model.availability_prob)) {
      engine_.decline_task(action.task, action.worker);
      return;
    }
    if (agent.rng.chance(agent.model.decline_prob)) {
      if (kind == TaskKind::Grade && agent.model.forward_prob > 0.0 &&
          agent.rng.chance(agent.model.forward_prob)) {
        int depth = 0;
        for (const auto& [hist_state, at] : task.history) {
          if (hist_state == TaskState::Forwarded) ++depth;
        }
        if (depth < config_.max_forward_depth) {
          agent.forwards_made += 1;
          std::string invitee = action.worker + "-inv" + std::to_string(agent.forwards_made);
          engine_.forward_invite(action.worker, invitee, action.task);
          return;
        }
      }
      engine_.decline_task(action.task, action.worker);
      return;
    }

    engine_.transition(action.task, TaskEvent::Accept, action.worker);
    Action work;
    work.worker = action.worker;
    work.task = action.task;
    switch (kind) {
      case TaskKind::UploadAnswers:
        work.type = ActionType::Upload;
        work.question = question_of_item_payload(task.payload);
        break;
      case TaskKind::SelfReview:
        work.type = ActionType::SelfReview;
        work.question = question_of_item_payload(task.payload);
        break;
      case TaskKind::SetDistribution:
        work.type = ActionType::SetCriteria;
        break;
      case TaskKind::Grade:
        work.type = ActionType::Grade;
        work.vab = task.payload;
        break;
      case TaskKind::PostFeedback:
        work.type = ActionType::PostFeedback;
        work.question = question_of_item_payload(task.payload);
        break;
      case TaskKind::LessonLearned:
        work.type = ActionType::Lesson;
        break;
      case TaskKind::MachineStep:
        return;  // engine-run, never offered to agents
    }
    schedule(now_ + latency(agent), std::move(work));
  }

  // Item ids are "itm:<assessment>:<student>:<question>".
  static std::string question_of_item_payload(const std::string& payload) {
    auto pos = payload.rfind(':');
    return pos == std::string::npos ? payload : payload.substr(pos + 1);
  }

  void do_upload(const Action& action) {
    std::string artifact =
        "art:" + config_.assessment_id + ":" + action.worker + ":" + action.question;
    engine_.upload_answer_item(action.worker, action.question, artifact);
  }

  void do_self_review(const Action& action) {
    SimAgent& agent = agents_.at(action.worker);
    const AssessmentState& assessment =
        engine_.state().assessments.at(config_.assessment_id);
    const Question& question = assessment.questions.at(action.question);
    std::set<std::string> tags;
    std::vector<std::string> missed;
    for (const auto& clo : question.teacher_clos) {
      if (agent.rng.chance(agent.model.tagging_accuracy)) tags.insert(clo);
      else missed.push_back(clo);
    }
    std::string issues = missed.empty() ? "none" : "unsure about " + join(missed);
    engine_.submit_self_review(action.worker, action.question,
                               "self review of " + action.question, tags, issues);
  }

  void do_set_criteria(const Action& action) {
    engine_.set_distribution_criteria(config_.assessment_id, config_.criteria, action.worker);
    engine_.transition(action.task, TaskEvent::Start, action.worker);
    engine_.transition(action.task, TaskEvent::Complete, action.worker);
  }

  void do_grade(const Action& action) {
    const AssessmentState& assessment =
        engine_.state().assessments.at(config_.assessment_id);
    auto vab_it = assessment.vabs.find(action.vab);
    if (vab_it == assessment.vabs.end()) return;
    auto task_it = engine_.state().tasks.find(vab_it->second.task);
    if (task_it == engine_.state().tasks.end() || task_state_terminal(task_it->second.state))
      return;
    // Extensions can wake a bundle whose offer is still pending; grading
    // starts when the grader accepts.
    if (task_it->second.state == TaskState::Offered) return;

    std::string item_id;
    for (const auto& item : vab_it->second.items) {
      if (!assessment.grades.count("grade:" + item + ":" + action.worker)) {
        item_id = item;
        break;
      }
    }
    if (item_id.empty()) return;  // stale wake-up, everything graded

    SimAgent& agent = agents_.at(action.worker);
    const AnswerItem& item = assessment.items.at(item_id);
    const Question& question = assessment.questions.at(item.question);
    int truth = config_.true_scores.score_for(item.student, item.question, question.marks_lo,
                                              question.marks_hi);
    int noise =
        static_cast<int>(agent.rng.uniform_int(agent.model.noise_lo, agent.model.noise_hi));
    int marks = std::clamp(truth + noise, question.marks_lo, question.marks_hi);

    std::set<std::string> tagged = question.teacher_clos;
    for (const auto& record : assessment.feedback) {
      if (record.phase == FeedbackPhase::PreGrading && record.student == item.student &&
          record.question == item.question) {
        tagged.insert(record.student_clos.begin(), record.student_clos.end());
      }
    }
    std::map<std::string, CloVerdict> annotations;
    for (const auto& clo : question.teacher_clos) {
      annotations[clo] = agent.rng.chance(agent.model.tagging_accuracy)
                             ? CloVerdict::Confirm
                             : CloVerdict::MarkWrong;
    }
    if (!agent.rng.chance(agent.model.tagging_accuracy)) {
      std::vector<std::string> untagged;
      for (const auto& [clo_id, clo] : assessment.clos) {
        if (!tagged.count(clo_id)) untagged.push_back(clo_id);
      }
      if (!untagged.empty()) {
        std::size_t pick = static_cast<std::size_t>(agent.rng.below(untagged.size()));
        annotations[untagged[pick]] = CloVerdict::Suggest;
      }
    }
    engine_.record_grade(action.worker, item_id, marks, annotations,
                         "checked " + item_id);

    // More to grade (possibly added while working) gets its own time slot.
    const AssessmentState& after = engine_.state().assessments.at(config_.assessment_id);
    const Vab& vab = after.vabs.at(action.vab);
    for (const auto& remaining : vab.items) {
      if (!after.grades.count("grade:" + remaining + ":" + action.worker)) {
        Action next = action;
        schedule(now_ + latency(agent), std::move(next));
        break;
      }
    }
  }

  void do_publish(const Action& action) {
    const AssessmentState& assessment =
        engine_.state().assessments.at(config_.assessment_id);
    if (assessment.published) return;
    engine_.publish(config_.assessment_id, config_.policy, action.worker);
  }

  void do_post_feedback(const Action& action) {
    engine_.submit_post_feedback(action.worker, action.question,
                                 "post feedback on " + action.question);
  }

  void do_lesson(const Action& action) {
    const AssessmentState& assessment =
        engine_.state().assessments.at(config_.assessment_id);
    std::set<std::string> disputed;
    for (const auto& [question_id, question] : assessment.questions) {
      try {
        for (const auto& [clo, vote] : assessment_consensus(assessment, question_id).verdicts) {
          if (vote.status == CloStatus::Disputed) disputed.insert(clo);
        }
      } catch (const KmError& error) {
        if (error.code() != Errc::NoGrades) throw;
      }
    }
    engine_.record_lesson_learned(action.worker, config_.assessment_id,
                                  "alignment review of " + config_.assessment_id, disputed,
                                  disputed.empty() ? "keep current activities"
                                                   : "revisit activities for disputed CLOs");
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& part : parts) {
      if (!out.empty()) out += ", ";
      out += part;
    }
    return out;
  }

  const ScenarioConfig& config_;
  SimOptions options_;
  Engine engine_;
  std::map<std::string, SimAgent> agents_;
  std::map<std::pair<SimTime, std::uint64_t>, Action> queue_;
  std::uint64_t action_seq_ = 0;
  std::size_t poll_index_ = 0;
};

}  // namespace

RunResult run_simulation(const ScenarioConfig& config, const SimOptions& options) {
  Simulation simulation(config, options);
  return simulation.run();
}

}  // namespace crowdkm
