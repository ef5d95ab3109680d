#include "crowdkm/engine.hpp"

#include <algorithm>

#include "crowdkm/errors.hpp"

namespace crowdkm {

namespace {

std::string vab_task_id(const std::string& grade_stage, const std::string& vab_id) {
  return grade_stage + ":" + vab_id;
}

std::string grade_record_id(const std::string& item, const std::string& grader) {
  return "grade:" + item + ":" + grader;
}

}  // namespace

void Engine::begin_run(const EngineConfig& config) {
  if (state_.configured) throw KmError(Errc::ValidationError, "run already configured");
  emit(ev::run_config, "engine", "run", config.to_json());
}

const MetaEvent& Engine::emit(const std::string& kind, const std::string& actor,
                              const std::string& subject, Json payload) {
  MetaEvent event;
  event.seq = log_.size() + 1;
  event.sim_time = clock_;
  event.actor = actor;
  event.kind = kind;
  event.subject = subject;
  event.payload = std::move(payload);
  apply_event(state_, event);
  if (rule_action_depth_ > 0) rule_caused_.insert(event.seq);
  log_.push_back(std::move(event));
  const MetaEvent& stored = log_.back();

  if (stored.kind == ev::task_created) {
    const std::string assessment = stored.payload.value("assessment", std::string());
    task_assessment_[stored.subject] = assessment;
    stage_stats_[assessment][stored.payload.at("stage").get<std::string>()].total += 1;
  } else if (stored.kind == ev::task_transition) {
    TaskState to = task_state_from_name(stored.payload.at("to").get<std::string>());
    if (task_state_terminal(to)) {
      const std::string assessment = task_assessment_[stored.subject];
      stage_stats_[assessment][state_.tasks.at(stored.subject).stage].terminal += 1;
    }
  }
  return stored;
}

// ---------------------------------------------------------------------------
// communities
// ---------------------------------------------------------------------------

void Engine::create_community(const std::string& id, CommunityKind kind,
                              const std::string& label) {
  if (state_.communities.count(id))
    throw KmError(Errc::ValidationError, "community " + id + " already exists");
  emit(ev::community_created, "engine", id,
       Json{{"kind", community_kind_name(kind)}, {"label", label}});
  post_process();
}

const Worker& Engine::register_worker(const std::string& id, const std::string& community,
                                      const std::set<WorkerRole>& roles,
                                      const std::set<std::string>& skills) {
  if (!state_.communities.count(community)) throw KmError(Errc::UnknownCommunity, community);
  if (state_.workers.count(id)) throw KmError(Errc::AlreadyRegistered, id);
  if (roles.empty()) throw KmError(Errc::ValidationError, "worker roles must be non-empty");
  Json roles_json = Json::array();
  for (auto role : roles) roles_json.push_back(worker_role_name(role));
  emit(ev::worker_registered, id, id,
       Json{{"communities", Json::array({community})},
            {"roles", roles_json},
            {"skills", skills},
            {"origin", "self"}});
  post_process();
  return state_.workers.at(id);
}

void Engine::deactivate_worker(const std::string& id) {
  if (!state_.workers.count(id)) throw KmError(Errc::UnknownWorker, id);
  emit(ev::worker_deactivated, "engine", id, Json::object());
  post_process();
}

const Worker& Engine::forward_invite(const std::string& from, const std::string& to_label,
                                     const std::string& task_id) {
  auto task_it = state_.tasks.find(task_id);
  if (task_it == state_.tasks.end()) throw KmError(Errc::UnknownTask, task_id);
  const TaskInstance& task = task_it->second;
  if (task.state != TaskState::Offered)
    throw KmError(Errc::IllegalTransition,
                  "forward requires an Offered task, " + task_id + " is " +
                      task_state_name(task.state));
  if (task.assignee != from) throw KmError(Errc::NotAssignee, from);
  if (state_.workers.count(to_label)) throw KmError(Errc::AlreadyRegistered, to_label);
  const WorkflowStage* stage = state_.workflow.find_stage(task.stage);
  if (!stage || stage->kind != TaskKind::Grade)
    throw KmError(Errc::IllegalTransition, "only grading tasks are forwardable");

  // The invitee lands in the forwarder's community bound to this stage.
  const Worker& forwarder = state_.workers.at(from);
  std::string community;
  for (const auto& candidate : forwarder.communities) {
    if (stage->community_binding.count(candidate)) { community = candidate; break; }
  }
  if (community.empty()) community = *forwarder.communities.begin();

  Json roles_json = Json::array();
  for (auto role : forwarder.roles) roles_json.push_back(worker_role_name(role));
  emit(ev::worker_registered, from, to_label,
       Json{{"communities", Json::array({community})},
            {"roles", roles_json},
            {"skills", std::set<std::string>{}},
            {"origin", "forwarded"},
            {"forwarded_by", from}});
  emit_transition(task_id, TaskEvent::Forward, from, Json{{"invitee", to_label}});
  emit_transition(task_id, TaskEvent::Offer, "engine", Json{{"assignee", to_label}});
  post_process();
  return state_.workers.at(to_label);
}

const Cloudlet& Engine::form_cloudlet(const std::string& id, const CloudletSelector& selector) {
  if (state_.cloudlets.count(id))
    throw KmError(Errc::ValidationError, "cloudlet " + id + " already exists");
  std::set<std::string> members;
  for (const auto& [worker_id, worker] : state_.workers) {
    if (worker.active && selector.matches(worker)) members.insert(worker_id);
  }
  emit(ev::cloudlet_formed, "engine", id,
       Json{{"selector", selector.to_json()}, {"members", members}});
  post_process();
  return state_.cloudlets.at(id);
}

// ---------------------------------------------------------------------------
// assessment
// ---------------------------------------------------------------------------

void Engine::create_assessment(const std::string& id, const std::string& course,
                               const std::vector<Clo>& clos,
                               const std::vector<Question>& questions) {
  if (state_.assessments.count(id))
    throw KmError(Errc::ValidationError, "assessment " + id + " already exists");
  std::set<std::string> clo_ids;
  for (const auto& clo : clos) clo_ids.insert(clo.id);
  for (const auto& question : questions) {
    if (question.teacher_clos.empty()) throw KmError(Errc::UntaggedQuestion, question.id);
    if (question.marks_lo > question.marks_hi)
      throw KmError(Errc::InvalidMarksRange,
                    question.id + ": [" + std::to_string(question.marks_lo) + "," +
                        std::to_string(question.marks_hi) + "]");
    for (const auto& clo : question.teacher_clos) {
      if (!clo_ids.count(clo))
        throw KmError(Errc::ValidationError,
                      "question " + question.id + " tags unknown CLO " + clo);
    }
  }
  Json clos_json = Json::array();
  for (const auto& clo : clos) {
    clos_json.push_back(Json{{"id", clo.id}, {"description", clo.description}});
  }
  Json questions_json = Json::array();
  for (const auto& question : questions) {
    questions_json.push_back(Json{{"id", question.id},
                                  {"marks_lo", question.marks_lo},
                                  {"marks_hi", question.marks_hi},
                                  {"sample_solution", question.sample_solution},
                                  {"clos", question.teacher_clos}});
  }
  emit(ev::assessment_created, "engine", id,
       Json{{"course", course}, {"clos", clos_json}, {"questions", questions_json}});
  post_process();
}

void Engine::instantiate_process(const std::string& assessment) {
  if (!state_.assessments.count(assessment)) throw KmError(Errc::UnknownAssessment, assessment);
  if (state_.processes.count(assessment))
    throw KmError(Errc::ValidationError, "process already instantiated for " + assessment);
  emit(ev::process_instantiated, "engine", assessment, Json{{"workflow", state_.workflow.name}});
  post_process();
}

const AnswerItem& Engine::upload_answer_item(const std::string& student,
                                             const std::string& question,
                                             const std::string& artifact) {
  std::string assessment_id;
  for (const auto& [id, assessment] : state_.assessments) {
    if (assessment.questions.count(question)) { assessment_id = id; break; }
  }
  if (assessment_id.empty())
    throw KmError(Errc::ValidationError, "unknown question " + question);
  AssessmentState& assessment = state_.assessments.at(assessment_id);
  if (assessment.published)
    throw KmError(Errc::ValidationError, "assessment " + assessment_id + " is closed");

  const WorkflowStage* upload_stage = stage_of_kind(TaskKind::UploadAnswers);
  if (upload_stage) {
    bool enrolled = false;
    for (const auto& community : upload_stage->community_binding) {
      auto it = state_.communities.find(community);
      if (it != state_.communities.end() && it->second.members.count(student)) {
        enrolled = true;
        break;
      }
    }
    if (!enrolled) throw KmError(Errc::NotEnrolled, student);
  }
  if (assessment.item_index.count(student + "|" + question))
    throw KmError(Errc::DuplicateItem, student + "/" + question);

  std::string item_id = "itm:" + assessment_id + ":" + student + ":" + question;
  std::string task_id;
  if (upload_stage) {
    task_id = upload_stage->id + ":" + assessment_id + ":" + student + ":" + question;
    auto task_it = state_.tasks.find(task_id);
    if (task_it == state_.tasks.end()) {
      task_id.clear();
    } else if (task_state_terminal(task_it->second.state)) {
      throw KmError(Errc::IllegalTransition, "upload task " + task_id + " already closed");
    }
  }
  if (!task_id.empty()) {
    const TaskInstance& task = state_.tasks.at(task_id);
    if (task.state == TaskState::Offered) emit_transition(task_id, TaskEvent::Accept, student);
    if (state_.tasks.at(task_id).state == TaskState::Accepted)
      emit_transition(task_id, TaskEvent::Start, student);
  }
  emit(ev::item_uploaded, student, item_id,
       Json{{"assessment", assessment_id},
            {"student", student},
            {"question", question},
            {"artifact", artifact}});
  if (!task_id.empty()) emit_transition(task_id, TaskEvent::Complete, student);
  post_process();
  return state_.assessments.at(assessment_id).items.at(item_id);
}

const FeedbackRecord& Engine::submit_self_review(const std::string& student,
                                                 const std::string& question,
                                                 const std::string& narrative,
                                                 const std::set<std::string>& student_clos,
                                                 const std::string& issues) {
  std::string assessment_id;
  std::string item_id;
  for (const auto& [id, assessment] : state_.assessments) {
    auto it = assessment.item_index.find(student + "|" + question);
    if (it != assessment.item_index.end()) {
      assessment_id = id;
      item_id = it->second;
      break;
    }
  }
  if (item_id.empty()) throw KmError(Errc::NoSuchItem, student + "/" + question);
  AssessmentState& assessment = state_.assessments.at(assessment_id);
  if (assessment.grading_started.count(item_id))
    throw KmError(Errc::GradingAlreadyStarted, item_id);

  int ordinal = 1;
  for (const auto& record : assessment.feedback) {
    if (record.phase == FeedbackPhase::PreGrading && record.student == student &&
        record.question == question) {
      ++ordinal;
    }
  }
  std::string record_id =
      "fb:pre:" + student + ":" + question + ":" + std::to_string(ordinal);
  emit(ev::feedback_submitted, student, record_id,
       Json{{"assessment", assessment_id},
            {"student", student},
            {"question", question},
            {"phase", "pre"},
            {"narrative", narrative},
            {"student_clos", student_clos},
            {"issues", issues}});
  const WorkflowStage* review_stage = stage_of_kind(TaskKind::SelfReview);
  if (review_stage) {
    complete_task_if_open(review_stage->id + ":" + assessment_id + ":" + student + ":" + question,
                          student);
  }
  post_process();
  return state_.assessments.at(assessment_id).feedback.back();
}

const FeedbackRecord& Engine::submit_post_feedback(const std::string& student,
                                                   const std::string& question,
                                                   const std::string& narrative) {
  std::string assessment_id;
  std::string item_id;
  for (const auto& [id, assessment] : state_.assessments) {
    auto it = assessment.item_index.find(student + "|" + question);
    if (it != assessment.item_index.end()) {
      assessment_id = id;
      item_id = it->second;
      break;
    }
  }
  if (item_id.empty()) throw KmError(Errc::NoSuchItem, student + "/" + question);
  AssessmentState& assessment = state_.assessments.at(assessment_id);
  if (!assessment.published) throw KmError(Errc::ResultsNotPublished, assessment_id);

  int ordinal = 1;
  for (const auto& record : assessment.feedback) {
    if (record.phase == FeedbackPhase::PostGrading && record.student == student &&
        record.question == question) {
      ++ordinal;
    }
  }
  std::string record_id =
      "fb:post:" + student + ":" + question + ":" + std::to_string(ordinal);
  emit(ev::feedback_submitted, student, record_id,
       Json{{"assessment", assessment_id},
            {"student", student},
            {"question", question},
            {"phase", "post"},
            {"narrative", narrative}});
  const WorkflowStage* feedback_stage = stage_of_kind(TaskKind::PostFeedback);
  if (feedback_stage) {
    complete_task_if_open(feedback_stage->id + ":" + assessment_id + ":" + student + ":" + question,
                          student);
  }
  post_process();
  return state_.assessments.at(assessment_id).feedback.back();
}

GapReport Engine::compute_gap_report(const std::string& assessment_id,
                                     const std::string& student,
                                     const std::string& question) const {
  auto assessment_it = state_.assessments.find(assessment_id);
  if (assessment_it == state_.assessments.end())
    throw KmError(Errc::UnknownAssessment, assessment_id);
  const AssessmentState& assessment = assessment_it->second;
  if (!assessment.published) throw KmError(Errc::ResultsNotPublished, assessment_id);

  return assessment_gap(assessment, student, question);
}

// ---------------------------------------------------------------------------
// workflow transitions
// ---------------------------------------------------------------------------

void Engine::transition(const std::string& task_id, TaskEvent event, const std::string& actor) {
  auto task_it = state_.tasks.find(task_id);
  if (task_it == state_.tasks.end()) throw KmError(Errc::UnknownTask, task_id);
  const TaskInstance& task = task_it->second;

  TaskState to;
  if (!transition_legal(task.state, event, to))
    throw KmError(Errc::IllegalTransition, std::string(task_event_name(event)) + " from " +
                                               task_state_name(task.state) + " on " + task_id);
  if (event == TaskEvent::Forward)
    throw KmError(Errc::IllegalTransition, "forwarding goes through forward_invite");

  bool assignee_event = event == TaskEvent::Accept || event == TaskEvent::Decline ||
                        event == TaskEvent::Start || event == TaskEvent::Complete;
  if (assignee_event && actor != task.assignee) throw KmError(Errc::UnauthorizedActor, actor);
  if (!assignee_event) {
    // Offer and Cancel belong to the coordinator (or the engine itself).
    bool authorized = actor == "engine";
    if (!authorized) {
      const WorkflowStage* coordination = stage_of_kind(TaskKind::SetDistribution);
      if (coordination) {
        for (const auto& community : coordination->community_binding) {
          auto it = state_.communities.find(community);
          if (it != state_.communities.end() && it->second.members.count(actor)) {
            authorized = true;
            break;
          }
        }
      }
    }
    if (!authorized) throw KmError(Errc::UnauthorizedActor, actor);
  }

  const WorkflowStage* stage = state_.workflow.find_stage(task.stage);
  if (event == TaskEvent::Complete && stage) {
    if (stage->kind == TaskKind::Grade) {
      const std::string assessment_id = assessment_of_task(task_id);
      const AssessmentState& assessment = state_.assessments.at(assessment_id);
      const Vab& vab = assessment.vabs.at(task.payload);
      for (const auto& item : vab.items) {
        if (!assessment.grades.count(grade_record_id(item, vab.grader)))
          throw KmError(Errc::IllegalTransition,
                        "grade task " + task_id + " has ungraded item " + item);
      }
    }
    if (stage->kind == TaskKind::SetDistribution) {
      const std::string assessment_id = assessment_of_task(task_id);
      if (!state_.assessments.at(assessment_id).criteria_bound)
        throw KmError(Errc::IllegalTransition,
                      "distribution criteria not set for " + assessment_id);
    }
  }

  emit_transition(task_id, event, actor);
  post_process();
}

void Engine::decline_task(const std::string& task_id, const std::string& actor) {
  auto task_it = state_.tasks.find(task_id);
  if (task_it == state_.tasks.end()) throw KmError(Errc::UnknownTask, task_id);
  const TaskInstance& task = task_it->second;
  if (actor != task.assignee) throw KmError(Errc::UnauthorizedActor, actor);
  if (task.state == TaskState::Offered) {
    emit_transition(task_id, TaskEvent::Decline, actor);
  } else if (task.state == TaskState::Accepted || task.state == TaskState::InProgress) {
    // The state machine has no Accepted->Declined edge; a retraction records
    // Cancelled with the decline marker so redistribution still runs.
    emit_transition(task_id, TaskEvent::Cancel, actor, Json{{"declined", true}});
  } else {
    throw KmError(Errc::IllegalTransition,
                  "decline from " + std::string(task_state_name(task.state)));
  }
  post_process();
}

bool Engine::stage_complete(const std::string& assessment, const std::string& stage) const {
  auto it = state_.processes.find(assessment);
  if (it == state_.processes.end()) throw KmError(Errc::UnknownAssessment, assessment);
  return it->second.completed_stages.count(stage) > 0;
}

void Engine::emit_transition(const std::string& task_id, TaskEvent event,
                             const std::string& actor, Json extra) {
  const TaskInstance& task = state_.tasks.at(task_id);
  TaskState to;
  if (!transition_legal(task.state, event, to))
    throw KmError(Errc::IllegalTransition, std::string(task_event_name(event)) + " from " +
                                               task_state_name(task.state) + " on " + task_id);
  Json payload{{"event", task_event_name(event)},
               {"from", task_state_name(task.state)},
               {"to", task_state_name(to)},
               {"assessment", assessment_of_task(task_id)}};
  for (const auto& [key, value] : extra.items()) payload[key] = value;
  emit(ev::task_transition, actor, task_id, std::move(payload));
}

void Engine::complete_task_if_open(const std::string& task_id, const std::string& actor) {
  auto task_it = state_.tasks.find(task_id);
  if (task_it == state_.tasks.end()) return;
  if (task_state_terminal(task_it->second.state)) return;
  if (task_it->second.state == TaskState::Offered)
    emit_transition(task_id, TaskEvent::Accept, actor);
  if (state_.tasks.at(task_id).state == TaskState::Accepted)
    emit_transition(task_id, TaskEvent::Start, actor);
  if (state_.tasks.at(task_id).state == TaskState::InProgress)
    emit_transition(task_id, TaskEvent::Complete, actor);
}

// ---------------------------------------------------------------------------
// allocation
// ---------------------------------------------------------------------------

void Engine::set_distribution_criteria(const std::string& assessment_id,
                                       const DistributionCriteria& criteria,
                                       const std::string& actor) {
  auto assessment_it = state_.assessments.find(assessment_id);
  if (assessment_it == state_.assessments.end())
    throw KmError(Errc::UnknownAssessment, assessment_id);
  criteria.validate();
  for (const auto& [community, fraction] : criteria.proportions) {
    if (!state_.communities.count(community))
      throw KmError(Errc::ValidationError, "proportions reference undeclared community " + community);
  }
  auto process_it = state_.processes.find(assessment_id);
  if (process_it != state_.processes.end()) {
    const WorkflowStage* stage = stage_of_kind(TaskKind::SetDistribution);
    if (stage && !process_it->second.eligible.count(stage->id))
      throw KmError(Errc::StageNotReady, stage->id + " not yet eligible");
  }
  emit(ev::criteria_set, actor, assessment_id, Json{{"criteria", criteria.to_json()}});
  post_process();
}

Engine::CoverageSummary Engine::coverage(const std::string& assessment_id) const {
  auto assessment_it = state_.assessments.find(assessment_id);
  if (assessment_it == state_.assessments.end())
    throw KmError(Errc::UnknownAssessment, assessment_id);
  const AssessmentState& assessment = assessment_it->second;
  CoverageSummary summary;
  for (const auto& [item, entry] : assessment.coverage) {
    summary.total_completed += static_cast<int>(entry.completed_graders.size());
    summary.total_target += entry.target;
    if (static_cast<int>(entry.assigned_graders.size()) < assessment.criteria.redundancy)
      summary.degraded_items += 1;
  }
  summary.progress = summary.total_target == 0
                         ? Rational(0)
                         : Rational(summary.total_completed, summary.total_target);
  return summary;
}

std::map<std::string, std::size_t> Engine::grading_pool(const AssessmentState& assessment) const {
  std::map<std::string, std::size_t> pool;
  const WorkflowStage* grade_stage = stage_of_kind(TaskKind::Grade);
  if (!grade_stage) return pool;
  for (const auto& community : grade_stage->community_binding) {
    auto it = state_.communities.find(community);
    if (it == state_.communities.end()) continue;
    for (const auto& member : it->second.members) {
      const Worker& worker = state_.workers.at(member);
      if (!worker.active || assessment.declined_graders.count(member)) continue;
      pool.try_emplace(member, 0);
    }
  }
  for (const auto& [vab_id, vab] : assessment.vabs) {
    auto it = pool.find(vab.grader);
    if (it != pool.end()) it->second += vab.items.size();
  }
  return pool;
}

void Engine::assign_item_to_grader(const std::string& assessment_id, const std::string& grader,
                                   const std::vector<std::string>& items) {
  AssessmentState& assessment = state_.assessments.at(assessment_id);
  auto open_it = assessment.open_vab_of.find(grader);
  if (open_it != assessment.open_vab_of.end()) {
    emit(ev::vab_extended, "engine", open_it->second,
         Json{{"assessment", assessment_id}, {"items", items}});
    return;
  }
  // No open bundle: open a supplemental one with its own grade task. The
  // base id may be taken by a bundle that was forwarded away, so probe.
  std::string vab_id = "vab:" + assessment_id + ":" + grader;
  for (int suffix = 2; assessment.vabs.count(vab_id); ++suffix) {
    vab_id = "vab:" + assessment_id + ":" + grader + ":s" + std::to_string(suffix);
  }
  const WorkflowStage* grade_stage = stage_of_kind(TaskKind::Grade);
  std::string task_id = vab_task_id(grade_stage->id, vab_id);
  emit(ev::vab_generated, "engine", vab_id,
       Json{{"assessment", assessment_id},
            {"grader", grader},
            {"items", items},
            {"task", task_id},
            {"supplement", true}});
  create_and_offer_task(assessment_id, grade_stage->id, task_id, grader, vab_id);
}

void Engine::check_threshold(const std::string& assessment_id) {
  const AssessmentState& assessment = state_.assessments.at(assessment_id);
  if (!assessment.criteria_bound) return;
  std::size_t active = grading_pool(assessment).size();
  if (static_cast<int>(active) < assessment.criteria.min_graders) {
    emit(ev::threshold_violation, "engine", assessment_id,
         Json{{"assessment", assessment_id},
              {"active_graders", active},
              {"min_graders", assessment.criteria.min_graders}});
  }
}

void Engine::redistribute_after_loss(const MetaEvent& event) {
  const std::string assessment_id = event.payload.value("assessment", std::string());
  if (assessment_id.empty()) return;
  AssessmentState& assessment = state_.assessments.at(assessment_id);
  const TaskInstance& task = state_.tasks.at(event.subject);
  auto vab_it = assessment.vabs.find(task.payload);
  if (vab_it == assessment.vabs.end()) return;
  const std::string grader = vab_it->second.grader;
  std::vector<std::string> lost;
  for (const auto& item : vab_it->second.items) {
    if (!assessment.grades.count(grade_record_id(item, grader))) lost.push_back(item);
  }

  std::map<std::string, std::size_t> pool = grading_pool(assessment);
  std::map<std::string, std::vector<std::string>> planned;
  for (const auto& item : lost) {
    const CoverageEntry& entry = assessment.coverage.at(item);
    std::set<std::string> assigned_now = entry.assigned_graders;
    assigned_now.erase(grader);
    for (const auto& [candidate, queue] : planned) {
      for (const auto& planned_item : queue) {
        if (planned_item == item) assigned_now.insert(candidate);
      }
    }
    int need = entry.target - static_cast<int>(assigned_now.size());
    std::string chosen;
    if (need > 0) {
      std::set<std::string> excluded = assigned_now;
      excluded.insert(grader);
      excluded.insert(assessment.items.at(item).student);  // conflict of interest
      chosen = pick_replacement(pool, excluded);
    }
    emit(ev::item_reassigned, "engine", item,
         Json{{"assessment", assessment_id}, {"from", grader}, {"to", chosen}});
    if (!chosen.empty()) {
      planned[chosen].push_back(item);
      pool[chosen] += 1;
    } else if (need > 0) {
      int feasible = static_cast<int>(assigned_now.size());
      emit(ev::coverage_degraded, "engine", item,
           Json{{"assessment", assessment_id},
                {"old_target", entry.target},
                {"new_target", feasible},
                {"reason", "no eligible grader after decline"}});
    }
  }
  for (const auto& [candidate, items] : planned) {
    assign_item_to_grader(assessment_id, candidate, items);
  }
  check_threshold(assessment_id);
}

// ---------------------------------------------------------------------------
// aggregation
// ---------------------------------------------------------------------------

const GradeRecord& Engine::record_grade(const std::string& grader, const std::string& item,
                                        int marks,
                                        const std::map<std::string, CloVerdict>& annotations,
                                        const std::string& narrative) {
  std::string assessment_id;
  for (const auto& [id, assessment] : state_.assessments) {
    if (assessment.items.count(item)) { assessment_id = id; break; }
  }
  if (assessment_id.empty()) throw KmError(Errc::NoSuchItem, item);
  AssessmentState& assessment = state_.assessments.at(assessment_id);

  // The grader's Vab holding this item, with a live grade task.
  const Vab* vab = nullptr;
  for (const auto& [vab_id, candidate] : assessment.vabs) {
    if (candidate.grader != grader) continue;
    if (std::find(candidate.items.begin(), candidate.items.end(), item) ==
        candidate.items.end())
      continue;
    const TaskInstance& task = state_.tasks.at(candidate.task);
    if (task_state_terminal(task.state)) continue;
    vab = &candidate;
    break;
  }
  if (!vab) throw KmError(Errc::NotInVab, grader + " has no open bundle with " + item);
  const TaskInstance& task = state_.tasks.at(vab->task);
  if (task.state != TaskState::Accepted && task.state != TaskState::InProgress)
    throw KmError(Errc::IllegalTransition,
                  "grade task " + vab->task + " is " + task_state_name(task.state));

  const AnswerItem& answer = assessment.items.at(item);
  const Question& question = assessment.questions.at(answer.question);
  if (marks < question.marks_lo || marks > question.marks_hi)
    throw KmError(Errc::MarksOutOfRange,
                  std::to_string(marks) + " outside [" + std::to_string(question.marks_lo) +
                      "," + std::to_string(question.marks_hi) + "]");
  std::string record_id = grade_record_id(item, grader);
  if (assessment.grades.count(record_id))
    throw KmError(Errc::ItemAlreadyGradedByThisGrader, grader + " on " + item);

  // Confirm/MarkWrong apply to currently tagged CLOs (teacher's plus the
  // student's pre-review tags); Suggest only to untagged catalog CLOs.
  std::set<std::string> tagged = question.teacher_clos;
  for (const auto& record : assessment.feedback) {
    if (record.phase == FeedbackPhase::PreGrading && record.student == answer.student &&
        record.question == answer.question) {
      tagged.insert(record.student_clos.begin(), record.student_clos.end());
    }
  }
  for (const auto& [clo, verdict] : annotations) {
    if (!assessment.clos.count(clo))
      throw KmError(Errc::ValidationError, "annotation on unknown CLO " + clo);
    if (verdict == CloVerdict::Suggest && tagged.count(clo))
      throw KmError(Errc::ValidationError, "suggest on already tagged CLO " + clo);
    if (verdict != CloVerdict::Suggest && !tagged.count(clo))
      throw KmError(Errc::ValidationError, "verdict on untagged CLO " + clo);
  }

  if (task.state == TaskState::Accepted) emit_transition(vab->task, TaskEvent::Start, grader);

  Json annotations_json = Json::object();
  for (const auto& [clo, verdict] : annotations) annotations_json[clo] = clo_verdict_name(verdict);
  emit(ev::grade_recorded, grader, record_id,
       Json{{"assessment", assessment_id},
            {"grader", grader},
            {"item", item},
            {"marks", marks},
            {"annotations", annotations_json},
            {"narrative", narrative}});

  bool all_graded = true;
  for (const auto& vab_item : vab->items) {
    if (!state_.assessments.at(assessment_id).grades.count(grade_record_id(vab_item, grader))) {
      all_graded = false;
      break;
    }
  }
  if (all_graded) emit_transition(vab->task, TaskEvent::Complete, grader);
  post_process();
  return state_.assessments.at(assessment_id).grades.at(record_id);
}

CloConsensus Engine::consensus_for(const std::string& assessment_id,
                                   const std::string& question) const {
  auto assessment_it = state_.assessments.find(assessment_id);
  if (assessment_it == state_.assessments.end())
    throw KmError(Errc::UnknownAssessment, assessment_id);
  return assessment_consensus(assessment_it->second, question);
}

void Engine::publish(const std::string& assessment_id, AggregationPolicy policy,
                     const std::string& actor) {
  auto assessment_it = state_.assessments.find(assessment_id);
  if (assessment_it == state_.assessments.end())
    throw KmError(Errc::UnknownAssessment, assessment_id);
  AssessmentState& assessment = assessment_it->second;
  if (assessment.published) throw KmError(Errc::AlreadyPublished, assessment_id);

  bool authorized = actor == "engine";
  const WorkflowStage* coordination = stage_of_kind(TaskKind::SetDistribution);
  if (!authorized && coordination) {
    for (const auto& community : coordination->community_binding) {
      auto it = state_.communities.find(community);
      if (it != state_.communities.end() && it->second.members.count(actor)) {
        authorized = true;
        break;
      }
    }
  }
  if (!authorized) throw KmError(Errc::UnauthorizedActor, actor);

  const WorkflowStage* grade_stage = stage_of_kind(TaskKind::Grade);
  auto process_it = state_.processes.find(assessment_id);
  bool stage_done = grade_stage && process_it != state_.processes.end() &&
                    process_it->second.completed_stages.count(grade_stage->id);
  if (!stage_done) {
    std::string ungraded;
    for (const auto& [item_id, item] : assessment.items) {
      auto entry = assessment.coverage.find(item_id);
      if (entry == assessment.coverage.end() || entry->second.completed_graders.empty()) {
        if (!ungraded.empty()) ungraded += ", ";
        ungraded += item_id;
      }
    }
    // Without a process instance only the per-item grade floor is checkable.
    if (process_it != state_.processes.end()) {
      throw KmError(Errc::GradingIncomplete,
                    ungraded.empty() ? "grading stage still open" : "ungraded: " + ungraded);
    }
    if (!ungraded.empty()) throw KmError(Errc::GradingIncomplete, "ungraded: " + ungraded);
  }

  emit(ev::results_published, actor, assessment_id,
       Json{{"assessment", assessment_id}, {"policy", aggregation_policy_name(policy)}});

  // Post-feedback tasks exist only once results are visible.
  const WorkflowStage* feedback_stage = stage_of_kind(TaskKind::PostFeedback);
  if (feedback_stage && process_it != state_.processes.end()) {
    const AssessmentState& published = state_.assessments.at(assessment_id);
    int created = 0;
    for (const auto& [key, score] : published.final_scores) {
      std::string task_id =
          feedback_stage->id + ":" + assessment_id + ":" + score.student + ":" + score.question;
      create_and_offer_task(assessment_id, feedback_stage->id, task_id, score.student,
                            published.item_index.at(key));
      ++created;
    }
    if (created == 0 && !process_it->second.completed_stages.count(feedback_stage->id)) {
      emit(ev::stage_completed, "engine", feedback_stage->id,
           Json{{"assessment", assessment_id}, {"warning", "empty_stage"}});
    }
  }
  post_process();
}

const LessonLearned& Engine::record_lesson_learned(const std::string& author,
                                                   const std::string& assessment_id,
                                                   const std::string& notes,
                                                   const std::set<std::string>& clos,
                                                   const std::string& proposal) {
  auto assessment_it = state_.assessments.find(assessment_id);
  if (assessment_it == state_.assessments.end())
    throw KmError(Errc::UnknownAssessment, assessment_id);
  AssessmentState& assessment = assessment_it->second;
  if (!assessment.published) throw KmError(Errc::ResultsNotPublished, assessment_id);

  const WorkflowStage* lesson_stage = stage_of_kind(TaskKind::LessonLearned);
  bool authorized = false;
  if (lesson_stage) {
    for (const auto& community : lesson_stage->community_binding) {
      auto it = state_.communities.find(community);
      if (it != state_.communities.end() && it->second.members.count(author)) {
        authorized = true;
        break;
      }
    }
  }
  if (!authorized) throw KmError(Errc::UnauthorizedAuthor, author);

  std::string lesson_id =
      "lesson:" + assessment_id + ":" + std::to_string(assessment.lessons.size() + 1);
  emit(ev::lesson_recorded, author, lesson_id,
       Json{{"assessment", assessment_id},
            {"author", author},
            {"notes", notes},
            {"clos", clos},
            {"proposal", proposal}});
  if (lesson_stage)
    complete_task_if_open(lesson_stage->id + ":" + assessment_id + ":" + author, author);
  post_process();
  return state_.assessments.at(assessment_id).lessons.back();
}

// ---------------------------------------------------------------------------
// knowing queries
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, int>> Engine::who_knows_what(const std::string& clo) const {
  std::vector<std::pair<std::string, int>> ranked;
  auto it = state_.topic_interactions.find(clo);
  if (it == state_.topic_interactions.end()) return ranked;
  for (const auto& [worker, count] : it->second) {
    if (count > 0) ranked.emplace_back(worker, count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

Json Engine::where_is_what(const std::string& artifact) const {
  for (const auto& [assessment_id, assessment] : state_.assessments) {
    for (const auto& [item_id, item] : assessment.items) {
      if (item.artifact != artifact) continue;
      Json vabs = Json::array();
      std::set<std::string> holders{item.student};
      for (const auto& [vab_id, vab] : assessment.vabs) {
        if (std::find(vab.items.begin(), vab.items.end(), item_id) != vab.items.end()) {
          vabs.push_back(vab_id);
          holders.insert(vab.grader);
        }
      }
      return Json{{"artifact", artifact},
                  {"item", item_id},
                  {"author", item.student},
                  {"vabs", vabs},
                  {"holders", holders}};
    }
  }
  throw KmError(Errc::UnknownArtifact, artifact);
}

Json Engine::who_has_what(const std::string& worker_id) const {
  auto worker_it = state_.workers.find(worker_id);
  if (worker_it == state_.workers.end()) throw KmError(Errc::UnknownWorker, worker_id);
  Json authored = Json::array();
  Json open_vabs = Json::array();
  for (const auto& [assessment_id, assessment] : state_.assessments) {
    for (const auto& [item_id, item] : assessment.items) {
      if (item.student == worker_id) authored.push_back(item.artifact);
    }
    auto open_it = assessment.open_vab_of.find(worker_id);
    if (open_it != assessment.open_vab_of.end()) {
      const Vab& vab = assessment.vabs.at(open_it->second);
      open_vabs.push_back(Json{{"vab", vab.id}, {"items", vab.items}});
    }
  }
  return Json{{"worker", worker_id},
              {"artifacts", authored},
              {"open_vabs", open_vabs},
              {"skill_tags", worker_it->second.skill_tags},
              {"credit", credit_of(worker_id).str()}};
}

Rational Engine::credit_of(const std::string& worker_id) const {
  if (!state_.workers.count(worker_id)) throw KmError(Errc::UnknownWorker, worker_id);
  auto it = state_.credit_balance.find(worker_id);
  return it == state_.credit_balance.end() ? Rational(0) : it->second;
}

void Engine::notify_knowing(const std::string& recipient, NotificationKind kind,
                            const std::string& topic) {
  Json body;
  switch (kind) {
    case NotificationKind::WhoKnowsWhat: {
      Json ranking = Json::array();
      for (const auto& [worker, count] : who_knows_what(topic)) {
        ranking.push_back(Json{{"worker", worker}, {"interactions", count}});
      }
      body = Json{{"topic", topic}, {"ranking", ranking}};
      break;
    }
    case NotificationKind::WhereIsWhat:
      body = where_is_what(topic);
      break;
    case NotificationKind::WhoHasWhat:
      body = who_has_what(topic);
      break;
    default:
      throw KmError(Errc::ValidationError, "not a knowing query kind");
  }
  emit_notification(recipient, kind, std::move(body), log_.size());
  post_process();
}

void Engine::report_deadlock(const std::string& assessment, const Json& report) {
  emit(ev::run_deadlock, "engine", assessment, report);
  post_process();
}

// ---------------------------------------------------------------------------
// live post-processing
// ---------------------------------------------------------------------------

void Engine::emit_notification(const std::string& recipient, NotificationKind kind, Json body,
                               std::uint64_t cause_seq) {
  if (recipient.empty() || recipient == "engine") return;
  emit(ev::notification, "engine", recipient,
       Json{{"kind", notification_kind_name(kind)},
            {"body", std::move(body)},
            {"cause_seq", cause_seq}});
}

void Engine::post_process() {
  for (;;) {
    bool progressed = false;
    while (processed_ < log_.size()) {
      // Copy: reactions append to log_ and may reallocate it.
      const MetaEvent event = log_[processed_];
      ++processed_;
      react(event);
      progressed = true;
    }
    if (sweep_stages()) progressed = true;
    if (!progressed && processed_ >= log_.size()) break;
  }
}

void Engine::react(const MetaEvent& event) {
  if (event.kind == ev::task_transition) {
    const std::string to = event.payload.at("to").get<std::string>();
    if (to == "Offered") {
      const TaskInstance& task = state_.tasks.at(event.subject);
      emit_notification(task.assignee, NotificationKind::TaskOffer,
                        Json{{"task", task.id}, {"stage", task.stage}, {"payload", task.payload}},
                        event.seq);
    }
    if (to == "Declined" || to == "Cancelled") {
      const TaskInstance& task = state_.tasks.at(event.subject);
      const WorkflowStage* stage = state_.workflow.find_stage(task.stage);
      if (stage && stage->kind == TaskKind::Grade) {
        // Redistribution provoked by a rule action inherits its causality so
        // the replacement bundles cannot re-trigger the same rule.
        bool caused = rule_caused_.count(event.seq) > 0;
        if (caused) ++rule_action_depth_;
        redistribute_after_loss(event);
        if (caused) --rule_action_depth_;
      }
    }
  } else if (event.kind == ev::stage_completed) {
    const std::string assessment = event.payload.at("assessment").get<std::string>();
    emit_notification(coordinator(assessment), NotificationKind::Progress,
                      Json{{"stage", event.subject}, {"assessment", assessment}}, event.seq);
  } else if (event.kind == ev::threshold_violation) {
    emit_notification(coordinator(event.subject), NotificationKind::Violation, event.payload,
                      event.seq);
  }
  if (!rule_caused_.count(event.seq)) evaluate_rules(event);
}

void Engine::evaluate_rules(const MetaEvent& event) {
  for (const auto& rule : state_.config.rules) {
    if (rule.type == "variance_escalation") {
      if (event.kind == ev::grade_recorded) run_variance_rule(rule, event);
    } else if (rule.type == "notify_coordinator") {
      if (event.kind != rule.on_kind) continue;
      const std::string fire_key = rule.id + "|" + event.subject;
      auto fired = state_.rule_fires.find(fire_key);
      if (fired != state_.rule_fires.end() && fired->second >= rule.fire_limit) continue;
      ++rule_action_depth_;
      emit(ev::rule_fired, "engine", event.subject,
           Json{{"rule", rule.id}, {"action", "notify_coordinator"}, {"cause_seq", event.seq}});
      const std::string assessment = event.payload.value("assessment", std::string());
      emit_notification(coordinator(assessment), NotificationKind::Violation,
                        Json{{"rule", rule.id}, {"reason", rule.reason}, {"subject", event.subject}},
                        event.seq);
      --rule_action_depth_;
    } else if (rule.type == "cancel_task") {
      if (event.kind != rule.on_kind) continue;
      if (!event.payload.contains(rule.task_field)) continue;
      const std::string task_id = event.payload.at(rule.task_field).get<std::string>();
      auto task_it = state_.tasks.find(task_id);
      if (task_it == state_.tasks.end() || task_state_terminal(task_it->second.state)) continue;
      const std::string fire_key = rule.id + "|" + event.subject;
      auto fired = state_.rule_fires.find(fire_key);
      if (fired != state_.rule_fires.end() && fired->second >= rule.fire_limit) continue;
      ++rule_action_depth_;
      emit(ev::rule_fired, "engine", event.subject,
           Json{{"rule", rule.id}, {"action", "cancel_task"}, {"task", task_id},
                {"cause_seq", event.seq}});
      emit_transition(task_id, TaskEvent::Cancel, "engine");
      --rule_action_depth_;
    }
  }
}

void Engine::run_variance_rule(const AdaptationRuleCfg& rule, const MetaEvent& event) {
  const std::string assessment_id = event.payload.at("assessment").get<std::string>();
  const std::string item = event.payload.at("item").get<std::string>();
  const AssessmentState& assessment = state_.assessments.at(assessment_id);

  auto grades_it = assessment.grades_by_item.find(item);
  if (grades_it == assessment.grades_by_item.end() || grades_it->second.size() < 2) return;
  int lo = 0;
  int hi = 0;
  bool first = true;
  for (const auto& grade_id : grades_it->second) {
    int marks = assessment.grades.at(grade_id).marks;
    if (first) { lo = hi = marks; first = false; }
    lo = std::min(lo, marks);
    hi = std::max(hi, marks);
  }
  if (hi - lo <= rule.threshold) return;

  const std::string fire_key = rule.id + "|" + item;
  auto fired = state_.rule_fires.find(fire_key);
  if (fired != state_.rule_fires.end() && fired->second >= rule.fire_limit) return;

  const CoverageEntry& entry = assessment.coverage.at(item);
  ++rule_action_depth_;
  if (static_cast<int>(entry.assigned_graders.size()) < assessment.criteria.r_max) {
    std::map<std::string, std::size_t> pool = grading_pool(assessment);
    std::set<std::string> excluded = entry.assigned_graders;
    excluded.insert(assessment.items.at(item).student);
    std::string chosen = pick_replacement(pool, excluded);
    if (chosen.empty()) {
      emit(ev::rule_skipped, "engine", item,
           Json{{"rule", rule.id}, {"reason", "no_eligible_grader"}, {"cause_seq", event.seq}});
      --rule_action_depth_;
      return;
    }
    emit(ev::rule_fired, "engine", item,
         Json{{"rule", rule.id},
              {"action", "spawn_extra_redundant_grade"},
              {"grader", chosen},
              {"range", hi - lo},
              {"cause_seq", event.seq}});
    emit(ev::grade_spawned, "engine", item,
         Json{{"assessment", assessment_id}, {"grader", chosen}, {"rule", rule.id}});
    assign_item_to_grader(assessment_id, chosen, {item});
  } else {
    emit(ev::rule_fired, "engine", item,
         Json{{"rule", rule.id},
              {"action", "notify_coordinator"},
              {"range", hi - lo},
              {"cause_seq", event.seq}});
    emit_notification(coordinator(assessment_id), NotificationKind::Violation,
                      Json{{"rule", rule.id},
                           {"reason", "variance_at_redundancy_ceiling"},
                           {"item", item},
                           {"range", hi - lo}},
                      event.seq);
  }
  --rule_action_depth_;
}

// ---------------------------------------------------------------------------
// stage lifecycle
// ---------------------------------------------------------------------------

bool Engine::grade_stage_ready(const AssessmentState& assessment) const {
  for (const auto& [item_id, item] : assessment.items) {
    auto entry = assessment.coverage.find(item_id);
    if (entry == assessment.coverage.end()) return false;
    if (entry->second.completed_graders.empty()) return false;
    if (static_cast<int>(entry->second.completed_graders.size()) < entry->second.target)
      return false;
  }
  return true;
}

bool Engine::sweep_stages() {
  bool changed = false;
  for (auto& [assessment_id, process] : state_.processes) {
    for (const auto& stage_id : state_.workflow.topological_order) {
      if (!process.eligible.count(stage_id) || process.completed_stages.count(stage_id))
        continue;
      const StageStats& stats = stage_stats_[assessment_id][stage_id];
      if (stats.total == 0 || stats.terminal < stats.total) continue;
      const WorkflowStage* stage = state_.workflow.find_stage(stage_id);
      if (stage->kind == TaskKind::Grade &&
          !grade_stage_ready(state_.assessments.at(assessment_id)))
        continue;
      emit(ev::stage_completed, "engine", stage_id, Json{{"assessment", assessment_id}});
      changed = true;
    }
    for (const auto& stage_id : state_.workflow.topological_order) {
      if (process.eligible.count(stage_id) || process.completed_stages.count(stage_id))
        continue;
      const WorkflowStage* stage = state_.workflow.find_stage(stage_id);
      bool ready = true;
      for (const auto& dep : stage->dependencies) {
        if (!process.completed_stages.count(dep)) { ready = false; break; }
      }
      if (!ready) continue;
      emit(ev::stage_eligible, "engine", stage_id, Json{{"assessment", assessment_id}});
      generate_stage_tasks(assessment_id, *stage);
      changed = true;
    }
  }
  return changed;
}

void Engine::create_and_offer_task(const std::string& assessment, const std::string& stage,
                                   const std::string& task_id, const std::string& assignee,
                                   const std::string& payload) {
  emit(ev::task_created, "engine", task_id,
       Json{{"stage", stage}, {"assessment", assessment}, {"assignee", assignee},
            {"payload", payload}});
  emit_transition(task_id, TaskEvent::Offer, "engine", Json{{"assignee", assignee}});
}

void Engine::generate_stage_tasks(const std::string& assessment_id, const WorkflowStage& stage) {
  AssessmentState& assessment = state_.assessments.at(assessment_id);
  int created = 0;

  auto complete_empty = [&]() {
    emit(ev::stage_completed, "engine", stage.id,
         Json{{"assessment", assessment_id}, {"warning", "empty_stage"}});
  };

  switch (stage.kind) {
    case TaskKind::UploadAnswers: {
      std::set<std::string> students;
      for (const auto& community : stage.community_binding) {
        auto it = state_.communities.find(community);
        if (it == state_.communities.end()) continue;
        for (const auto& member : it->second.members) {
          if (state_.workers.at(member).active) students.insert(member);
        }
      }
      for (const auto& student : students) {
        for (const auto& [question_id, question] : assessment.questions) {
          std::string item_id = "itm:" + assessment_id + ":" + student + ":" + question_id;
          create_and_offer_task(assessment_id, stage.id,
                                stage.id + ":" + assessment_id + ":" + student + ":" + question_id,
                                student, item_id);
          ++created;
        }
      }
      break;
    }
    case TaskKind::SelfReview: {
      for (const auto& [item_id, item] : assessment.items) {
        create_and_offer_task(assessment_id, stage.id,
                              stage.id + ":" + assessment_id + ":" + item.student + ":" + item.question,
                              item.student,
                              item_id);
        ++created;
      }
      break;
    }
    case TaskKind::SetDistribution: {
      std::string coord = coordinator(assessment_id);
      if (!coord.empty()) {
        create_and_offer_task(assessment_id, stage.id, stage.id + ":" + assessment_id + ":coordinator", coord,
                              assessment_id);
        ++created;
      }
      break;
    }
    case TaskKind::MachineStep: {
      run_machine_step(assessment_id, stage);
      created = 1;
      break;
    }
    case TaskKind::Grade: {
      for (const auto& [vab_id, vab] : assessment.vabs) {
        if (state_.tasks.count(vab.task)) continue;
        create_and_offer_task(assessment_id, stage.id, vab.task, vab.grader, vab_id);
        ++created;
      }
      break;
    }
    case TaskKind::PostFeedback:
      // Generated at publish time; never auto-complete here.
      return;
    case TaskKind::LessonLearned: {
      std::string coord = coordinator(assessment_id);
      if (!coord.empty()) {
        create_and_offer_task(assessment_id, stage.id, stage.id + ":" + assessment_id + ":" + coord, coord,
                              assessment_id);
        ++created;
      }
      break;
    }
  }
  if (created == 0) complete_empty();
}

void Engine::run_machine_step(const std::string& assessment_id, const WorkflowStage& stage) {
  AssessmentState& assessment = state_.assessments.at(assessment_id);
  std::string task_id = stage.id + ":" + assessment_id + ":machine";
  create_and_offer_task(assessment_id, stage.id, task_id, "engine", assessment_id);
  emit_transition(task_id, TaskEvent::Accept, "engine");
  emit_transition(task_id, TaskEvent::Start, "engine");

  if (!assessment.criteria_bound) {
    emit_transition(task_id, TaskEvent::Cancel, "engine",
                    Json{{"reason", "no distribution criteria"}});
    emit_notification(coordinator(assessment_id), NotificationKind::Violation,
                      Json{{"reason", "vab generation without criteria"},
                           {"assessment", assessment_id}},
                      log_.size());
    return;
  }

  const WorkflowStage* grade_stage = stage_of_kind(TaskKind::Grade);
  std::map<std::string, std::vector<std::string>> graders_by_community;
  if (grade_stage) {
    for (const auto& community : grade_stage->community_binding) {
      auto it = state_.communities.find(community);
      if (it == state_.communities.end()) continue;
      std::vector<std::string> members;
      for (const auto& member : it->second.members) {
        const Worker& worker = state_.workers.at(member);
        if (worker.active && !assessment.declined_graders.count(member))
          members.push_back(member);
      }
      graders_by_community[community] = std::move(members);
    }
  }
  std::map<std::string, std::string> items;
  for (const auto& [item_id, item] : assessment.items) items[item_id] = item.student;

  // Requested redundancy may be infeasible for the registered pool; the run
  // degrades to the maximum feasible value instead of wedging.
  int feasible = assessment.criteria.redundancy;
  if (!items.empty()) {
    std::set<std::string> all_graders;
    for (const auto& [community, members] : graders_by_community) {
      all_graders.insert(members.begin(), members.end());
    }
    for (const auto& [item_id, author] : items) {
      int eligible = static_cast<int>(all_graders.size()) - (all_graders.count(author) ? 1 : 0);
      feasible = std::min(feasible, eligible);
    }
  }
  if (feasible < 1 && !items.empty()) {
    emit_transition(task_id, TaskEvent::Cancel, "engine",
                    Json{{"reason", "no eligible graders for any redundancy"}});
    emit_notification(coordinator(assessment_id), NotificationKind::Violation,
                      Json{{"reason", "no eligible graders"}, {"assessment", assessment_id}},
                      log_.size());
    return;
  }

  VabAssignment plan;
  if (!items.empty()) {
    DistributionCriteria effective = assessment.criteria;
    effective.redundancy = feasible;
    try {
      plan = generate_assignment(items, graders_by_community, effective, state_.config.seed);
    } catch (const KmError& error) {
      emit_transition(task_id, TaskEvent::Cancel, "engine",
                      Json{{"reason", error.what()}});
      emit_notification(coordinator(assessment_id), NotificationKind::Violation,
                        Json{{"reason", error.what()}, {"assessment", assessment_id}},
                        log_.size());
      return;
    }
  }

  for (const auto& [grader, vab_items] : plan.items_by_grader) {
    std::string vab_id = "vab:" + assessment_id + ":" + grader;
    emit(ev::vab_generated, "engine", vab_id,
         Json{{"assessment", assessment_id},
              {"grader", grader},
              {"items", vab_items},
              {"task", vab_task_id(grade_stage->id, vab_id)},
              {"supplement", false},
              {"community", plan.community_of.at(grader)}});
  }
  if (feasible < assessment.criteria.redundancy) {
    for (const auto& [item_id, author] : items) {
      emit(ev::coverage_degraded, "engine", item_id,
           Json{{"assessment", assessment_id},
                {"old_target", assessment.criteria.redundancy},
                {"new_target", feasible},
                {"reason", "insufficient graders at generation"}});
    }
    emit_notification(coordinator(assessment_id), NotificationKind::Violation,
                      Json{{"reason", "redundancy degraded at generation"},
                           {"assessment", assessment_id},
                           {"requested", assessment.criteria.redundancy},
                           {"feasible", feasible}},
                      log_.size());
  }
  emit_transition(task_id, TaskEvent::Complete, "engine");
}

// ---------------------------------------------------------------------------
// lookups
// ---------------------------------------------------------------------------

std::string Engine::coordinator(const std::string& assessment_id) const {
  (void)assessment_id;
  const WorkflowStage* stage = stage_of_kind(TaskKind::SetDistribution);
  if (!stage) return "";
  for (const auto& community : stage->community_binding) {
    auto it = state_.communities.find(community);
    if (it == state_.communities.end()) continue;
    for (const auto& member : it->second.members) {
      if (state_.workers.at(member).active) return member;
    }
  }
  return "";
}

const WorkflowStage* Engine::stage_of_kind(TaskKind kind) const {
  for (const auto& stage_id : state_.workflow.topological_order) {
    const WorkflowStage* stage = state_.workflow.find_stage(stage_id);
    if (stage && stage->kind == kind) return stage;
  }
  return nullptr;
}

std::string Engine::assessment_of_task(const std::string& task_id) const {
  auto it = task_assessment_.find(task_id);
  return it == task_assessment_.end() ? std::string() : it->second;
}

}  // namespace crowdkm
