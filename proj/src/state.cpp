#include "crowdkm/state.hpp"

#include <algorithm>

#include "crowdkm/digest.hpp"
#include "crowdkm/errors.hpp"

namespace crowdkm {

Json AdaptationRuleCfg::to_json() const {
  return Json{{"id", id},           {"type", type},           {"threshold", threshold},
              {"on_kind", on_kind}, {"reason", reason},       {"task_field", task_field},
              {"fire_limit", fire_limit}};
}

AdaptationRuleCfg AdaptationRuleCfg::from_json(const Json& j) {
  AdaptationRuleCfg rule;
  rule.id = j.at("id").get<std::string>();
  rule.type = j.at("type").get<std::string>();
  rule.threshold = j.value("threshold", 0);
  rule.on_kind = j.value("on_kind", std::string());
  rule.reason = j.value("reason", std::string());
  rule.task_field = j.value("task_field", std::string());
  rule.fire_limit = j.value("fire_limit", 1);
  return rule;
}

Rational EngineConfig::weight_for(TaskKind kind) const {
  auto it = credit_weights.find(task_kind_name(kind));
  if (it != credit_weights.end()) return it->second;
  return kind == TaskKind::MachineStep ? Rational(0) : Rational(1);
}

Json EngineConfig::to_json() const {
  Json weights = Json::object();
  for (const auto& [kind, weight] : credit_weights) weights[kind] = weight.str();
  Json rules_json = Json::array();
  for (const auto& rule : rules) rules_json.push_back(rule.to_json());
  Json stages = Json::array();
  for (const auto& stage : workflow_stages) {
    stages.push_back(Json{{"id", stage.id},
                          {"kind", task_kind_name(stage.kind)},
                          {"communities", stage.community_binding},
                          {"dependencies", stage.dependencies}});
  }
  return Json{{"seed", seed},
              {"credit_weights", weights},
              {"referral_bonus", referral_bonus.str()},
              {"rules", rules_json},
              {"workflow_name", workflow_name},
              {"workflow_stages", stages},
              {"raw", raw}};
}

EngineConfig EngineConfig::from_json(const Json& j) {
  EngineConfig config;
  config.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& [kind, weight] : j.at("credit_weights").items()) {
    config.credit_weights[kind] = Rational::from_string(weight.get<std::string>());
  }
  config.referral_bonus = Rational::from_string(j.at("referral_bonus").get<std::string>());
  for (const auto& rule : j.at("rules")) {
    config.rules.push_back(AdaptationRuleCfg::from_json(rule));
  }
  config.workflow_name = j.at("workflow_name").get<std::string>();
  for (const auto& stage_json : j.at("workflow_stages")) {
    WorkflowStage stage;
    stage.id = stage_json.at("id").get<std::string>();
    stage.kind = task_kind_from_name(stage_json.at("kind").get<std::string>());
    for (const auto& community : stage_json.at("communities"))
      stage.community_binding.insert(community.get<std::string>());
    for (const auto& dep : stage_json.at("dependencies"))
      stage.dependencies.insert(dep.get<std::string>());
    config.workflow_stages.push_back(std::move(stage));
  }
  config.raw = j.at("raw");
  return config;
}

const char* notification_kind_name(NotificationKind kind) {
  switch (kind) {
    case NotificationKind::WhoKnowsWhat: return "who_knows_what";
    case NotificationKind::WhereIsWhat: return "where_is_what";
    case NotificationKind::WhoHasWhat: return "who_has_what";
    case NotificationKind::TaskOffer: return "task_offer";
    case NotificationKind::Progress: return "progress";
    case NotificationKind::Violation: return "violation";
  }
  return "?";
}

NotificationKind notification_kind_from_name(const std::string& name) {
  if (name == "who_knows_what") return NotificationKind::WhoKnowsWhat;
  if (name == "where_is_what") return NotificationKind::WhereIsWhat;
  if (name == "who_has_what") return NotificationKind::WhoHasWhat;
  if (name == "task_offer") return NotificationKind::TaskOffer;
  if (name == "progress") return NotificationKind::Progress;
  if (name == "violation") return NotificationKind::Violation;
  throw KmError(Errc::ParseError, "unknown notification kind: " + name);
}

namespace {

std::set<std::string> string_set(const Json& array) {
  std::set<std::string> out;
  for (const auto& value : array) out.insert(value.get<std::string>());
  return out;
}

AssessmentState& assessment_of(EngineState& state, const Json& payload) {
  const std::string id = payload.at("assessment").get<std::string>();
  auto it = state.assessments.find(id);
  if (it == state.assessments.end())
    throw KmError(Errc::CorruptLog, "event references unknown assessment " + id);
  return it->second;
}

TaskKind stage_kind(const EngineState& state, const std::string& stage_id) {
  const WorkflowStage* stage = state.workflow.find_stage(stage_id);
  if (!stage) throw KmError(Errc::CorruptLog, "event references unknown stage " + stage_id);
  return stage->kind;
}

void bump_topic(EngineState& state, const std::set<std::string>& clos,
                const std::string& worker) {
  for (const auto& clo : clos) state.topic_interactions[clo][worker] += 1;
}

void award_credit(EngineState& state, const std::string& worker, const Rational& delta,
                  std::uint64_t seq, const std::string& reason) {
  if (worker.empty() || worker == "engine" || delta.is_zero()) return;
  state.credit_entries[worker].push_back(CreditEntry{seq, delta, reason});
  state.credit_balance[worker] += delta;
}

CoverageEntry& coverage_entry(AssessmentState& assessment, const std::string& item) {
  auto [it, inserted] = assessment.coverage.try_emplace(item);
  if (inserted) it->second.target = assessment.criteria.redundancy;
  return it->second;
}

void apply_task_transition(EngineState& state, const MetaEvent& event) {
  auto task_it = state.tasks.find(event.subject);
  if (task_it == state.tasks.end())
    throw KmError(Errc::CorruptLog, "transition on unknown task " + event.subject);
  TaskInstance& task = task_it->second;

  TaskState from = task_state_from_name(event.payload.at("from").get<std::string>());
  TaskState to = task_state_from_name(event.payload.at("to").get<std::string>());
  TaskEvent label = task_event_from_name(event.payload.at("event").get<std::string>());
  if (task.state != from)
    throw KmError(Errc::CorruptLog, "task " + task.id + " is " +
                                        task_state_name(task.state) + ", transition expects " +
                                        task_state_name(from));
  TaskState expected;
  if (!transition_legal(from, label, expected) || expected != to)
    throw KmError(Errc::CorruptLog, "illegal transition recorded for task " + task.id);

  if (label == TaskEvent::Forward) state.task_forwarder[task.id] = task.assignee;
  if (event.payload.contains("assignee"))
    task.assignee = event.payload.at("assignee").get<std::string>();

  task.state = to;
  task.history.emplace_back(to, event.sim_time);

  TaskKind kind = stage_kind(state, task.stage);

  if (kind == TaskKind::Grade) {
    auto assessment_it = state.assessments.find(
        event.payload.value("assessment", std::string()));
    if (assessment_it != state.assessments.end()) {
      AssessmentState& assessment = assessment_it->second;
      auto vab_it = assessment.vabs.find(task.payload);
      if (vab_it != assessment.vabs.end()) {
        Vab& vab = vab_it->second;
        if (to == TaskState::Offered && vab.grader != task.assignee) {
          // Forwarded bundle: the whole Vab transfers to the invitee.
          for (const auto& item : vab.items) {
            auto entry = assessment.coverage.find(item);
            if (entry != assessment.coverage.end()) {
              entry->second.assigned_graders.erase(vab.grader);
              entry->second.assigned_graders.insert(task.assignee);
            }
          }
          auto open_it = assessment.open_vab_of.find(vab.grader);
          if (open_it != assessment.open_vab_of.end() && open_it->second == vab.id) {
            assessment.open_vab_of.erase(open_it);
          }
          assessment.open_vab_of[task.assignee] = vab.id;
          vab.grader = task.assignee;
        }
        if (to == TaskState::Accepted) {
          for (const auto& item : vab.items) assessment.grading_started.insert(item);
        }
        if (to == TaskState::Declined ||
            (to == TaskState::Cancelled && event.payload.value("declined", false))) {
          assessment.declined_graders.insert(vab.grader);
        }
        if (task_state_terminal(to)) {
          auto open_it = assessment.open_vab_of.find(vab.grader);
          if (open_it != assessment.open_vab_of.end() && open_it->second == vab.id) {
            assessment.open_vab_of.erase(open_it);
          }
        }
      }
    }
  }

  if (to == TaskState::Completed) {
    award_credit(state, event.actor, state.config.weight_for(kind), event.seq,
                 "task:" + task.id);
    auto forwarder_it = state.task_forwarder.find(task.id);
    if (forwarder_it != state.task_forwarder.end() && forwarder_it->second != event.actor) {
      award_credit(state, forwarder_it->second, state.config.referral_bonus, event.seq,
                   "referral:" + task.id);
    }
  }
}

void apply_publish(EngineState& state, const MetaEvent& event) {
  AssessmentState& assessment = state.assessments.at(event.subject);
  assessment.policy =
      aggregation_policy_from_name(event.payload.at("policy").get<std::string>());
  // Scores are a pure function of the recorded grades, so the event only
  // carries the policy; live run and replay compute identical values.
  for (const auto& [item_id, item] : assessment.items) {
    auto grades_it = assessment.grades_by_item.find(item_id);
    if (grades_it == assessment.grades_by_item.end() || grades_it->second.empty()) continue;
    std::vector<int> marks;
    for (const auto& grade_id : grades_it->second) {
      marks.push_back(assessment.grades.at(grade_id).marks);
    }
    FinalScore score;
    score.student = item.student;
    score.question = item.question;
    score.policy = assessment.policy;
    score.value = aggregate_item(marks, assessment.policy);
    score.contributing_grades = grades_it->second;
    assessment.final_scores[item.student + "|" + item.question] = std::move(score);
  }
  assessment.published = true;
}

}  // namespace

void apply_event(EngineState& state, const MetaEvent& event) {
  const Json& payload = event.payload;

  if (event.kind == ev::run_config) {
    state.config = EngineConfig::from_json(payload);
    state.workflow = define_workflow(state.config.workflow_name, state.config.workflow_stages);
    state.configured = true;
    return;
  }
  if (!state.configured)
    throw KmError(Errc::CorruptLog, "log does not begin with " + std::string(ev::run_config));

  if (event.kind == ev::community_created) {
    Community community;
    community.id = event.subject;
    community.kind = community_kind_from_name(payload.at("kind").get<std::string>());
    community.label = payload.value("label", std::string());
    state.communities[community.id] = std::move(community);
  } else if (event.kind == ev::worker_registered) {
    Worker worker;
    worker.id = event.subject;
    worker.communities = string_set(payload.at("communities"));
    for (const auto& role : payload.at("roles"))
      worker.roles.insert(worker_role_from_name(role.get<std::string>()));
    worker.skill_tags = string_set(payload.at("skills"));
    worker.self_registered = payload.at("origin").get<std::string>() == "self";
    worker.forwarded_by = payload.value("forwarded_by", std::string());
    for (const auto& community : worker.communities) {
      auto it = state.communities.find(community);
      if (it == state.communities.end())
        throw KmError(Errc::CorruptLog, "registration into unknown community " + community);
      it->second.members.insert(worker.id);
    }
    state.workers[worker.id] = std::move(worker);
  } else if (event.kind == ev::worker_deactivated) {
    state.workers.at(event.subject).active = false;
  } else if (event.kind == ev::cloudlet_formed) {
    Cloudlet cloudlet;
    cloudlet.id = event.subject;
    const Json& selector = payload.at("selector");
    for (const auto& role : selector.at("roles"))
      cloudlet.selector.roles.insert(worker_role_from_name(role.get<std::string>()));
    cloudlet.selector.skills = string_set(selector.at("skills"));
    cloudlet.selector.communities = string_set(selector.at("communities"));
    cloudlet.members = string_set(payload.at("members"));
    state.cloudlets[cloudlet.id] = std::move(cloudlet);
  } else if (event.kind == ev::assessment_created) {
    AssessmentState assessment;
    assessment.id = event.subject;
    assessment.course = payload.at("course").get<std::string>();
    for (const auto& clo_json : payload.at("clos")) {
      Clo clo;
      clo.id = clo_json.at("id").get<std::string>();
      clo.description = clo_json.value("description", std::string());
      clo.course = assessment.course;
      assessment.clos[clo.id] = std::move(clo);
    }
    for (const auto& question_json : payload.at("questions")) {
      Question question;
      question.id = question_json.at("id").get<std::string>();
      question.assessment = assessment.id;
      question.marks_lo = question_json.at("marks_lo").get<int>();
      question.marks_hi = question_json.at("marks_hi").get<int>();
      question.sample_solution = question_json.value("sample_solution", std::string());
      question.teacher_clos = string_set(question_json.at("clos"));
      assessment.questions[question.id] = std::move(question);
    }
    state.assessments[assessment.id] = std::move(assessment);
  } else if (event.kind == ev::process_instantiated) {
    ProcessInstance process;
    process.assessment = event.subject;
    state.processes[event.subject] = std::move(process);
  } else if (event.kind == ev::stage_eligible) {
    state.processes.at(payload.at("assessment").get<std::string>())
        .eligible.insert(event.subject);
  } else if (event.kind == ev::stage_completed) {
    state.processes.at(payload.at("assessment").get<std::string>())
        .completed_stages[event.subject] = event.sim_time;
  } else if (event.kind == ev::task_created) {
    if (state.tasks.count(event.subject))
      throw KmError(Errc::CorruptLog, "duplicate task id " + event.subject);
    TaskInstance task;
    task.id = event.subject;
    task.stage = payload.at("stage").get<std::string>();
    task.assignee = payload.value("assignee", std::string());
    task.payload = payload.value("payload", std::string());
    task.history.emplace_back(TaskState::Created, event.sim_time);
    state.tasks[task.id] = std::move(task);
  } else if (event.kind == ev::task_transition) {
    apply_task_transition(state, event);
  } else if (event.kind == ev::item_uploaded) {
    AssessmentState& assessment = assessment_of(state, payload);
    AnswerItem item;
    item.id = event.subject;
    item.student = payload.at("student").get<std::string>();
    item.question = payload.at("question").get<std::string>();
    item.artifact = payload.at("artifact").get<std::string>();
    item.uploaded_at = event.sim_time;
    assessment.item_index[item.student + "|" + item.question] = item.id;
    bump_topic(state, assessment.questions.at(item.question).teacher_clos, item.student);
    assessment.items[item.id] = std::move(item);
  } else if (event.kind == ev::feedback_submitted) {
    AssessmentState& assessment = assessment_of(state, payload);
    FeedbackRecord record;
    record.id = event.subject;
    record.student = payload.at("student").get<std::string>();
    record.question = payload.at("question").get<std::string>();
    record.phase = payload.at("phase").get<std::string>() == "pre" ? FeedbackPhase::PreGrading
                                                                   : FeedbackPhase::PostGrading;
    record.narrative = payload.value("narrative", std::string());
    record.student_clos = string_set(payload.value("student_clos", Json::array()));
    record.self_reported_issues = payload.value("issues", std::string());
    record.at = event.sim_time;
    std::set<std::string> topics = assessment.questions.at(record.question).teacher_clos;
    topics.insert(record.student_clos.begin(), record.student_clos.end());
    bump_topic(state, topics, record.student);
    assessment.feedback.push_back(std::move(record));
  } else if (event.kind == ev::criteria_set) {
    AssessmentState& assessment = state.assessments.at(event.subject);
    assessment.criteria = DistributionCriteria::from_json(payload.at("criteria"));
    assessment.criteria_bound = true;
  } else if (event.kind == ev::vab_generated) {
    AssessmentState& assessment = assessment_of(state, payload);
    if (assessment.vabs.count(event.subject))
      throw KmError(Errc::CorruptLog, "duplicate vab id " + event.subject);
    Vab vab;
    vab.id = event.subject;
    vab.assessment = assessment.id;
    vab.grader = payload.at("grader").get<std::string>();
    for (const auto& item : payload.at("items")) vab.items.push_back(item.get<std::string>());
    vab.task = payload.at("task").get<std::string>();
    vab.supplement = payload.value("supplement", false);
    assessment.open_vab_of[vab.grader] = vab.id;
    for (const auto& item : vab.items) {
      coverage_entry(assessment, item).assigned_graders.insert(vab.grader);
    }
    assessment.vabs[vab.id] = std::move(vab);
  } else if (event.kind == ev::vab_extended) {
    AssessmentState& assessment = assessment_of(state, payload);
    Vab& vab = assessment.vabs.at(event.subject);
    bool started = false;
    auto task_it = state.tasks.find(vab.task);
    if (task_it != state.tasks.end()) {
      started = task_it->second.state == TaskState::Accepted ||
                task_it->second.state == TaskState::InProgress;
    }
    for (const auto& item_json : payload.at("items")) {
      std::string item = item_json.get<std::string>();
      vab.items.push_back(item);
      coverage_entry(assessment, item).assigned_graders.insert(vab.grader);
      if (started) assessment.grading_started.insert(item);
    }
  } else if (event.kind == ev::item_reassigned) {
    AssessmentState& assessment = assessment_of(state, payload);
    coverage_entry(assessment, event.subject)
        .assigned_graders.erase(payload.at("from").get<std::string>());
  } else if (event.kind == ev::coverage_degraded) {
    AssessmentState& assessment = assessment_of(state, payload);
    coverage_entry(assessment, event.subject).target =
        payload.at("new_target").get<int>();
  } else if (event.kind == ev::threshold_violation) {
    // Monitoring signal; metrics count it from the log.
  } else if (event.kind == ev::grade_recorded) {
    AssessmentState& assessment = assessment_of(state, payload);
    GradeRecord record;
    record.id = event.subject;
    record.grader = payload.at("grader").get<std::string>();
    record.answer_item = payload.at("item").get<std::string>();
    record.marks = payload.at("marks").get<int>();
    for (const auto& [clo, verdict] : payload.at("annotations").items()) {
      record.clo_annotations[clo] = clo_verdict_from_name(verdict.get<std::string>());
    }
    record.narrative = payload.value("narrative", std::string());
    record.completed_at = event.sim_time;
    assessment.grades_by_item[record.answer_item].push_back(record.id);
    coverage_entry(assessment, record.answer_item).completed_graders.insert(record.grader);
    const AnswerItem& item = assessment.items.at(record.answer_item);
    std::set<std::string> topics = assessment.questions.at(item.question).teacher_clos;
    for (const auto& [clo, verdict] : record.clo_annotations) topics.insert(clo);
    bump_topic(state, topics, record.grader);
    assessment.grades[record.id] = std::move(record);
  } else if (event.kind == ev::grade_spawned) {
    AssessmentState& assessment = assessment_of(state, payload);
    coverage_entry(assessment, event.subject).target += 1;
  } else if (event.kind == ev::results_published) {
    apply_publish(state, event);
  } else if (event.kind == ev::lesson_recorded) {
    AssessmentState& assessment = assessment_of(state, payload);
    LessonLearned lesson;
    lesson.id = event.subject;
    lesson.assessment = assessment.id;
    lesson.author = payload.at("author").get<std::string>();
    lesson.misalignment_notes = payload.value("notes", std::string());
    lesson.clos = string_set(payload.value("clos", Json::array()));
    lesson.proposed_adjustment = payload.value("proposal", std::string());
    lesson.at = event.sim_time;
    assessment.lessons.push_back(std::move(lesson));
  } else if (event.kind == ev::rule_fired) {
    state.rule_fires[payload.at("rule").get<std::string>() + "|" + event.subject] += 1;
  } else if (event.kind == ev::rule_skipped) {
    // Log-only record.
  } else if (event.kind == ev::notification) {
    Notification notification;
    notification.recipient = event.subject;
    notification.kind = notification_kind_from_name(payload.at("kind").get<std::string>());
    notification.body = payload.at("body");
    notification.cause_seq = payload.at("cause_seq").get<std::uint64_t>();
    state.notifications.push_back(std::move(notification));
  } else if (event.kind == ev::run_deadlock) {
    state.deadlocked = true;
    state.deadlock_report = payload;
  } else {
    throw KmError(Errc::CorruptLog, "unknown event kind " + event.kind);
  }
}

Json EngineState::to_json() const {
  Json communities_json = Json::object();
  for (const auto& [id, community] : communities) {
    communities_json[id] = Json{{"kind", community_kind_name(community.kind)},
                                {"label", community.label},
                                {"members", community.members}};
  }
  Json workers_json = Json::object();
  for (const auto& [id, worker] : workers) workers_json[id] = worker.to_json();
  Json cloudlets_json = Json::object();
  for (const auto& [id, cloudlet] : cloudlets) {
    cloudlets_json[id] =
        Json{{"selector", cloudlet.selector.to_json()}, {"members", cloudlet.members}};
  }
  Json assessments_json = Json::object();
  for (const auto& [id, assessment] : assessments) {
    Json questions_json = Json::object();
    for (const auto& [qid, question] : assessment.questions) {
      questions_json[qid] = Json{{"lo", question.marks_lo},
                                 {"hi", question.marks_hi},
                                 {"clos", question.teacher_clos},
                                 {"sample", question.sample_solution}};
    }
    Json items_json = Json::object();
    for (const auto& [item_id, item] : assessment.items) {
      items_json[item_id] = Json{{"student", item.student},
                                 {"question", item.question},
                                 {"artifact", item.artifact},
                                 {"at", item.uploaded_at}};
    }
    Json feedback_json = Json::array();
    for (const auto& record : assessment.feedback) {
      feedback_json.push_back(
          Json{{"id", record.id},
               {"student", record.student},
               {"question", record.question},
               {"phase", record.phase == FeedbackPhase::PreGrading ? "pre" : "post"},
               {"narrative", record.narrative},
               {"student_clos", record.student_clos},
               {"issues", record.self_reported_issues},
               {"at", record.at}});
    }
    Json coverage_json = Json::object();
    for (const auto& [item_id, entry] : assessment.coverage) {
      coverage_json[item_id] = Json{{"assigned", entry.assigned_graders},
                                    {"completed", entry.completed_graders},
                                    {"target", entry.target}};
    }
    Json vabs_json = Json::object();
    for (const auto& [vab_id, vab] : assessment.vabs) vabs_json[vab_id] = vab.to_json();
    Json grades_json = Json::object();
    for (const auto& [grade_id, grade] : assessment.grades)
      grades_json[grade_id] = grade.to_json();
    Json scores_json = Json::object();
    for (const auto& [key, score] : assessment.final_scores) {
      scores_json[key] = Json{{"value", score.value.str()},
                              {"grades", score.contributing_grades},
                              {"policy", aggregation_policy_name(score.policy)}};
    }
    Json lessons_json = Json::array();
    for (const auto& lesson : assessment.lessons) {
      lessons_json.push_back(Json{{"id", lesson.id},
                                  {"author", lesson.author},
                                  {"notes", lesson.misalignment_notes},
                                  {"clos", lesson.clos},
                                  {"proposal", lesson.proposed_adjustment},
                                  {"at", lesson.at}});
    }
    assessments_json[id] =
        Json{{"course", assessment.course},
             {"questions", questions_json},
             {"items", items_json},
             {"feedback", feedback_json},
             {"criteria", assessment.criteria_bound ? assessment.criteria.to_json() : Json()},
             {"coverage", coverage_json},
             {"vabs", vabs_json},
             {"grades", grades_json},
             {"grading_started", assessment.grading_started},
             {"declined", assessment.declined_graders},
             {"published", assessment.published},
             {"policy", aggregation_policy_name(assessment.policy)},
             {"final_scores", scores_json},
             {"lessons", lessons_json}};
  }
  Json tasks_json = Json::object();
  for (const auto& [id, task] : tasks) tasks_json[id] = task.to_json();
  Json processes_json = Json::object();
  for (const auto& [id, process] : processes) {
    processes_json[id] =
        Json{{"eligible", process.eligible}, {"completed", process.completed_stages}};
  }
  Json credit_json = Json::object();
  for (const auto& [worker, entries] : credit_entries) {
    Json entries_json = Json::array();
    for (const auto& entry : entries) {
      entries_json.push_back(
          Json{{"seq", entry.seq}, {"delta", entry.delta.str()}, {"reason", entry.reason}});
    }
    credit_json[worker] = Json{{"balance", credit_balance.at(worker).str()},
                               {"entries", entries_json}};
  }
  Json notifications_json = Json::array();
  for (const auto& notification : notifications) {
    notifications_json.push_back(Json{{"recipient", notification.recipient},
                                      {"kind", notification_kind_name(notification.kind)},
                                      {"body", notification.body},
                                      {"cause_seq", notification.cause_seq}});
  }
  return Json{{"workflow", Json{{"name", workflow.name}, {"order", workflow.topological_order}}},
              {"communities", communities_json},
              {"workers", workers_json},
              {"cloudlets", cloudlets_json},
              {"assessments", assessments_json},
              {"tasks", tasks_json},
              {"forwarders", task_forwarder},
              {"processes", processes_json},
              {"credit", credit_json},
              {"topics", topic_interactions},
              {"rule_fires", rule_fires},
              {"notifications", notifications_json},
              {"deadlocked", deadlocked},
              {"deadlock_report", deadlock_report}};
}

std::string EngineState::digest() const { return hex64(fnv1a64(to_json().dump())); }

CloConsensus assessment_consensus(const AssessmentState& assessment,
                                  const std::string& question) {
  std::set<std::string> tagged;
  auto question_it = assessment.questions.find(question);
  if (question_it != assessment.questions.end()) tagged = question_it->second.teacher_clos;
  for (const auto& record : assessment.feedback) {
    if (record.phase == FeedbackPhase::PreGrading && record.question == question) {
      tagged.insert(record.student_clos.begin(), record.student_clos.end());
    }
  }
  std::vector<std::map<std::string, CloVerdict>> annotation_sets;
  for (const auto& [item_id, item] : assessment.items) {
    if (item.question != question) continue;
    auto grades_it = assessment.grades_by_item.find(item_id);
    if (grades_it == assessment.grades_by_item.end()) continue;
    for (const auto& grade_id : grades_it->second) {
      annotation_sets.push_back(assessment.grades.at(grade_id).clo_annotations);
    }
  }
  return clo_consensus(question, tagged, annotation_sets);
}

GapReport assessment_gap(const AssessmentState& assessment, const std::string& student,
                         const std::string& question) {
  std::set<std::string> confirmed;
  try {
    confirmed = assessment_consensus(assessment, question).confirmed();
  } catch (const KmError& error) {
    if (error.code() != Errc::NoGrades) throw;
  }
  std::set<std::string> student_clos;
  for (const auto& record : assessment.feedback) {
    if (record.phase == FeedbackPhase::PreGrading && record.student == student &&
        record.question == question) {
      student_clos = record.student_clos;
    }
  }
  return gap_between(student, question, student_clos, confirmed);
}

}  // namespace crowdkm
