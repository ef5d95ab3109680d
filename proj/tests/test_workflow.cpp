#include <doctest.h>

#include "crowdkm/engine.hpp"
#include "crowdkm/errors.hpp"
#include "crowdkm/workflow.hpp"
#include "helpers.hpp"

using namespace crowdkm;

TEST_CASE("canonical workflow orders the six stages with the machine step") {
  KmWorkflow workflow = canonical_workflow("students", "staff", {"faculty", "alumni"});
  std::vector<std::string> expected = {"T-1", "T-2", "T-3", "T-3.vab", "T-4", "T-5", "T-6"};
  CHECK(workflow.topological_order == expected);
  CHECK(workflow.find_stage("T-4")->community_binding ==
        std::set<std::string>{"faculty", "alumni"});
  CHECK(workflow.find_stage("T-6")->community_binding ==
        std::set<std::string>{"staff", "faculty", "alumni"});
}

TEST_CASE("define_workflow rejects malformed DAGs") {
  SUBCASE("smallest cycle") {
    std::vector<WorkflowStage> stages = {
        {"A", TaskKind::Grade, {}, {"B"}},
        {"B", TaskKind::Grade, {}, {"A"}},
    };
    CHECK_THROWS_AS(define_workflow("bad", stages), KmError);
    try {
      define_workflow("bad", stages);
    } catch (const KmError& error) {
      CHECK(error.code() == Errc::CyclicDependency);
      // The message names the cycle.
      CHECK(std::string(error.what()).find("->") != std::string::npos);
    }
  }
  SUBCASE("duplicate ids") {
    std::vector<WorkflowStage> stages = {
        {"A", TaskKind::Grade, {}, {}},
        {"A", TaskKind::Grade, {}, {}},
    };
    try {
      define_workflow("bad", stages);
      CHECK(false);
    } catch (const KmError& error) {
      CHECK(error.code() == Errc::DuplicateStageId);
    }
  }
  SUBCASE("dangling dependency") {
    std::vector<WorkflowStage> stages = {{"A", TaskKind::Grade, {}, {"missing"}}};
    try {
      define_workflow("bad", stages);
      CHECK(false);
    } catch (const KmError& error) {
      CHECK(error.code() == Errc::DanglingDependency);
    }
  }
}

TEST_CASE("degenerate single-stage workflow is valid") {
  KmWorkflow workflow = define_workflow("single", {{"only", TaskKind::Grade, {}, {}}});
  CHECK(workflow.topological_order == std::vector<std::string>{"only"});
}

TEST_CASE("topological order is deterministic with ties broken by stage id") {
  std::vector<WorkflowStage> stages = {
      {"gamma", TaskKind::Grade, {}, {}},
      {"alpha", TaskKind::Grade, {}, {}},
      {"beta", TaskKind::Grade, {}, {}},
  };
  KmWorkflow first = define_workflow("ties", stages);
  KmWorkflow second = define_workflow("ties", stages);
  CHECK(first.topological_order == second.topological_order);
  CHECK(first.topological_order == std::vector<std::string>{"alpha", "beta", "gamma"});
}

TEST_CASE("transition table accepts only legal edges") {
  TaskState to;
  CHECK(transition_legal(TaskState::Created, TaskEvent::Offer, to));
  CHECK(to == TaskState::Offered);
  CHECK(transition_legal(TaskState::Offered, TaskEvent::Accept, to));
  CHECK(to == TaskState::Accepted);
  CHECK(transition_legal(TaskState::Offered, TaskEvent::Decline, to));
  CHECK(to == TaskState::Declined);
  CHECK(transition_legal(TaskState::Offered, TaskEvent::Forward, to));
  CHECK(to == TaskState::Forwarded);
  CHECK(transition_legal(TaskState::Forwarded, TaskEvent::Offer, to));
  CHECK(transition_legal(TaskState::Accepted, TaskEvent::Start, to));
  CHECK(transition_legal(TaskState::InProgress, TaskEvent::Complete, to));
  CHECK(transition_legal(TaskState::InProgress, TaskEvent::Cancel, to));

  CHECK_FALSE(transition_legal(TaskState::Completed, TaskEvent::Accept, to));
  CHECK_FALSE(transition_legal(TaskState::Completed, TaskEvent::Cancel, to));
  CHECK_FALSE(transition_legal(TaskState::Declined, TaskEvent::Accept, to));
  CHECK_FALSE(transition_legal(TaskState::Declined, TaskEvent::Cancel, to));
  CHECK_FALSE(transition_legal(TaskState::Created, TaskEvent::Accept, to));
  CHECK_FALSE(transition_legal(TaskState::Accepted, TaskEvent::Decline, to));
}

namespace {

Engine engine_with_one_student_assessment() {
  Engine engine;
  engine.begin_run(testing_setup::engine_config());
  testing_setup::bootstrap_communities(engine);
  testing_setup::register_many(engine, "S", 1, "students");
  testing_setup::register_many(engine, "F", 2, "faculty");
  engine.register_worker("T1", "staff", {WorkerRole::ComputeUnit}, {});
  Clo clo{"CLO-1", "objective", "course"};
  Question question;
  question.id = "Q1";
  question.marks_lo = 0;
  question.marks_hi = 10;
  question.teacher_clos = {"CLO-1"};
  engine.create_assessment("exam", "course", {clo}, {question});
  return engine;
}

}  // namespace

TEST_CASE("instantiate makes only the root stage eligible and seeds its tasks") {
  Engine engine = engine_with_one_student_assessment();
  engine.instantiate_process("exam");
  const ProcessInstance& process = engine.state().processes.at("exam");
  CHECK(process.eligible == std::set<std::string>{"T-1"});
  CHECK(engine.state().tasks.count("T-1:exam:S1:Q1") == 1);
  CHECK(engine.state().tasks.at("T-1:exam:S1:Q1").state == TaskState::Offered);
}

TEST_CASE("instantiate against a missing assessment fails") {
  Engine engine = engine_with_one_student_assessment();
  try {
    engine.instantiate_process("nope");
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::UnknownAssessment);
  }
}

TEST_CASE("workflow with two independent roots starts both eligible") {
  Engine engine;
  EngineConfig config = testing_setup::engine_config();
  config.workflow_name = "two-roots";
  config.workflow_stages = {
      {"R1", TaskKind::UploadAnswers, {"students"}, {}},
      {"R2", TaskKind::SetDistribution, {"staff"}, {}},
  };
  engine.begin_run(config);
  testing_setup::bootstrap_communities(engine);
  testing_setup::register_many(engine, "S", 1, "students");
  engine.register_worker("T1", "staff", {WorkerRole::ComputeUnit}, {});
  Clo clo{"CLO-1", "objective", "course"};
  Question question;
  question.id = "Q1";
  question.marks_lo = 0;
  question.marks_hi = 5;
  question.teacher_clos = {"CLO-1"};
  engine.create_assessment("exam", "course", {clo}, {question});
  engine.instantiate_process("exam");
  const ProcessInstance& process = engine.state().processes.at("exam");
  CHECK(process.eligible == std::set<std::string>{"R1", "R2"});
}

TEST_CASE("engine transitions enforce actor authorization and legality") {
  Engine engine = engine_with_one_student_assessment();
  engine.instantiate_process("exam");

  SUBCASE("accept by the assignee works, by others fails") {
    try {
      engine.transition("T-1:exam:S1:Q1", TaskEvent::Accept, "F1");
      CHECK(false);
    } catch (const KmError& error) {
      CHECK(error.code() == Errc::UnauthorizedActor);
    }
    engine.transition("T-1:exam:S1:Q1", TaskEvent::Accept, "S1");
    CHECK(engine.state().tasks.at("T-1:exam:S1:Q1").state == TaskState::Accepted);
  }
  SUBCASE("illegal edge is rejected on a terminal task") {
    engine.decline_task("T-1:exam:S1:Q1", "S1");
    try {
      engine.transition("T-1:exam:S1:Q1", TaskEvent::Accept, "S1");
      CHECK(false);
    } catch (const KmError& error) {
      CHECK(error.code() == Errc::IllegalTransition);
    }
  }
  SUBCASE("history records every state with its time") {
    engine.set_time(5);
    engine.transition("T-1:exam:S1:Q1", TaskEvent::Accept, "S1");
    const TaskInstance& task = engine.state().tasks.at("T-1:exam:S1:Q1");
    REQUIRE(task.history.size() == 3);  // Created, Offered, Accepted
    CHECK(task.history[0].first == TaskState::Created);
    CHECK(task.history[2].first == TaskState::Accepted);
    CHECK(task.history[2].second == 5);
  }
}

TEST_CASE("two assessments run through the same engine without id collisions") {
  testing_setup::DriveSpec spec;
  spec.students = 2;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  testing_setup::grade_everything(engine, 7);
  engine.publish("exam", AggregationPolicy::Average, "T1");

  // A second assessment on the same communities, distinct question ids.
  Clo clo{"CLO-1", "first", "course"};
  Question question;
  question.id = "final-Q1";
  question.marks_lo = 0;
  question.marks_hi = 10;
  question.teacher_clos = {"CLO-1"};
  engine.create_assessment("final", "course", {clo}, {question});
  engine.instantiate_process("final");
  engine.upload_answer_item("S1", "final-Q1", "art:final:S1");
  engine.upload_answer_item("S2", "final-Q1", "art:final:S2");
  engine.submit_self_review("S1", "final-Q1", "ok", {"CLO-1"}, "none");
  engine.submit_self_review("S2", "final-Q1", "ok", {}, "none");
  engine.set_distribution_criteria("final", spec.criteria, "T1");
  engine.transition("T-3:final:coordinator", TaskEvent::Accept, "T1");
  engine.transition("T-3:final:coordinator", TaskEvent::Start, "T1");
  engine.transition("T-3:final:coordinator", TaskEvent::Complete, "T1");

  CHECK(engine.state().assessments.at("final").vabs.size() == 2);
  CHECK(engine.stage_complete("final", "T-3.vab"));
  CHECK(engine.state().assessments.at("exam").published);
  CHECK_FALSE(engine.state().assessments.at("final").published);
}

TEST_CASE("stages with zero tasks complete with a warning and unblock dependents") {
  Engine engine;
  engine.begin_run(testing_setup::engine_config());
  testing_setup::bootstrap_communities(engine);
  // No students at all: T-1 and T-2 auto-complete as empty.
  testing_setup::register_many(engine, "F", 2, "faculty");
  engine.register_worker("T1", "staff", {WorkerRole::ComputeUnit}, {});
  Clo clo{"CLO-1", "objective", "course"};
  Question question;
  question.id = "Q1";
  question.marks_lo = 0;
  question.marks_hi = 10;
  question.teacher_clos = {"CLO-1"};
  engine.create_assessment("exam", "course", {clo}, {question});
  engine.instantiate_process("exam");

  CHECK(engine.stage_complete("exam", "T-1"));
  CHECK(engine.stage_complete("exam", "T-2"));
  CHECK(engine.state().processes.at("exam").eligible.count("T-3") == 1);
  bool warned = false;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::stage_completed && event.subject == "T-1") {
      warned = event.payload.value("warning", std::string()) == "empty_stage";
    }
  }
  CHECK(warned);
}
