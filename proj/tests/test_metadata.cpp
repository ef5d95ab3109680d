#include <doctest.h>

#include "crowdkm/engine.hpp"
#include "crowdkm/errors.hpp"
#include "crowdkm/invariants.hpp"
#include "crowdkm/replay.hpp"
#include "helpers.hpp"

using namespace crowdkm;

TEST_CASE("event log is gapless and round-trips through serialization") {
  testing_setup::DriveSpec spec;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);

  const auto& log = engine.log();
  REQUIRE(log.size() > 10);
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i].seq == i + 1);
  }
  std::string serialized = serialize_log(log);
  std::vector<MetaEvent> parsed = parse_log(serialized);
  REQUIRE(parsed.size() == log.size());
  CHECK(serialize_log(parsed) == serialized);
}

TEST_CASE("a deleted record is detected as a gap with its position") {
  testing_setup::DriveSpec spec;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  std::vector<MetaEvent> log = engine.log();
  log.erase(log.begin() + 16);  // drop seq 17
  try {
    parse_log(serialize_log(log));
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::CorruptLog);
    CHECK(std::string(error.what()).find("17") != std::string::npos);
  }
}

TEST_CASE("replay reproduces the exact state digest") {
  testing_setup::DriveSpec spec;
  spec.students = 3;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  testing_setup::grade_everything(engine, 6);
  engine.publish("exam", AggregationPolicy::Average, "T1");

  ReplayResult replayed = replay_events(engine.log());
  CHECK(replayed.digest == engine.state().digest());
  CHECK(replayed.state.assessments.at("exam").final_scores.size() ==
        engine.state().assessments.at("exam").final_scores.size());
}

TEST_CASE("credit accrues per completed task and for referrals") {
  testing_setup::DriveSpec spec;
  spec.students = 3;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);

  // Forward F1's bundle before anyone accepts: invitee completes it later.
  engine.forward_invite("F1", "F1-friend", "T-4:vab:exam:F1");
  testing_setup::grade_everything(engine, 6);

  // Grade weight defaults to 1 per completed grading task.
  CHECK(engine.credit_of("F2") == Rational(1));
  CHECK(engine.credit_of("F1-friend") == Rational(1));
  // Referral bonus: invitee completed the forwarded task.
  CHECK(engine.credit_of("F1") == Rational(1, 4));
  // Students earned upload + self-review credit.
  CHECK(engine.credit_of("S1") == Rational(2));

  try {
    engine.credit_of("nobody");
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::UnknownWorker);
  }
}

TEST_CASE("worker with no activity has zero balance") {
  Engine engine;
  engine.begin_run(testing_setup::engine_config());
  testing_setup::bootstrap_communities(engine);
  engine.register_worker("idle", "students", {WorkerRole::ComputeUnit}, {});
  CHECK(engine.credit_of("idle") == Rational(0));
}

TEST_CASE("who_knows_what ranks by interaction count with id tie-break") {
  testing_setup::DriveSpec spec;
  spec.students = 4;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  testing_setup::grade_everything(engine, 6);

  auto ranking = engine.who_knows_what("CLO-1");
  REQUIRE(!ranking.empty());
  // Each grader held all four items: 4 grade interactions against the
  // students' 2 (upload + review).
  CHECK(ranking[0].second >= ranking.back().second);
  for (std::size_t i = 1; i < ranking.size(); ++i) {
    bool ordered = ranking[i - 1].second > ranking[i].second ||
                   (ranking[i - 1].second == ranking[i].second &&
                    ranking[i - 1].first < ranking[i].first);
    CHECK(ordered);
  }
  CHECK(engine.who_knows_what("CLO-404").empty());
}

TEST_CASE("where_is_what and who_has_what answer holder queries") {
  testing_setup::DriveSpec spec;
  spec.students = 2;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);

  Json where = engine.where_is_what("art:S1:Q1");
  CHECK(where.at("author") == "S1");
  CHECK(where.at("vabs").size() == 2);  // redundancy 2: two bundles hold it

  Json who = engine.who_has_what("F1");
  CHECK(who.at("open_vabs").size() == 1);
  CHECK(who.at("artifacts").empty());
  CHECK(who.at("credit") == "0");

  try {
    engine.where_is_what("art:unknown");
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::UnknownArtifact);
  }
  try {
    engine.who_has_what("nobody");
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::UnknownWorker);
  }
}

TEST_CASE("knowing notifications are log-backed and reference their cause") {
  testing_setup::DriveSpec spec;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  engine.notify_knowing("T1", NotificationKind::WhoKnowsWhat, "CLO-1");

  const Notification& notification = engine.state().notifications.back();
  CHECK(notification.recipient == "T1");
  CHECK(notification.kind == NotificationKind::WhoKnowsWhat);
  CHECK(notification.cause_seq > 0);
  for (const auto& existing : engine.state().notifications) {
    CHECK(existing.cause_seq > 0);
    CHECK(existing.cause_seq <= engine.log().size());
  }
}

namespace {

Engine variance_engine(int r, int r_max, int threshold, int fire_limit, int faculty) {
  testing_setup::DriveSpec spec;
  spec.students = 1;
  spec.faculty = faculty;
  spec.criteria = testing_setup::faculty_only_criteria(r, 1, r_max);
  AdaptationRuleCfg rule;
  rule.id = "variance";
  rule.type = "variance_escalation";
  rule.threshold = threshold;
  rule.fire_limit = fire_limit;
  spec.rules = {rule};
  return testing_setup::drive_to_grading(spec);
}

}  // namespace

TEST_CASE("variance escalation spawns one extra redundant grade below the ceiling") {
  Engine engine = variance_engine(2, 3, 4, 1, 3);
  const AssessmentState& before = engine.state().assessments.at("exam");
  std::string item = before.items.begin()->first;
  // The two initially assigned graders disagree: range 6 > 4.
  std::vector<std::string> assigned(before.coverage.at(item).assigned_graders.begin(),
                                    before.coverage.at(item).assigned_graders.end());
  REQUIRE(assigned.size() == 2);
  engine.transition("T-4:vab:exam:" + assigned[0], TaskEvent::Accept, assigned[0]);
  engine.transition("T-4:vab:exam:" + assigned[1], TaskEvent::Accept, assigned[1]);
  engine.record_grade(assigned[0], item, 3, {}, "");
  engine.record_grade(assigned[1], item, 9, {}, "");

  const AssessmentState& after = engine.state().assessments.at("exam");
  CHECK(after.coverage.at(item).target == 3);
  CHECK(after.coverage.at(item).assigned_graders.size() == 3);
  int fired = 0;
  int spawned = 0;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::rule_fired) ++fired;
    if (event.kind == ev::grade_spawned) ++spawned;
  }
  CHECK(fired == 1);
  CHECK(spawned == 1);
  // The third grader can grade it to completion.
  std::string third;
  for (const auto& grader : after.coverage.at(item).assigned_graders) {
    if (grader != assigned[0] && grader != assigned[1]) third = grader;
  }
  REQUIRE(!third.empty());
  testing_setup::grade_everything(engine, 6);
  CHECK(engine.state().assessments.at("exam").coverage.at(item).completed_graders.size() == 3);
}

TEST_CASE("small grade ranges do not trigger the variance rule") {
  Engine engine = variance_engine(2, 3, 4, 1, 3);
  const AssessmentState& assessment = engine.state().assessments.at("exam");
  std::string item = assessment.items.begin()->first;
  std::vector<std::string> assigned(assessment.coverage.at(item).assigned_graders.begin(),
                                    assessment.coverage.at(item).assigned_graders.end());
  engine.transition("T-4:vab:exam:" + assigned[0], TaskEvent::Accept, assigned[0]);
  engine.transition("T-4:vab:exam:" + assigned[1], TaskEvent::Accept, assigned[1]);
  engine.record_grade(assigned[0], item, 7, {}, "");
  engine.record_grade(assigned[1], item, 8, {}, "");
  for (const auto& event : engine.log()) {
    CHECK(event.kind != ev::rule_fired);
    CHECK(event.kind != ev::grade_spawned);
  }
}

TEST_CASE("variance at the redundancy ceiling notifies instead of spawning") {
  Engine engine = variance_engine(2, 2, 4, 1, 3);  // r_max == r
  const AssessmentState& assessment = engine.state().assessments.at("exam");
  std::string item = assessment.items.begin()->first;
  std::vector<std::string> assigned(assessment.coverage.at(item).assigned_graders.begin(),
                                    assessment.coverage.at(item).assigned_graders.end());
  engine.transition("T-4:vab:exam:" + assigned[0], TaskEvent::Accept, assigned[0]);
  engine.transition("T-4:vab:exam:" + assigned[1], TaskEvent::Accept, assigned[1]);
  engine.record_grade(assigned[0], item, 3, {}, "");
  engine.record_grade(assigned[1], item, 9, {}, "");

  bool fired_notify = false;
  bool spawned = false;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::rule_fired &&
        event.payload.at("action") == "notify_coordinator") {
      fired_notify = true;
    }
    if (event.kind == ev::grade_spawned) spawned = true;
  }
  CHECK(fired_notify);
  CHECK_FALSE(spawned);
  CHECK(engine.state().assessments.at("exam").coverage.at(item).assigned_graders.size() == 2);
}

TEST_CASE("generic notify rule fires once per subject under its limit") {
  testing_setup::DriveSpec spec;
  spec.students = 2;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  AdaptationRuleCfg rule;
  rule.id = "watch-degrade";
  rule.type = "notify_coordinator";
  rule.on_kind = ev::coverage_degraded;
  rule.reason = "coverage degraded";
  rule.fire_limit = 1;
  spec.rules = {rule};
  Engine engine = testing_setup::drive_to_grading(spec);
  engine.decline_task("T-4:vab:exam:F2", "F2");  // forces degradation on both items

  int fired = 0;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::rule_fired &&
        event.payload.at("rule") == "watch-degrade") {
      ++fired;
    }
  }
  // One firing per degraded item subject, each within its own limit.
  CHECK(fired == 2);
  CHECK(engine.state().rule_fires.size() >= 2);
}

TEST_CASE("cancel_task rules retract tasks and the cascade stays bounded") {
  testing_setup::DriveSpec spec;
  spec.students = 3;
  spec.faculty = 3;
  spec.criteria = testing_setup::faculty_only_criteria(1, 2, 2);
  // Retract any replacement bundle the moment it appears. The rule-caused
  // follow-up redistribution must not re-trigger the rule.
  AdaptationRuleCfg rule;
  rule.id = "retract-supplements";
  rule.type = "cancel_task";
  rule.on_kind = ev::vab_generated;
  rule.task_field = "task";
  rule.fire_limit = 1;
  spec.rules = {rule};
  Engine engine = testing_setup::drive_to_grading(spec);

  // F1 and F2 finish their bundles, so F3's declined item can only land in a
  // fresh supplemental bundle, which the rule immediately retracts.
  for (const char* grader : {"F1", "F2"}) {
    const AssessmentState& assessment = engine.state().assessments.at("exam");
    std::string vab_id = "vab:exam:" + std::string(grader);
    engine.transition("T-4:" + vab_id, TaskEvent::Accept, grader);
    std::vector<std::string> items = assessment.vabs.at(vab_id).items;
    for (const auto& item : items) engine.record_grade(grader, item, 6, {}, "");
  }
  engine.decline_task("T-4:vab:exam:F3", "F3");

  int cancels = 0;
  int fired = 0;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::rule_fired && event.payload.at("rule") == "retract-supplements")
      ++fired;
    if (event.kind == ev::task_transition &&
        event.payload.at("to").get<std::string>() == "Cancelled" && event.actor == "engine")
      ++cancels;
  }
  CHECK(fired >= 1);
  CHECK(cancels >= 1);
  // Coverage must still be accounted for: met, or degraded with an event.
  std::set<std::string> degraded;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::coverage_degraded) degraded.insert(event.subject);
  }
  const AssessmentState& assessment = engine.state().assessments.at("exam");
  for (const auto& [item, entry] : assessment.coverage) {
    bool ok = static_cast<int>(entry.assigned_graders.size()) == entry.target ||
              degraded.count(item) > 0;
    CHECK(ok);
  }
  std::vector<std::string> violations = check_invariants(engine.log());
  for (const auto& violation : violations) MESSAGE(violation);
  CHECK(violations.empty());
}

TEST_CASE("where/who knowing notifications carry the query result") {
  testing_setup::DriveSpec spec;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  engine.notify_knowing("T1", NotificationKind::WhereIsWhat, "art:S1:Q1");
  engine.notify_knowing("T1", NotificationKind::WhoHasWhat, "F1");
  const auto& notifications = engine.state().notifications;
  REQUIRE(notifications.size() >= 2);
  const Notification& where = notifications[notifications.size() - 2];
  CHECK(where.kind == NotificationKind::WhereIsWhat);
  CHECK(where.body.at("author") == "S1");
  const Notification& who = notifications.back();
  CHECK(who.kind == NotificationKind::WhoHasWhat);
  CHECK(who.body.at("worker") == "F1");
}

TEST_CASE("unreferenced artifacts are held by their author alone") {
  Engine engine;
  engine.begin_run(testing_setup::engine_config());
  testing_setup::bootstrap_communities(engine);
  testing_setup::register_many(engine, "S", 1, "students");
  Clo clo{"CLO-1", "", "c"};
  Question question;
  question.id = "Q1";
  question.marks_lo = 0;
  question.marks_hi = 10;
  question.teacher_clos = {"CLO-1"};
  engine.create_assessment("exam", "c", {clo}, {question});
  engine.upload_answer_item("S1", "Q1", "art:lonely");
  Json where = engine.where_is_what("art:lonely");
  CHECK(where.at("holders") == std::set<std::string>{"S1"});
  CHECK(where.at("vabs").empty());
}

TEST_CASE("post-run invariant harness passes on clean engine histories") {
  testing_setup::DriveSpec spec;
  spec.students = 3;
  spec.faculty = 3;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 3);
  Engine engine = testing_setup::drive_to_grading(spec);
  testing_setup::grade_everything(engine, 5);
  engine.publish("exam", AggregationPolicy::Average, "T1");
  engine.record_lesson_learned("T1", "exam", "ok", {}, "none");

  std::vector<std::string> violations = check_invariants(engine.log());
  for (const auto& violation : violations) MESSAGE(violation);
  CHECK(violations.empty());
}

TEST_CASE("the harness flags tampered logs") {
  testing_setup::DriveSpec spec;
  spec.students = 2;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  testing_setup::grade_everything(engine, 5);
  std::vector<MetaEvent> log = engine.log();

  // Tamper: attribute a grade to a grader who never held the item.
  for (auto& event : log) {
    if (event.kind == ev::grade_recorded) {
      event.payload["grader"] = "S1";  // unassigned grader
      break;
    }
  }
  std::vector<std::string> violations = check_invariants(log);
  CHECK_FALSE(violations.empty());
}
