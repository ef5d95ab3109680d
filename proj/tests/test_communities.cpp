#include <doctest.h>

#include "crowdkm/engine.hpp"
#include "crowdkm/errors.hpp"
#include "helpers.hpp"

using namespace crowdkm;

TEST_CASE("self-registration grows communities to the recruited sizes") {
  Engine engine;
  engine.begin_run(testing_setup::engine_config());
  testing_setup::bootstrap_communities(engine);
  testing_setup::register_many(engine, "S", 127, "students");
  testing_setup::register_many(engine, "F", 4, "faculty");
  CHECK(engine.state().communities.at("students").members.size() == 127);
  CHECK(engine.state().communities.at("faculty").members.size() == 4);
  CHECK(engine.state().workers.at("S1").self_registered);
}

TEST_CASE("registration errors") {
  Engine engine;
  engine.begin_run(testing_setup::engine_config());
  testing_setup::bootstrap_communities(engine);
  try {
    engine.register_worker("W1", "ghosts", {WorkerRole::ComputeUnit}, {});
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::UnknownCommunity);
  }
  engine.register_worker("W1", "students", {WorkerRole::ComputeUnit}, {});
  try {
    engine.register_worker("W1", "students", {WorkerRole::ComputeUnit}, {});
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::AlreadyRegistered);
  }
}

TEST_CASE("forwarding a grading task registers the invitee and re-offers") {
  testing_setup::DriveSpec spec;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);

  std::string task = "T-4:vab:exam:F1";
  REQUIRE(engine.state().tasks.count(task) == 1);
  REQUIRE(engine.state().tasks.at(task).state == TaskState::Offered);
  std::size_t faculty_before = engine.state().communities.at("faculty").members.size();

  const Worker& invitee = engine.forward_invite("F1", "F1-friend", task);
  CHECK(invitee.communities == std::set<std::string>{"faculty"});
  CHECK_FALSE(invitee.self_registered);
  CHECK(invitee.forwarded_by == "F1");
  CHECK(engine.state().communities.at("faculty").members.size() == faculty_before + 1);
  CHECK(engine.state().tasks.at(task).state == TaskState::Offered);
  CHECK(engine.state().tasks.at(task).assignee == "F1-friend");
  // The bundle travels with the task.
  CHECK(engine.state().assessments.at("exam").vabs.at("vab:exam:F1").grader == "F1-friend");
}

TEST_CASE("forwarding by a non-assignee is rejected") {
  testing_setup::DriveSpec spec;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  try {
    engine.forward_invite("F2", "friend", "T-4:vab:exam:F1");
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::NotAssignee);
  }
  try {
    engine.forward_invite("F1", "F2", "T-4:vab:exam:F1");  // existing worker
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::AlreadyRegistered);
  }
}

TEST_CASE("a chain of three forwards grows the community by three with provenance") {
  testing_setup::DriveSpec spec;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);
  std::string task = "T-4:vab:exam:F1";
  std::size_t before = engine.state().communities.at("faculty").members.size();

  engine.forward_invite("F1", "X1", task);
  engine.forward_invite("X1", "X2", task);
  engine.forward_invite("X2", "X3", task);

  CHECK(engine.state().communities.at("faculty").members.size() == before + 3);
  CHECK(engine.state().workers.at("X1").forwarded_by == "F1");
  CHECK(engine.state().workers.at("X2").forwarded_by == "X1");
  CHECK(engine.state().workers.at("X3").forwarded_by == "X2");
  // Provenance chain terminates at a self-registered worker.
  std::string cursor = "X3";
  int hops = 0;
  while (!engine.state().workers.at(cursor).self_registered) {
    cursor = engine.state().workers.at(cursor).forwarded_by;
    ++hops;
    REQUIRE(hops < 10);
  }
  CHECK(cursor == "F1");
}

TEST_CASE("cloudlets snapshot the matching workers") {
  Engine engine;
  engine.begin_run(testing_setup::engine_config());
  testing_setup::bootstrap_communities(engine);
  for (int i = 1; i <= 10; ++i) {
    std::set<std::string> skills;
    std::set<WorkerRole> roles{WorkerRole::StorageRecallUnit};
    if (i % 2 == 0) roles.insert(WorkerRole::ComputeUnit);
    if (i <= 6 && i % 2 == 0) skills.insert("CLO-3");
    if (i > 8) skills.insert("CLO-3");  // W9 is storage-only, W10 also computes
    engine.register_worker("W" + std::to_string(i), i <= 5 ? "faculty" : "alumni", roles,
                           skills);
  }

  SUBCASE("skill and role conjunction matches the scan oracle") {
    CloudletSelector selector;
    selector.roles = {WorkerRole::ComputeUnit};
    selector.skills = {"CLO-3"};
    const Cloudlet& cloudlet = engine.form_cloudlet("cl-skill", selector);
    CHECK(cloudlet.members == testing_oracles::scan_matching(engine.state().workers, selector));
    CHECK(cloudlet.members == std::set<std::string>{"W10", "W2", "W4", "W6"});
  }
  SUBCASE("selector matching nothing yields an empty cloudlet") {
    CloudletSelector selector;
    selector.skills = {"CLO-99"};
    CHECK(engine.form_cloudlet("cl-none", selector).members.empty());
  }
  SUBCASE("community identity filter reproduces the member set") {
    CloudletSelector selector;
    selector.communities = {"faculty"};
    const Cloudlet& cloudlet = engine.form_cloudlet("cl-fac", selector);
    CHECK(cloudlet.members == engine.state().communities.at("faculty").members);
  }
  SUBCASE("snapshot semantics: later registrations do not join") {
    CloudletSelector selector;
    selector.communities = {"alumni"};
    const Cloudlet& cloudlet = engine.form_cloudlet("cl-al", selector);
    std::set<std::string> frozen = cloudlet.members;
    engine.register_worker("W99", "alumni", {WorkerRole::ComputeUnit}, {});
    CHECK(engine.state().cloudlets.at("cl-al").members == frozen);
  }
}

TEST_CASE("deactivation keeps history but removes workers from new cloudlets") {
  Engine engine;
  engine.begin_run(testing_setup::engine_config());
  testing_setup::bootstrap_communities(engine);
  testing_setup::register_many(engine, "F", 3, "faculty");
  engine.deactivate_worker("F2");
  CHECK_FALSE(engine.state().workers.at("F2").active);
  // Member sets never shrink.
  CHECK(engine.state().communities.at("faculty").members.size() == 3);
  CloudletSelector selector;
  selector.communities = {"faculty"};
  CHECK(engine.form_cloudlet("cl", selector).members == std::set<std::string>{"F1", "F3"});
}
