#include <doctest.h>

#include <algorithm>

#include "crowdkm/allocation.hpp"
#include "crowdkm/engine.hpp"
#include "crowdkm/errors.hpp"
#include "crowdkm/rng.hpp"
#include "helpers.hpp"

using namespace crowdkm;

namespace {

// Exhaustive constraint check over an emitted assignment.
void check_assignment(const VabAssignment& assignment,
                      const std::map<std::string, std::string>& items, int redundancy) {
  std::map<std::string, std::set<std::string>> graders_per_item;
  for (const auto& [grader, assigned] : assignment.items_by_grader) {
    for (const auto& item : assigned) {
      CHECK(items.at(item) != grader);  // never the author
      CHECK(graders_per_item[item].insert(grader).second);  // never twice
    }
  }
  for (const auto& [item, author] : items) {
    CHECK(graders_per_item[item].size() == static_cast<std::size_t>(redundancy));
  }
}

}  // namespace

TEST_CASE("criteria validation") {
  DistributionCriteria criteria;
  criteria.proportions = {{"faculty", Rational(1, 2)}, {"alumni", Rational(1, 2)}};
  criteria.redundancy = 2;
  criteria.min_graders = 3;
  criteria.r_max = 3;
  CHECK_NOTHROW(criteria.validate());

  SUBCASE("proportions must sum to one") {
    criteria.proportions = {{"faculty", Rational(9, 10)}};
    try {
      criteria.validate();
      CHECK(false);
    } catch (const KmError& error) {
      CHECK(error.code() == Errc::InvalidProportions);
    }
  }
  SUBCASE("redundancy must be at least one") {
    criteria.redundancy = 0;
    try {
      criteria.validate();
      CHECK(false);
    } catch (const KmError& error) {
      CHECK(error.code() == Errc::InvalidProportions);
    }
  }
  SUBCASE("r_max cannot drop below redundancy") {
    criteria.r_max = 1;
    CHECK_THROWS_AS(criteria.validate(), KmError);
  }
}

TEST_CASE("largest-remainder apportionment") {
  std::map<std::string, Rational> proportions = {{"a", Rational(7, 10)}, {"b", Rational(3, 10)}};
  auto quotas = apportion_largest_remainder(proportions, 10);
  CHECK(quotas["a"] == 7);
  CHECK(quotas["b"] == 3);

  proportions = {{"a", Rational(1, 3)}, {"b", Rational(1, 3)}, {"c", Rational(1, 3)}};
  quotas = apportion_largest_remainder(proportions, 10);
  CHECK(quotas["a"] + quotas["b"] + quotas["c"] == 10);
  // Equal remainders break ties by community id.
  CHECK(quotas["a"] == 4);
  CHECK(quotas["b"] == 3);
  CHECK(quotas["c"] == 3);
}

TEST_CASE("generation satisfies redundancy, distinctness and load balance") {
  DistributionCriteria criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  std::map<std::string, std::string> items = {{"i1", "s1"}, {"i2", "s2"},
                                              {"i3", "s3"}, {"i4", "s4"}};
  std::map<std::string, std::vector<std::string>> graders = {
      {"faculty", {"g1", "g2", "g3", "g4"}}};

  VabAssignment assignment = generate_assignment(items, graders, criteria, 42);
  check_assignment(assignment, items, 2);
  // 8 assignments over 4 graders: everyone holds exactly 2.
  int total = 0;
  for (const auto& [grader, assigned] : assignment.items_by_grader) {
    CHECK(assigned.size() == 2);
    total += static_cast<int>(assigned.size());
  }
  CHECK(total == 8);
}

TEST_CASE("one grader with r=1 receives every item") {
  DistributionCriteria criteria = testing_setup::faculty_only_criteria(1, 1, 1);
  std::map<std::string, std::string> items = {{"i1", "s1"}, {"i2", "s2"}, {"i3", "s3"}};
  std::map<std::string, std::vector<std::string>> graders = {{"faculty", {"solo"}}};
  VabAssignment assignment = generate_assignment(items, graders, criteria, 1);
  REQUIRE(assignment.items_by_grader.count("solo"));
  CHECK(assignment.items_by_grader.at("solo").size() == 3);
}

TEST_CASE("pigeonhole infeasibility is an error at generation time") {
  DistributionCriteria criteria = testing_setup::faculty_only_criteria(3, 2, 3);
  std::map<std::string, std::string> items = {{"i1", "s1"}};
  std::map<std::string, std::vector<std::string>> graders = {{"faculty", {"g1", "g2"}}};
  try {
    generate_assignment(items, graders, criteria, 1);
    CHECK(false);
  } catch (const KmError& error) {
    CHECK(error.code() == Errc::InfeasibleRedundancy);
  }
}

TEST_CASE("generation is a deterministic function of inputs and seed") {
  DistributionCriteria criteria;
  criteria.proportions = {{"faculty", Rational(1, 2)}, {"alumni", Rational(1, 2)}};
  criteria.redundancy = 2;
  criteria.min_graders = 2;
  criteria.r_max = 3;
  std::map<std::string, std::string> items;
  for (int i = 0; i < 12; ++i) items["item" + std::to_string(i)] = "author" + std::to_string(i);
  std::map<std::string, std::vector<std::string>> graders = {
      {"faculty", {"f1", "f2", "f3"}}, {"alumni", {"a1", "a2", "a3"}}};

  VabAssignment first = generate_assignment(items, graders, criteria, 99);
  VabAssignment second = generate_assignment(items, graders, criteria, 99);
  CHECK(first.items_by_grader == second.items_by_grader);
  CHECK(first.share_by_community == second.share_by_community);

  VabAssignment other_seed = generate_assignment(items, graders, criteria, 100);
  check_assignment(other_seed, items, 2);
}

TEST_CASE("community shares follow the proportions by largest remainder") {
  DistributionCriteria criteria;
  criteria.proportions = {{"faculty", Rational(7, 10)}, {"alumni", Rational(3, 10)}};
  criteria.redundancy = 1;
  criteria.min_graders = 1;
  criteria.r_max = 1;
  std::map<std::string, std::string> items;
  for (int i = 0; i < 10; ++i) items["item" + std::to_string(i)] = "author";
  std::map<std::string, std::vector<std::string>> graders = {
      {"faculty", {"f1", "f2"}}, {"alumni", {"a1", "a2"}}};
  VabAssignment assignment = generate_assignment(items, graders, criteria, 5);
  CHECK(assignment.share_by_community.at("faculty") == 7);
  CHECK(assignment.share_by_community.at("alumni") == 3);
}

TEST_CASE("authors are skipped even when they are graders") {
  DistributionCriteria criteria = testing_setup::faculty_only_criteria(1, 1, 1);
  std::map<std::string, std::string> items = {{"i1", "g1"}, {"i2", "g2"}};
  std::map<std::string, std::vector<std::string>> graders = {{"faculty", {"g1", "g2"}}};
  VabAssignment assignment = generate_assignment(items, graders, criteria, 3);
  check_assignment(assignment, items, 1);
  CHECK(assignment.items_by_grader.at("g1") == std::vector<std::string>{"i2"});
  CHECK(assignment.items_by_grader.at("g2") == std::vector<std::string>{"i1"});
}

TEST_CASE("balance property: conflict-free random instances stay within one item") {
  Rng rng(77, "balance-property");
  for (int trial = 0; trial < 50; ++trial) {
    int grader_count = 2 + static_cast<int>(rng.below(5));
    int item_count = 1 + static_cast<int>(rng.below(20));
    int redundancy = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(grader_count)));
    DistributionCriteria criteria = testing_setup::faculty_only_criteria(
        redundancy, 1, redundancy);
    std::map<std::string, std::string> items;
    for (int i = 0; i < item_count; ++i) items["i" + std::to_string(i)] = "external-author";
    std::vector<std::string> names;
    for (int g = 0; g < grader_count; ++g) names.push_back("g" + std::to_string(g));
    std::map<std::string, std::vector<std::string>> graders = {{"faculty", names}};

    VabAssignment assignment =
        generate_assignment(items, graders, criteria, rng.next_u64());
    check_assignment(assignment, items, redundancy);
    std::size_t lo = items.size() + 1;
    std::size_t hi = 0;
    for (const auto& name : names) {
      auto it = assignment.items_by_grader.find(name);
      std::size_t load = it == assignment.items_by_grader.end() ? 0 : it->second.size();
      lo = std::min(lo, load);
      hi = std::max(hi, load);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("decline with spare capacity preserves full redundancy") {
  testing_setup::DriveSpec spec;
  spec.students = 4;
  spec.faculty = 3;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 3);
  Engine engine = testing_setup::drive_to_grading(spec);

  engine.decline_task("T-4:vab:exam:F1", "F1");

  const AssessmentState& assessment = engine.state().assessments.at("exam");
  for (const auto& [item, entry] : assessment.coverage) {
    CHECK(entry.assigned_graders.size() == 2);
    CHECK(entry.target == 2);
    CHECK_FALSE(entry.assigned_graders.count("F1"));
  }
  int degradations = 0;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::coverage_degraded) ++degradations;
  }
  CHECK(degradations == 0);
}

TEST_CASE("decline at the pigeonhole limit degrades the target with events") {
  testing_setup::DriveSpec spec;
  spec.students = 2;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);

  engine.decline_task("T-4:vab:exam:F2", "F2");

  const AssessmentState& assessment = engine.state().assessments.at("exam");
  int degradations = 0;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::coverage_degraded) ++degradations;
  }
  CHECK(degradations == static_cast<int>(assessment.items.size()));
  for (const auto& [item, entry] : assessment.coverage) {
    CHECK(entry.target == 1);
    CHECK(entry.assigned_graders == std::set<std::string>{"F1"});
  }
}

TEST_CASE("dropping below min_graders raises a threshold violation") {
  testing_setup::DriveSpec spec;
  spec.students = 2;
  spec.faculty = 3;
  spec.criteria = testing_setup::faculty_only_criteria(2, 3, 3);
  Engine engine = testing_setup::drive_to_grading(spec);

  engine.decline_task("T-4:vab:exam:F3", "F3");
  int violations = 0;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::threshold_violation) ++violations;
  }
  CHECK(violations == 1);
  // The coordinator was notified, referencing the causing event.
  bool notified = false;
  for (const auto& notification : engine.state().notifications) {
    if (notification.kind == NotificationKind::Violation && notification.recipient == "T1")
      notified = true;
  }
  CHECK(notified);
}

TEST_CASE("coverage progress is an exact rational") {
  testing_setup::DriveSpec spec;
  spec.students = 4;
  spec.faculty = 4;
  spec.criteria = testing_setup::faculty_only_criteria(2, 2, 2);
  Engine engine = testing_setup::drive_to_grading(spec);

  CHECK(engine.coverage("exam").progress == Rational(0));

  // Record exactly five grades across the assignment (counting oracle: 5/8).
  const AssessmentState& assessment = engine.state().assessments.at("exam");
  std::vector<std::pair<std::string, std::string>> pairs;  // (grader, item)
  for (const auto& [vab_id, vab] : assessment.vabs) {
    for (const auto& item : vab.items) pairs.emplace_back(vab.grader, item);
  }
  std::sort(pairs.begin(), pairs.end());
  REQUIRE(pairs.size() == 8);
  std::set<std::string> accepted;
  for (int i = 0; i < 5; ++i) {
    const auto& [grader, item] = pairs[static_cast<std::size_t>(i)];
    if (accepted.insert(grader).second) {
      engine.transition("T-4:vab:exam:" + grader, TaskEvent::Accept, grader);
    }
    engine.record_grade(grader, item, 5, {}, "");
  }
  CHECK(engine.coverage("exam").progress == Rational(5, 8));

  testing_setup::grade_everything(engine, 5);
  CHECK(engine.coverage("exam").progress == Rational(1));
}

TEST_CASE("machine step degrades infeasible redundancy and the run proceeds") {
  testing_setup::DriveSpec spec;
  spec.students = 2;
  spec.faculty = 2;
  spec.criteria = testing_setup::faculty_only_criteria(3, 2, 3);  // r=3, only 2 graders
  Engine engine = testing_setup::drive_to_grading(spec);

  const AssessmentState& assessment = engine.state().assessments.at("exam");
  CHECK(assessment.vabs.size() == 2);
  int degradations = 0;
  for (const auto& event : engine.log()) {
    if (event.kind == ev::coverage_degraded) ++degradations;
  }
  CHECK(degradations == static_cast<int>(assessment.items.size()));
  for (const auto& [item, entry] : assessment.coverage) {
    CHECK(entry.target == 2);
    CHECK(entry.assigned_graders.size() == 2);
  }
}
