#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crowdkm/engine.hpp"
#include "crowdkm/scenario.hpp"

namespace testing_oracles {

// Brute-force fold, written independently of aggregate_item: walks the
// multiset once per policy with no shared code path.
inline crowdkm::Rational fold_max(const std::vector<int>& marks) {
  crowdkm::Rational best(marks.front());
  for (int mark : marks) {
    if (crowdkm::Rational(mark) > best) best = crowdkm::Rational(mark);
  }
  return best;
}

inline crowdkm::Rational fold_min(const std::vector<int>& marks) {
  crowdkm::Rational best(marks.front());
  for (int mark : marks) {
    if (crowdkm::Rational(mark) < best) best = crowdkm::Rational(mark);
  }
  return best;
}

inline crowdkm::Rational fold_average(const std::vector<int>& marks) {
  crowdkm::Rational sum(0);
  for (int mark : marks) sum += crowdkm::Rational(mark);
  return sum / crowdkm::Rational(static_cast<std::int64_t>(marks.size()));
}

// Set-difference oracle for gap reports.
inline std::set<std::string> minus(const std::set<std::string>& a,
                                   const std::set<std::string>& b) {
  std::set<std::string> out;
  for (const auto& value : a) {
    if (!b.count(value)) out.insert(value);
  }
  return out;
}

// Linear-scan oracle for cloudlet selectors.
inline std::set<std::string> scan_matching(
    const std::map<std::string, crowdkm::Worker>& workers,
    const crowdkm::CloudletSelector& selector) {
  std::set<std::string> out;
  for (const auto& [id, worker] : workers) {
    if (!worker.active) continue;
    bool ok = true;
    for (auto role : selector.roles) {
      if (!worker.roles.count(role)) ok = false;
    }
    for (const auto& skill : selector.skills) {
      if (!worker.skill_tags.count(skill)) ok = false;
    }
    if (!selector.communities.empty()) {
      bool any = false;
      for (const auto& community : selector.communities) {
        if (worker.communities.count(community)) any = true;
      }
      if (!any) ok = false;
    }
    if (ok) out.insert(id);
  }
  return out;
}

}  // namespace testing_oracles

namespace testing_setup {

using crowdkm::Json;

// Minimal engine bootstrap: canonical workflow over the three communities
// plus a staff community, no adaptation rules.
inline crowdkm::EngineConfig engine_config(std::uint64_t seed = 1,
                                           std::vector<crowdkm::AdaptationRuleCfg> rules = {}) {
  crowdkm::EngineConfig config;
  config.seed = seed;
  config.referral_bonus = crowdkm::Rational(1, 4);
  config.rules = std::move(rules);
  config.workflow_name = "assessment-6stage";
  config.workflow_stages =
      crowdkm::canonical_workflow("students", "staff", {"faculty", "alumni"}).stages;
  config.raw = Json{{"name", "test"}};
  return config;
}

inline void bootstrap_communities(crowdkm::Engine& engine) {
  engine.create_community("students", crowdkm::CommunityKind::Students);
  engine.create_community("faculty", crowdkm::CommunityKind::Faculty);
  engine.create_community("alumni", crowdkm::CommunityKind::Alumni);
  engine.create_community("staff", crowdkm::CommunityKind::Custom, "teaching staff");
}

inline void register_many(crowdkm::Engine& engine, const std::string& prefix, int count,
                          const std::string& community) {
  for (int i = 1; i <= count; ++i) {
    engine.register_worker(prefix + std::to_string(i), community,
                           {crowdkm::WorkerRole::ComputeUnit}, {});
  }
}

struct DriveSpec {
  int students = 2;
  int faculty = 2;
  int alumni = 0;
  int questions = 1;
  crowdkm::DistributionCriteria criteria;
  std::vector<crowdkm::AdaptationRuleCfg> rules;
  std::uint64_t seed = 1;
};

// Drives a fresh engine through T-1..T-3 so grade tasks sit in Offered:
// registrations, uploads, self-reviews, criteria, machine generation.
inline crowdkm::Engine drive_to_grading(const DriveSpec& spec) {
  using namespace crowdkm;
  Engine engine;
  engine.begin_run(engine_config(spec.seed, spec.rules));
  bootstrap_communities(engine);
  register_many(engine, "S", spec.students, "students");
  register_many(engine, "F", spec.faculty, "faculty");
  register_many(engine, "A", spec.alumni, "alumni");
  engine.register_worker("T1", "staff", {WorkerRole::ComputeUnit}, {});

  std::vector<Clo> clos = {{"CLO-1", "first", "course"}, {"CLO-2", "second", "course"}};
  std::vector<Question> questions;
  for (int q = 1; q <= spec.questions; ++q) {
    Question question;
    question.id = "Q" + std::to_string(q);
    question.marks_lo = 0;
    question.marks_hi = 10;
    question.teacher_clos = {"CLO-1"};
    questions.push_back(question);
  }
  engine.create_assessment("exam", "course", clos, questions);
  engine.instantiate_process("exam");

  for (int s = 1; s <= spec.students; ++s) {
    std::string student = "S" + std::to_string(s);
    for (int q = 1; q <= spec.questions; ++q) {
      std::string question = "Q" + std::to_string(q);
      engine.upload_answer_item(student, question, "art:" + student + ":" + question);
    }
  }
  for (int s = 1; s <= spec.students; ++s) {
    std::string student = "S" + std::to_string(s);
    for (int q = 1; q <= spec.questions; ++q) {
      engine.submit_self_review(student, "Q" + std::to_string(q), "looked fine", {"CLO-1"},
                                "none");
    }
  }
  engine.set_distribution_criteria("exam", spec.criteria, "T1");
  engine.transition("T-3:exam:coordinator", TaskEvent::Accept, "T1");
  engine.transition("T-3:exam:coordinator", TaskEvent::Start, "T1");
  engine.transition("T-3:exam:coordinator", TaskEvent::Complete, "T1");
  return engine;
}

inline crowdkm::DistributionCriteria faculty_only_criteria(int redundancy, int min_graders,
                                                           int r_max) {
  crowdkm::DistributionCriteria criteria;
  criteria.proportions = {{"faculty", crowdkm::Rational(1)}};
  criteria.redundancy = redundancy;
  criteria.min_graders = min_graders;
  criteria.r_max = r_max;
  return criteria;
}

// Grades every open grade task to completion with fixed marks.
inline void grade_everything(crowdkm::Engine& engine, int marks) {
  using namespace crowdkm;
  for (;;) {
    bool progressed = false;
    std::vector<std::pair<std::string, std::string>> todo;  // (grader, item)
    const AssessmentState& assessment = engine.state().assessments.at("exam");
    for (const auto& [vab_id, vab] : assessment.vabs) {
      const TaskInstance& task = engine.state().tasks.at(vab.task);
      if (task_state_terminal(task.state)) continue;
      if (task.state == TaskState::Offered) {
        engine.transition(vab.task, TaskEvent::Accept, vab.grader);
        progressed = true;
      }
      for (const auto& item : vab.items) {
        if (!assessment.grades.count("grade:" + item + ":" + vab.grader)) {
          todo.emplace_back(vab.grader, item);
        }
      }
    }
    for (const auto& [grader, item] : todo) {
      engine.record_grade(grader, item, marks, {}, "checked");
      progressed = true;
    }
    if (!progressed) break;
  }
}

// A small scenario config as JSON; tweak fields per test.
inline Json small_scenario(int students, int faculty, int alumni, int questions) {
  Json question_list = Json::array();
  for (int i = 1; i <= questions; ++i) {
    question_list.push_back(Json{{"id", "Q" + std::to_string(i)},
                                 {"marks_range", Json::array({0, 10})},
                                 {"clos", Json::array({"CLO-1", "CLO-2"})}});
  }
  return Json{
      {"schema_version", 1},
      {"name", "small"},
      {"seed", 7},
      {"communities",
       Json::array({Json{{"id", "students"}, {"kind", "Students"}},
                    Json{{"id", "faculty"}, {"kind", "Faculty"}},
                    Json{{"id", "alumni"}, {"kind", "Alumni"}},
                    Json{{"id", "staff"}, {"kind", "Custom"}, {"label", "teacher"}}})},
      {"worker_groups",
       Json::array(
           {Json{{"prefix", "S"}, {"count", students}, {"community", "students"},
                 {"roles", Json::array({"ComputeUnit"})}, {"behavior", "student"}},
            Json{{"prefix", "F"}, {"count", faculty}, {"community", "faculty"},
                 {"roles", Json::array({"ComputeUnit", "StorageRecallUnit"})},
                 {"behavior", "grader"}},
            Json{{"prefix", "A"}, {"count", alumni}, {"community", "alumni"},
                 {"roles", Json::array({"ComputeUnit"})}, {"behavior", "grader"}},
            Json{{"prefix", "T"}, {"count", 1}, {"community", "staff"},
                 {"roles", Json::array({"ComputeUnit"})}, {"behavior", "coordinator"}}})},
      {"behaviors",
       Json{{"student", Json{{"availability_prob", 1.0}, {"decline_prob", 0.0},
                             {"latency", Json::array({1, 3})},
                             {"tagging_accuracy", 0.8}}},
            {"grader", Json{{"availability_prob", 1.0}, {"decline_prob", 0.0},
                            {"forward_prob", 0.0}, {"latency", Json::array({1, 5})},
                            {"noise", Json::array({-1, 1})}, {"tagging_accuracy", 0.9}}},
            {"coordinator", Json{{"availability_prob", 1.0}, {"decline_prob", 0.0},
                                 {"latency", Json::array({1, 2})}}}}},
      {"assessment",
       Json{{"id", "exam-1"},
            {"course", "course-101"},
            {"clos", Json::array({Json{{"id", "CLO-1"}, {"description", "first objective"}},
                                  Json{{"id", "CLO-2"}, {"description", "second objective"}},
                                  Json{{"id", "CLO-3"}, {"description", "third objective"}}})},
            {"questions", question_list},
            {"true_scores",
             Json{{"generator", Json{{"seed", 99}, {"uniform", Json::array({3, 9})}}}}}}},
      {"distribution", Json{{"proportions", Json{{"faculty", "1/2"}, {"alumni", "1/2"}}},
                            {"redundancy", 2},
                            {"min_graders", 2},
                            {"r_max", 3}}},
      {"aggregation_policy", "average"},
      {"adaptation_rules", Json::array()},
      {"credit_weights", Json{{"Grade", "1"}}},
      {"referral_bonus", "1/4"},
      {"workflow", "canonical"},
  };
}

}  // namespace testing_setup
