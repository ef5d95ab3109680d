#include "crowdkm/invariants.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "crowdkm/errors.hpp"
#include "crowdkm/rational.hpp"
#include "crowdkm/replay.hpp"
#include "crowdkm/workflow.hpp"

namespace crowdkm {

namespace {

struct ItemFacts {
  std::string assessment;
  std::string author;
  std::string question;
  std::uint64_t uploaded_seq = 0;
  std::optional<std::uint64_t> first_grade_seq;
};

struct VabFacts {
  std::string assessment;
  std::string grader;
  std::vector<std::string> items;
  std::string task;
  bool open = true;
};

}  // namespace

std::vector<std::string> check_invariants(const std::vector<MetaEvent>& log) {
  std::vector<std::string> violations;
  auto flag = [&](const std::string& message) { violations.push_back(message); };

  if (log.empty()) {
    flag("log is empty");
    return violations;
  }

  // The replayed state is the reference for balance/ranking comparisons.
  EngineState state;
  try {
    for (const auto& event : log) apply_event(state, event);
  } catch (const KmError& error) {
    flag(std::string("replay failed: ") + error.what());
    return violations;
  }

  EngineConfig config;
  std::map<std::string, TaskKind> stage_kind;
  if (log.front().kind == ev::run_config) {
    config = EngineConfig::from_json(log.front().payload);
    for (const auto& stage : config.workflow_stages) stage_kind[stage.id] = stage.kind;
  } else {
    flag("log does not start with run.config");
    return violations;
  }
  std::map<std::string, int> fire_limits;
  for (const auto& rule : config.rules) fire_limits[rule.id] = rule.fire_limit;

  // Independently re-derived facts.
  std::uint64_t expected_seq = 1;
  SimTime last_time = 0;
  std::map<std::string, std::pair<TaskState, std::string>> task_state;  // id -> (state, stage)
  std::map<std::string, std::string> task_forwarder;
  std::map<std::string, ItemFacts> items;
  std::map<std::string, std::string> item_index;  // assessment|student|question -> item
  std::map<std::string, VabFacts> vabs;
  std::map<std::string, std::string> vab_of_task;
  std::map<std::string, int> open_vabs;  // "assessment|grader" -> open bundle count
  std::map<std::string, std::set<std::string>> assigned;   // item -> graders
  std::map<std::string, std::set<std::string>> completed;  // item -> graders
  std::map<std::string, int> targets;
  std::set<std::string> degraded;
  std::map<std::string, DistributionCriteria> criteria;     // per assessment
  std::map<std::string, std::uint64_t> published_seq;       // per assessment
  std::map<std::string, std::uint64_t> grade_stage_done;    // per assessment
  std::optional<std::uint64_t> setdist_completed_seq;
  std::map<std::string, int> rule_fire_counts;               // rule|subject
  std::map<std::string, Rational> credit;
  std::map<std::string, std::map<std::string, int>> topics;
  std::map<std::string, std::set<std::string>> question_clos;  // assessment|question

  auto bump_topics = [&](const std::set<std::string>& clos, const std::string& worker) {
    for (const auto& clo : clos) topics[clo][worker] += 1;
  };
  auto add_assignment = [&](const std::string& item, const std::string& grader,
                            const std::string& assessment, std::uint64_t seq) {
    auto facts = items.find(item);
    if (facts == items.end()) {
      flag("seq " + std::to_string(seq) + ": assignment of unknown item " + item);
      return;
    }
    if (facts->second.author == grader)
      flag("seq " + std::to_string(seq) + ": self-grading assignment of " + item + " to " + grader);
    if (!assigned[item].insert(grader).second)
      flag("seq " + std::to_string(seq) + ": duplicate assignment of " + item + " to " + grader);
    auto criteria_it = criteria.find(assessment);
    if (!targets.count(item) && criteria_it != criteria.end())
      targets[item] = criteria_it->second.redundancy;
    if (criteria_it != criteria.end() &&
        static_cast<int>(assigned[item].size()) > criteria_it->second.r_max) {
      flag("seq " + std::to_string(seq) + ": item " + item + " assigned to " +
           std::to_string(assigned[item].size()) + " graders, r_max " +
           std::to_string(criteria_it->second.r_max));
    }
  };

  for (const auto& event : log) {
    if (event.seq != expected_seq) flag("seq gap at " + std::to_string(event.seq));
    expected_seq = event.seq + 1;
    if (event.sim_time < last_time)
      flag("sim_time regression at seq " + std::to_string(event.seq));
    last_time = event.sim_time;
    const Json& payload = event.payload;

    if (event.kind == ev::task_created) {
      if (task_state.count(event.subject))
        flag("seq " + std::to_string(event.seq) + ": duplicate task id " + event.subject);
      task_state[event.subject] = {TaskState::Created, payload.at("stage").get<std::string>()};
    } else if (event.kind == ev::task_transition) {
      auto it = task_state.find(event.subject);
      if (it == task_state.end()) {
        flag("seq " + std::to_string(event.seq) + ": transition on unknown task " + event.subject);
        continue;
      }
      TaskState from = task_state_from_name(payload.at("from").get<std::string>());
      TaskState to = task_state_from_name(payload.at("to").get<std::string>());
      TaskEvent label = task_event_from_name(payload.at("event").get<std::string>());
      if (it->second.first != from)
        flag("seq " + std::to_string(event.seq) + ": task " + event.subject +
             " transition from wrong state");
      TaskState expected_to;
      if (!transition_legal(from, label, expected_to) || expected_to != to)
        flag("seq " + std::to_string(event.seq) + ": illegal transition on " + event.subject);
      it->second.first = to;

      TaskKind kind = stage_kind.count(it->second.second) ? stage_kind[it->second.second]
                                                          : TaskKind::MachineStep;
      if (label == TaskEvent::Forward) task_forwarder[event.subject] = event.actor;
      if (to == TaskState::Offered && payload.contains("assignee")) {
        auto vab_it = vab_of_task.find(event.subject);
        if (vab_it != vab_of_task.end()) {
          const std::string new_grader = payload.at("assignee").get<std::string>();
          VabFacts& facts = vabs.at(vab_it->second);
          if (facts.grader != new_grader) {
            // Forwarded bundle: exactly this vab's items change hands.
            for (const auto& item : facts.items) {
              assigned[item].erase(facts.grader);
              auto item_facts = items.find(item);
              if (item_facts != items.end() && item_facts->second.author == new_grader)
                flag("seq " + std::to_string(event.seq) + ": forward hands " + item +
                     " to its author");
              if (!assigned[item].insert(new_grader).second)
                flag("seq " + std::to_string(event.seq) + ": forward duplicates grader on " +
                     item);
            }
            open_vabs[facts.assessment + "|" + facts.grader] -= 1;
            if (++open_vabs[facts.assessment + "|" + new_grader] > 1)
              flag("seq " + std::to_string(event.seq) + ": " + new_grader +
                   " holds two open bundles after forward");
            facts.grader = new_grader;
          }
        }
      }
      if (task_state_terminal(to)) {
        auto vab_it = vab_of_task.find(event.subject);
        if (vab_it != vab_of_task.end()) {
          VabFacts& facts = vabs.at(vab_it->second);
          if (facts.open) {
            facts.open = false;
            open_vabs[facts.assessment + "|" + facts.grader] -= 1;
          }
        }
      }
      if (to == TaskState::Completed) {
        if (kind == TaskKind::SetDistribution && !setdist_completed_seq)
          setdist_completed_seq = event.seq;
        if (event.actor != "engine" && !event.actor.empty()) {
          credit[event.actor] += config.weight_for(kind);
        }
        auto forwarder = task_forwarder.find(event.subject);
        if (forwarder != task_forwarder.end() && forwarder->second != event.actor) {
          credit[forwarder->second] += config.referral_bonus;
        }
      }
    } else if (event.kind == ev::stage_completed) {
      const std::string assessment = payload.at("assessment").get<std::string>();
      if (stage_kind.count(event.subject) && stage_kind[event.subject] == TaskKind::Grade &&
          !grade_stage_done.count(assessment)) {
        grade_stage_done[assessment] = event.seq;
      }
    } else if (event.kind == ev::assessment_created) {
      for (const auto& question : payload.at("questions")) {
        std::set<std::string> clos;
        for (const auto& clo : question.at("clos")) clos.insert(clo.get<std::string>());
        question_clos[event.subject + "|" + question.at("id").get<std::string>()] =
            std::move(clos);
      }
    } else if (event.kind == ev::criteria_set) {
      criteria[event.subject] = DistributionCriteria::from_json(payload.at("criteria"));
    } else if (event.kind == ev::item_uploaded) {
      ItemFacts facts;
      facts.assessment = payload.at("assessment").get<std::string>();
      facts.author = payload.at("student").get<std::string>();
      facts.question = payload.at("question").get<std::string>();
      facts.uploaded_seq = event.seq;
      item_index[facts.assessment + "|" + facts.author + "|" + facts.question] = event.subject;
      bump_topics(question_clos[facts.assessment + "|" + facts.question], facts.author);
      items[event.subject] = std::move(facts);
    } else if (event.kind == ev::feedback_submitted) {
      const std::string assessment = payload.at("assessment").get<std::string>();
      const std::string student = payload.at("student").get<std::string>();
      const std::string question = payload.at("question").get<std::string>();
      const std::string phase = payload.at("phase").get<std::string>();
      std::set<std::string> clos = question_clos[assessment + "|" + question];
      if (phase == "pre") {
        auto item_it = item_index.find(assessment + "|" + student + "|" + question);
        if (item_it == item_index.end()) {
          flag("seq " + std::to_string(event.seq) + ": self-review before upload");
        } else if (items[item_it->second].first_grade_seq) {
          flag("seq " + std::to_string(event.seq) + ": self-review after grading started on " +
               item_it->second);
        }
        for (const auto& clo : payload.value("student_clos", Json::array()))
          clos.insert(clo.get<std::string>());
      } else {
        auto published = published_seq.find(assessment);
        if (published == published_seq.end() || event.seq < published->second)
          flag("seq " + std::to_string(event.seq) + ": post-feedback before publish");
      }
      bump_topics(clos, student);
    } else if (event.kind == ev::vab_generated) {
      if (vabs.count(event.subject))
        flag("seq " + std::to_string(event.seq) + ": duplicate vab id " + event.subject);
      VabFacts facts;
      facts.assessment = payload.at("assessment").get<std::string>();
      facts.grader = payload.at("grader").get<std::string>();
      facts.task = payload.at("task").get<std::string>();
      for (const auto& item : payload.at("items")) facts.items.push_back(item.get<std::string>());
      vab_of_task[facts.task] = event.subject;
      for (const auto& item : facts.items) {
        add_assignment(item, facts.grader, facts.assessment, event.seq);
      }
      // One open bundle per grader per assessment at any instant.
      if (++open_vabs[facts.assessment + "|" + facts.grader] > 1)
        flag("seq " + std::to_string(event.seq) + ": " + facts.grader +
             " holds two open bundles");
      vabs[event.subject] = std::move(facts);
    } else if (event.kind == ev::vab_extended) {
      auto vab_it = vabs.find(event.subject);
      if (vab_it == vabs.end()) {
        flag("seq " + std::to_string(event.seq) + ": extension of unknown vab " + event.subject);
        continue;
      }
      if (!vab_it->second.open)
        flag("seq " + std::to_string(event.seq) + ": extension of closed vab " + event.subject);
      for (const auto& item : payload.at("items")) {
        vab_it->second.items.push_back(item.get<std::string>());
        add_assignment(item.get<std::string>(), vab_it->second.grader,
                       vab_it->second.assessment, event.seq);
      }
    } else if (event.kind == ev::item_reassigned) {
      assigned[event.subject].erase(payload.at("from").get<std::string>());
    } else if (event.kind == ev::coverage_degraded) {
      degraded.insert(event.subject);
      targets[event.subject] = payload.at("new_target").get<int>();
    } else if (event.kind == ev::grade_spawned) {
      targets[event.subject] += 1;
    } else if (event.kind == ev::grade_recorded) {
      const std::string assessment = payload.at("assessment").get<std::string>();
      const std::string item = payload.at("item").get<std::string>();
      const std::string grader = payload.at("grader").get<std::string>();
      auto facts = items.find(item);
      if (facts == items.end()) {
        flag("seq " + std::to_string(event.seq) + ": grade on unknown item " + item);
        continue;
      }
      if (!facts->second.first_grade_seq) facts->second.first_grade_seq = event.seq;
      if (!assigned[item].count(grader))
        flag("seq " + std::to_string(event.seq) + ": grade by unassigned grader " + grader);
      if (!completed[item].insert(grader).second)
        flag("seq " + std::to_string(event.seq) + ": duplicate grade by " + grader + " on " + item);
      if (setdist_completed_seq && event.seq < *setdist_completed_seq)
        flag("seq " + std::to_string(event.seq) + ": grade before distribution criteria stage");
      if (!setdist_completed_seq && stage_kind.size() > 1) {
        bool has_setdist = false;
        for (const auto& [sid, kind] : stage_kind) {
          if (kind == TaskKind::SetDistribution) has_setdist = true;
        }
        if (has_setdist)
          flag("seq " + std::to_string(event.seq) + ": grade before SetDistribution completed");
      }
      auto published = published_seq.find(assessment);
      if (published != published_seq.end() && event.seq > published->second)
        flag("seq " + std::to_string(event.seq) + ": grade recorded after publish");
      std::set<std::string> clos =
          question_clos[assessment + "|" + facts->second.question];
      for (const auto& [clo, verdict] : payload.at("annotations").items()) clos.insert(clo);
      bump_topics(clos, grader);
    } else if (event.kind == ev::results_published) {
      const std::string assessment = event.subject;
      published_seq[assessment] = event.seq;
      auto done = grade_stage_done.find(assessment);
      bool has_grade_stage = false;
      for (const auto& [sid, kind] : stage_kind) {
        if (kind == TaskKind::Grade) has_grade_stage = true;
      }
      if (has_grade_stage && state.processes.count(assessment) &&
          (done == grade_stage_done.end() || done->second > event.seq)) {
        flag("seq " + std::to_string(event.seq) + ": publish before grading stage completion");
      }
    } else if (event.kind == ev::rule_fired) {
      rule_fire_counts[payload.at("rule").get<std::string>() + "|" + event.subject] += 1;
    }
  }

  // Coverage: every item either meets its current target or carries a
  // degradation event.
  for (const auto& [item, graders] : assigned) {
    int target = targets.count(item) ? targets.at(item) : 0;
    if (static_cast<int>(graders.size()) != target && !degraded.count(item)) {
      flag("item " + item + ": " + std::to_string(graders.size()) + " assigned, target " +
           std::to_string(target) + ", no degradation recorded");
    }
  }
  for (const auto& [item, graders] : completed) {
    for (const auto& grader : graders) {
      if (!assigned[item].count(grader))
        flag("item " + item + ": completed grader " + grader + " not in assigned set");
    }
  }

  // Rule boundedness.
  for (const auto& [key, count] : rule_fire_counts) {
    const std::string rule_id = key.substr(0, key.find('|'));
    auto limit = fire_limits.find(rule_id);
    if (limit != fire_limits.end() && count > limit->second)
      flag("rule " + key + " fired " + std::to_string(count) + " times, limit " +
           std::to_string(limit->second));
  }

  // Credit: recomputed balances match the replayed ledger, deltas are
  // non-negative, balances non-decreasing by construction.
  for (const auto& [worker, balance] : state.credit_balance) {
    auto recomputed = credit.find(worker);
    Rational expected = recomputed == credit.end() ? Rational(0) : recomputed->second;
    if (!(balance == expected))
      flag("credit mismatch for " + worker + ": ledger " + balance.str() + ", recomputed " +
           expected.str());
  }
  for (const auto& [worker, balance] : credit) {
    if (!state.credit_balance.count(worker) && !balance.is_zero())
      flag("credit missing in ledger for " + worker);
  }
  for (const auto& [worker, entries] : state.credit_entries) {
    for (const auto& entry : entries) {
      if (entry.delta < Rational(0))
        flag("negative credit delta for " + worker + " at seq " + std::to_string(entry.seq));
    }
  }

  // Knowing consistency: incremental index equals the recomputed one.
  if (topics != state.topic_interactions) flag("who-knows-what index mismatch");

  // Score boundedness on the replayed state.
  for (const auto& [assessment_id, assessment] : state.assessments) {
    for (const auto& [key, score] : assessment.final_scores) {
      if (score.contributing_grades.empty()) {
        flag("final score " + key + " has no contributing grades");
        continue;
      }
      int lo = 0;
      int hi = 0;
      bool first = true;
      for (const auto& grade_id : score.contributing_grades) {
        int marks = assessment.grades.at(grade_id).marks;
        if (first) { lo = hi = marks; first = false; }
        lo = std::min(lo, marks);
        hi = std::max(hi, marks);
      }
      if (score.value < Rational(lo) || Rational(hi) < score.value)
        flag("final score " + key + " = " + score.value.str() + " outside [" +
             std::to_string(lo) + "," + std::to_string(hi) + "]");
    }
  }

  return violations;
}

}  // namespace crowdkm
