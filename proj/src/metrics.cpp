#include "crowdkm/metrics.hpp"

#include <filesystem>
#include <fstream>

#include "crowdkm/errors.hpp"

namespace crowdkm {

namespace {

std::string join_set(const std::set<std::string>& values) {
  std::string out;
  for (const auto& value : values) {
    if (!out.empty()) out += "|";
    out += value;
  }
  return out;
}

std::set<std::string> grading_communities(const EngineState& state) {
  std::set<std::string> out;
  for (const auto& stage : state.workflow.stages) {
    if (stage.kind == TaskKind::Grade) {
      out.insert(stage.community_binding.begin(), stage.community_binding.end());
    }
  }
  return out;
}

}  // namespace

RunArtifacts build_artifacts(const EngineState& state, const std::vector<MetaEvent>& log) {
  RunArtifacts artifacts;
  artifacts.events_jsonl = serialize_log(log);
  artifacts.digest = state.digest();

  // Counts scanned straight off the log; every number here is
  // reconstructible by any other consumer.
  int declines = 0;
  int forwards = 0;
  int reassignments = 0;
  int unfilled_losses = 0;
  int degradations = 0;
  int violations = 0;
  int rule_fired = 0;
  int rule_skipped = 0;
  int notifications = 0;
  int grades = 0;
  int spawned = 0;
  std::map<std::string, int> decline_by_worker;
  for (const auto& event : log) {
    if (event.kind == ev::task_transition) {
      const std::string to = event.payload.at("to").get<std::string>();
      if (to == "Declined" || (to == "Cancelled" && event.payload.value("declined", false))) {
        ++declines;
        decline_by_worker[event.actor] += 1;
      }
      if (to == "Forwarded") ++forwards;
    } else if (event.kind == ev::item_reassigned) {
      if (event.payload.at("to").get<std::string>().empty()) ++unfilled_losses;
      else ++reassignments;
    } else if (event.kind == ev::coverage_degraded) {
      ++degradations;
    } else if (event.kind == ev::threshold_violation) {
      ++violations;
    } else if (event.kind == ev::rule_fired) {
      ++rule_fired;
    } else if (event.kind == ev::rule_skipped) {
      ++rule_skipped;
    } else if (event.kind == ev::notification) {
      ++notifications;
    } else if (event.kind == ev::grade_recorded) {
      ++grades;
    } else if (event.kind == ev::grade_spawned) {
      ++spawned;
    }
  }

  // graders.csv: one row per member of a grading community.
  std::set<std::string> grader_communities = grading_communities(state);
  std::string graders_csv = "worker_id,community,items_assigned,items_completed,declines,credit\n";
  std::map<std::string, std::pair<int, int>> load;  // grader -> (assigned, completed)
  for (const auto& [assessment_id, assessment] : state.assessments) {
    for (const auto& [vab_id, vab] : assessment.vabs) {
      load[vab.grader].first += static_cast<int>(vab.items.size());
    }
    for (const auto& [grade_id, grade] : assessment.grades) {
      load[grade.grader].second += 1;
    }
  }
  for (const auto& [worker_id, worker] : state.workers) {
    std::string community;
    for (const auto& candidate : worker.communities) {
      if (grader_communities.count(candidate)) { community = candidate; break; }
    }
    if (community.empty()) continue;
    auto load_it = load.find(worker_id);
    int assigned = load_it == load.end() ? 0 : load_it->second.first;
    int done = load_it == load.end() ? 0 : load_it->second.second;
    auto credit_it = state.credit_balance.find(worker_id);
    std::string balance = credit_it == state.credit_balance.end() ? "0" : credit_it->second.str();
    graders_csv += worker_id + "," + community + "," + std::to_string(assigned) + "," +
                   std::to_string(done) + "," +
                   std::to_string(decline_by_worker.count(worker_id)
                                      ? decline_by_worker.at(worker_id)
                                      : 0) +
                   "," + balance + "\n";
  }
  artifacts.graders_csv = std::move(graders_csv);

  std::string scores_csv = "student,question,policy,final_score,n_grades,min,max\n";
  std::string gaps_csv = "student,question,missing_clos,extra_clos\n";
  Json score_histogram = Json::object();
  int gap_missing_total = 0;
  int gap_extra_total = 0;
  for (const auto& [assessment_id, assessment] : state.assessments) {
    for (const auto& [key, score] : assessment.final_scores) {
      int lo = 0;
      int hi = 0;
      bool first = true;
      for (const auto& grade_id : score.contributing_grades) {
        int marks = assessment.grades.at(grade_id).marks;
        if (first) { lo = hi = marks; first = false; }
        lo = std::min(lo, marks);
        hi = std::max(hi, marks);
      }
      scores_csv += score.student + "," + score.question + "," +
                    aggregation_policy_name(score.policy) + "," + score.value.str() + "," +
                    std::to_string(score.contributing_grades.size()) + "," +
                    std::to_string(lo) + "," + std::to_string(hi) + "\n";
      std::string bucket = score.value.str();
      score_histogram[bucket] = score_histogram.value(bucket, 0) + 1;

      if (assessment.published) {
        GapReport gap = assessment_gap(assessment, score.student, score.question);
        gaps_csv += score.student + "," + score.question + "," + join_set(gap.missing_clos) +
                    "," + join_set(gap.extra_clos) + "\n";
        gap_missing_total += static_cast<int>(gap.missing_clos.size());
        gap_extra_total += static_cast<int>(gap.extra_clos.size());
      }
    }
  }
  artifacts.scores_csv = std::move(scores_csv);
  artifacts.gaps_csv = std::move(gaps_csv);

  Json stages = Json::object();
  for (const auto& [assessment_id, process] : state.processes) {
    Json per = Json::object();
    for (const auto& [stage, at] : process.completed_stages) per[stage] = at;
    stages[assessment_id] = per;
  }
  Json leaderboard = Json::array();
  {
    std::vector<std::pair<std::string, Rational>> entries(state.credit_balance.begin(),
                                                          state.credit_balance.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return b.second < a.second;
      return a.first < b.first;
    });
    for (const auto& [worker, balance] : entries) {
      leaderboard.push_back(Json{{"worker", worker}, {"credit", balance.str()}});
    }
  }

  artifacts.summary =
      Json{{"schema_version", 1},
           {"seed", state.config.seed},
           {"digest", artifacts.digest},
           {"deadlocked", state.deadlocked},
           {"deadlock_report", state.deadlock_report},
           {"stages", stages},
           {"counts", Json{{"events", log.size()},
                           {"declines", declines},
                           {"forwards", forwards},
                           {"reassignments", reassignments},
                           {"unfilled_losses", unfilled_losses},
                           {"degradations", degradations},
                           {"threshold_violations", violations},
                           {"rule_fired", rule_fired},
                           {"rule_skipped", rule_skipped},
                           {"grade_tasks_spawned", spawned},
                           {"notifications", notifications},
                           {"grades", grades}}},
           {"score_histogram", score_histogram},
           {"gap_summary",
            Json{{"total_missing", gap_missing_total}, {"total_extra", gap_extra_total}}},
           {"credit_leaderboard", leaderboard},
           {"effective_config", state.config.raw}};
  return artifacts;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw KmError(Errc::IoError, "cannot write " + path);
  out << body;
  if (!out) throw KmError(Errc::IoError, "write failed for " + path);
}

void write_artifacts(const RunArtifacts& artifacts, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw KmError(Errc::IoError, "cannot create " + dir + ": " + ec.message());
  write_file(dir + "/events.jsonl", artifacts.events_jsonl);
  write_file(dir + "/digest.txt", artifacts.digest + "\n");
  write_file(dir + "/graders.csv", artifacts.graders_csv);
  write_file(dir + "/scores.csv", artifacts.scores_csv);
  write_file(dir + "/gaps.csv", artifacts.gaps_csv);
  write_file(dir + "/summary.json", artifacts.summary.dump(2) + "\n");
}

}  // namespace crowdkm
