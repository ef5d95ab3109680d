#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "crowdkm/engine.hpp"
#include "crowdkm/errors.hpp"
#include "crowdkm/invariants.hpp"
#include "crowdkm/metrics.hpp"
#include "crowdkm/replay.hpp"
#include "crowdkm/scenario.hpp"
#include "crowdkm/sim.hpp"

namespace {

// Exit-code contract: 0 ok, 2 invalid config, 3 unreadable/missing file,
// 4 deadlock report, 5 invariant-harness failure, 6 digest mismatch,
// 7 corrupt log.
constexpr int kOk = 0;
constexpr int kInvalidConfig = 2;
constexpr int kUnreadable = 3;
constexpr int kDeadlock = 4;
constexpr int kInvariantFailure = 5;
constexpr int kDigestMismatch = 6;
constexpr int kCorruptLog = 7;

using crowdkm::Errc;
using crowdkm::KmError;

crowdkm::ScenarioConfig load_config_or_exit(const std::string& path) {
  try {
    return crowdkm::ScenarioConfig::load_file(path);
  } catch (const KmError& error) {
    std::cerr << path << ": " << error.what() << "\n";
    std::exit(error.code() == Errc::IoError ? kUnreadable : kInvalidConfig);
  }
}

void validate_or_exit(const crowdkm::ScenarioConfig& config, const std::string& path) {
  try {
    config.validate();
  } catch (const KmError& error) {
    std::cerr << path << ": " << error.what() << "\n";
    std::exit(kInvalidConfig);
  }
}

int cmd_validate(const std::string& path) {
  crowdkm::ScenarioConfig config = load_config_or_exit(path);
  validate_or_exit(config, path);
  int workers = 0;
  int students = 0;
  std::set<std::string> student_communities;
  for (const auto& community : config.communities) {
    if (community.kind == crowdkm::CommunityKind::Students)
      student_communities.insert(community.id);
  }
  for (const auto& group : config.worker_groups) {
    workers += group.count;
    if (student_communities.count(group.community)) students += group.count;
  }
  std::cout << "config OK: name=" << config.name << " workers=" << workers
            << " expected_items=" << students * config.questions.size()
            << " stages=" << config.workflow_stages().size() << "\n";
  return kOk;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir, const std::string& policy, int redundancy) {
  crowdkm::ScenarioConfig config = load_config_or_exit(config_path);
  std::optional<crowdkm::AggregationPolicy> policy_override;
  if (!policy.empty()) policy_override = crowdkm::aggregation_policy_from_name(policy);
  std::optional<int> redundancy_override;
  if (redundancy > 0) redundancy_override = redundancy;
  config.apply_overrides(seed, policy_override, redundancy_override);
  validate_or_exit(config, config_path);

  crowdkm::RunResult result = crowdkm::run_simulation(config);
  crowdkm::RunArtifacts artifacts = crowdkm::build_artifacts(result.final_state, result.log);
  try {
    crowdkm::write_artifacts(artifacts, out_dir);
  } catch (const KmError& error) {
    std::cerr << error.what() << "\n";
    return kUnreadable;
  }

  std::vector<std::string> violations = crowdkm::check_invariants(result.log);
  if (!violations.empty()) {
    std::cerr << "invariant harness failed:\n";
    for (const auto& violation : violations) std::cerr << "  " << violation << "\n";
    return kInvariantFailure;
  }
  std::cout << "run complete: events=" << result.log.size() << " digest=" << result.digest
            << (result.deadlocked ? " DEADLOCK" : "") << "\n";
  if (result.deadlocked) {
    std::cerr << "deadlock report: " << result.deadlock_report.dump() << "\n";
    return kDeadlock;
  }
  return kOk;
}

int cmd_replay(const std::string& log_path, const std::string& digest_path) {
  std::vector<crowdkm::MetaEvent> events;
  try {
    events = crowdkm::read_log_file(log_path);
  } catch (const KmError& error) {
    std::cerr << error.what() << "\n";
    return error.code() == Errc::IoError ? kUnreadable : kCorruptLog;
  }
  crowdkm::ReplayResult result;
  try {
    result = crowdkm::replay_events(events);
  } catch (const KmError& error) {
    std::cerr << error.what() << "\n";
    return kCorruptLog;
  }
  std::cout << "replayed " << events.size() << " events, digest=" << result.digest << "\n";
  if (!digest_path.empty()) {
    std::ifstream in(digest_path);
    if (!in) {
      std::cerr << "cannot read " << digest_path << "\n";
      return kUnreadable;
    }
    std::string expected;
    in >> expected;
    if (expected != result.digest) {
      std::cerr << "digest mismatch: log folds to " << result.digest << ", recorded "
                << expected << "\n";
      return kDigestMismatch;
    }
  }
  return kOk;
}

int cmd_report(const std::string& run_dir, const std::string& format) {
  const std::string log_path = run_dir + "/events.jsonl";
  if (!std::filesystem::exists(log_path)) {
    std::cerr << "missing run artifact: " << log_path << "\n";
    return kUnreadable;
  }
  std::vector<crowdkm::MetaEvent> events;
  try {
    events = crowdkm::read_log_file(log_path);
  } catch (const KmError& error) {
    std::cerr << error.what() << "\n";
    return error.code() == Errc::IoError ? kUnreadable : kCorruptLog;
  }
  crowdkm::ReplayResult result = crowdkm::replay_events(events);
  crowdkm::RunArtifacts artifacts = crowdkm::build_artifacts(result.state, events);
  try {
    if (format == "csv") {
      crowdkm::write_file(run_dir + "/graders.csv", artifacts.graders_csv);
      crowdkm::write_file(run_dir + "/scores.csv", artifacts.scores_csv);
      crowdkm::write_file(run_dir + "/gaps.csv", artifacts.gaps_csv);
    } else {
      crowdkm::write_file(run_dir + "/summary.json", artifacts.summary.dump(2) + "\n");
    }
  } catch (const KmError& error) {
    std::cerr << error.what() << "\n";
    return kUnreadable;
  }
  std::cout << "report regenerated (" << format << ") in " << run_dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdkm: deterministic engine and simulator for community "
               "crowdsourced assessment workflows"};
  app.require_subcommand(1);

  std::string config_path;
  auto* validate = app.add_subcommand("validate", "check a scenario config");
  validate->add_option("--config", config_path, "scenario config file")->required();

  std::string run_config;
  std::string out_dir;
  std::uint64_t seed_value = 0;
  bool seed_given = false;
  std::string policy;
  int redundancy = 0;
  auto* run = app.add_subcommand("run", "execute a simulation");
  run->add_option("--config", run_config, "scenario config file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed_value, "seed override")->each([&](const std::string&) {
    seed_given = true;
  });
  run->add_option("--policy", policy, "aggregation policy override")
      ->check(CLI::IsMember({"max", "min", "average"}));
  run->add_option("--redundancy", redundancy, "redundancy override")->check(CLI::PositiveNumber);

  std::string log_path;
  std::string digest_path;
  auto* replay = app.add_subcommand("replay", "fold an event log and verify its digest");
  replay->add_option("--log", log_path, "event log file")->required();
  replay->add_option("--verify-digest", digest_path, "digest file to compare against");

  std::string run_dir;
  std::string format = "csv";
  auto* report = app.add_subcommand("report", "regenerate reports from a run directory");
  report->add_option("--run", run_dir, "run directory")->required();
  report->add_option("--format", format, "output format")
      ->check(CLI::IsMember({"csv", "summary"}));

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return cmd_validate(config_path);
  if (run->parsed())
    return cmd_run(run_config,
                   seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt,
                   out_dir, policy, redundancy);
  if (replay->parsed()) return cmd_replay(log_path, digest_path);
  if (report->parsed()) return cmd_report(run_dir, format);
  return kOk;
}
