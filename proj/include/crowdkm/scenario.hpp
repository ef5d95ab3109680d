#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdkm/assessment.hpp"
#include "crowdkm/communities.hpp"
#include "crowdkm/state.hpp"

namespace crowdkm {

// Stochastic behavior of a simulated worker at each decision point.
// An unavailable draw means the worker does not engage (decline, no
// forwarding). Latency and noise are inclusive integer ranges; emitted marks
// are clamped to the question's range.
struct BehaviorModel {
  double availability_prob = 1.0;
  double decline_prob = 0.0;
  double forward_prob = 0.0;
  SimTime latency_lo = 1;
  SimTime latency_hi = 1;
  int noise_lo = 0;
  int noise_hi = 0;
  double tagging_accuracy = 1.0;

  static BehaviorModel from_json(const Json& j);
};

struct WorkerGroup {
  std::string prefix;
  int count = 0;
  std::string community;
  std::set<WorkerRole> roles;
  std::set<std::string> skills;
  std::string behavior;
};

struct CommunityDecl {
  std::string id;
  CommunityKind kind = CommunityKind::Custom;
  std::string label;
};

// Ground-truth scores per (student, question). Explicit entries win; the
// generator derives the rest deterministically from its own fixed seed, so
// the truth does not move when the run seed changes.
struct TrueScores {
  std::map<std::string, int> explicit_scores;  // "student|question"
  bool has_generator = false;
  std::uint64_t generator_seed = 0;
  int lo = 0;
  int hi = 0;

  int score_for(const std::string& student, const std::string& question, int marks_lo,
                int marks_hi) const;
};

struct ScenarioConfig {
  static constexpr int kSchemaVersion = 1;

  std::string name;
  std::uint64_t seed = 0;
  std::vector<CommunityDecl> communities;
  std::vector<WorkerGroup> worker_groups;
  std::map<std::string, BehaviorModel> behaviors;
  std::string forwarded_behavior;  // empty = invitee inherits forwarder's model
  int max_forward_depth = 5;

  std::string assessment_id;
  std::string course;
  std::vector<Clo> clos;
  std::vector<Question> questions;
  TrueScores true_scores;

  DistributionCriteria criteria;
  AggregationPolicy policy = AggregationPolicy::Average;
  std::vector<AdaptationRuleCfg> rules;
  std::map<std::string, Rational> credit_weights;
  Rational referral_bonus = Rational(1, 4);

  bool canonical = true;  // canonical six-stage workflow, or explicit stages
  std::vector<WorkflowStage> explicit_stages;
  std::string workflow_name;

  Json raw;  // as loaded, with overrides folded in

  static ScenarioConfig from_json(const Json& j);      // throws ParseError
  static ScenarioConfig load_file(const std::string& path);  // + IoError
  void validate() const;                               // throws ValidationError
  void apply_overrides(std::optional<std::uint64_t> seed_override,
                       std::optional<AggregationPolicy> policy_override,
                       std::optional<int> redundancy_override);

  std::vector<WorkflowStage> workflow_stages() const;  // expanded
  EngineConfig engine_config() const;
};

}  // namespace crowdkm
