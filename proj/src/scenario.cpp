#include "crowdkm/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "crowdkm/errors.hpp"
#include "crowdkm/rng.hpp"
#include "crowdkm/workflow.hpp"

namespace crowdkm {

BehaviorModel BehaviorModel::from_json(const Json& j) {
  BehaviorModel model;
  model.availability_prob = j.value("availability_prob", 1.0);
  model.decline_prob = j.value("decline_prob", 0.0);
  model.forward_prob = j.value("forward_prob", 0.0);
  if (j.contains("latency")) {
    model.latency_lo = j.at("latency").at(0).get<SimTime>();
    model.latency_hi = j.at("latency").at(1).get<SimTime>();
  }
  if (j.contains("noise")) {
    model.noise_lo = j.at("noise").at(0).get<int>();
    model.noise_hi = j.at("noise").at(1).get<int>();
  }
  model.tagging_accuracy = j.value("tagging_accuracy", 1.0);
  return model;
}

int TrueScores::score_for(const std::string& student, const std::string& question,
                          int marks_lo, int marks_hi) const {
  auto it = explicit_scores.find(student + "|" + question);
  int score;
  if (it != explicit_scores.end()) {
    score = it->second;
  } else if (has_generator) {
    Rng rng(generator_seed, "true-score:" + student + "|" + question);
    score = static_cast<int>(rng.uniform_int(lo, hi));
  } else {
    score = (marks_lo + marks_hi) / 2;
  }
  return std::clamp(score, marks_lo, marks_hi);
}

ScenarioConfig ScenarioConfig::from_json(const Json& j) {
  try {
    ScenarioConfig config;
    config.raw = j;
    if (j.value("schema_version", 0) != kSchemaVersion)
      throw KmError(Errc::ParseError, "schema_version: expected " +
                                          std::to_string(kSchemaVersion));
    config.name = j.value("name", std::string("scenario"));
    config.seed = j.value("seed", std::uint64_t{0});

    for (const auto& community : j.at("communities")) {
      CommunityDecl decl;
      decl.id = community.at("id").get<std::string>();
      decl.kind = community_kind_from_name(community.at("kind").get<std::string>());
      decl.label = community.value("label", std::string());
      config.communities.push_back(std::move(decl));
    }
    for (const auto& group_json : j.value("worker_groups", Json::array())) {
      WorkerGroup group;
      group.prefix = group_json.at("prefix").get<std::string>();
      group.count = group_json.at("count").get<int>();
      group.community = group_json.at("community").get<std::string>();
      for (const auto& role : group_json.value("roles", Json::array({"ComputeUnit"})))
        group.roles.insert(worker_role_from_name(role.get<std::string>()));
      if (group.roles.empty()) group.roles.insert(WorkerRole::ComputeUnit);
      for (const auto& skill : group_json.value("skills", Json::array()))
        group.skills.insert(skill.get<std::string>());
      group.behavior = group_json.at("behavior").get<std::string>();
      config.worker_groups.push_back(std::move(group));
    }
    for (const auto& [key, behavior] : j.at("behaviors").items()) {
      config.behaviors[key] = BehaviorModel::from_json(behavior);
    }
    config.forwarded_behavior = j.value("forwarded_behavior", std::string());
    config.max_forward_depth = j.value("max_forward_depth", 5);

    const Json& assessment = j.at("assessment");
    config.assessment_id = assessment.at("id").get<std::string>();
    config.course = assessment.value("course", std::string("course"));
    for (const auto& clo_json : assessment.at("clos")) {
      Clo clo;
      clo.id = clo_json.at("id").get<std::string>();
      clo.description = clo_json.value("description", std::string());
      clo.course = config.course;
      config.clos.push_back(std::move(clo));
    }
    for (const auto& question_json : assessment.at("questions")) {
      Question question;
      question.id = question_json.at("id").get<std::string>();
      question.assessment = config.assessment_id;
      question.marks_lo = question_json.at("marks_range").at(0).get<int>();
      question.marks_hi = question_json.at("marks_range").at(1).get<int>();
      question.sample_solution =
          question_json.value("sample_solution", "art:sol:" + question.id);
      for (const auto& clo : question_json.at("clos"))
        question.teacher_clos.insert(clo.get<std::string>());
      config.questions.push_back(std::move(question));
    }
    if (assessment.contains("true_scores")) {
      const Json& scores = assessment.at("true_scores");
      const Json explicit_scores = scores.value("explicit", Json::object());
      for (const auto& [key, value] : explicit_scores.items()) {
        config.true_scores.explicit_scores[key] = value.get<int>();
      }
      if (scores.contains("generator")) {
        config.true_scores.has_generator = true;
        config.true_scores.generator_seed =
            scores.at("generator").at("seed").get<std::uint64_t>();
        config.true_scores.lo = scores.at("generator").at("uniform").at(0).get<int>();
        config.true_scores.hi = scores.at("generator").at("uniform").at(1).get<int>();
      }
    }

    config.criteria = DistributionCriteria::from_json(j.at("distribution"));
    config.policy =
        aggregation_policy_from_name(j.value("aggregation_policy", std::string("average")));
    for (const auto& rule : j.value("adaptation_rules", Json::array())) {
      config.rules.push_back(AdaptationRuleCfg::from_json(rule));
    }
    const Json weights = j.value("credit_weights", Json::object());
    for (const auto& [kind, weight] : weights.items()) {
      config.credit_weights[kind] = Rational::from_string(weight.get<std::string>());
    }
    config.referral_bonus =
        Rational::from_string(j.value("referral_bonus", std::string("1/4")));

    const Json& workflow = j.value("workflow", Json("canonical"));
    if (workflow.is_string() && workflow.get<std::string>() == "canonical") {
      config.canonical = true;
      config.workflow_name = "assessment-6stage";
    } else {
      config.canonical = false;
      config.workflow_name = j.value("workflow_name", std::string("custom"));
      for (const auto& stage_json : workflow) {
        WorkflowStage stage;
        stage.id = stage_json.at("id").get<std::string>();
        stage.kind = task_kind_from_name(stage_json.at("kind").get<std::string>());
        for (const auto& community : stage_json.value("communities", Json::array()))
          stage.community_binding.insert(community.get<std::string>());
        for (const auto& dep : stage_json.value("dependencies", Json::array()))
          stage.dependencies.insert(dep.get<std::string>());
        config.explicit_stages.push_back(std::move(stage));
      }
    }
    return config;
  } catch (const Json::exception& e) {
    throw KmError(Errc::ParseError, e.what());
  } catch (const std::invalid_argument& e) {
    throw KmError(Errc::ParseError, e.what());
  }
}

ScenarioConfig ScenarioConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw KmError(Errc::IoError, "cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  Json j;
  try {
    j = Json::parse(buffer.str());
  } catch (const Json::exception& e) {
    throw KmError(Errc::ParseError, path + ": " + e.what());
  }
  return from_json(j);
}

namespace {

void require(bool condition, const std::string& field, const std::string& reason) {
  if (!condition) throw KmError(Errc::ValidationError, field + ": " + reason);
}

void check_probability(double value, const std::string& field) {
  require(value >= 0.0 && value <= 1.0, field, "must be within [0,1]");
}

}  // namespace

void ScenarioConfig::validate() const {
  require(!communities.empty(), "communities", "at least one community required");
  std::set<std::string> community_ids;
  for (const auto& community : communities) {
    require(community_ids.insert(community.id).second, "communities", "duplicate id " + community.id);
  }
  std::set<std::string> prefixes;
  for (const auto& group : worker_groups) {
    require(group.count >= 0, "worker_groups." + group.prefix + ".count", "must be >= 0");
    require(prefixes.insert(group.prefix).second, "worker_groups", "duplicate prefix " + group.prefix);
    require(community_ids.count(group.community), "worker_groups." + group.prefix + ".community",
            "undeclared community " + group.community);
    require(behaviors.count(group.behavior), "worker_groups." + group.prefix + ".behavior",
            "unknown behavior " + group.behavior);
  }
  for (const auto& [key, model] : behaviors) {
    const std::string field = "behaviors." + key;
    check_probability(model.availability_prob, field + ".availability_prob");
    check_probability(model.decline_prob, field + ".decline_prob");
    check_probability(model.forward_prob, field + ".forward_prob");
    check_probability(model.tagging_accuracy, field + ".tagging_accuracy");
    require(model.latency_lo <= model.latency_hi, field + ".latency", "lo must be <= hi");
    require(model.noise_lo <= model.noise_hi, field + ".noise", "lo must be <= hi");
  }
  if (!forwarded_behavior.empty()) {
    require(behaviors.count(forwarded_behavior), "forwarded_behavior",
            "unknown behavior " + forwarded_behavior);
  }
  require(max_forward_depth >= 0, "max_forward_depth", "must be >= 0");

  std::set<std::string> clo_ids;
  for (const auto& clo : clos) clo_ids.insert(clo.id);
  require(!assessment_id.empty(), "assessment.id", "required");
  std::set<std::string> question_ids;
  for (const auto& question : questions) {
    const std::string field = "assessment.questions." + question.id;
    require(question_ids.insert(question.id).second, field, "duplicate question id");
    require(!question.teacher_clos.empty(), field + ".clos", "must tag at least one CLO");
    require(question.marks_lo <= question.marks_hi, field + ".marks_range", "lo must be <= hi");
    for (const auto& clo : question.teacher_clos) {
      require(clo_ids.count(clo), field + ".clos", "unknown CLO " + clo);
    }
  }
  if (true_scores.has_generator) {
    require(true_scores.lo <= true_scores.hi, "assessment.true_scores.generator.uniform",
            "lo must be <= hi");
  }

  try {
    criteria.validate();
  } catch (const KmError& error) {
    throw KmError(Errc::ValidationError, std::string("distribution.proportions: ") + error.what());
  }
  for (const auto& [community, fraction] : criteria.proportions) {
    require(community_ids.count(community), "distribution.proportions",
            "undeclared community " + community);
  }
  for (const auto& rule : rules) {
    const std::string field = "adaptation_rules." + rule.id;
    require(rule.type == "variance_escalation" || rule.type == "notify_coordinator" ||
                rule.type == "cancel_task",
            field + ".type", "unknown rule type " + rule.type);
    require(rule.fire_limit >= 1, field + ".fire_limit", "must be >= 1");
  }
  for (const auto& [kind, weight] : credit_weights) {
    task_kind_from_name(kind);  // throws on unknown kind names
    require(!(weight < Rational(0)), "credit_weights." + kind, "must be >= 0");
  }
  require(!(referral_bonus < Rational(0)), "referral_bonus", "must be >= 0");

  // The workflow must build (throws its own structured errors otherwise).
  define_workflow(workflow_name, workflow_stages());
  for (const auto& stage : workflow_stages()) {
    for (const auto& community : stage.community_binding) {
      require(community_ids.count(community), "workflow." + stage.id,
              "undeclared community " + community);
    }
  }
}

std::vector<WorkflowStage> ScenarioConfig::workflow_stages() const {
  if (!canonical) return explicit_stages;
  std::string students;
  std::string staff;
  std::vector<std::string> grading;
  for (const auto& community : communities) {
    if (community.kind == CommunityKind::Students && students.empty()) students = community.id;
    if (community.kind == CommunityKind::Custom && staff.empty()) staff = community.id;
    if (community.kind == CommunityKind::Faculty || community.kind == CommunityKind::Alumni)
      grading.push_back(community.id);
  }
  if (students.empty()) students = communities.front().id;
  if (staff.empty()) staff = students;
  if (grading.empty()) grading.push_back(staff);
  return canonical_workflow(students, staff, grading).stages;
}

void ScenarioConfig::apply_overrides(std::optional<std::uint64_t> seed_override,
                                     std::optional<AggregationPolicy> policy_override,
                                     std::optional<int> redundancy_override) {
  if (seed_override) {
    seed = *seed_override;
    raw["seed"] = *seed_override;
  }
  if (policy_override) {
    policy = *policy_override;
    raw["aggregation_policy"] = aggregation_policy_name(*policy_override);
  }
  if (redundancy_override) {
    criteria.redundancy = *redundancy_override;
    if (criteria.r_max < criteria.redundancy) {
      criteria.r_max = criteria.redundancy;
      raw["distribution"]["r_max"] = criteria.r_max;
    }
    raw["distribution"]["redundancy"] = *redundancy_override;
  }
}

EngineConfig ScenarioConfig::engine_config() const {
  EngineConfig config;
  config.seed = seed;
  config.credit_weights = credit_weights;
  config.referral_bonus = referral_bonus;
  config.rules = rules;
  config.workflow_name = workflow_name;
  config.workflow_stages = workflow_stages();
  config.raw = raw;
  return config;
}

}  // namespace crowdkm
