#include "crowdkm/allocation.hpp"

#include <algorithm>

#include "crowdkm/errors.hpp"
#include "crowdkm/rng.hpp"

namespace crowdkm {

void DistributionCriteria::validate() const {
  if (redundancy < 1)
    throw KmError(Errc::InvalidProportions, "redundancy must be >= 1");
  if (r_max < redundancy)
    throw KmError(Errc::InvalidProportions, "r_max must be >= redundancy");
  if (min_graders < 1)
    throw KmError(Errc::InvalidProportions, "min_graders must be >= 1");
  if (proportions.empty())
    throw KmError(Errc::InvalidProportions, "no grading proportions given");
  Rational sum(0);
  for (const auto& [community, fraction] : proportions) {
    if (fraction < Rational(0) || fraction > Rational(1))
      throw KmError(Errc::InvalidProportions,
                    "proportion for " + community + " outside [0,1]");
    sum += fraction;
  }
  if (sum != Rational(1))
    throw KmError(Errc::InvalidProportions, "proportions sum to " + sum.str() + ", expected 1");
}

Json DistributionCriteria::to_json() const {
  Json props = Json::object();
  for (const auto& [community, fraction] : proportions) props[community] = fraction.str();
  return Json{{"proportions", props},
              {"redundancy", redundancy},
              {"min_graders", min_graders},
              {"r_max", r_max}};
}

DistributionCriteria DistributionCriteria::from_json(const Json& j) {
  DistributionCriteria criteria;
  for (const auto& [community, fraction] : j.at("proportions").items()) {
    criteria.proportions[community] = Rational::from_string(fraction.get<std::string>());
  }
  criteria.redundancy = j.at("redundancy").get<int>();
  criteria.min_graders = j.at("min_graders").get<int>();
  criteria.r_max = j.at("r_max").get<int>();
  return criteria;
}

Json Vab::to_json() const {
  return Json{{"id", id},     {"assessment", assessment}, {"grader", grader},
              {"items", items}, {"task", task},           {"supplement", supplement}};
}

std::map<std::string, int> apportion_largest_remainder(
    const std::map<std::string, Rational>& proportions, int total) {
  std::map<std::string, int> quotas;
  std::vector<std::pair<Rational, std::string>> remainders;
  int assigned = 0;
  for (const auto& [community, fraction] : proportions) {
    Rational exact = fraction * Rational(total);
    std::int64_t whole = exact.num() / exact.den();
    quotas[community] = static_cast<int>(whole);
    assigned += static_cast<int>(whole);
    remainders.emplace_back(exact - Rational(whole), community);
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return b.first < a.first;  // larger remainder first
              return a.second < b.second;
            });
  for (int i = 0; i < total - assigned; ++i) {
    quotas[remainders[static_cast<std::size_t>(i) % remainders.size()].second] += 1;
  }
  return quotas;
}

VabAssignment generate_assignment(const std::map<std::string, std::string>& items,
                                  const std::map<std::string, std::vector<std::string>>& graders_by_community,
                                  const DistributionCriteria& criteria,
                                  std::uint64_t seed) {
  // Feasibility: every item needs r distinct non-author graders.
  std::set<std::string> all_graders;
  for (const auto& [community, graders] : graders_by_community) {
    for (const auto& grader : graders) all_graders.insert(grader);
  }
  for (const auto& [item, author] : items) {
    std::size_t eligible = all_graders.size() - (all_graders.count(author) ? 1 : 0);
    if (eligible < static_cast<std::size_t>(criteria.redundancy)) {
      throw KmError(Errc::InfeasibleRedundancy,
                    "item " + item + " has " + std::to_string(eligible) +
                        " eligible graders, needs " + std::to_string(criteria.redundancy));
    }
  }

  int total_assignments = criteria.redundancy * static_cast<int>(items.size());
  std::map<std::string, int> quota =
      apportion_largest_remainder(criteria.proportions, total_assignments);
  // Communities may appear in the pool without a proportion entry; they only
  // receive assignments through the fallback path.
  for (const auto& [community, graders] : graders_by_community) {
    quota.try_emplace(community, 0);
  }

  std::vector<std::string> order;
  order.reserve(items.size());
  for (const auto& [item, author] : items) order.push_back(item);
  Rng rng(seed, "vab-generation");
  rng.shuffle(order);

  std::map<std::string, std::size_t> load;
  VabAssignment out;

  auto pick_in_community = [&](const std::string& community, const std::string& item,
                               const std::set<std::string>& taken) -> std::string {
    auto it = graders_by_community.find(community);
    if (it == graders_by_community.end()) return "";
    const std::string& author = items.at(item);
    std::string best;
    std::size_t best_load = 0;
    for (const auto& grader : it->second) {
      if (grader == author || taken.count(grader)) continue;
      std::size_t grader_load = load.count(grader) ? load.at(grader) : 0;
      if (best.empty() || grader_load < best_load ||
          (grader_load == best_load && grader < best)) {
        best = grader;
        best_load = grader_load;
      }
    }
    return best;
  };

  for (const auto& item : order) {
    std::set<std::string> taken;
    for (int copy = 0; copy < criteria.redundancy; ++copy) {
      // Quota-first community choice: largest remaining quota with an
      // eligible grader; ties by community id. When every positive quota is
      // blocked by conflicts the pick borrows from the least-overdrawn pool.
      std::string chosen_community;
      std::string chosen_grader;
      int chosen_quota = 0;
      for (const auto& [community, remaining] : quota) {
        std::string candidate = pick_in_community(community, item, taken);
        if (candidate.empty()) continue;
        if (chosen_community.empty() || remaining > chosen_quota) {
          chosen_community = community;
          chosen_grader = candidate;
          chosen_quota = remaining;
        }
      }
      if (chosen_grader.empty()) {
        throw KmError(Errc::InfeasibleRedundancy,
                      "no eligible grader left for item " + item);
      }
      quota[chosen_community] -= 1;
      taken.insert(chosen_grader);
      load[chosen_grader] += 1;
      out.items_by_grader[chosen_grader].push_back(item);
      out.community_of[chosen_grader] = chosen_community;
      out.share_by_community[chosen_community] += 1;
    }
  }
  return out;
}

std::string pick_replacement(const std::map<std::string, std::size_t>& candidates,
                             const std::set<std::string>& excluded) {
  std::string best;
  std::size_t best_load = 0;
  for (const auto& [grader, grader_load] : candidates) {
    if (excluded.count(grader)) continue;
    if (best.empty() || grader_load < best_load ||
        (grader_load == best_load && grader < best)) {
      best = grader;
      best_load = grader_load;
    }
  }
  return best;
}

}  // namespace crowdkm
