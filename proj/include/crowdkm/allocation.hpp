#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crowdkm/events.hpp"
#include "crowdkm/rational.hpp"

namespace crowdkm {

struct DistributionCriteria {
  std::map<std::string, Rational> proportions;  // community -> fraction, Σ = 1
  int redundancy = 1;   // r: distinct graders per item
  int min_graders = 1;  // monitored floor, never a hard stop
  int r_max = 1;        // adaptation ceiling, >= redundancy

  // Throws InvalidProportions on any numeric violation.
  void validate() const;

  Json to_json() const;
  static DistributionCriteria from_json(const Json& j);
};

// Grader-scoped bundle of answer items. A grader holds at most one open
// bundle per assessment; supplemental bundles appear only after the original
// task reached a terminal state (rule-spawned extra redundancy).
struct Vab {
  std::string id;
  std::string assessment;
  std::string grader;
  std::vector<std::string> items;  // assignment order
  std::string task;                // its Grade TaskInstance
  bool supplement = false;

  Json to_json() const;
};

// Redundancy bookkeeping per answer item.
struct CoverageEntry {
  std::set<std::string> assigned_graders;
  std::set<std::string> completed_graders;
  int target = 0;  // current redundancy target; degrades on infeasibility,
                   // rises via adaptation up to r_max
};

struct VabAssignment {
  // grader -> items in assignment order; only graders with >= 1 item appear
  std::map<std::string, std::vector<std::string>> items_by_grader;
  // community each grader was drawn through
  std::map<std::string, std::string> community_of;
  // item-copies charged to each community
  std::map<std::string, int> share_by_community;
};

// Largest-remainder apportionment of `total` slots over the proportions.
// Ties on the remainder break by community id.
std::map<std::string, int> apportion_largest_remainder(
    const std::map<std::string, Rational>& proportions, int total);

// The distribution algorithm: items are shuffled by seed, then each item
// receives `redundancy` distinct graders. Community choice follows remaining
// quota; grader choice is least-loaded (ties by id); a grader never receives
// their own item or the same item twice. Pure function of (inputs, seed).
//
// `items` maps item id -> author and must cover every item to distribute.
// `graders_by_community` lists eligible graders per grading community.
// Throws InfeasibleRedundancy naming the first infeasible item, NoCriteria
// never (callers gate on criteria existence).
VabAssignment generate_assignment(const std::map<std::string, std::string>& items,
                                  const std::map<std::string, std::vector<std::string>>& graders_by_community,
                                  const DistributionCriteria& criteria,
                                  std::uint64_t seed);

// Replacement pick for reassignment/spawn: least total load, ties by id,
// drawn from `candidates` minus `excluded`. Returns "" when empty.
std::string pick_replacement(const std::map<std::string, std::size_t>& candidates,
                             const std::set<std::string>& excluded);

}  // namespace crowdkm
