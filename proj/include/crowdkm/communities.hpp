#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "crowdkm/events.hpp"

namespace crowdkm {

enum class CommunityKind { Students, Faculty, Alumni, Custom };

const char* community_kind_name(CommunityKind kind);
CommunityKind community_kind_from_name(const std::string& name);

struct Community {
  std::string id;
  CommunityKind kind = CommunityKind::Custom;
  std::string label;  // for Custom
  std::set<std::string> members;
};

// Human-capability roles from the framework: compute, storage/recall,
// sensing.
enum class WorkerRole { ComputeUnit, StorageRecallUnit, SensingUnit };

const char* worker_role_name(WorkerRole role);
WorkerRole worker_role_from_name(const std::string& name);

struct Worker {
  std::string id;
  std::set<std::string> communities;
  std::set<WorkerRole> roles;
  std::set<std::string> skill_tags;
  bool self_registered = true;
  std::string forwarded_by;  // set when origin is Forwarded
  bool active = true;

  Json to_json() const;
};

// Conjunction filter: all listed roles and skills required, membership in
// any of the listed communities. Empty fields match everything.
struct CloudletSelector {
  std::set<WorkerRole> roles;
  std::set<std::string> skills;
  std::set<std::string> communities;

  bool matches(const Worker& worker) const;
  Json to_json() const;
};

struct Cloudlet {
  std::string id;
  CloudletSelector selector;
  std::set<std::string> members;  // snapshot at formation time
};

}  // namespace crowdkm
