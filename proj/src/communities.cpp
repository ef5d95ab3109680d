#include "crowdkm/communities.hpp"

#include "crowdkm/errors.hpp"

namespace crowdkm {

const char* community_kind_name(CommunityKind kind) {
  switch (kind) {
    case CommunityKind::Students: return "Students";
    case CommunityKind::Faculty: return "Faculty";
    case CommunityKind::Alumni: return "Alumni";
    case CommunityKind::Custom: return "Custom";
  }
  return "?";
}

CommunityKind community_kind_from_name(const std::string& name) {
  if (name == "Students") return CommunityKind::Students;
  if (name == "Faculty") return CommunityKind::Faculty;
  if (name == "Alumni") return CommunityKind::Alumni;
  if (name == "Custom" || name.rfind("Custom:", 0) == 0) return CommunityKind::Custom;
  throw KmError(Errc::ParseError, "unknown community kind: " + name);
}

const char* worker_role_name(WorkerRole role) {
  switch (role) {
    case WorkerRole::ComputeUnit: return "ComputeUnit";
    case WorkerRole::StorageRecallUnit: return "StorageRecallUnit";
    case WorkerRole::SensingUnit: return "SensingUnit";
  }
  return "?";
}

WorkerRole worker_role_from_name(const std::string& name) {
  if (name == "ComputeUnit") return WorkerRole::ComputeUnit;
  if (name == "StorageRecallUnit") return WorkerRole::StorageRecallUnit;
  if (name == "SensingUnit") return WorkerRole::SensingUnit;
  throw KmError(Errc::ParseError, "unknown worker role: " + name);
}

Json Worker::to_json() const {
  Json roles_json = Json::array();
  for (auto role : roles) roles_json.push_back(worker_role_name(role));
  return Json{{"id", id},
              {"communities", communities},
              {"roles", roles_json},
              {"skill_tags", skill_tags},
              {"origin", self_registered ? "self" : "forwarded:" + forwarded_by},
              {"active", active}};
}

bool CloudletSelector::matches(const Worker& worker) const {
  for (auto role : roles) {
    if (!worker.roles.count(role)) return false;
  }
  for (const auto& skill : skills) {
    if (!worker.skill_tags.count(skill)) return false;
  }
  if (!communities.empty()) {
    bool in_any = false;
    for (const auto& community : communities) {
      if (worker.communities.count(community)) { in_any = true; break; }
    }
    if (!in_any) return false;
  }
  return true;
}

Json CloudletSelector::to_json() const {
  Json roles_json = Json::array();
  for (auto role : roles) roles_json.push_back(worker_role_name(role));
  return Json{{"roles", roles_json}, {"skills", skills}, {"communities", communities}};
}

}  // namespace crowdkm
