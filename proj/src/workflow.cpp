#include "crowdkm/workflow.hpp"

#include <algorithm>

#include "crowdkm/errors.hpp"

namespace crowdkm {

const char* task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::UploadAnswers: return "UploadAnswers";
    case TaskKind::SelfReview: return "SelfReview";
    case TaskKind::SetDistribution: return "SetDistribution";
    case TaskKind::Grade: return "Grade";
    case TaskKind::PostFeedback: return "PostFeedback";
    case TaskKind::LessonLearned: return "LessonLearned";
    case TaskKind::MachineStep: return "MachineStep";
  }
  return "?";
}

const char* task_state_name(TaskState state) {
  switch (state) {
    case TaskState::Created: return "Created";
    case TaskState::Offered: return "Offered";
    case TaskState::Accepted: return "Accepted";
    case TaskState::Declined: return "Declined";
    case TaskState::Forwarded: return "Forwarded";
    case TaskState::InProgress: return "InProgress";
    case TaskState::Completed: return "Completed";
    case TaskState::Cancelled: return "Cancelled";
  }
  return "?";
}

TaskKind task_kind_from_name(const std::string& name) {
  static const std::map<std::string, TaskKind> table = {
      {"UploadAnswers", TaskKind::UploadAnswers},
      {"SelfReview", TaskKind::SelfReview},
      {"SetDistribution", TaskKind::SetDistribution},
      {"Grade", TaskKind::Grade},
      {"PostFeedback", TaskKind::PostFeedback},
      {"LessonLearned", TaskKind::LessonLearned},
      {"MachineStep", TaskKind::MachineStep},
  };
  auto it = table.find(name);
  if (it == table.end()) throw KmError(Errc::ParseError, "unknown task kind: " + name);
  return it->second;
}

TaskState task_state_from_name(const std::string& name) {
  static const std::map<std::string, TaskState> table = {
      {"Created", TaskState::Created},     {"Offered", TaskState::Offered},
      {"Accepted", TaskState::Accepted},   {"Declined", TaskState::Declined},
      {"Forwarded", TaskState::Forwarded}, {"InProgress", TaskState::InProgress},
      {"Completed", TaskState::Completed}, {"Cancelled", TaskState::Cancelled},
  };
  auto it = table.find(name);
  if (it == table.end()) throw KmError(Errc::ParseError, "unknown task state: " + name);
  return it->second;
}

const char* task_event_name(TaskEvent event) {
  switch (event) {
    case TaskEvent::Offer: return "offer";
    case TaskEvent::Accept: return "accept";
    case TaskEvent::Decline: return "decline";
    case TaskEvent::Forward: return "forward";
    case TaskEvent::Start: return "start";
    case TaskEvent::Complete: return "complete";
    case TaskEvent::Cancel: return "cancel";
  }
  return "?";
}

TaskEvent task_event_from_name(const std::string& name) {
  static const std::map<std::string, TaskEvent> table = {
      {"offer", TaskEvent::Offer},     {"accept", TaskEvent::Accept},
      {"decline", TaskEvent::Decline}, {"forward", TaskEvent::Forward},
      {"start", TaskEvent::Start},     {"complete", TaskEvent::Complete},
      {"cancel", TaskEvent::Cancel},
  };
  auto it = table.find(name);
  if (it == table.end()) throw KmError(Errc::ParseError, "unknown transition label: " + name);
  return it->second;
}

bool transition_legal(TaskState from, TaskEvent event, TaskState& to) {
  switch (from) {
    case TaskState::Created:
      if (event == TaskEvent::Offer) { to = TaskState::Offered; return true; }
      break;
    case TaskState::Offered:
      if (event == TaskEvent::Accept) { to = TaskState::Accepted; return true; }
      if (event == TaskEvent::Decline) { to = TaskState::Declined; return true; }
      if (event == TaskEvent::Forward) { to = TaskState::Forwarded; return true; }
      break;
    case TaskState::Forwarded:
      if (event == TaskEvent::Offer) { to = TaskState::Offered; return true; }
      break;
    case TaskState::Accepted:
      if (event == TaskEvent::Start) { to = TaskState::InProgress; return true; }
      break;
    case TaskState::InProgress:
      if (event == TaskEvent::Complete) { to = TaskState::Completed; return true; }
      break;
    default:
      break;
  }
  // Any non-terminal state may be cancelled.
  if (event == TaskEvent::Cancel && from != TaskState::Completed &&
      from != TaskState::Cancelled && from != TaskState::Declined) {
    to = TaskState::Cancelled;
    return true;
  }
  return false;
}

bool task_state_terminal(TaskState state) {
  return state == TaskState::Completed || state == TaskState::Cancelled ||
         state == TaskState::Declined;
}

const WorkflowStage* KmWorkflow::find_stage(const std::string& id) const {
  for (const auto& stage : stages) {
    if (stage.id == id) return &stage;
  }
  return nullptr;
}

KmWorkflow define_workflow(const std::string& name, std::vector<WorkflowStage> stages) {
  if (stages.empty()) throw KmError(Errc::ValidationError, "workflow has no stages");

  std::set<std::string> ids;
  for (const auto& stage : stages) {
    if (!ids.insert(stage.id).second)
      throw KmError(Errc::DuplicateStageId, stage.id);
  }
  for (const auto& stage : stages) {
    for (const auto& dep : stage.dependencies) {
      if (!ids.count(dep))
        throw KmError(Errc::DanglingDependency, stage.id + " depends on missing " + dep);
    }
  }

  // Kahn's algorithm; the ready set is ordered so ties break by stage id and
  // the resulting order is identical on every run.
  std::map<std::string, std::size_t> indegree;
  std::map<std::string, std::set<std::string>> dependents;
  for (const auto& stage : stages) {
    indegree[stage.id] = stage.dependencies.size();
    for (const auto& dep : stage.dependencies) dependents[dep].insert(stage.id);
  }
  std::set<std::string> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.insert(id);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (const auto& next : dependents[id]) {
      if (--indegree[next] == 0) ready.insert(next);
    }
  }
  if (order.size() != stages.size()) {
    // Walk any unresolved stage back through unsatisfied deps to name a cycle.
    std::string start;
    for (const auto& [id, deg] : indegree) {
      if (deg > 0) { start = id; break; }
    }
    std::vector<std::string> path{start};
    std::set<std::string> seen{start};
    std::string current = start;
    for (;;) {
      const WorkflowStage* stage = nullptr;
      for (const auto& s : stages) {
        if (s.id == current) { stage = &s; break; }
      }
      std::string next;
      for (const auto& dep : stage->dependencies) {
        if (indegree[dep] > 0 || std::find(order.begin(), order.end(), dep) == order.end()) {
          next = dep;
          break;
        }
      }
      if (seen.count(next)) {
        path.push_back(next);
        break;
      }
      seen.insert(next);
      path.push_back(next);
      current = next;
    }
    std::string cycle;
    for (const auto& id : path) {
      if (!cycle.empty()) cycle += " -> ";
      cycle += id;
    }
    throw KmError(Errc::CyclicDependency, cycle);
  }

  KmWorkflow workflow;
  workflow.name = name;
  workflow.stages = std::move(stages);
  workflow.topological_order = std::move(order);
  return workflow;
}

KmWorkflow canonical_workflow(const std::string& students, const std::string& staff,
                              const std::vector<std::string>& grading_communities) {
  std::set<std::string> graders(grading_communities.begin(), grading_communities.end());
  std::set<std::string> lesson_communities = graders;
  lesson_communities.insert(staff);

  std::vector<WorkflowStage> stages = {
      {"T-1", TaskKind::UploadAnswers, {students}, {}},
      {"T-2", TaskKind::SelfReview, {students}, {"T-1"}},
      {"T-3", TaskKind::SetDistribution, {staff}, {"T-2"}},
      {"T-3.vab", TaskKind::MachineStep, {}, {"T-3"}},
      {"T-4", TaskKind::Grade, graders, {"T-3.vab"}},
      {"T-5", TaskKind::PostFeedback, {students}, {"T-4"}},
      {"T-6", TaskKind::LessonLearned, lesson_communities, {"T-5"}},
  };
  return define_workflow("assessment-6stage", std::move(stages));
}

Json TaskInstance::to_json() const {
  Json hist = Json::array();
  for (const auto& [state_entry, at] : history) {
    hist.push_back(Json{{"state", task_state_name(state_entry)}, {"t", at}});
  }
  return Json{{"id", id},
              {"stage", stage},
              {"assignee", assignee},
              {"state", task_state_name(state)},
              {"payload", payload},
              {"history", hist}};
}

}  // namespace crowdkm
