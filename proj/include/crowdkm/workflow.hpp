#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "crowdkm/events.hpp"

namespace crowdkm {

enum class TaskKind {
  UploadAnswers,
  SelfReview,
  SetDistribution,
  Grade,
  PostFeedback,
  LessonLearned,
  MachineStep,
};

enum class TaskState {
  Created,
  Offered,
  Accepted,
  Declined,
  Forwarded,
  InProgress,
  Completed,
  Cancelled,
};

const char* task_kind_name(TaskKind kind);
const char* task_state_name(TaskState state);
TaskKind task_kind_from_name(const std::string& name);
TaskState task_state_from_name(const std::string& name);

// Transition labels accepted by Engine::transition.
enum class TaskEvent { Offer, Accept, Decline, Forward, Start, Complete, Cancel };

const char* task_event_name(TaskEvent event);
TaskEvent task_event_from_name(const std::string& name);

// The single source of truth for state-machine legality; the invariant
// harness scans logs against the same relation.
bool transition_legal(TaskState from, TaskEvent event, TaskState& to);

// Terminal for stage-gating purposes: no outgoing transition exists.
bool task_state_terminal(TaskState state);

struct WorkflowStage {
  std::string id;
  TaskKind kind = TaskKind::MachineStep;
  std::set<std::string> community_binding;  // communities expected to execute
  std::set<std::string> dependencies;       // stage ids
};

struct KmWorkflow {
  std::string name;
  std::vector<WorkflowStage> stages;          // as declared
  std::vector<std::string> topological_order; // deterministic, ties by stage id

  const WorkflowStage* find_stage(const std::string& id) const;
};

// Validates the DAG and records a deterministic topological order.
// Throws DuplicateStageId / DanglingDependency / CyclicDependency.
KmWorkflow define_workflow(const std::string& name, std::vector<WorkflowStage> stages);

// The six-stage assessment workflow plus the allocation machine step:
// T-1 ... T-3, T-3.vab, T-4 ... T-6 in a strict chain.
KmWorkflow canonical_workflow(const std::string& students, const std::string& staff,
                              const std::vector<std::string>& grading_communities);

struct TaskInstance {
  std::string id;
  std::string stage;
  std::string assignee;  // empty = unassigned
  TaskState state = TaskState::Created;
  std::string payload;   // domain object reference (item id, vab id, ...)
  std::vector<std::pair<TaskState, SimTime>> history;

  Json to_json() const;
};

}  // namespace crowdkm
