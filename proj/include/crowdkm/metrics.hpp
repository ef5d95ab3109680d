#pragma once

#include <string>
#include <vector>

#include "crowdkm/state.hpp"

namespace crowdkm {

// Everything a run leaves on disk. All fields are deterministic functions of
// the event log, so regeneration is byte-identical.
struct RunArtifacts {
  std::string events_jsonl;
  std::string digest;
  std::string graders_csv;  // worker_id,community,items_assigned,items_completed,declines,credit
  std::string scores_csv;   // student,question,policy,final_score,n_grades,min,max
  std::string gaps_csv;     // student,question,missing_clos,extra_clos
  Json summary;             // stage times, counts, digest, effective config
};

RunArtifacts build_artifacts(const EngineState& state, const std::vector<MetaEvent>& log);

// Writes into dir (created if missing): events.jsonl, digest.txt,
// graders.csv, scores.csv, gaps.csv, summary.json. Throws IoError.
void write_artifacts(const RunArtifacts& artifacts, const std::string& dir);

void write_file(const std::string& path, const std::string& body);

}  // namespace crowdkm
