#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "crowdkm/events.hpp"
#include "crowdkm/rational.hpp"

namespace crowdkm {

enum class CloVerdict { Confirm, Suggest, MarkWrong };

const char* clo_verdict_name(CloVerdict verdict);
CloVerdict clo_verdict_from_name(const std::string& name);

struct GradeRecord {
  std::string id;
  std::string grader;
  std::string answer_item;
  int marks = 0;  // within the question's marks range
  std::map<std::string, CloVerdict> clo_annotations;
  std::string narrative;
  SimTime completed_at = 0;

  Json to_json() const;
};

enum class AggregationPolicy { Max, Min, Average };

const char* aggregation_policy_name(AggregationPolicy policy);
AggregationPolicy aggregation_policy_from_name(const std::string& name);

struct FinalScore {
  std::string student;
  std::string question;
  Rational value;
  std::vector<std::string> contributing_grades;  // GradeRecord ids
  AggregationPolicy policy = AggregationPolicy::Average;
};

// Max / Min / exact-mean fold over a non-empty mark multiset.
// Throws EmptyGradeSet.
Rational aggregate_item(const std::vector<int>& marks, AggregationPolicy policy);

enum class CloStatus { Confirmed, Rejected, Disputed, SuggestedNew };

const char* clo_status_name(CloStatus status);

struct CloVote {
  CloStatus status = CloStatus::Disputed;
  int confirm = 0;
  int mark_wrong = 0;
  int suggest = 0;
};

struct CloConsensus {
  std::string question;
  std::map<std::string, CloVote> verdicts;  // clo id -> outcome

  std::set<std::string> confirmed() const;
};

// Majority rule over the pooled annotations of one question's grades.
// `tagged_clos` are the CLOs carried by the question (teacher tags plus any
// student pre-review tags); other annotated CLOs resolve as SuggestedNew.
// Order of `annotation_sets` does not influence the outcome.
CloConsensus clo_consensus(const std::string& question, const std::set<std::string>& tagged_clos,
                           const std::vector<std::map<std::string, CloVerdict>>& annotation_sets);

struct LessonLearned {
  std::string id;
  std::string assessment;
  std::string author;
  std::string misalignment_notes;
  std::set<std::string> clos;
  std::string proposed_adjustment;
  SimTime at = 0;
};

}  // namespace crowdkm
