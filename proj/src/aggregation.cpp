#include "crowdkm/aggregation.hpp"

#include <algorithm>

#include "crowdkm/errors.hpp"

namespace crowdkm {

const char* clo_verdict_name(CloVerdict verdict) {
  switch (verdict) {
    case CloVerdict::Confirm: return "confirm";
    case CloVerdict::Suggest: return "suggest";
    case CloVerdict::MarkWrong: return "mark_wrong";
  }
  return "?";
}

CloVerdict clo_verdict_from_name(const std::string& name) {
  if (name == "confirm") return CloVerdict::Confirm;
  if (name == "suggest") return CloVerdict::Suggest;
  if (name == "mark_wrong") return CloVerdict::MarkWrong;
  throw KmError(Errc::ParseError, "unknown CLO verdict: " + name);
}

Json GradeRecord::to_json() const {
  Json annotations = Json::object();
  for (const auto& [clo, verdict] : clo_annotations) {
    annotations[clo] = clo_verdict_name(verdict);
  }
  return Json{{"id", id},
              {"grader", grader},
              {"answer_item", answer_item},
              {"marks", marks},
              {"clo_annotations", annotations},
              {"narrative", narrative},
              {"completed_at", completed_at}};
}

const char* aggregation_policy_name(AggregationPolicy policy) {
  switch (policy) {
    case AggregationPolicy::Max: return "max";
    case AggregationPolicy::Min: return "min";
    case AggregationPolicy::Average: return "average";
  }
  return "?";
}

AggregationPolicy aggregation_policy_from_name(const std::string& name) {
  if (name == "max") return AggregationPolicy::Max;
  if (name == "min") return AggregationPolicy::Min;
  if (name == "average") return AggregationPolicy::Average;
  throw KmError(Errc::ParseError, "unknown aggregation policy: " + name);
}

Rational aggregate_item(const std::vector<int>& marks, AggregationPolicy policy) {
  if (marks.empty()) throw KmError(Errc::EmptyGradeSet, "no grades to aggregate");
  switch (policy) {
    case AggregationPolicy::Max:
      return Rational(*std::max_element(marks.begin(), marks.end()));
    case AggregationPolicy::Min:
      return Rational(*std::min_element(marks.begin(), marks.end()));
    case AggregationPolicy::Average: {
      std::int64_t sum = 0;
      for (int mark : marks) sum += mark;
      return Rational(sum, static_cast<std::int64_t>(marks.size()));
    }
  }
  throw KmError(Errc::EmptyGradeSet, "unreachable");
}

const char* clo_status_name(CloStatus status) {
  switch (status) {
    case CloStatus::Confirmed: return "confirmed";
    case CloStatus::Rejected: return "rejected";
    case CloStatus::Disputed: return "disputed";
    case CloStatus::SuggestedNew: return "suggested_new";
  }
  return "?";
}

std::set<std::string> CloConsensus::confirmed() const {
  std::set<std::string> out;
  for (const auto& [clo, vote] : verdicts) {
    if (vote.status == CloStatus::Confirmed) out.insert(clo);
  }
  return out;
}

CloConsensus clo_consensus(const std::string& question, const std::set<std::string>& tagged_clos,
                           const std::vector<std::map<std::string, CloVerdict>>& annotation_sets) {
  if (annotation_sets.empty()) throw KmError(Errc::NoGrades, "no grades on question " + question);

  CloConsensus consensus;
  consensus.question = question;
  for (const auto& clo : tagged_clos) consensus.verdicts[clo] = CloVote{};

  for (const auto& annotations : annotation_sets) {
    for (const auto& [clo, verdict] : annotations) {
      CloVote& vote = consensus.verdicts[clo];
      switch (verdict) {
        case CloVerdict::Confirm: vote.confirm += 1; break;
        case CloVerdict::MarkWrong: vote.mark_wrong += 1; break;
        case CloVerdict::Suggest: vote.suggest += 1; break;
      }
    }
  }

  for (auto& [clo, vote] : consensus.verdicts) {
    if (tagged_clos.count(clo)) {
      // Strict majority of the annotating graders; tie or silence = Disputed.
      if (vote.confirm > vote.mark_wrong) vote.status = CloStatus::Confirmed;
      else if (vote.mark_wrong > vote.confirm) vote.status = CloStatus::Rejected;
      else vote.status = CloStatus::Disputed;
    } else {
      // Surfaced to the teacher, never auto-applied to the question.
      vote.status = CloStatus::SuggestedNew;
    }
  }
  return consensus;
}

}  // namespace crowdkm
