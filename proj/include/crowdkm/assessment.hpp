#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "crowdkm/events.hpp"

namespace crowdkm {

struct Clo {
  std::string id;
  std::string description;
  std::string course;
};

struct Question {
  std::string id;
  std::string assessment;
  int marks_lo = 0;
  int marks_hi = 0;
  std::string sample_solution;        // opaque artifact reference
  std::set<std::string> teacher_clos; // non-empty
};

struct AnswerItem {
  std::string id;
  std::string student;
  std::string question;
  std::string artifact;  // opaque; equality by reference only
  SimTime uploaded_at = 0;
};

enum class FeedbackPhase { PreGrading, PostGrading };

struct FeedbackRecord {
  std::string id;
  std::string student;
  std::string question;
  FeedbackPhase phase = FeedbackPhase::PreGrading;
  std::string narrative;
  std::set<std::string> student_clos;  // PreGrading only
  std::string self_reported_issues;    // PreGrading only
  SimTime at = 0;
};

struct GapReport {
  std::string student;
  std::string question;
  std::set<std::string> missing_clos;  // consensus-confirmed minus student-tagged
  std::set<std::string> extra_clos;    // student-tagged minus consensus-confirmed
};

// Pure set algebra behind compute_gap_report; missing ∩ extra = ∅ by
// construction.
GapReport gap_between(const std::string& student, const std::string& question,
                      const std::set<std::string>& student_clos,
                      const std::set<std::string>& confirmed_clos);

}  // namespace crowdkm
