#include "crowdkm/assessment.hpp"

#include <algorithm>

namespace crowdkm {

GapReport gap_between(const std::string& student, const std::string& question,
                      const std::set<std::string>& student_clos,
                      const std::set<std::string>& confirmed_clos) {
  GapReport report;
  report.student = student;
  report.question = question;
  std::set_difference(confirmed_clos.begin(), confirmed_clos.end(), student_clos.begin(),
                      student_clos.end(),
                      std::inserter(report.missing_clos, report.missing_clos.end()));
  std::set_difference(student_clos.begin(), student_clos.end(), confirmed_clos.begin(),
                      confirmed_clos.end(),
                      std::inserter(report.extra_clos, report.extra_clos.end()));
  return report;
}

}  // namespace crowdkm
