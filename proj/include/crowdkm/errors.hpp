#pragma once

#include <stdexcept>
#include <string>

namespace crowdkm {

// Stable error codes for every named precondition failure in the engine.
enum class Errc {
  CyclicDependency,
  DuplicateStageId,
  DanglingDependency,
  UnknownAssessment,
  IllegalTransition,
  UnauthorizedActor,
  UnknownCommunity,
  NotAssignee,
  AlreadyRegistered,
  UntaggedQuestion,
  InvalidMarksRange,
  DuplicateItem,
  NotEnrolled,
  NoSuchItem,
  GradingAlreadyStarted,
  ResultsNotPublished,
  InvalidProportions,
  StageNotReady,
  InfeasibleRedundancy,
  NoCriteria,
  MarksOutOfRange,
  NotInVab,
  ItemAlreadyGradedByThisGrader,
  EmptyGradeSet,
  NoGrades,
  GradingIncomplete,
  UnauthorizedAuthor,
  UnknownWorker,
  UnknownArtifact,
  UnknownTask,
  AlreadyPublished,
  ParseError,
  ValidationError,
  CorruptLog,
  IoError,
};

const char* errc_name(Errc code);

class KmError : public std::runtime_error {
 public:
  KmError(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace crowdkm
