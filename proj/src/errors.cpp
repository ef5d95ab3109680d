#include "crowdkm/errors.hpp"

namespace crowdkm {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::CyclicDependency: return "CyclicDependency";
    case Errc::DuplicateStageId: return "DuplicateStageId";
    case Errc::DanglingDependency: return "DanglingDependency";
    case Errc::UnknownAssessment: return "UnknownAssessment";
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::UnauthorizedActor: return "UnauthorizedActor";
    case Errc::UnknownCommunity: return "UnknownCommunity";
    case Errc::NotAssignee: return "NotAssignee";
    case Errc::AlreadyRegistered: return "AlreadyRegistered";
    case Errc::UntaggedQuestion: return "UntaggedQuestion";
    case Errc::InvalidMarksRange: return "InvalidMarksRange";
    case Errc::DuplicateItem: return "DuplicateItem";
    case Errc::NotEnrolled: return "NotEnrolled";
    case Errc::NoSuchItem: return "NoSuchItem";
    case Errc::GradingAlreadyStarted: return "GradingAlreadyStarted";
    case Errc::ResultsNotPublished: return "ResultsNotPublished";
    case Errc::InvalidProportions: return "InvalidProportions";
    case Errc::StageNotReady: return "StageNotReady";
    case Errc::InfeasibleRedundancy: return "InfeasibleRedundancy";
    case Errc::NoCriteria: return "NoCriteria";
    case Errc::MarksOutOfRange: return "MarksOutOfRange";
    case Errc::NotInVab: return "NotInVab";
    case Errc::ItemAlreadyGradedByThisGrader: return "ItemAlreadyGradedByThisGrader";
    case Errc::EmptyGradeSet: return "EmptyGradeSet";
    case Errc::NoGrades: return "NoGrades";
    case Errc::GradingIncomplete: return "GradingIncomplete";
    case Errc::UnauthorizedAuthor: return "UnauthorizedAuthor";
    case Errc::UnknownWorker: return "UnknownWorker";
    case Errc::UnknownArtifact: return "UnknownArtifact";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::AlreadyPublished: return "AlreadyPublished";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::CorruptLog: return "CorruptLog";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace crowdkm
