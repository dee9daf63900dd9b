#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kstate {

enum class ErrorCode {
    InvalidArgument,
    DomainMismatch,
    DuplicateStudent,
    EmptyCohort,
    EmptySubset,
    EmptyCohortRequested,
    DegenerateTable,
    BadHeader,
    BadGrade,
    BadRow,
    BadManifest,
    StateLengthMismatch,
    UnknownItemCode,
    AmbiguousBest,
    UnknownCohort,
    AllBinsEmpty,
    NonFiniteValue,
    SchemaVersionMismatch,
    ParseError,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::DuplicateStudent: return "DuplicateStudent";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::EmptyCohortRequested: return "EmptyCohortRequested";
    case ErrorCode::DegenerateTable: return "DegenerateTable";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::BadGrade: return "BadGrade";
    case ErrorCode::BadRow: return "BadRow";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::StateLengthMismatch: return "StateLengthMismatch";
    case ErrorCode::UnknownItemCode: return "UnknownItemCode";
    case ErrorCode::AmbiguousBest: return "AmbiguousBest";
    case ErrorCode::UnknownCohort: return "UnknownCohort";
    case ErrorCode::AllBinsEmpty: return "AllBinsEmpty";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace kstate
