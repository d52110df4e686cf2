#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tabssl {

enum class ErrorCode {
    ShapeMismatch,
    NonFiniteValue,
    DomainError,
    DivisionByZero,
    InvalidAxis,
    NotScalar,
    DetachedLoss,
    InvalidDims,
    BatchTooSmall,
    InvalidTemperature,
    InvalidWeights,
    NonFiniteLoss,
    MissingGradient,
    NonFiniteGradient,
    UnknownOptimizer,
    InvalidLearningRate,
    FileNotFound,
    RaggedRows,
    EmptyTable,
    SchemaMismatch,
    MissingLabel,
    TooFewRows,
    InvalidK,
    ClassTooSmall,
    NoLabels,
    SingleClass,
    LengthMismatch,
    ParseError,
    UnknownKey,
    InvalidValue,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI exit path) can branch on the kind, not the text.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace tabssl
