#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unishield {

enum class ErrorCode {
  MalformedRle,
  RunSumMismatch,
  OutOfRange,
  DecodeError,
  DimensionMismatch,
  MissingAnswerTag,
  UnknownLabel,
  AdapterUnavailable,
  DuplicateKey,
  InvalidDescriptor,
  NoDetectorForKey,
  Timeout,
  ProtocolViolation,
  AdapterError,
  MissingMaskSource,
  GroupTooSmall,
  SupportMismatch,
  EmptyInput,
  DegenerateClasses,
  InvalidArgument,
  IoError,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// Pipeline stage a failure is attributed to. kNone for errors raised outside
// of a pipeline run.
enum class Stage { kNone, kRoute, kSchedule, kToolbox, kReport };

std::string_view to_string(Stage stage);

/// Single exception type for the library. `detail()` carries auxiliary
/// payload such as the raw adapter text behind a MissingAnswerTag.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  Stage stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  Error with_stage(Stage stage) const {
    Error copy = *this;
    copy.stage_ = stage;
    return copy;
  }

 private:
  ErrorCode code_;
  Stage stage_ = Stage::kNone;
  std::string detail_;
};

}  // namespace unishield
