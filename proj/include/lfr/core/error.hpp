#pragma once

#include <stdexcept>
#include <string>

namespace lfr {

enum class ErrorCode {
  ParallelRay,
  NoIntersection,
  TangentRay,
  ZeroDirection,
  DegenerateProjection,
  InsufficientViews,
  ShapeMismatch,
  AllPointsMasked,
  AllViewsMasked,
  UnknownView,
  ConfigError,
  ParseError,
  MissingImage,
  InvalidPose,
  IoError,
  VersionMismatch,
  CorruptArchive,
  InvalidSpec,
  NonFiniteLoss,
  ImageTooSmall,
};

const char* error_code_name(ErrorCode code);

/// Domain error carrying a machine-checkable code plus a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lfr
