#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace llie {

enum class ErrorCode {
  MissingDirectory,
  EmptySplit,
  DimensionMismatch,
  DecodeError,
  NonRGBError,
  CropTooLarge,
  ChannelCountError,
  NegativeBeta,
  ShapeMismatch,
  PyramidDepthMismatch,
  ImageTooSmall,
  UnknownConfigTag,
  IndivisibleDims,
  ConfigMismatch,
  InvalidConfig,
  NonFiniteLoss,
  CheckpointCorrupt,
  ModelUnavailable,
  UnknownKey,
  TypeError,
  RangeError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

void warn(const std::string& message);

}  // namespace llie
