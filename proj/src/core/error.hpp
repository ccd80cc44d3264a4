// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ordino {

// Values are part of the C API (ordino_status) and must stay stable.
enum class ErrorCode : int {
  Ok = 0,
  ParseError = 1,
  UnsupportedScore = 2,
  OutOfRangePitch = 3,
  LabelMismatch = 4,
  InsufficientData = 5,
  EmptySequence = 6,
  FormatError = 7,
  SizeMismatch = 8,
  NonFiniteValue = 9,
  LengthMismatch = 10,
  ShapeMismatch = 11,
  NonFiniteGradient = 12,
  WidthMismatch = 13,
  CoverageMismatch = 14,
  LabelOutOfRange = 15,
  ConfigError = 16,
  DataError = 17,
  IoError = 18,
  InvalidArgument = 19,
  Internal = 20,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Warnings go to stderr unless silenced (tests silence them).
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace ordino
