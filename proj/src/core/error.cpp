// SPDX-License-Identifier: Apache-2.0
#include "core/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ordino {

namespace {
std::atomic<bool> g_warnings_enabled{true};
std::mutex g_warn_mutex;
}  // namespace

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedScore: return "UnsupportedScore";
    case ErrorCode::OutOfRangePitch: return "OutOfRangePitch";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::CoverageMismatch: return "CoverageMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DataError: return "DataError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

void warn(const std::string& message) {
  if (!g_warnings_enabled.load()) return;
  std::lock_guard<std::mutex> lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled.store(enabled); }

}  // namespace ordino
