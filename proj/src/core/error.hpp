#pragma once

#include <stdexcept>
#include <string>

namespace voxcond {

enum class ErrorCode {
  InvalidArgument = 1,
  BadMagic = 2,
  UnsupportedVersion = 3,
  DimensionOverflow = 4,
  TruncatedPayload = 5,
  LabelOutOfRange = 6,
  IoError = 7,
  ParseError = 8,
  InfeasibleConfig = 9,
  ShapeMismatch = 10,
  Diverged = 11,
  Internal = 12,
};

const char* error_code_name(ErrorCode c);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::BadMagic: return "bad magic";
    case ErrorCode::UnsupportedVersion: return "unsupported version";
    case ErrorCode::DimensionOverflow: return "dimension overflow";
    case ErrorCode::TruncatedPayload: return "truncated payload";
    case ErrorCode::LabelOutOfRange: return "label out of range";
    case ErrorCode::IoError: return "io error";
    case ErrorCode::ParseError: return "parse error";
    case ErrorCode::InfeasibleConfig: return "infeasible config";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::Diverged: return "diverged";
    case ErrorCode::Internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace voxcond
