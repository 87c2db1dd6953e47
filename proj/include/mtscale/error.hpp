#ifndef MTSCALE_ERROR_HPP
#define MTSCALE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtscale {

enum class ErrorCode {
  InvalidInput,
  UnknownControlToken,
  MagicMismatch,
  VersionMismatch,
  TruncatedFile,
  CorruptShard,
  InsufficientData,
  FitFailed,
  InvalidComparison,
  InfeasibleTarget,
  UnitMismatch,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::UnknownControlToken: return "UnknownControlToken";
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::CorruptShard: return "CorruptShard";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::FitFailed: return "FitFailed";
    case ErrorCode::InvalidComparison: return "InvalidComparison";
    case ErrorCode::InfeasibleTarget: return "InfeasibleTarget";
    case ErrorCode::UnitMismatch: return "UnitMismatch";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; the code carries the error class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace mtscale

#endif  // MTSCALE_ERROR_HPP
