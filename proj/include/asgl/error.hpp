#pragma once

#include <stdexcept>
#include <string>

namespace asgl {

// Error categories. The enum value doubles as the process exit code, so the
// CLI can be scripted against without parsing message text.
enum class ErrorCode {
  dimension = 2,  // tensor shape / axis / graph size mismatches
  config = 3,     // bad or unknown configuration values
  ingest = 4,     // malformed input records (keypoints, sidecars)
  data = 5,       // semantically invalid data (labels, splits, sampling)
  numeric = 6,    // non-finite values where finite ones are required
  file = 7,       // missing or unreadable/unwritable files
  eval = 8,       // retrieval protocol left nothing to evaluate
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::dimension: return "dimension-error";
    case ErrorCode::config: return "config-error";
    case ErrorCode::ingest: return "ingest-error";
    case ErrorCode::data: return "data-error";
    case ErrorCode::numeric: return "numeric-error";
    case ErrorCode::file: return "file-error";
    case ErrorCode::eval: return "eval-error";
  }
  return "unknown-error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace asgl
