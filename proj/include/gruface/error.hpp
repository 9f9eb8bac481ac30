#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gruface {

enum class ErrorCode {
  shape_mismatch,
  degenerate_axis,
  invalid_ratio,
  empty_input,
  too_short_audio,
  bad_format,
  truncated,
  invalid_onehot,
  non_finite,
  divergence,
  invalid_config,
  missing_template,
  unknown_label,
  missing_tape,
  empty_dataset,
  io,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape_mismatch: return "E_SHAPE_MISMATCH";
    case ErrorCode::degenerate_axis: return "E_DEGENERATE_AXIS";
    case ErrorCode::invalid_ratio: return "E_INVALID_RATIO";
    case ErrorCode::empty_input: return "E_EMPTY_INPUT";
    case ErrorCode::too_short_audio: return "E_TOO_SHORT_AUDIO";
    case ErrorCode::bad_format: return "E_BAD_FORMAT";
    case ErrorCode::truncated: return "E_TRUNCATED";
    case ErrorCode::invalid_onehot: return "E_INVALID_ONEHOT";
    case ErrorCode::non_finite: return "E_NON_FINITE";
    case ErrorCode::divergence: return "E_DIVERGENCE";
    case ErrorCode::invalid_config: return "E_INVALID_CONFIG";
    case ErrorCode::missing_template: return "E_MISSING_TEMPLATE";
    case ErrorCode::unknown_label: return "E_UNKNOWN_LABEL";
    case ErrorCode::missing_tape: return "E_MISSING_TAPE";
    case ErrorCode::empty_dataset: return "E_EMPTY_DATASET";
    case ErrorCode::io: return "E_IO";
  }
  return "E_UNKNOWN";
}

/// Every failure in the library surfaces as this exception. `code()` is
/// stable and machine readable; `what()` carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) fail(code, detail);
}

}  // namespace gruface
