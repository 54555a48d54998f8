#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dixon {

enum class ErrorCode : std::uint8_t {
  kFormat,
  kLength,
  kIo,
  kBounds,
  kSize,
  kShape,
  kDegenerateScale,
  kDegeneratePhantom,
  kDirective,
  kConfig,
  kState,
  kDivergence,
  kInput,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the trainer when a loss becomes non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t step, const std::string& message)
      : Error(ErrorCode::kDivergence, "step " + std::to_string(step) + ": " + message), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kLength: return "length error";
    case ErrorCode::kIo: return "I/O error";
    case ErrorCode::kBounds: return "bounds error";
    case ErrorCode::kSize: return "size error";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kDegenerateScale: return "degenerate-scale error";
    case ErrorCode::kDegeneratePhantom: return "degenerate-phantom error";
    case ErrorCode::kDirective: return "directive error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kState: return "state error";
    case ErrorCode::kDivergence: return "divergence error";
    case ErrorCode::kInput: return "input error";
  }
  return "error";
}

}  // namespace dixon
