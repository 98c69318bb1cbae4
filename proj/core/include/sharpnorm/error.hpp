#pragma once

#include <stdexcept>
#include <string>

namespace sharpnorm {

// Every failure surfaced by the library carries one of these categories so the
// CLI can report a single machine-readable line and callers can dispatch on it.
enum class ErrorCategory {
  Argument,        // bad user-supplied value (flag, config field, range)
  Dimension,       // tensor/shape mismatch
  Structure,       // network topology does not admit the requested operation
  Format,          // malformed file contents (IDX, checkpoint, CSV, JSON)
  Io,              // filesystem failure
  Version,         // recognized file but unsupported version
  Numeric,         // non-finite values, divergence
  UnsupportedLoss, // operation not defined for the chosen loss
  Degenerate,      // statistically meaningless input (constant column, n < 3)
  Refusal,         // guarded operation declined (e.g. oracle over parameter cap)
};

const char* to_string(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string message)
      : std::runtime_error(std::move(message)), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

inline void require(bool condition, ErrorCategory category, const std::string& message) {
  if (!condition) fail(category, message);
}

}  // namespace sharpnorm
