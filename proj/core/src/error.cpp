#include "sharpnorm/error.hpp"

namespace sharpnorm {

const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Argument: return "argument";
    case ErrorCategory::Dimension: return "dimension";
    case ErrorCategory::Structure: return "structure";
    case ErrorCategory::Format: return "format";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Version: return "version";
    case ErrorCategory::Numeric: return "numeric";
    case ErrorCategory::UnsupportedLoss: return "unsupported-loss";
    case ErrorCategory::Degenerate: return "degenerate-input";
    case ErrorCategory::Refusal: return "refusal";
  }
  return "unknown";
}

void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace sharpnorm
