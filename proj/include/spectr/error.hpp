#pragma once

#include <stdexcept>
#include <string>

namespace spectr {

enum class ErrorKind {
  validation,
  dimension,
  degenerate_residual,
  degenerate_support,
  invalid_draft,
  invalid_gamma,
  size_limit,
  domain,
  structural,
  undefined,
  internal,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::degenerate_residual: return "degenerate-residual";
    case ErrorKind::degenerate_support: return "degenerate-support";
    case ErrorKind::invalid_draft: return "invalid-draft";
    case ErrorKind::invalid_gamma: return "invalid-gamma";
    case ErrorKind::size_limit: return "size-limit";
    case ErrorKind::domain: return "domain";
    case ErrorKind::structural: return "structural";
    case ErrorKind::undefined: return "undefined";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace spectr
