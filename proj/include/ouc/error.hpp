#pragma once

#include <stdexcept>
#include <string>

namespace ouc {

enum class ErrorKind {
  Dimension,
  Domain,
  NumericalFailure,
  NotHurwitz,
  NotPsd,
  Unsupported,
  Size,
  Capacity,
  NotGeneric,
  Inconsistency,
  DegenerateInitialState,
  OutOfScope,
  BlowUp,
  Config,
};

[[nodiscard]] inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::NotHurwitz: return "not-hurwitz";
    case ErrorKind::NotPsd: return "not-psd";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Size: return "size";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::NotGeneric: return "not-generic";
    case ErrorKind::Inconsistency: return "inconsistency";
    case ErrorKind::DegenerateInitialState: return "degenerate-initial-state";
    case ErrorKind::OutOfScope: return "out-of-scope";
    case ErrorKind::BlowUp: return "blow-up";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// CLI exit status: 2 validation, 3 numerical, 4 capacity.
[[nodiscard]] inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericalFailure:
    case ErrorKind::BlowUp:
      return 3;
    case ErrorKind::Capacity:
      return 4;
    default:
      return 2;
  }
}

}  // namespace ouc
