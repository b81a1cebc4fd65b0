#pragma once

#include <stdexcept>
#include <string>

namespace liquid_s4 {

enum class ErrorKind {
  InvalidDimension,
  InvalidRange,
  InvalidOrder,
  Decomposition,
  Discretization,
  Pole,
  WoodburySingular,
  Diverged,
  OracleGuard,
  Config,
  Parse,
  Budget,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid dimension";
    case ErrorKind::InvalidRange: return "invalid range";
    case ErrorKind::InvalidOrder: return "invalid order";
    case ErrorKind::Decomposition: return "decomposition error";
    case ErrorKind::Discretization: return "discretization error";
    case ErrorKind::Pole: return "pole error";
    case ErrorKind::WoodburySingular: return "woodbury singularity";
    case ErrorKind::Diverged: return "diverged state";
    case ErrorKind::OracleGuard: return "oracle size guard";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Budget: return "parameter budget exceeded";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

/// Single exception type for the library; `kind()` lets callers map
/// failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace liquid_s4
