#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fjic {

enum class ErrorKind {
  Dimension,
  Validation,
  DegenerateModel,
  ShapingInfeasible,
  ParametrizationSingular,
  NotApplicable,
  TransformSingular,
  Assembly,
  Configuration,
  RootFinding,
  Divergence,
  Verification,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension-mismatch";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::DegenerateModel: return "degenerate-model";
    case ErrorKind::ShapingInfeasible: return "shaping-infeasible";
    case ErrorKind::ParametrizationSingular: return "parametrization-singular";
    case ErrorKind::NotApplicable: return "not-applicable";
    case ErrorKind::TransformSingular: return "transform-singular";
    case ErrorKind::Assembly: return "assembly";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::RootFinding: return "root-finding";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Verification: return "verification";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace fjic
