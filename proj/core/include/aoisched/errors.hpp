#pragma once

#include <stdexcept>
#include <string>

namespace aoisched {

/// Invalid or inconsistent fleet configuration or CLI input.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A requested computation would exceed an explicit state/policy/memory budget.
class BudgetExceeded : public std::runtime_error {
 public:
  explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative solver hit its iteration cap before meeting the tolerance.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double final_span)
      : std::runtime_error(what), span(final_span) {}
  double span;
};

/// Policy evaluation found more than one recurrent class, so the long-run
/// average cost is not a single number.
class MultichainDetected : public std::runtime_error {
 public:
  explicit MultichainDetected(const std::string& what) : std::runtime_error(what) {}
};

/// Stationary-distribution linear system could not be solved reliably.
class SingularSystem : public std::runtime_error {
 public:
  explicit SingularSystem(const std::string& what) : std::runtime_error(what) {}
};

/// An action was applied in a state where it is not allowed.
class InfeasibleAction : public std::runtime_error {
 public:
  explicit InfeasibleAction(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aoisched
