#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "aoisched/model.hpp"

namespace aoisched {

struct SolverOptions {
  double tol = 1e-9;              // span tolerance on successive differences
  std::uint64_t max_iters = 1'000'000;
  /// Weight on the fresh Bellman image in each update. Values below 1 are an
  /// aperiodicity transform: fixed points are unchanged, but the iteration
  /// also converges on periodic chains (deterministic channels).
  double damping = 0.5;
  int threads = 1;                // 0 = hardware concurrency
  std::uint64_t max_states = 8'000'000;  // joint-space allocation budget
  /// State whose value is pinned to 0; default: all ages zero, full updates.
  std::optional<std::uint64_t> reference_state;
};

/// Relative value function with the long-run average cost per slot.
struct ValueTable {
  std::vector<double> values;
  double theta = 0.0;
  std::uint64_t reference_state = 0;
  std::uint64_t iterations = 0;
  double final_span = 0.0;
};

/// Deterministic stationary policy: canonical action id per joint state.
struct Policy {
  std::vector<std::uint32_t> action_id;

  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Relative value iteration for the joint average-cost problem. Returns the
/// value table with values[reference] == 0 and theta the converged average
/// cost. Throws NonConvergence when max_iters is hit, BudgetExceeded when the
/// joint space is over budget. Results are bit-identical for any thread count.
ValueTable rvia_solve(const SystemModel& model, const SolverOptions& opts = {});

/// One-step cost of taking actions()[action_id] in state `index` against the
/// relative values V: stage cost plus expected successor value. The action
/// must be feasible in the state.
double state_action_cost(const SystemModel& model, std::uint64_t index,
                         std::uint32_t action_id, const std::vector<double>& V);

/// Greedy policy with respect to V: per state, the canonical-first action
/// minimizing the expected successor value over feasible actions.
Policy extract_policy(const SystemModel& model, const std::vector<double>& V,
                      int threads = 1);

struct StructuredExtractResult {
  Policy policy;
  std::uint64_t evaluated = 0;   // states resolved by a full argmin
  std::uint64_t propagated = 0;  // states resolved by threshold propagation
};

/// Same policy as extract_policy, but when a state's device-age predecessor
/// chose an action that samples anew on that device, the choice is copied
/// without re-evaluating candidates: once sampling anew is optimal it stays
/// optimal as that device's age grows.
StructuredExtractResult structure_aware_extract(const SystemModel& model,
                                                const std::vector<double>& V);

/// Scheduling threshold of one action along one device's age axis.
struct ThresholdTable {
  int device = 0;
  std::uint32_t action_id = 0;
  /// Minimum device_age of `device` at which `action_id` minimizes the
  /// one-step cost, per reduced state (all coordinates except that age),
  /// +infinity when it never does. Reduced states are ordered by the joint
  /// index of their device_age = 0 representative.
  std::vector<double> min_age;
};

/// Computes the activation threshold of `action_id` (which must sample anew
/// on `device`) along that device's age coordinate.
ThresholdTable compute_thresholds(const SystemModel& model, const std::vector<double>& V,
                                  int device, std::uint32_t action_id);

struct MonotonicityReport {
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
  double worst = 0.0;  // largest V(x) - V(x + e) over violating pairs
};

/// Verifies that V is nondecreasing in every age coordinate (buffer, device,
/// receiver age) per device, by adjacent increments. A pair violates when
/// V(x + e) < V(x) - tol. The empty-buffer boundary (buffer age 0 -> 1) is
/// not checked: an empty buffer disables the fresh-start action, so the
/// monotone ordering is only implied where the feasible action set is
/// uniform, i.e. from buffer age 1 upward.
MonotonicityReport verify_value_monotonicity(const SystemModel& model,
                                             const std::vector<double>& V,
                                             double tol = 1e-7);

struct JInequalityReport {
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
  double worst = 0.0;
};

/// One-step cost callable: J(state index, action id).
using CostFn = std::function<double(std::uint64_t, std::uint32_t)>;

/// Verifies the dominance-propagation inequality behind the threshold
/// structure: for any action W sampling anew on a set of devices, raising
/// those devices' ages cannot make W worse relative to any alternative:
///   J(X_hi, W) - J(X_hi, W') <= J(X_lo, W) - J(X_lo, W') + tol.
/// Exhaustive over all such pairs; meant for small instances.
JInequalityReport verify_j_inequality(const SystemModel& model, const CostFn& J,
                                      double tol = 1e-6);
/// Convenience overload using state_action_cost over V.
JInequalityReport verify_j_inequality(const SystemModel& model,
                                      const std::vector<double>& V, double tol = 1e-6);

/// Maps a state index to a distribution over canonical action ids; entries
/// must have positive probability summing to 1.
using RandomizedPolicy =
    std::function<void(std::uint64_t, std::vector<std::pair<std::uint32_t, double>>&)>;

struct EvalOptions {
  std::uint64_t max_states = 8'000'000;
  /// Start of the reachability sweep; default the model's reference state.
  std::optional<std::uint64_t> initial_state;
};

struct EvalResult {
  double theta = 0.0;
  std::uint64_t reachable = 0;        // states reachable from the initial state
  std::uint64_t recurrent = 0;        // size of the recurrent class
};

/// Long-run average cost of a fixed policy, computed exactly: restrict the
/// induced chain to the states reachable from the initial state, find its
/// closed communicating class, and average the stage cost under the
/// stationary distribution. Throws MultichainDetected when more than one
/// closed class is reachable.
EvalResult exact_policy_evaluation(const SystemModel& model, const RandomizedPolicy& policy,
                                   const EvalOptions& opts = {});
EvalResult exact_policy_evaluation(const SystemModel& model, const Policy& policy,
                                   const EvalOptions& opts = {});

}  // namespace aoisched
