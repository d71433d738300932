#pragma once

#include <cstdint>
#include <vector>

#include "aoisched/exact_solver.hpp"
#include "aoisched/model.hpp"

namespace aoisched {

/// Solution of one device's average-cost problem under Bernoulli scheduling
/// with a fixed per-slot transmission probability.
struct PerDeviceSolution {
  std::vector<double> values;           // relative values over the device space
  double theta = 0.0;                   // device's average receiver age
  /// Transmission action taken when the device is scheduled; Idle marks
  /// states where no transmission is possible.
  std::vector<DeviceAction> sampling;
  std::uint64_t iterations = 0;
  double final_span = 0.0;
};

/// Value-decomposition of the fleet: independent per-device solutions under
/// fixed scheduling marginals.
struct DecompositionTables {
  std::vector<double> schedule_prob;       // per-device marginal, sum <= M
  std::vector<PerDeviceSolution> per_device;
};

/// Scheduling marginal of the semi-randomized base policy: each device's
/// share of the transmission budget proportional to its channel reliability,
/// clamped to 1.
std::vector<double> default_base_scheduling(const SystemConfig& cfg);

/// Solves one device's average-cost problem: every slot the device is
/// scheduled independently with probability schedule_prob and then picks the
/// transmission action minimizing its own continuation value.
PerDeviceSolution solve_per_device(const SystemModel& model, int device,
                                   double schedule_prob, const SolverOptions& opts = {});

/// Per-device solves for the whole fleet.
DecompositionTables solve_decomposition(const SystemModel& model,
                                        const std::vector<double>& schedule_prob,
                                        const SolverOptions& opts = {});

/// Joint law over schedule sets realizing the given marginals exactly while
/// never scheduling more than max_scheduled devices: systematic sampling over
/// the cumulative probabilities. Returns (device bitmask, probability) pairs
/// with positive probability summing to 1. Requires sum(prob) <= max_scheduled
/// and at most 64 devices.
std::vector<std::pair<std::uint64_t, double>> systematic_subset_law(
    const std::vector<double>& prob, int max_scheduled);

/// Single draw from the same law given a uniform u in [0, 1).
std::uint64_t systematic_subset_draw(const std::vector<double>& prob, double u);

/// Exact evaluation adapter for the base policy: per state, the distribution
/// over joint actions induced by the systematic schedule law with each
/// scheduled device applying its sampling rule.
RandomizedPolicy base_policy_evaluator(const SystemModel& model,
                                       const DecompositionTables& tables);

struct DecompositionReport {
  double theta_joint = 0.0;    // average cost of the base policy, joint solve
  double theta_sum = 0.0;      // sum of per-device averages
  double max_abs_gap = 0.0;    // max |V_joint(X) - sum_k V_k(x_k)|
  std::uint64_t states = 0;
};

/// Solves the joint fixed-policy equation under the base policy and checks
/// that the joint relative values decompose into the per-device sums.
/// Budget-guarded like rvia_solve.
DecompositionReport verify_decomposition(const SystemModel& model,
                                         const DecompositionTables& tables,
                                         const SolverOptions& opts = {});

/// Action of the decomposed scheduling policy in one joint state: the
/// canonical-first feasible action minimizing the sum of per-device expected
/// continuation values. dev holds per-device state indices.
std::uint32_t suboptimal_action(const SystemModel& model, const DecompositionTables& tables,
                                const std::vector<std::uint32_t>& dev);

/// Materializes the decomposed policy over the whole joint space, copying
/// actions along device-age increments where a device samples anew (the same
/// threshold propagation as the exact extraction). Budget-guarded.
StructuredExtractResult materialize_suboptimal_policy(const SystemModel& model,
                                                      const DecompositionTables& tables,
                                                      std::uint64_t max_states = 8'000'000);

/// Greedy baseline: schedule the max_scheduled devices with the largest
/// receiver age (ties to the lowest index) among those able to transmit, each
/// applying its per-device sampling rule.
std::uint32_t greedy_action(const SystemModel& model, const DecompositionTables& tables,
                            const std::vector<std::uint32_t>& dev);

/// One-step cost under the decomposed values: stage cost plus the sum of
/// per-device expected continuation values. Shape-compatible with
/// state_action_cost for the structure checks.
CostFn decomposed_cost_fn(const SystemModel& model, const DecompositionTables& tables);

/// Reusable evaluator of suboptimal_action with per-action tables hoisted out
/// of the per-slot path. Holds references; both arguments must outlive it.
class SuboptimalActor {
 public:
  SuboptimalActor(const SystemModel& model, const DecompositionTables& tables);
  /// Canonical id of the decomposed policy's action; identical tie-breaking
  /// to suboptimal_action.
  std::uint32_t act(const std::vector<std::uint32_t>& dev);

 private:
  const SystemModel& model_;
  const DecompositionTables& tables_;
  /// Per action: the non-idle (device, action) assignments.
  std::vector<std::vector<std::pair<int, DeviceAction>>> assignments_;
  std::vector<std::array<double, 3>> expected_;  // per device: E[idle/continue/fresh]
};

}  // namespace aoisched
