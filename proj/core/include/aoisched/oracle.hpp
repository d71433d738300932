#pragma once

#include <cstdint>
#include <vector>

#include "aoisched/exact_solver.hpp"
#include "aoisched/model.hpp"

namespace aoisched {

struct OracleBudget {
  std::uint64_t max_states = 4096;        // joint states
  std::uint64_t max_policies = 2'000'000; // enumerated policies after pruning
  int threads = 1;
};

/// Outcome of brute-force policy search. Policies are enumerated over the
/// states reachable from the reference state under any feasible action
/// (choices elsewhere cannot affect the average cost), with per-state actions
/// deduplicated when they induce identical transition distributions. The
/// enumeration ordinal is a mixed-radix counter over the support, first
/// support state least significant, digits in canonical action order.
struct OracleResult {
  double best_theta = 0.0;
  std::uint64_t best_ordinal = 0;
  /// Best policy on the full space; states outside the support get the first
  /// feasible action.
  Policy best_policy;
  /// Average cost per enumerated policy; NaN where the policy's chain has
  /// more than one closed class and a single average does not exist.
  std::vector<double> policy_thetas;
  std::uint64_t evaluated = 0;
  std::uint64_t skipped_multichain = 0;
  std::vector<std::uint64_t> support;  // reachable joint states, ascending
};

/// Exhaustively evaluates every stationary deterministic policy and returns
/// the exact minimum average cost. Throws BudgetExceeded when the state or
/// policy count is over budget. Intended as an independent check of the
/// iterative solver on tiny instances.
OracleResult enumerate_and_evaluate(const SystemModel& model, const OracleBudget& budget = {});

}  // namespace aoisched
