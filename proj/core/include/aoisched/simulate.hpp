#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "aoisched/decomp.hpp"
#include "aoisched/exact_solver.hpp"
#include "aoisched/model.hpp"
#include "aoisched/rng.hpp"

namespace aoisched {

/// A scheduling rule the simulator can drive. Implementations must be
/// stateless across slots: act() may use only the observed per-device state
/// indices and the supplied stream. clone() supports replication-parallel
/// runs; clones must behave identically to the source.
class PolicySource {
 public:
  virtual ~PolicySource() = default;
  /// Canonical id of the joint action to apply now. `rng` is the dedicated
  /// policy stream; deterministic rules must not touch it.
  virtual std::uint32_t act(const std::vector<std::uint32_t>& dev, SplitMix64& rng) = 0;
  virtual std::unique_ptr<PolicySource> clone() const = 0;
  virtual std::string name() const = 0;
};

/// Wraps a solved full-space policy table.
std::unique_ptr<PolicySource> make_table_policy(const SystemModel& model, Policy policy,
                                                std::string name);
/// Never transmits; useful as a floor check (ages pin at their caps).
std::unique_ptr<PolicySource> make_all_idle_policy(const SystemModel& model);
/// Decomposition-guided rule evaluated on the fly from per-device tables.
std::unique_ptr<PolicySource> make_suboptimal_policy(const SystemModel& model,
                                                     DecompositionTables tables);
/// Largest-receiver-age-first baseline with per-device sampling rules.
std::unique_ptr<PolicySource> make_greedy_policy(const SystemModel& model,
                                                 DecompositionTables tables);
/// Randomized base rule: draws one uniform per slot to pick the scheduled
/// subset from the systematic law, then applies per-device sampling rules.
std::unique_ptr<PolicySource> make_base_policy(const SystemModel& model,
                                               DecompositionTables tables);

struct SimOptions {
  std::uint64_t horizon = 10000;   // measured slots per replication
  std::uint64_t burn_in = 1000;    // discarded slots before measurement
  int replications = 1;
  std::uint64_t seed = 0;
  int threads = 1;                 // 0 = hardware concurrency
  bool record_trajectory = false;  // replication 0 only
};

/// Replication results. Streams are keyed by (seed, replication, device), so
/// every statistic is independent of the thread count and two policies run
/// with the same options see identical channel and arrival outcomes.
struct SimResult {
  std::vector<double> device_mean;              // per device, over reps and slots
  double overall_mean = 0.0;                    // device average of device_mean
  double std_error = 0.0;                       // of rep_overall across reps
  std::vector<double> rep_overall;              // [rep]
  std::vector<std::vector<double>> rep_device;  // [rep][device]
  /// [slot][device] receiver age at the start of each measured slot of
  /// replication 0; empty unless record_trajectory.
  std::vector<std::vector<std::uint32_t>> trajectory;
};

/// Runs the fleet from the reference state. Each slot observes the state,
/// asks the policy, then draws one channel coin and one arrival coin per
/// device (always both, in that order, whether used or not) and applies the
/// sampled dynamics. Cost is the receiver age at the start of the slot.
SimResult simulate(const SystemModel& model, const PolicySource& policy, const SimOptions& opts);

/// Side-by-side runs under common random numbers plus pairwise contrasts.
struct Comparison {
  std::vector<std::string> names;
  std::vector<SimResult> results;
  /// mean_diff[i][j] = mean over reps of (overall_i - overall_j).
  std::vector<std::vector<double>> mean_diff;
  std::vector<std::vector<double>> diff_std_error;
};

Comparison compare_policies(const SystemModel& model,
                            const std::vector<const PolicySource*>& policies,
                            const SimOptions& opts);

}  // namespace aoisched
