#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aoisched/decomp.hpp"
#include "aoisched/exact_solver.hpp"
#include "aoisched/model.hpp"
#include "aoisched/simulate.hpp"

namespace aoisched {

/// Fleet configuration format, schema_version 1. Top level: schema_version,
/// variant, K, M, devices. Per device: L, lambda, cap_d, cap_r always;
/// rho and cap_b only under random_arrival; tau only under
/// non_zero_generation_time. cap_d, cap_r, cap_b default to 10 when omitted.
/// Unknown keys anywhere are rejected. Throws ConfigError on any problem.
SystemConfig config_from_json(const std::string& text);
SystemConfig load_config(const std::string& path);

/// Canonical serialization: exactly the keys the variant allows, in schema
/// order. indent < 0 emits one line.
std::string config_to_json(const SystemConfig& cfg, int indent = -1);
void save_config(const SystemConfig& cfg, const std::string& path);

/// Shortest exact decimal for finite values; "+inf", "-inf", "nan" otherwise.
std::string format_double(double v);

/// CSV writers. Every file starts with '#' comment lines carrying the
/// resolved config (and the seed where randomness was involved), so outputs
/// are self-describing.

/// Columns: state_index, per-device coordinates (a_b_k, a_d_k, a_r_k, d_k),
/// per-device action characters, and the relative value when one is given.
void write_policy_csv(std::ostream& os, const SystemModel& model, const Policy& policy,
                      const std::vector<double>* values = nullptr);

/// Columns: the reduced-state coordinates (the thresholded device loses its
/// a_d column) and phi, "+inf" for states where the action never activates.
void write_threshold_csv(std::ostream& os, const SystemModel& model,
                         const ThresholdTable& table);

/// Columns: device, a_b, a_d, a_r, d, value, sampling. Per-device average
/// costs appear as comment lines.
void write_per_device_csv(std::ostream& os, const SystemModel& model,
                          const DecompositionTables& tables);

/// Columns: policy_name, replication, device, mean_aoi.
void write_sim_csv(std::ostream& os, const SystemModel& model,
                   const std::vector<std::string>& names,
                   const std::vector<SimResult>& results, std::uint64_t seed);

/// JSON summary of simulation results: per policy the overall mean, standard
/// error, and per-device means, with the resolved config and seed embedded.
std::string sim_summary_json(const SystemConfig& cfg, std::uint64_t seed,
                             const std::vector<std::string>& names,
                             const std::vector<SimResult>& results);

}  // namespace aoisched
