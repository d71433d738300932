#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "aoisched/errors.hpp"

namespace aoisched {

/// How a device obtains the status updates it transmits.
///  - GenerateAtWill: sampling a fresh update is instantaneous.
///  - RandomArrival: updates arrive by a Bernoulli process into a one-slot
///    buffer; sampling anew means switching to the buffered update.
///  - NonZeroGenerationTime: sampling anew blocks the device for a fixed
///    number of generation slots before transmission can start.
enum class ModelVariant {
  GenerateAtWill,
  RandomArrival,
  NonZeroGenerationTime,
};

std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& name);

/// Static parameters of one device and its channel.
struct DeviceParams {
  int packets_per_update = 2;       // packets per status update, >= 2
  double channel_reliability = 1.0; // per-slot delivery probability, (0, 1]
  double arrival_rate = 0.0;        // per-slot arrival probability, [0, 1] (RandomArrival)
  int cap_device = 10;              // device-side AoI cap, >= 1
  int cap_receiver = 10;            // receiver-side AoI cap, >= 1
  int cap_buffer = 10;              // buffer AoI cap, >= 1 (RandomArrival)
  int generation_slots = 1;         // slots to generate an update, >= 1 (NonZeroGenerationTime)
};

/// Fleet-level model description.
struct SystemConfig {
  ModelVariant variant = ModelVariant::GenerateAtWill;
  int max_scheduled = 1;  // devices allowed to transmit per slot, in [0, K]
  std::vector<DeviceParams> devices;

  int device_count() const { return static_cast<int>(devices.size()); }
  /// Throws ConfigError on any out-of-range or inconsistent field.
  void validate() const;
};

/// Per-device state. buffer_age is meaningful only under RandomArrival and
/// held at 0 otherwise; 0 means the buffer is empty. remaining counts packets
/// still to deliver from the in-transmission update; values above
/// packets_per_update (NonZeroGenerationTime only) mean the update is still
/// being generated.
struct DeviceState {
  int buffer_age = 0;
  int device_age = 0;
  int receiver_age = 0;
  int remaining = 1;

  friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

/// What one device does in one slot.
enum class DeviceAction : std::uint8_t {
  Idle = 0,      // stay silent
  Continue = 1,  // transmit the next packet of the in-transmission update
  Fresh = 2,     // sample anew and transmit its first packet
};

/// 'I', 'C' or 'F'.
char action_char(DeviceAction a);

/// Joint action, one entry per device.
using SystemAction = std::vector<DeviceAction>;

/// Joint state: per-device states plus the packed joint index.
struct SystemState {
  std::vector<DeviceState> device;
  std::uint64_t index = 0;
};

/// One possible successor of a per-device transition.
struct TransitionEntry {
  DeviceState state;
  double prob;
};

/// Zero-probability branches are dropped and duplicate successors merged, so
/// entries are distinct and probabilities sum to 1.
using TransitionDistribution = std::vector<TransitionEntry>;

/// Enumeration and packing of one device's state space. Index layout is
/// mixed-radix with remaining-1 least significant, then receiver_age, then
/// device_age, then buffer_age, so `remaining` varies fastest along the index.
class DeviceSpace {
 public:
  DeviceSpace() = default;
  DeviceSpace(const DeviceParams& params, ModelVariant variant);

  std::uint32_t size() const { return size_; }
  int remaining_values() const { return nd_rem_; }
  bool has_buffer() const { return nb_ > 1; }
  int cap_device() const { return ncap_d_; }
  int cap_receiver() const { return ncap_r_; }
  int cap_buffer() const { return nb_ - 1; }

  /// Packs a state; throws std::out_of_range if any coordinate is outside
  /// the space.
  std::uint32_t index_of(const DeviceState& x) const;
  DeviceState state_at(std::uint32_t index) const;
  bool contains(const DeviceState& x) const;

  /// Distance between indices of states adjacent in one coordinate.
  std::uint32_t remaining_stride() const { return 1; }
  std::uint32_t receiver_stride() const { return static_cast<std::uint32_t>(nd_rem_); }
  std::uint32_t device_age_stride() const {
    return static_cast<std::uint32_t>(nd_rem_) * static_cast<std::uint32_t>(ncap_r_ + 1);
  }
  std::uint32_t buffer_stride() const {
    return device_age_stride() * static_cast<std::uint32_t>(ncap_d_ + 1);
  }

  int device_age_of(std::uint32_t index) const {
    return static_cast<int>((index / device_age_stride()) %
                            static_cast<std::uint32_t>(ncap_d_ + 1));
  }
  int receiver_age_of(std::uint32_t index) const {
    return static_cast<int>((index / receiver_stride()) %
                            static_cast<std::uint32_t>(ncap_r_ + 1));
  }
  int buffer_age_of(std::uint32_t index) const {
    return static_cast<int>(index / buffer_stride());
  }

 private:
  int nb_ = 1;       // buffer_age values (1 when the variant has no buffer)
  int ncap_d_ = 0;   // device_age values - 1
  int ncap_r_ = 0;   // receiver_age values - 1
  int nd_rem_ = 1;   // remaining values
  std::uint32_t size_ = 0;
};

/// All states of one device in index order (remaining varies fastest).
std::vector<DeviceState> enumerate_device_states(const DeviceParams& params,
                                                 ModelVariant variant);

/// True when the device may take `a` in state `x` under the given variant:
/// Fresh needs a buffered update under RandomArrival, and any transmission
/// needs generation to have finished under NonZeroGenerationTime.
bool device_action_feasible(const DeviceParams& params, ModelVariant variant,
                            const DeviceState& x, DeviceAction a);

/// One-slot sampled dynamics; the single source of truth shared by the exact
/// kernels and the simulator. `delivered` is the channel outcome (ignored
/// when the device stays silent or spends the slot generating), `arrival` the
/// buffer arrival outcome (RandomArrival only). Throws InfeasibleAction if
/// `a` is not feasible in `x`, std::out_of_range if `x` is outside the space.
DeviceState device_step(const DeviceParams& params, ModelVariant variant,
                        const DeviceState& x, DeviceAction a, bool delivered,
                        bool arrival);

/// Exact one-device, one-slot kernel under each variant.
TransitionDistribution device_transition(const DeviceParams& params,
                                         const DeviceState& x, DeviceAction a);
TransitionDistribution device_transition_random_arrival(const DeviceParams& params,
                                                        const DeviceState& x,
                                                        DeviceAction a);
TransitionDistribution device_transition_gen_time(const DeviceParams& params,
                                                  const DeviceState& x,
                                                  DeviceAction a);
/// Dispatch on the variant.
TransitionDistribution device_transition(const DeviceParams& params,
                                         ModelVariant variant,
                                         const DeviceState& x, DeviceAction a);

/// All joint actions with at most max_scheduled non-idle devices, in canonical
/// order: ascending mixed-radix value with device 0 the least significant
/// digit and Idle < Continue < Fresh. The all-idle action is always first.
/// Throws BudgetExceeded if the list would exceed max_actions entries.
std::vector<SystemAction> feasible_system_actions(int device_count, int max_scheduled,
                                                  std::uint64_t max_actions = (1u << 22));

/// Instantaneous cost: sum of receiver-side ages.
double stage_cost(const SystemState& x);

/// Joint model with per-device kernels precomputed. Joint quantities (state
/// count, indices) are derived on demand; no joint table is materialized, so
/// construction stays cheap even for fleets whose joint space is astronomical.
class SystemModel {
 public:
  struct Outcome {
    std::uint32_t next;
    double prob;
  };
  /// Successor set of one (device state, device action); n == 0 marks an
  /// infeasible pairing. At most 4 distinct successors exist after merging.
  struct OutcomeSet {
    std::uint8_t n = 0;
    std::array<Outcome, 4> entry{};
  };

  /// Validates the configuration and builds per-device kernels.
  explicit SystemModel(SystemConfig cfg);

  const SystemConfig& config() const { return cfg_; }
  ModelVariant variant() const { return cfg_.variant; }
  int device_count() const { return cfg_.device_count(); }
  int max_scheduled() const { return cfg_.max_scheduled; }

  const DeviceSpace& space(int k) const { return spaces_[static_cast<std::size_t>(k)]; }
  /// Joint state count; saturates at uint64 max (see state_count_exact()).
  std::uint64_t state_count() const { return state_count_; }
  bool state_count_exact() const { return state_count_exact_; }
  std::uint64_t stride(int k) const { return strides_[static_cast<std::size_t>(k)]; }

  const std::vector<SystemAction>& actions() const { return actions_; }
  std::uint32_t action_count() const { return static_cast<std::uint32_t>(actions_.size()); }
  /// Canonical position of `w` in actions(); throws std::out_of_range for
  /// actions outside the feasible list.
  std::uint32_t action_id_of(const SystemAction& w) const;

  /// All ages zero, remaining = packets_per_update, empty buffer. Only
  /// meaningful while state_count_exact() holds; use the per-device form on
  /// fleets whose joint space saturates.
  std::uint64_t reference_index() const { return reference_index_; }
  /// Device k's component of the reference state.
  DeviceState reference_device_state(int k) const {
    return DeviceState{0, 0, 0, cfg_.devices[static_cast<std::size_t>(k)].packets_per_update};
  }

  std::uint64_t index_of(const std::vector<DeviceState>& device_states) const;
  SystemState state_at(std::uint64_t index) const;
  /// Decomposes a joint index into per-device state indices.
  void split_index(std::uint64_t index, std::vector<std::uint32_t>& dev) const;
  std::uint64_t join_indices(const std::vector<std::uint32_t>& dev) const;

  double stage_cost_at(std::uint64_t index) const;
  /// receiver_age of device k's state with the given per-device index.
  int receiver_age_of(int k, std::uint32_t dev_index) const {
    return receiver_age_[static_cast<std::size_t>(k)][dev_index];
  }

  const OutcomeSet& outcomes(int k, std::uint32_t dev_index, DeviceAction a) const {
    return kernel_[static_cast<std::size_t>(k)]
                  [dev_index * 3u + static_cast<std::uint32_t>(a)];
  }
  /// Bitmask of feasible device actions (bit i = action i).
  std::uint8_t feasible_mask(int k, std::uint32_t dev_index) const {
    return feasible_[static_cast<std::size_t>(k)][dev_index];
  }
  /// True when every device component of actions()[action_id] is feasible.
  bool action_feasible_at(const std::vector<std::uint32_t>& dev, std::uint32_t action_id) const;

  /// Exact joint kernel, as the product of per-device kernels.
  std::vector<std::pair<SystemState, double>> system_transition(const SystemState& x,
                                                                const SystemAction& w) const;

 private:
  SystemConfig cfg_;
  std::vector<DeviceSpace> spaces_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t state_count_ = 0;
  bool state_count_exact_ = true;
  std::uint64_t reference_index_ = 0;
  std::vector<SystemAction> actions_;
  std::unordered_map<std::string, std::uint32_t> action_ids_;
  std::vector<std::vector<OutcomeSet>> kernel_;        // [k][dev_index * 3 + action]
  std::vector<std::vector<std::uint8_t>> feasible_;    // [k][dev_index]
  std::vector<std::vector<std::uint16_t>> receiver_age_;
};

/// Mixed-radix iterator over the joint state space: advances the joint index
/// together with the per-device indices, device 0 fastest.
class JointOdometer {
 public:
  explicit JointOdometer(const SystemModel& model, std::uint64_t start = 0);
  std::uint64_t index() const { return index_; }
  const std::vector<std::uint32_t>& digits() const { return digits_; }
  void advance();

 private:
  const SystemModel* model_;
  std::uint64_t index_;
  std::vector<std::uint32_t> digits_;
};

}  // namespace aoisched
