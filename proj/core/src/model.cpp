#include "aoisched/model.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace aoisched {

namespace {

int age_up(int age, int cap) { return std::min(age + 1, cap); }

std::string action_key(const SystemAction& w) {
  std::string key;
  key.reserve(w.size());
  for (DeviceAction a : w) key.push_back(action_char(a));
  return key;
}

/// Multiplies saturating at uint64 max; sets *exact to false on overflow.
std::uint64_t mul_sat(std::uint64_t a, std::uint64_t b, bool* exact) {
  if (a == 0 || b == 0) return 0;
  const std::uint64_t cap = std::numeric_limits<std::uint64_t>::max();
  if (a > cap / b) {
    *exact = false;
    return cap;
  }
  return a * b;
}

}  // namespace

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::GenerateAtWill: return "generate_at_will";
    case ModelVariant::RandomArrival: return "random_arrival";
    case ModelVariant::NonZeroGenerationTime: return "non_zero_generation_time";
  }
  return "unknown";
}

ModelVariant variant_from_string(const std::string& name) {
  if (name == "generate_at_will") return ModelVariant::GenerateAtWill;
  if (name == "random_arrival") return ModelVariant::RandomArrival;
  if (name == "non_zero_generation_time") return ModelVariant::NonZeroGenerationTime;
  throw ConfigError("unknown model variant '" + name + "'");
}

char action_char(DeviceAction a) {
  switch (a) {
    case DeviceAction::Idle: return 'I';
    case DeviceAction::Continue: return 'C';
    case DeviceAction::Fresh: return 'F';
  }
  return '?';
}

void SystemConfig::validate() const {
  if (devices.empty()) throw ConfigError("fleet must contain at least one device");
  if (max_scheduled < 0 || max_scheduled > device_count()) {
    throw ConfigError("max_scheduled must lie in [0, device_count]");
  }
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const DeviceParams& p = devices[i];
    const std::string at = "devices[" + std::to_string(i) + "]: ";
    if (p.packets_per_update < 2) throw ConfigError(at + "L must be >= 2");
    if (!(p.channel_reliability > 0.0) || p.channel_reliability > 1.0) {
      throw ConfigError(at + "lambda must lie in (0, 1]");
    }
    if (p.cap_device < 1) throw ConfigError(at + "cap_d must be >= 1");
    if (p.cap_receiver < 1) throw ConfigError(at + "cap_r must be >= 1");
    if (variant == ModelVariant::RandomArrival) {
      if (p.arrival_rate < 0.0 || p.arrival_rate > 1.0) {
        throw ConfigError(at + "rho must lie in [0, 1]");
      }
      if (p.cap_buffer < 1) throw ConfigError(at + "cap_b must be >= 1");
    }
    if (variant == ModelVariant::NonZeroGenerationTime && p.generation_slots < 1) {
      throw ConfigError(at + "tau must be >= 1");
    }
  }
}

DeviceSpace::DeviceSpace(const DeviceParams& params, ModelVariant variant) {
  nb_ = variant == ModelVariant::RandomArrival ? params.cap_buffer + 1 : 1;
  ncap_d_ = params.cap_device;
  ncap_r_ = params.cap_receiver;
  nd_rem_ = variant == ModelVariant::NonZeroGenerationTime
                ? params.packets_per_update + params.generation_slots - 1
                : params.packets_per_update;
  size_ = static_cast<std::uint32_t>(nb_) * static_cast<std::uint32_t>(ncap_d_ + 1) *
          static_cast<std::uint32_t>(ncap_r_ + 1) * static_cast<std::uint32_t>(nd_rem_);
}

bool DeviceSpace::contains(const DeviceState& x) const {
  return x.buffer_age >= 0 && x.buffer_age < nb_ && x.device_age >= 0 &&
         x.device_age <= ncap_d_ && x.receiver_age >= 0 && x.receiver_age <= ncap_r_ &&
         x.remaining >= 1 && x.remaining <= nd_rem_;
}

std::uint32_t DeviceSpace::index_of(const DeviceState& x) const {
  if (!contains(x)) {
    std::ostringstream os;
    os << "device state (" << x.buffer_age << ", " << x.device_age << ", "
       << x.receiver_age << ", " << x.remaining << ") outside the state space";
    throw std::out_of_range(os.str());
  }
  std::uint32_t idx = static_cast<std::uint32_t>(x.buffer_age);
  idx = idx * static_cast<std::uint32_t>(ncap_d_ + 1) + static_cast<std::uint32_t>(x.device_age);
  idx = idx * static_cast<std::uint32_t>(ncap_r_ + 1) + static_cast<std::uint32_t>(x.receiver_age);
  idx = idx * static_cast<std::uint32_t>(nd_rem_) + static_cast<std::uint32_t>(x.remaining - 1);
  return idx;
}

DeviceState DeviceSpace::state_at(std::uint32_t index) const {
  if (index >= size_) throw std::out_of_range("device state index out of range");
  DeviceState x;
  x.remaining = static_cast<int>(index % static_cast<std::uint32_t>(nd_rem_)) + 1;
  index /= static_cast<std::uint32_t>(nd_rem_);
  x.receiver_age = static_cast<int>(index % static_cast<std::uint32_t>(ncap_r_ + 1));
  index /= static_cast<std::uint32_t>(ncap_r_ + 1);
  x.device_age = static_cast<int>(index % static_cast<std::uint32_t>(ncap_d_ + 1));
  x.buffer_age = static_cast<int>(index / static_cast<std::uint32_t>(ncap_d_ + 1));
  return x;
}

std::vector<DeviceState> enumerate_device_states(const DeviceParams& params,
                                                 ModelVariant variant) {
  DeviceSpace space(params, variant);
  std::vector<DeviceState> states;
  states.reserve(space.size());
  for (std::uint32_t i = 0; i < space.size(); ++i) states.push_back(space.state_at(i));
  return states;
}

bool device_action_feasible(const DeviceParams& params, ModelVariant variant,
                            const DeviceState& x, DeviceAction a) {
  if (a == DeviceAction::Idle) return true;
  if (variant == ModelVariant::RandomArrival && a == DeviceAction::Fresh &&
      x.buffer_age == 0) {
    return false;  // nothing buffered to switch to
  }
  if (variant == ModelVariant::NonZeroGenerationTime &&
      x.remaining > params.packets_per_update) {
    return false;  // update still being generated; the device must stay silent
  }
  return true;
}

DeviceState device_step(const DeviceParams& params, ModelVariant variant,
                        const DeviceState& x, DeviceAction a, bool delivered,
                        bool arrival) {
  DeviceSpace space(params, variant);
  if (!space.contains(x)) throw std::out_of_range("device state outside the state space");
  if (!device_action_feasible(params, variant, x, a)) {
    throw InfeasibleAction("action " + std::string(1, action_char(a)) +
                           " infeasible in the given device state");
  }
  const int L = params.packets_per_update;
  const int cd = params.cap_device;
  const int cr = params.cap_receiver;
  const int cb = params.cap_buffer;

  if (variant == ModelVariant::GenerateAtWill) {
    switch (a) {
      case DeviceAction::Idle:
        return {0, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining};
      case DeviceAction::Continue:
        if (delivered && x.remaining == 1) {
          // Delivery completes: the receiver's copy is the update sampled
          // device_age slots ago, and the device holds nothing in flight.
          return {0, 0, age_up(x.device_age, cr), L};
        }
        if (delivered) {
          return {0, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining - 1};
        }
        return {0, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining};
      case DeviceAction::Fresh:
        // Sample now and send the first packet; on failure the sample is
        // retaken next time, so the in-flight age resets to 0 either way.
        if (delivered) return {0, 1, age_up(x.receiver_age, cr), L - 1};
        return {0, 0, age_up(x.receiver_age, cr), L};
    }
  }

  if (variant == ModelVariant::RandomArrival) {
    // An arrival replaces the buffer with a one-slot-old update; otherwise the
    // buffered update (if any) keeps aging.
    const int buf_next = arrival ? 1 : age_up(x.buffer_age, cb);
    switch (a) {
      case DeviceAction::Idle:
        return {buf_next, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining};
      case DeviceAction::Continue:
        if (delivered && x.remaining == 1) {
          // Delivery completes and the buffered update is promoted to
          // in-transmission, so the device age restarts from the buffer age.
          const int promoted = arrival ? 1 : std::min(x.buffer_age + 1, cd);
          return {buf_next, promoted, age_up(x.device_age, cr), L};
        }
        if (delivered) {
          return {buf_next, age_up(x.device_age, cd), age_up(x.receiver_age, cr),
                  x.remaining - 1};
        }
        return {buf_next, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining};
      case DeviceAction::Fresh: {
        // Switch transmission to the buffered update.
        const int switched = arrival ? 1 : std::min(x.buffer_age + 1, cd);
        return {buf_next, switched, age_up(x.receiver_age, cr),
                delivered ? L - 1 : L};
      }
    }
  }

  // NonZeroGenerationTime: remaining > L means generation is still running.
  switch (a) {
    case DeviceAction::Idle:
      if (x.remaining > L) {
        // One generation slot elapses.
        return {0, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining - 1};
      }
      return {0, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining};
    case DeviceAction::Continue:
      if (delivered && x.remaining == 1) {
        // Delivery completes; the next update must be generated from scratch.
        return {0, 0, age_up(x.device_age, cr), L + params.generation_slots - 1};
      }
      if (delivered) {
        return {0, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining - 1};
      }
      return {0, age_up(x.device_age, cd), age_up(x.receiver_age, cr), x.remaining};
    case DeviceAction::Fresh:
      // Sampling restarts generation; nothing is transmitted this slot, so
      // the channel outcome is irrelevant.
      return {0, 0, age_up(x.receiver_age, cr), L + params.generation_slots - 1};
  }
  throw std::logic_error("unreachable device action");
}

namespace {

void merge_entry(TransitionDistribution& dist, const DeviceState& s, double p) {
  if (p <= 0.0) return;
  for (TransitionEntry& e : dist) {
    if (e.state == s) {
      e.prob += p;
      return;
    }
  }
  dist.push_back({s, p});
}

TransitionDistribution channel_split(const DeviceParams& params, ModelVariant variant,
                                     const DeviceState& x, DeviceAction a) {
  TransitionDistribution dist;
  const double lam = params.channel_reliability;
  if (a == DeviceAction::Idle) {
    merge_entry(dist, device_step(params, variant, x, a, false, false), 1.0);
    return dist;
  }
  merge_entry(dist, device_step(params, variant, x, a, true, false), lam);
  merge_entry(dist, device_step(params, variant, x, a, false, false), 1.0 - lam);
  return dist;
}

}  // namespace

TransitionDistribution device_transition(const DeviceParams& params,
                                         const DeviceState& x, DeviceAction a) {
  return channel_split(params, ModelVariant::GenerateAtWill, x, a);
}

TransitionDistribution device_transition_gen_time(const DeviceParams& params,
                                                  const DeviceState& x,
                                                  DeviceAction a) {
  return channel_split(params, ModelVariant::NonZeroGenerationTime, x, a);
}

TransitionDistribution device_transition_random_arrival(const DeviceParams& params,
                                                        const DeviceState& x,
                                                        DeviceAction a) {
  TransitionDistribution dist;
  const double lam = params.channel_reliability;
  const double rho = params.arrival_rate;
  const ModelVariant v = ModelVariant::RandomArrival;
  if (a == DeviceAction::Idle) {
    merge_entry(dist, device_step(params, v, x, a, false, true), rho);
    merge_entry(dist, device_step(params, v, x, a, false, false), 1.0 - rho);
    return dist;
  }
  // Fixed branch order: (delivered, arrival), (delivered, none),
  // (lost, arrival), (lost, none).
  merge_entry(dist, device_step(params, v, x, a, true, true), lam * rho);
  merge_entry(dist, device_step(params, v, x, a, true, false), lam * (1.0 - rho));
  merge_entry(dist, device_step(params, v, x, a, false, true), (1.0 - lam) * rho);
  merge_entry(dist, device_step(params, v, x, a, false, false), (1.0 - lam) * (1.0 - rho));
  return dist;
}

TransitionDistribution device_transition(const DeviceParams& params,
                                         ModelVariant variant, const DeviceState& x,
                                         DeviceAction a) {
  switch (variant) {
    case ModelVariant::GenerateAtWill: return device_transition(params, x, a);
    case ModelVariant::RandomArrival: return device_transition_random_arrival(params, x, a);
    case ModelVariant::NonZeroGenerationTime: return device_transition_gen_time(params, x, a);
  }
  throw std::logic_error("unreachable model variant");
}

namespace {

std::uint64_t action_list_size(int device_count, int max_scheduled, bool* exact) {
  // sum over j <= max_scheduled of C(K, j) * 2^j
  std::uint64_t total = 0;
  std::uint64_t term = 1;  // j = 0
  for (int j = 0;; ++j) {
    const std::uint64_t before = total;
    total += term;
    if (total < before) {
      *exact = false;
      return std::numeric_limits<std::uint64_t>::max();
    }
    if (j == max_scheduled) break;
    // term_{j+1} = term_j * 2 * (K - j) / (j + 1)
    term = mul_sat(term, 2u * static_cast<std::uint64_t>(device_count - j), exact);
    term /= static_cast<std::uint64_t>(j + 1);
    if (!*exact) return std::numeric_limits<std::uint64_t>::max();
  }
  return total;
}

void generate_actions(int device, int budget, SystemAction& current,
                      std::vector<SystemAction>& out) {
  if (device < 0) {
    out.push_back(current);
    return;
  }
  static constexpr DeviceAction kOrder[] = {DeviceAction::Idle, DeviceAction::Continue,
                                            DeviceAction::Fresh};
  for (DeviceAction a : kOrder) {
    if (a != DeviceAction::Idle && budget == 0) continue;
    current[static_cast<std::size_t>(device)] = a;
    generate_actions(device - 1, budget - (a != DeviceAction::Idle ? 1 : 0), current, out);
  }
  current[static_cast<std::size_t>(device)] = DeviceAction::Idle;
}

}  // namespace

std::vector<SystemAction> feasible_system_actions(int device_count, int max_scheduled,
                                                  std::uint64_t max_actions) {
  if (device_count < 1) throw ConfigError("device_count must be >= 1");
  if (max_scheduled < 0 || max_scheduled > device_count) {
    throw ConfigError("max_scheduled must lie in [0, device_count]");
  }
  bool exact = true;
  const std::uint64_t count = action_list_size(device_count, max_scheduled, &exact);
  if (!exact || count > max_actions) {
    throw BudgetExceeded("joint action list would hold " +
                         (exact ? std::to_string(count) : std::string("> 2^64")) +
                         " actions, above the cap of " + std::to_string(max_actions));
  }
  std::vector<SystemAction> out;
  out.reserve(count);
  SystemAction current(static_cast<std::size_t>(device_count), DeviceAction::Idle);
  generate_actions(device_count - 1, max_scheduled, current, out);
  return out;
}

double stage_cost(const SystemState& x) {
  double c = 0;
  for (const DeviceState& d : x.device) c += d.receiver_age;
  return c;
}

SystemModel::SystemModel(SystemConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int K = cfg_.device_count();
  spaces_.reserve(static_cast<std::size_t>(K));
  strides_.resize(static_cast<std::size_t>(K));
  std::uint64_t stride = 1;
  for (int k = 0; k < K; ++k) {
    spaces_.emplace_back(cfg_.devices[static_cast<std::size_t>(k)], cfg_.variant);
    strides_[static_cast<std::size_t>(k)] = stride;
    stride = mul_sat(stride, spaces_.back().size(), &state_count_exact_);
  }
  state_count_ = stride;

  actions_ = feasible_system_actions(K, cfg_.max_scheduled);
  action_ids_.reserve(actions_.size());
  for (std::uint32_t i = 0; i < actions_.size(); ++i) {
    action_ids_.emplace(action_key(actions_[i]), i);
  }

  kernel_.resize(static_cast<std::size_t>(K));
  feasible_.resize(static_cast<std::size_t>(K));
  receiver_age_.resize(static_cast<std::size_t>(K));
  std::uint64_t reference = 0;
  for (int k = 0; k < K; ++k) {
    const DeviceParams& p = cfg_.devices[static_cast<std::size_t>(k)];
    const DeviceSpace& space = spaces_[static_cast<std::size_t>(k)];
    auto& kern = kernel_[static_cast<std::size_t>(k)];
    auto& feas = feasible_[static_cast<std::size_t>(k)];
    auto& ages = receiver_age_[static_cast<std::size_t>(k)];
    kern.resize(static_cast<std::size_t>(space.size()) * 3u);
    feas.resize(space.size());
    ages.resize(space.size());
    for (std::uint32_t s = 0; s < space.size(); ++s) {
      const DeviceState x = space.state_at(s);
      ages[s] = static_cast<std::uint16_t>(x.receiver_age);
      std::uint8_t mask = 0;
      for (int ai = 0; ai < 3; ++ai) {
        const DeviceAction a = static_cast<DeviceAction>(ai);
        OutcomeSet& set = kern[s * 3u + static_cast<std::uint32_t>(ai)];
        if (!device_action_feasible(p, cfg_.variant, x, a)) continue;
        mask |= static_cast<std::uint8_t>(1u << ai);
        const TransitionDistribution dist = device_transition(p, cfg_.variant, x, a);
        set.n = static_cast<std::uint8_t>(dist.size());
        for (std::size_t i = 0; i < dist.size(); ++i) {
          set.entry[i] = {space.index_of(dist[i].state), dist[i].prob};
        }
      }
      feas[s] = mask;
    }
    DeviceState ref{0, 0, 0, p.packets_per_update};
    reference += strides_[static_cast<std::size_t>(k)] * space.index_of(ref);
  }
  reference_index_ = reference;
}

std::uint32_t SystemModel::action_id_of(const SystemAction& w) const {
  auto it = action_ids_.find(action_key(w));
  if (it == action_ids_.end()) {
    throw std::out_of_range("action " + action_key(w) + " is not in the feasible list");
  }
  return it->second;
}

std::uint64_t SystemModel::index_of(const std::vector<DeviceState>& device_states) const {
  if (static_cast<int>(device_states.size()) != device_count()) {
    throw std::out_of_range("device state list length does not match the fleet");
  }
  std::uint64_t idx = 0;
  for (int k = 0; k < device_count(); ++k) {
    idx += strides_[static_cast<std::size_t>(k)] *
           spaces_[static_cast<std::size_t>(k)].index_of(device_states[static_cast<std::size_t>(k)]);
  }
  return idx;
}

SystemState SystemModel::state_at(std::uint64_t index) const {
  if (!state_count_exact_ || index >= state_count_) {
    throw std::out_of_range("joint state index out of range");
  }
  SystemState x;
  x.index = index;
  x.device.resize(static_cast<std::size_t>(device_count()));
  for (int k = 0; k < device_count(); ++k) {
    const DeviceSpace& space = spaces_[static_cast<std::size_t>(k)];
    x.device[static_cast<std::size_t>(k)] =
        space.state_at(static_cast<std::uint32_t>(index % space.size()));
    index /= space.size();
  }
  return x;
}

void SystemModel::split_index(std::uint64_t index, std::vector<std::uint32_t>& dev) const {
  dev.resize(static_cast<std::size_t>(device_count()));
  for (int k = 0; k < device_count(); ++k) {
    const std::uint32_t size = spaces_[static_cast<std::size_t>(k)].size();
    dev[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(index % size);
    index /= size;
  }
}

std::uint64_t SystemModel::join_indices(const std::vector<std::uint32_t>& dev) const {
  std::uint64_t idx = 0;
  for (int k = 0; k < device_count(); ++k) {
    idx += strides_[static_cast<std::size_t>(k)] * dev[static_cast<std::size_t>(k)];
  }
  return idx;
}

double SystemModel::stage_cost_at(std::uint64_t index) const {
  double c = 0;
  for (int k = 0; k < device_count(); ++k) {
    const std::uint32_t size = spaces_[static_cast<std::size_t>(k)].size();
    c += receiver_age_[static_cast<std::size_t>(k)][static_cast<std::uint32_t>(index % size)];
    index /= size;
  }
  return c;
}

bool SystemModel::action_feasible_at(const std::vector<std::uint32_t>& dev,
                                     std::uint32_t action_id) const {
  const SystemAction& w = actions_[action_id];
  for (int k = 0; k < device_count(); ++k) {
    const std::uint8_t mask = feasible_[static_cast<std::size_t>(k)][dev[static_cast<std::size_t>(k)]];
    if (!(mask & (1u << static_cast<std::uint8_t>(w[static_cast<std::size_t>(k)])))) return false;
  }
  return true;
}

std::vector<std::pair<SystemState, double>> SystemModel::system_transition(
    const SystemState& x, const SystemAction& w) const {
  if (static_cast<int>(x.device.size()) != device_count() ||
      static_cast<int>(w.size()) != device_count()) {
    throw std::out_of_range("state or action length does not match the fleet");
  }
  int scheduled = 0;
  for (DeviceAction a : w) scheduled += a != DeviceAction::Idle ? 1 : 0;
  if (scheduled > max_scheduled()) {
    throw InfeasibleAction("action schedules more than max_scheduled devices");
  }
  std::vector<TransitionDistribution> per_device;
  per_device.reserve(x.device.size());
  for (int k = 0; k < device_count(); ++k) {
    per_device.push_back(device_transition(cfg_.devices[static_cast<std::size_t>(k)],
                                           cfg_.variant, x.device[static_cast<std::size_t>(k)],
                                           w[static_cast<std::size_t>(k)]));
  }
  std::vector<std::pair<SystemState, double>> out;
  std::vector<std::size_t> pick(x.device.size(), 0);
  for (;;) {
    SystemState next;
    next.device.resize(x.device.size());
    double p = 1.0;
    for (std::size_t k = 0; k < x.device.size(); ++k) {
      const TransitionEntry& e = per_device[k][pick[k]];
      next.device[k] = e.state;
      p *= e.prob;
    }
    next.index = index_of(next.device);
    out.emplace_back(std::move(next), p);
    std::size_t k = 0;
    while (k < pick.size() && ++pick[k] == per_device[k].size()) {
      pick[k] = 0;
      ++k;
    }
    if (k == pick.size()) break;
  }
  return out;
}

JointOdometer::JointOdometer(const SystemModel& model, std::uint64_t start)
    : model_(&model), index_(start) {
  model.split_index(start, digits_);
}

void JointOdometer::advance() {
  ++index_;
  for (int k = 0; k < model_->device_count(); ++k) {
    std::uint32_t& digit = digits_[static_cast<std::size_t>(k)];
    if (++digit < model_->space(k).size()) return;
    digit = 0;
  }
}

}  // namespace aoisched
