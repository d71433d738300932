#include "aoisched/decomp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "aoisched/errors.hpp"

namespace aoisched {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Expected continuation value of one device action against a per-device
/// value table. The pairing must be feasible (the kernel is empty otherwise).
double device_expectation(const SystemModel& model, int device, std::uint32_t dev_index,
                          DeviceAction action, const std::vector<double>& values) {
  const auto& out = model.outcomes(device, dev_index, action);
  double e = 0.0;
  for (int i = 0; i < out.n; ++i)
    e += out.entry[i].prob * values[out.entry[i].next];
  return e;
}

bool transmit_allowed(std::uint8_t mask, DeviceAction a) {
  return (mask >> static_cast<int>(a)) & 1;
}

/// Expected next joint value of one joint action, expanding the product of
/// per-device successor sets.
double joint_expectation(const SystemModel& model, const std::vector<std::uint32_t>& dev,
                         std::uint32_t action_id, const std::vector<double>& values) {
  const SystemAction& w = model.actions()[action_id];
  const int n = model.device_count();
  std::array<const SystemModel::OutcomeSet*, 64> sets{};
  for (int k = 0; k < n; ++k)
    sets[static_cast<std::size_t>(k)] =
        &model.outcomes(k, dev[static_cast<std::size_t>(k)], w[static_cast<std::size_t>(k)]);
  std::array<int, 64> pick{};
  double total = 0.0;
  for (;;) {
    double p = 1.0;
    std::uint64_t idx = 0;
    for (int k = 0; k < n; ++k) {
      const auto& e = sets[static_cast<std::size_t>(k)]->entry[pick[static_cast<std::size_t>(k)]];
      p *= e.prob;
      idx += model.stride(k) * e.next;
    }
    total += p * values[idx];
    int k = 0;
    for (; k < n; ++k) {
      auto& digit = pick[static_cast<std::size_t>(k)];
      if (++digit < sets[static_cast<std::size_t>(k)]->n) break;
      digit = 0;
    }
    if (k == n) break;
  }
  return total;
}

std::uint64_t checked_joint_count(const SystemModel& model, std::uint64_t max_states) {
  if (!model.state_count_exact() || model.state_count() > max_states)
    throw BudgetExceeded("joint state space exceeds max_states");
  return model.state_count();
}

std::uint32_t reference_device_index(const SystemModel& model, int device) {
  return model.space(device).index_of(model.reference_device_state(device));
}

}  // namespace

std::vector<double> default_base_scheduling(const SystemConfig& config) {
  const std::size_t n = config.devices.size();
  std::vector<double> prob(n, 0.0);
  double total = 0.0;
  for (const auto& d : config.devices) total += d.channel_reliability;
  if (config.max_scheduled == 0 || total <= 0.0) return prob;
  for (std::size_t k = 0; k < n; ++k)
    prob[k] = std::min(1.0, config.max_scheduled * config.devices[k].channel_reliability / total);
  return prob;
}

PerDeviceSolution solve_per_device(const SystemModel& model, int device, double schedule_prob,
                                   const SolverOptions& opts) {
  if (schedule_prob < 0.0 || schedule_prob > 1.0)
    throw ConfigError("schedule_prob must lie in [0, 1]");
  if (opts.damping <= 0.0 || opts.damping > 1.0)
    throw ConfigError("damping must lie in (0, 1]");
  const DeviceSpace& space = model.space(device);
  const std::uint32_t n = space.size();
  const std::uint32_t ref = reference_device_index(model, device);
  const double damp = opts.damping;
  const DeviceAction transmit[2] = {DeviceAction::Continue, DeviceAction::Fresh};

  PerDeviceSolution sol;
  sol.values.assign(n, 0.0);
  std::vector<double> next(n, 0.0);

  // One-step image under a Bernoulli(schedule_prob) scheduling opportunity:
  // when a transmit action is feasible the device takes the better one with
  // probability schedule_prob and idles otherwise; with no feasible transmit
  // action the slot is always idle.
  auto image_at = [&](std::uint32_t s) {
    const double e_idle = device_expectation(model, device, s, DeviceAction::Idle, sol.values);
    const std::uint8_t mask = model.feasible_mask(device, s);
    double best = kInf;
    for (DeviceAction a : transmit) {
      if (!transmit_allowed(mask, a)) continue;
      best = std::min(best, device_expectation(model, device, s, a, sol.values));
    }
    const double tail =
        best < kInf ? schedule_prob * best + (1.0 - schedule_prob) * e_idle : e_idle;
    return static_cast<double>(space.receiver_age_of(s)) + tail;
  };

  double theta = 0.0;
  double span = kInf;
  std::uint64_t iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    const double offset = image_at(ref);
    double lo = kInf, hi = -kInf;
    for (std::uint32_t s = 0; s < n; ++s) {
      const double updated = (1.0 - damp) * sol.values[s] + damp * (image_at(s) - offset);
      const double step = updated - sol.values[s];
      lo = std::min(lo, step);
      hi = std::max(hi, step);
      next[s] = updated;
    }
    next[ref] = 0.0;
    sol.values.swap(next);
    span = hi - lo;
    theta = offset;
    if (span < opts.tol) break;
  }
  if (span >= opts.tol)
    throw NonConvergence("per-device relative value iteration did not converge", span);
  sol.theta = theta;
  sol.iterations = iter + 1;
  sol.final_span = span;

  // Sampling rule: the transmit action applied when scheduled, Continue
  // preferred on ties, Idle where no transmit action is feasible.
  sol.sampling.assign(n, DeviceAction::Idle);
  for (std::uint32_t s = 0; s < n; ++s) {
    const std::uint8_t mask = model.feasible_mask(device, s);
    double best = kInf;
    DeviceAction pick = DeviceAction::Idle;
    for (DeviceAction a : transmit) {
      if (!transmit_allowed(mask, a)) continue;
      const double e = device_expectation(model, device, s, a, sol.values);
      if (e < best) {
        best = e;
        pick = a;
      }
    }
    sol.sampling[s] = pick;
  }
  return sol;
}

DecompositionTables solve_decomposition(const SystemModel& model,
                                        const std::vector<double>& schedule_prob,
                                        const SolverOptions& opts) {
  const std::size_t n = static_cast<std::size_t>(model.device_count());
  if (schedule_prob.size() != n)
    throw ConfigError("schedule_prob size must match the device count");
  DecompositionTables tables;
  tables.schedule_prob = schedule_prob;
  tables.per_device.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    tables.per_device.push_back(
        solve_per_device(model, static_cast<int>(k), schedule_prob[k], opts));
  return tables;
}

std::uint64_t systematic_subset_draw(const std::vector<double>& prob, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw ConfigError("subset draw requires u in [0, 1)");
  std::uint64_t mask = 0;
  double lo = 0.0;
  for (std::size_t k = 0; k < prob.size(); ++k) {
    const double hi = lo + prob[k];
    // Device k is selected iff an integer grid point u + m falls in [lo, hi).
    const double m = std::ceil(lo - u);
    if (u + m >= lo && u + m < hi) mask |= std::uint64_t{1} << k;
    lo = hi;
  }
  return mask;
}

std::vector<std::pair<std::uint64_t, double>> systematic_subset_law(
    const std::vector<double>& prob, int max_scheduled) {
  if (prob.size() > 64) throw ConfigError("subset law supports at most 64 devices");
  double total = 0.0;
  for (double p : prob) {
    if (p < 0.0 || p > 1.0) throw ConfigError("inclusion probabilities must lie in [0, 1]");
    total += p;
  }
  if (total > static_cast<double>(max_scheduled) + 1e-9)
    throw ConfigError("inclusion probabilities must sum to at most max_scheduled");

  // The drawn subset is constant between consecutive fractional parts of the
  // cumulative sums, so one draw per interval midpoint enumerates the law.
  std::vector<double> cuts{0.0, 1.0};
  double cum = 0.0;
  for (double p : prob) {
    cum += p;
    const double f = cum - std::floor(cum);
    if (f > 0.0 && f < 1.0) cuts.push_back(f);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::map<std::uint64_t, double> weight;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = cuts[i + 1] - cuts[i];
    if (len <= 0.0) continue;
    weight[systematic_subset_draw(prob, 0.5 * (cuts[i] + cuts[i + 1]))] += len;
  }
  return {weight.begin(), weight.end()};
}

RandomizedPolicy base_policy_evaluator(const SystemModel& model,
                                       const DecompositionTables& tables) {
  auto law = systematic_subset_law(tables.schedule_prob, model.config().max_scheduled);
  const std::size_t n = static_cast<std::size_t>(model.device_count());
  return [&model, &tables, law = std::move(law), dev = std::vector<std::uint32_t>(n),
          w = SystemAction(n, DeviceAction::Idle), acc = std::map<std::uint32_t, double>{}](
             std::uint64_t state, std::vector<std::pair<std::uint32_t, double>>& out) mutable {
    model.split_index(state, dev);
    acc.clear();
    for (const auto& [mask, p] : law) {
      for (std::size_t k = 0; k < dev.size(); ++k)
        w[k] = (mask >> k) & 1 ? tables.per_device[k].sampling[dev[k]] : DeviceAction::Idle;
      acc[model.action_id_of(w)] += p;
    }
    out.assign(acc.begin(), acc.end());
  };
}

DecompositionReport verify_decomposition(const SystemModel& model,
                                         const DecompositionTables& tables,
                                         const SolverOptions& opts) {
  const std::uint64_t n = checked_joint_count(model, opts.max_states);
  if (opts.damping <= 0.0 || opts.damping > 1.0)
    throw ConfigError("damping must lie in (0, 1]");
  const auto law = systematic_subset_law(tables.schedule_prob, model.config().max_scheduled);
  const std::size_t devices = static_cast<std::size_t>(model.device_count());
  const std::size_t masks = law.size();
  const double damp = opts.damping;

  // The action taken under each subset depends only on per-device sampling
  // rules; precompute it per (state, subset).
  std::vector<std::uint32_t> action_of(n * masks);
  std::vector<double> mass(masks);
  {
    SystemAction w(devices, DeviceAction::Idle);
    for (std::size_t j = 0; j < masks; ++j) {
      mass[j] = law[j].second;
      JointOdometer odo(model, 0);
      for (std::uint64_t s = 0; s < n; ++s, odo.advance()) {
        const auto& dev = odo.digits();
        for (std::size_t k = 0; k < devices; ++k)
          w[k] = (law[j].first >> k) & 1 ? tables.per_device[k].sampling[dev[k]] : DeviceAction::Idle;
        action_of[s * masks + j] = model.action_id_of(w);
      }
    }
  }

  std::vector<double> values(n, 0.0), next(n, 0.0);
  const std::uint64_t ref = model.reference_index();
  std::vector<std::uint32_t> ref_dev(devices);
  model.split_index(ref, ref_dev);
  auto image_at = [&](std::uint64_t s, const std::vector<std::uint32_t>& dev) {
    double v = model.stage_cost_at(s);
    for (std::size_t j = 0; j < masks; ++j)
      v += mass[j] * joint_expectation(model, dev, action_of[s * masks + j], values);
    return v;
  };

  double theta = 0.0, span = kInf;
  std::uint64_t iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    const double offset = image_at(ref, ref_dev);
    double lo = kInf, hi = -kInf;
    JointOdometer odo(model, 0);
    for (std::uint64_t s = 0; s < n; ++s, odo.advance()) {
      const double updated = (1.0 - damp) * values[s] + damp * (image_at(s, odo.digits()) - offset);
      const double step = updated - values[s];
      lo = std::min(lo, step);
      hi = std::max(hi, step);
      next[s] = updated;
    }
    next[ref] = 0.0;
    values.swap(next);
    span = hi - lo;
    theta = offset;
    if (span < opts.tol) break;
  }
  if (span >= opts.tol)
    throw NonConvergence("joint evaluation of the base policy did not converge", span);

  DecompositionReport report;
  report.theta_joint = theta;
  report.theta_sum = 0.0;
  for (const auto& d : tables.per_device) report.theta_sum += d.theta;
  report.states = n;
  report.max_abs_gap = 0.0;
  JointOdometer odo(model, 0);
  for (std::uint64_t s = 0; s < n; ++s, odo.advance()) {
    double sum = 0.0;
    for (std::size_t k = 0; k < devices; ++k)
      sum += tables.per_device[k].values[odo.digits()[k]];
    report.max_abs_gap = std::max(report.max_abs_gap, std::abs(values[s] - sum));
  }
  return report;
}

SuboptimalActor::SuboptimalActor(const SystemModel& model, const DecompositionTables& tables)
    : model_(model), tables_(tables) {
  assignments_.resize(model.action_count());
  for (std::uint32_t a = 0; a < model.action_count(); ++a) {
    const SystemAction& w = model.actions()[a];
    for (std::size_t k = 0; k < w.size(); ++k)
      if (w[k] != DeviceAction::Idle) assignments_[a].emplace_back(static_cast<int>(k), w[k]);
  }
  expected_.resize(static_cast<std::size_t>(model.device_count()));
}

std::uint32_t SuboptimalActor::act(const std::vector<std::uint32_t>& dev) {
  // Idle is feasible everywhere; infeasible transmit actions get +inf so no
  // joint action using one can win.
  double base = 0.0;
  for (int k = 0; k < model_.device_count(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const auto& values = tables_.per_device[ks].values;
    const std::uint8_t mask = model_.feasible_mask(k, dev[ks]);
    auto& e = expected_[ks];
    for (int a = 0; a < 3; ++a)
      e[static_cast<std::size_t>(a)] =
          (mask >> a) & 1
              ? device_expectation(model_, k, dev[ks], static_cast<DeviceAction>(a), values)
              : kInf;
    base += e[0];
  }
  double best = base;  // the all-idle action, canonical id 0
  std::uint32_t best_id = 0;
  for (std::uint32_t a = 1; a < model_.action_count(); ++a) {
    double sum = base;
    for (const auto& [k, da] : assignments_[a]) {
      const auto ks = static_cast<std::size_t>(k);
      sum += expected_[ks][static_cast<std::size_t>(da)] - expected_[ks][0];
    }
    if (sum < best) {
      best = sum;
      best_id = a;
    }
  }
  return best_id;
}

std::uint32_t suboptimal_action(const SystemModel& model, const DecompositionTables& tables,
                                const std::vector<std::uint32_t>& dev) {
  SuboptimalActor actor(model, tables);
  return actor.act(dev);
}

CostFn decomposed_cost_fn(const SystemModel& model, const DecompositionTables& tables) {
  const std::size_t n = static_cast<std::size_t>(model.device_count());
  return [&model, &tables, n, dev = std::vector<std::uint32_t>(n)](
             std::uint64_t state, std::uint32_t action_id) mutable {
    model.split_index(state, dev);
    if (!model.action_feasible_at(dev, action_id)) return kInf;
    const SystemAction& w = model.actions()[action_id];
    double v = model.stage_cost_at(state);
    for (std::size_t k = 0; k < n; ++k)
      v += device_expectation(model, static_cast<int>(k), dev[k], w[k],
                              tables.per_device[k].values);
    return v;
  };
}

StructuredExtractResult materialize_suboptimal_policy(const SystemModel& model,
                                                      const DecompositionTables& tables,
                                                      std::uint64_t max_states) {
  const std::uint64_t n = checked_joint_count(model, max_states);
  const int devices = model.device_count();

  StructuredExtractResult result;
  result.policy.action_id.assign(n, 0);
  result.evaluated = 0;
  result.propagated = 0;

  SuboptimalActor actor(model, tables);
  JointOdometer odo(model, 0);
  for (std::uint64_t s = 0; s < n; ++s, odo.advance()) {
    const auto& digits = odo.digits();
    // Once a lower-device-age neighbour commits to a restart on device k,
    // the restart stays selected as that age grows; copy instead of
    // re-evaluating.
    bool copied = false;
    for (int k = 0; k < devices && !copied; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const DeviceSpace& space = model.space(k);
      if (space.device_age_of(digits[ks]) == 0) continue;
      const std::uint64_t below = s - model.stride(k) * space.device_age_stride();
      const std::uint32_t prev = result.policy.action_id[below];
      if (model.actions()[prev][ks] == DeviceAction::Fresh) {
        result.policy.action_id[s] = prev;
        ++result.propagated;
        copied = true;
      }
    }
    if (copied) continue;
    result.policy.action_id[s] = actor.act(digits);
    ++result.evaluated;
  }
  return result;
}

std::uint32_t greedy_action(const SystemModel& model, const DecompositionTables& tables,
                            const std::vector<std::uint32_t>& dev) {
  const std::size_t n = static_cast<std::size_t>(model.device_count());
  // Transmit-capable devices ranked by receiver age, ties to the lowest index.
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    if (tables.per_device[k].sampling[dev[k]] != DeviceAction::Idle) order.push_back(k);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return model.space(static_cast<int>(a)).receiver_age_of(dev[a]) >
           model.space(static_cast<int>(b)).receiver_age_of(dev[b]);
  });
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(model.config().max_scheduled), order.size());
  SystemAction w(n, DeviceAction::Idle);
  for (std::size_t i = 0; i < take; ++i) w[order[i]] = tables.per_device[order[i]].sampling[dev[order[i]]];
  return model.action_id_of(w);
}

}  // namespace aoisched
