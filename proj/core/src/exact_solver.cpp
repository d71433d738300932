#include "aoisched/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "aoisched/markov.hpp"
#include "aoisched/parallel.hpp"

namespace aoisched {

namespace {

constexpr int kMaxJointDevices = 32;
constexpr double kInf = std::numeric_limits<double>::infinity();

/// Guards allocation of per-state arrays over the joint space.
std::uint64_t checked_state_count(const SystemModel& model, std::uint64_t max_states) {
  if (!model.state_count_exact() || model.state_count() > max_states) {
    throw BudgetExceeded("joint state space of " +
                         (model.state_count_exact() ? std::to_string(model.state_count())
                                                    : std::string("> 2^64")) +
                         " states exceeds the budget of " + std::to_string(max_states));
  }
  if (model.device_count() > kMaxJointDevices) {
    throw BudgetExceeded("joint sweeps support at most 32 devices");
  }
  return model.state_count();
}

/// Expected successor value of one feasible joint action, as the product of
/// per-device outcome sets. dev holds per-device state indices.
double expect_value(const SystemModel& model, const std::vector<std::uint32_t>& dev,
                    std::uint32_t action_id, const std::vector<double>& V) {
  const SystemAction& w = model.actions()[action_id];
  const int K = model.device_count();
  const SystemModel::OutcomeSet* sets[kMaxJointDevices];
  for (int k = 0; k < K; ++k) {
    sets[k] = &model.outcomes(k, dev[static_cast<std::size_t>(k)], w[static_cast<std::size_t>(k)]);
  }
  std::uint8_t pick[kMaxJointDevices] = {0};
  double expected = 0.0;
  for (;;) {
    double p = 1.0;
    std::uint64_t idx = 0;
    for (int k = 0; k < K; ++k) {
      const SystemModel::Outcome& e = sets[k]->entry[pick[k]];
      p *= e.prob;
      idx += model.stride(k) * e.next;
    }
    expected += p * V[idx];
    int k = 0;
    while (k < K && ++pick[k] == sets[k]->n) {
      pick[k] = 0;
      ++k;
    }
    if (k == K) break;
  }
  return expected;
}

/// Canonical-first argmin of the expected successor value over feasible
/// actions. Shared by every policy-extraction path so ties resolve the same
/// way everywhere.
std::uint32_t argmin_action(const SystemModel& model, const std::vector<std::uint32_t>& dev,
                            const std::vector<double>& V, double* best_value) {
  double best = kInf;
  std::uint32_t best_id = 0;
  bool found = false;
  for (std::uint32_t a = 0; a < model.action_count(); ++a) {
    if (!model.action_feasible_at(dev, a)) continue;
    const double ev = expect_value(model, dev, a, V);
    if (!found || ev < best) {
      best = ev;
      best_id = a;
      found = true;
    }
  }
  if (best_value != nullptr) *best_value = best;
  return best_id;
}

std::vector<double> stage_costs(const SystemModel& model, std::uint64_t n, int threads) {
  std::vector<double> cost(n);
  parallel_for(0, n, threads, [&](std::uint64_t b, std::uint64_t e, int) {
    JointOdometer it(model, b);
    for (std::uint64_t i = b; i < e; ++i, it.advance()) {
      double c = 0.0;
      for (int k = 0; k < model.device_count(); ++k) {
        c += model.receiver_age_of(k, it.digits()[static_cast<std::size_t>(k)]);
      }
      cost[i] = c;
    }
  });
  return cost;
}

}  // namespace

ValueTable rvia_solve(const SystemModel& model, const SolverOptions& opts) {
  if (!(opts.tol > 0.0)) throw ConfigError("solver tol must be positive");
  if (!(opts.damping > 0.0) || opts.damping > 1.0) {
    throw ConfigError("solver damping must lie in (0, 1]");
  }
  const std::uint64_t n = checked_state_count(model, opts.max_states);
  const std::uint64_t ref = opts.reference_state.value_or(model.reference_index());
  if (ref >= n) throw ConfigError("reference state index out of range");
  const int threads = resolve_threads(opts.threads);
  const double damp = opts.damping;

  const std::vector<double> cost = stage_costs(model, n, threads);
  std::vector<double> V(n, 0.0);
  std::vector<double> image(n, 0.0);  // undamped Bellman image of V
  std::vector<double> lo(static_cast<std::size_t>(threads), 0.0);
  std::vector<double> hi(static_cast<std::size_t>(threads), 0.0);

  ValueTable out;
  out.reference_state = ref;
  for (std::uint64_t iter = 1; iter <= opts.max_iters; ++iter) {
    parallel_for(0, n, threads, [&](std::uint64_t b, std::uint64_t e, int) {
      JointOdometer it(model, b);
      for (std::uint64_t i = b; i < e; ++i, it.advance()) {
        double best = kInf;
        for (std::uint32_t a = 0; a < model.action_count(); ++a) {
          if (!model.action_feasible_at(it.digits(), a)) continue;
          const double ev = expect_value(model, it.digits(), a, V);
          if (ev < best) best = ev;
        }
        image[i] = cost[i] + best;
      }
    });
    const double offset = image[ref];
    // V' = (1 - damp) V + damp (image - offset); span of the step decides
    // convergence. The reference entry stays exactly 0.
    parallel_for(0, n, threads, [&](std::uint64_t b, std::uint64_t e, int w) {
      double mn = kInf, mx = -kInf;
      for (std::uint64_t i = b; i < e; ++i) {
        const double next = (1.0 - damp) * V[i] + damp * (image[i] - offset);
        const double step = next - V[i];
        V[i] = next;
        mn = std::min(mn, step);
        mx = std::max(mx, step);
      }
      lo[static_cast<std::size_t>(w)] = mn;
      hi[static_cast<std::size_t>(w)] = mx;
    });
    V[ref] = 0.0;  // cancel residual (1 - damp) * V[ref] rounding exactly
    double mn = kInf, mx = -kInf;
    for (int w = 0; w < threads; ++w) {
      mn = std::min(mn, lo[static_cast<std::size_t>(w)]);
      mx = std::max(mx, hi[static_cast<std::size_t>(w)]);
    }
    const double span = mx - mn;
    out.iterations = iter;
    out.final_span = span;
    out.theta = offset;
    if (span < opts.tol) {
      out.values = std::move(V);
      return out;
    }
  }
  throw NonConvergence("relative value iteration did not reach tol " +
                           std::to_string(opts.tol) + " within " +
                           std::to_string(opts.max_iters) + " iterations",
                       out.final_span);
}

double state_action_cost(const SystemModel& model, std::uint64_t index,
                         std::uint32_t action_id, const std::vector<double>& V) {
  if (action_id >= model.action_count()) throw std::out_of_range("action id out of range");
  std::vector<std::uint32_t> dev;
  model.split_index(index, dev);
  if (!model.action_feasible_at(dev, action_id)) {
    throw InfeasibleAction("state_action_cost: action infeasible in this state");
  }
  double c = 0.0;
  for (int k = 0; k < model.device_count(); ++k) {
    c += model.receiver_age_of(k, dev[static_cast<std::size_t>(k)]);
  }
  return c + expect_value(model, dev, action_id, V);
}

Policy extract_policy(const SystemModel& model, const std::vector<double>& V, int threads) {
  const std::uint64_t n = V.size();
  if (n != model.state_count() || !model.state_count_exact()) {
    throw ConfigError("value table size does not match the joint state space");
  }
  Policy pol;
  pol.action_id.resize(n);
  parallel_for(0, n, threads, [&](std::uint64_t b, std::uint64_t e, int) {
    JointOdometer it(model, b);
    for (std::uint64_t i = b; i < e; ++i, it.advance()) {
      pol.action_id[i] = argmin_action(model, it.digits(), V, nullptr);
    }
  });
  return pol;
}

StructuredExtractResult structure_aware_extract(const SystemModel& model,
                                                const std::vector<double>& V) {
  const std::uint64_t n = V.size();
  if (n != model.state_count() || !model.state_count_exact()) {
    throw ConfigError("value table size does not match the joint state space");
  }
  const int K = model.device_count();
  StructuredExtractResult out;
  out.policy.action_id.resize(n);
  JointOdometer it(model, 0);
  for (std::uint64_t i = 0; i < n; ++i, it.advance()) {
    std::uint32_t chosen = std::numeric_limits<std::uint32_t>::max();
    // If some device's age-predecessor chose to sample anew on that device,
    // the same joint action is still the canonical argmin here: its advantage
    // over every alternative only grows with that device's age, and the
    // feasible set does not depend on the age.
    for (int k = 0; k < K && chosen == std::numeric_limits<std::uint32_t>::max(); ++k) {
      const DeviceSpace& space = model.space(k);
      const std::uint32_t dev_idx = it.digits()[static_cast<std::size_t>(k)];
      if (space.device_age_of(dev_idx) == 0) continue;
      const std::uint64_t pred = i - model.stride(k) * space.device_age_stride();
      const std::uint32_t cand = out.policy.action_id[pred];
      if (model.actions()[cand][static_cast<std::size_t>(k)] == DeviceAction::Fresh) {
        chosen = cand;
        ++out.propagated;
      }
    }
    if (chosen == std::numeric_limits<std::uint32_t>::max()) {
      chosen = argmin_action(model, it.digits(), V, nullptr);
      ++out.evaluated;
    }
    out.policy.action_id[i] = chosen;
  }
  return out;
}

ThresholdTable compute_thresholds(const SystemModel& model, const std::vector<double>& V,
                                  int device, std::uint32_t action_id) {
  if (device < 0 || device >= model.device_count()) {
    throw std::out_of_range("device index out of range");
  }
  if (action_id >= model.action_count()) throw std::out_of_range("action id out of range");
  if (model.actions()[action_id][static_cast<std::size_t>(device)] != DeviceAction::Fresh) {
    throw std::invalid_argument("threshold action must sample anew on the given device");
  }
  const std::uint64_t n = checked_state_count(model, V.size());
  if (n != V.size()) throw ConfigError("value table size does not match the joint state space");

  const DeviceSpace& space = model.space(device);
  const std::uint64_t age_step = model.stride(device) * space.device_age_stride();
  ThresholdTable table;
  table.device = device;
  table.action_id = action_id;

  std::vector<std::uint32_t> dev;
  JointOdometer it(model, 0);
  for (std::uint64_t i = 0; i < n; ++i, it.advance()) {
    if (space.device_age_of(it.digits()[static_cast<std::size_t>(device)]) != 0) continue;
    // Representative with device_age == 0; scan that age upward for the first
    // point where the action minimizes the one-step cost.
    double min_age = kInf;
    for (int age = 0; age <= space.cap_device(); ++age) {
      const std::uint64_t idx = i + age_step * static_cast<std::uint64_t>(age);
      model.split_index(idx, dev);
      if (!model.action_feasible_at(dev, action_id)) continue;
      const double candidate = expect_value(model, dev, action_id, V);
      bool minimizes = true;
      for (std::uint32_t a = 0; a < model.action_count() && minimizes; ++a) {
        if (a == action_id || !model.action_feasible_at(dev, a)) continue;
        if (expect_value(model, dev, a, V) < candidate) minimizes = false;
      }
      if (minimizes) {
        min_age = age;
        break;
      }
    }
    table.min_age.push_back(min_age);
  }
  return table;
}

MonotonicityReport verify_value_monotonicity(const SystemModel& model,
                                             const std::vector<double>& V, double tol) {
  const std::uint64_t n = checked_state_count(model, V.size());
  if (n != V.size()) throw ConfigError("value table size does not match the joint state space");
  MonotonicityReport report;
  auto check = [&](std::uint64_t lo_idx, std::uint64_t hi_idx) {
    ++report.checks;
    const double gap = V[lo_idx] - V[hi_idx];
    if (gap > tol) {
      ++report.violations;
      report.worst = std::max(report.worst, gap);
    }
  };
  JointOdometer it(model, 0);
  for (std::uint64_t i = 0; i < n; ++i, it.advance()) {
    for (int k = 0; k < model.device_count(); ++k) {
      const DeviceSpace& space = model.space(k);
      const std::uint32_t dev_idx = it.digits()[static_cast<std::size_t>(k)];
      const std::uint64_t stride = model.stride(k);
      if (space.device_age_of(dev_idx) < space.cap_device()) {
        check(i, i + stride * space.device_age_stride());
      }
      if (space.receiver_age_of(dev_idx) < space.cap_receiver()) {
        check(i, i + stride * space.receiver_stride());
      }
      // buffer age 0 means an empty buffer with a smaller feasible action
      // set, so the 0 -> 1 edge carries no monotonicity claim
      if (space.has_buffer() && space.buffer_age_of(dev_idx) >= 1 &&
          space.buffer_age_of(dev_idx) < space.cap_buffer()) {
        check(i, i + stride * space.buffer_stride());
      }
    }
  }
  return report;
}

JInequalityReport verify_j_inequality(const SystemModel& model, const CostFn& J, double tol) {
  const std::uint64_t n = checked_state_count(model, model.state_count());
  JInequalityReport report;
  const int K = model.device_count();
  std::vector<std::uint32_t> dev;
  for (std::uint32_t w = 0; w < model.action_count(); ++w) {
    const SystemAction& action = model.actions()[w];
    std::vector<int> fresh_devices;
    for (int k = 0; k < K; ++k) {
      if (action[static_cast<std::size_t>(k)] == DeviceAction::Fresh) fresh_devices.push_back(k);
    }
    if (fresh_devices.empty()) continue;

    JointOdometer it(model, 0);
    for (std::uint64_t lo_idx = 0; lo_idx < n; ++lo_idx, it.advance()) {
      model.split_index(lo_idx, dev);
      if (!model.action_feasible_at(dev, w)) continue;
      // Raising the age of devices the action samples anew keeps the feasible
      // set fixed, so every alternative is comparable at both states.
      std::vector<int> headroom(fresh_devices.size());
      for (std::size_t f = 0; f < fresh_devices.size(); ++f) {
        const int k = fresh_devices[f];
        const DeviceSpace& space = model.space(k);
        headroom[f] = space.cap_device() -
                      space.device_age_of(dev[static_cast<std::size_t>(k)]);
      }
      std::vector<int> raise(fresh_devices.size(), 0);
      for (;;) {
        // advance the raise odometer; the all-zero combination is skipped
        std::size_t f = 0;
        while (f < raise.size() && ++raise[f] > headroom[f]) {
          raise[f] = 0;
          ++f;
        }
        if (f == raise.size()) break;
        std::uint64_t hi_idx = lo_idx;
        for (std::size_t g = 0; g < raise.size(); ++g) {
          const int k = fresh_devices[g];
          hi_idx += model.stride(k) * model.space(k).device_age_stride() *
                    static_cast<std::uint64_t>(raise[g]);
        }
        const double j_lo_w = J(lo_idx, w);
        const double j_hi_w = J(hi_idx, w);
        for (std::uint32_t alt = 0; alt < model.action_count(); ++alt) {
          if (alt == w || !model.action_feasible_at(dev, alt)) continue;
          ++report.checks;
          const double lhs = j_hi_w - J(hi_idx, alt);
          const double rhs = j_lo_w - J(lo_idx, alt);
          if (lhs > rhs + tol) {
            ++report.violations;
            report.worst = std::max(report.worst, lhs - rhs);
          }
        }
      }
    }
  }
  return report;
}

JInequalityReport verify_j_inequality(const SystemModel& model, const std::vector<double>& V,
                                      double tol) {
  return verify_j_inequality(
      model,
      [&](std::uint64_t index, std::uint32_t action_id) {
        return state_action_cost(model, index, action_id, V);
      },
      tol);
}

EvalResult exact_policy_evaluation(const SystemModel& model, const RandomizedPolicy& policy,
                                   const EvalOptions& opts) {
  const std::uint64_t n = checked_state_count(model, opts.max_states);
  const std::uint64_t start = opts.initial_state.value_or(model.reference_index());
  if (start >= n) throw ConfigError("initial state index out of range");

  constexpr std::uint32_t kUnseen = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> local_id(n, kUnseen);
  std::vector<std::uint64_t> joint_of;  // local id -> joint index, discovery order
  local_id[start] = 0;
  joint_of.push_back(start);

  SparseChain chain;
  chain.row_ptr.push_back(0);
  std::vector<std::pair<std::uint32_t, double>> action_dist;
  std::vector<std::pair<std::uint64_t, double>> row;
  std::vector<std::uint32_t> dev;

  // Discovery and row construction in one pass: rows are emitted in local-id
  // order because ids are assigned in discovery order and processed FIFO.
  for (std::uint32_t v = 0; v < joint_of.size(); ++v) {
    const std::uint64_t joint = joint_of[v];
    model.split_index(joint, dev);
    action_dist.clear();
    policy(joint, action_dist);
    row.clear();
    double mass = 0.0;
    for (const auto& [action_id, pa] : action_dist) {
      if (!(pa > 0.0)) continue;
      if (!model.action_feasible_at(dev, action_id)) {
        throw InfeasibleAction("policy picked an infeasible action during evaluation");
      }
      mass += pa;
      const SystemAction& w = model.actions()[action_id];
      std::uint8_t pick[kMaxJointDevices] = {0};
      const SystemModel::OutcomeSet* sets[kMaxJointDevices];
      const int K = model.device_count();
      for (int k = 0; k < K; ++k) {
        sets[k] = &model.outcomes(k, dev[static_cast<std::size_t>(k)],
                                  w[static_cast<std::size_t>(k)]);
      }
      for (;;) {
        double p = pa;
        std::uint64_t idx = 0;
        for (int k = 0; k < K; ++k) {
          const SystemModel::Outcome& e = sets[k]->entry[pick[k]];
          p *= e.prob;
          idx += model.stride(k) * e.next;
        }
        row.emplace_back(idx, p);
        int k = 0;
        while (k < K && ++pick[k] == sets[k]->n) {
          pick[k] = 0;
          ++k;
        }
        if (k == K) break;
      }
    }
    if (std::abs(mass - 1.0) > 1e-9) {
      throw InfeasibleAction("policy action distribution does not sum to 1");
    }
    std::sort(row.begin(), row.end());
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0 && row[i].first == row[i - 1].first) {
        chain.val.back() += row[i].second;
        continue;
      }
      const std::uint64_t succ = row[i].first;
      if (local_id[succ] == kUnseen) {
        local_id[succ] = static_cast<std::uint32_t>(joint_of.size());
        joint_of.push_back(succ);
      }
      chain.col.push_back(local_id[succ]);
      chain.val.push_back(row[i].second);
    }
    chain.row_ptr.push_back(chain.col.size());
  }
  chain.n = static_cast<std::uint32_t>(joint_of.size());

  const auto classes = recurrent_classes(chain);
  if (classes.size() != 1) {
    throw MultichainDetected("policy induces " + std::to_string(classes.size()) +
                             " closed classes reachable from the initial state");
  }
  const std::vector<std::uint32_t>& members = classes.front();
  std::vector<std::uint32_t> in_class(chain.n, kUnseen);
  for (std::uint32_t i = 0; i < members.size(); ++i) in_class[members[i]] = i;

  SparseChain sub;
  sub.n = static_cast<std::uint32_t>(members.size());
  sub.row_ptr.push_back(0);
  for (std::uint32_t m : members) {
    for (std::uint64_t e = chain.row_ptr[m]; e < chain.row_ptr[m + 1]; ++e) {
      sub.col.push_back(in_class[chain.col[e]]);  // closed class: always mapped
      sub.val.push_back(chain.val[e]);
    }
    sub.row_ptr.push_back(sub.col.size());
  }

  const std::vector<double> pi = stationary_distribution(sub);
  double theta = 0.0;
  for (std::uint32_t i = 0; i < sub.n; ++i) {
    theta += pi[i] * model.stage_cost_at(joint_of[members[i]]);
  }
  EvalResult result;
  result.theta = theta;
  result.reachable = chain.n;
  result.recurrent = sub.n;
  return result;
}

EvalResult exact_policy_evaluation(const SystemModel& model, const Policy& policy,
                                   const EvalOptions& opts) {
  if (policy.action_id.size() != model.state_count() || !model.state_count_exact()) {
    throw ConfigError("policy size does not match the joint state space");
  }
  return exact_policy_evaluation(
      model,
      [&policy](std::uint64_t index, std::vector<std::pair<std::uint32_t, double>>& out) {
        out.emplace_back(policy.action_id[index], 1.0);
      },
      opts);
}

}  // namespace aoisched
