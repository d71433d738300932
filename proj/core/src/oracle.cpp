#include "aoisched/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aoisched/markov.hpp"
#include "aoisched/parallel.hpp"

namespace aoisched {

namespace {

constexpr int kMaxDevices = 32;
constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

/// Appends the joint successors of (dev, action) as (joint index, prob).
void expand_successors(const SystemModel& model, const std::vector<std::uint32_t>& dev,
                       std::uint32_t action_id,
                       std::vector<std::pair<std::uint64_t, double>>& out) {
  const SystemAction& w = model.actions()[action_id];
  const int K = model.device_count();
  const SystemModel::OutcomeSet* sets[kMaxDevices];
  for (int k = 0; k < K; ++k) {
    sets[k] = &model.outcomes(k, dev[static_cast<std::size_t>(k)], w[static_cast<std::size_t>(k)]);
  }
  std::uint8_t pick[kMaxDevices] = {0};
  for (;;) {
    double p = 1.0;
    std::uint64_t idx = 0;
    for (int k = 0; k < K; ++k) {
      const SystemModel::Outcome& e = sets[k]->entry[pick[k]];
      p *= e.prob;
      idx += model.stride(k) * e.next;
    }
    out.emplace_back(idx, p);
    int k = 0;
    while (k < K && ++pick[k] == sets[k]->n) {
      pick[k] = 0;
      ++k;
    }
    if (k == K) break;
  }
}

bool same_distribution(const SystemModel& model, const std::vector<std::uint32_t>& dev,
                       std::uint32_t a, std::uint32_t b) {
  const SystemAction& wa = model.actions()[a];
  const SystemAction& wb = model.actions()[b];
  for (int k = 0; k < model.device_count(); ++k) {
    const auto& sa = model.outcomes(k, dev[static_cast<std::size_t>(k)], wa[static_cast<std::size_t>(k)]);
    const auto& sb = model.outcomes(k, dev[static_cast<std::size_t>(k)], wb[static_cast<std::size_t>(k)]);
    if (sa.n != sb.n) return false;
    for (std::uint8_t i = 0; i < sa.n; ++i) {
      if (sa.entry[i].next != sb.entry[i].next || sa.entry[i].prob != sb.entry[i].prob) {
        return false;
      }
    }
  }
  return true;
}

/// Per-worker scratch for evaluating one policy's chain over the support.
struct EvalScratch {
  std::vector<std::uint32_t> visit_order;  // local support positions, BFS order
  std::vector<std::uint32_t> seen_epoch;
  std::vector<std::uint32_t> local_of;     // support position -> chain row
  std::uint32_t epoch = 0;
  SparseChain chain;
  SparseChain sub;
  std::vector<std::uint32_t> in_class;
  std::vector<std::pair<std::uint64_t, double>> row;
};

}  // namespace

OracleResult enumerate_and_evaluate(const SystemModel& model, const OracleBudget& budget) {
  if (!model.state_count_exact() || model.state_count() > budget.max_states) {
    throw BudgetExceeded("oracle state budget of " + std::to_string(budget.max_states) +
                         " states exceeded");
  }
  if (model.device_count() > kMaxDevices) {
    throw BudgetExceeded("oracle supports at most 32 devices");
  }
  const std::uint64_t n = model.state_count();
  const std::uint64_t initial = model.reference_index();

  // Support: states reachable from the initial state under any feasible
  // action. Action choices off the support never influence the average cost
  // starting there, so policies are enumerated on the support only.
  std::vector<std::uint32_t> support_pos(n, kNone);
  std::vector<std::uint64_t> support;
  support.push_back(initial);
  support_pos[initial] = 0;
  {
    std::vector<std::uint32_t> dev;
    std::vector<std::pair<std::uint64_t, double>> succ;
    for (std::uint32_t v = 0; v < support.size(); ++v) {
      model.split_index(support[v], dev);
      for (std::uint32_t a = 0; a < model.action_count(); ++a) {
        if (!model.action_feasible_at(dev, a)) continue;
        succ.clear();
        expand_successors(model, dev, a, succ);
        for (const auto& [idx, p] : succ) {
          if (support_pos[idx] == kNone) {
            support_pos[idx] = static_cast<std::uint32_t>(support.size());
            support.push_back(idx);
          }
        }
      }
    }
  }
  std::sort(support.begin(), support.end());
  for (std::uint32_t s = 0; s < support.size(); ++s) {
    support_pos[support[s]] = s;
  }
  const std::uint32_t S = static_cast<std::uint32_t>(support.size());

  // Distinct-action choices per support state, canonical order preserved.
  std::vector<std::vector<std::uint32_t>> choices(S);
  std::vector<double> cost_of(S);
  {
    std::vector<std::uint32_t> dev;
    for (std::uint32_t s = 0; s < S; ++s) {
      model.split_index(support[s], dev);
      cost_of[s] = model.stage_cost_at(support[s]);
      auto& list = choices[s];
      for (std::uint32_t a = 0; a < model.action_count(); ++a) {
        if (!model.action_feasible_at(dev, a)) continue;
        bool duplicate = false;
        for (std::uint32_t kept : list) {
          if (same_distribution(model, dev, kept, a)) {
            duplicate = true;
            break;
          }
        }
        if (!duplicate) list.push_back(a);
      }
    }
  }

  std::uint64_t total = 1;
  for (std::uint32_t s = 0; s < S; ++s) {
    const std::uint64_t width = choices[s].size();
    if (total > budget.max_policies / width) {
      throw BudgetExceeded("policy enumeration would exceed the budget of " +
                           std::to_string(budget.max_policies) + " policies");
    }
    total *= width;
  }

  OracleResult result;
  result.support = support;
  result.policy_thetas.assign(total, std::numeric_limits<double>::quiet_NaN());

  const int threads = resolve_threads(budget.threads);
  std::vector<double> worker_best(static_cast<std::size_t>(threads),
                                  std::numeric_limits<double>::infinity());
  std::vector<std::uint64_t> worker_ordinal(static_cast<std::size_t>(threads), 0);
  std::vector<std::uint64_t> worker_evaluated(static_cast<std::size_t>(threads), 0);
  std::vector<std::uint64_t> worker_skipped(static_cast<std::size_t>(threads), 0);

  parallel_for(0, total, threads, [&](std::uint64_t b, std::uint64_t e, int wk) {
    std::vector<std::uint32_t> digit(S, 0);
    {
      std::uint64_t rest = b;
      for (std::uint32_t s = 0; s < S; ++s) {
        digit[s] = static_cast<std::uint32_t>(rest % choices[s].size());
        rest /= choices[s].size();
      }
    }
    EvalScratch scratch;
    scratch.seen_epoch.assign(S, 0);
    scratch.local_of.assign(S, 0);
    std::vector<std::uint32_t> dev;

    for (std::uint64_t ordinal = b; ordinal < e; ++ordinal) {
      // Chain restricted to the states this policy actually visits.
      ++scratch.epoch;
      scratch.visit_order.clear();
      scratch.visit_order.push_back(support_pos[initial]);
      scratch.seen_epoch[support_pos[initial]] = scratch.epoch;
      scratch.local_of[support_pos[initial]] = 0;
      auto& chain = scratch.chain;
      chain.n = 0;
      chain.row_ptr.assign(1, 0);
      chain.col.clear();
      chain.val.clear();
      for (std::uint32_t v = 0; v < scratch.visit_order.size(); ++v) {
        const std::uint32_t s = scratch.visit_order[v];
        model.split_index(support[s], dev);
        scratch.row.clear();
        expand_successors(model, dev, choices[s][digit[s]], scratch.row);
        std::sort(scratch.row.begin(), scratch.row.end());
        for (std::size_t i = 0; i < scratch.row.size(); ++i) {
          if (i > 0 && scratch.row[i].first == scratch.row[i - 1].first) {
            chain.val.back() += scratch.row[i].second;
            continue;
          }
          const std::uint32_t sp = support_pos[scratch.row[i].first];
          if (scratch.seen_epoch[sp] != scratch.epoch) {
            scratch.seen_epoch[sp] = scratch.epoch;
            scratch.local_of[sp] = static_cast<std::uint32_t>(scratch.visit_order.size());
            scratch.visit_order.push_back(sp);
          }
          chain.col.push_back(scratch.local_of[sp]);
          chain.val.push_back(scratch.row[i].second);
        }
        chain.row_ptr.push_back(chain.col.size());
      }
      chain.n = static_cast<std::uint32_t>(scratch.visit_order.size());

      const auto classes = recurrent_classes(chain);
      if (classes.size() == 1) {
        const auto& members = classes.front();
        auto& sub = scratch.sub;
        sub.n = static_cast<std::uint32_t>(members.size());
        sub.row_ptr.assign(1, 0);
        sub.col.clear();
        sub.val.clear();
        scratch.in_class.assign(chain.n, kNone);
        for (std::uint32_t i = 0; i < members.size(); ++i) scratch.in_class[members[i]] = i;
        for (std::uint32_t m : members) {
          for (std::uint64_t eg = chain.row_ptr[m]; eg < chain.row_ptr[m + 1]; ++eg) {
            sub.col.push_back(scratch.in_class[chain.col[eg]]);
            sub.val.push_back(chain.val[eg]);
          }
          sub.row_ptr.push_back(sub.col.size());
        }
        const std::vector<double> pi = stationary_distribution(sub);
        double theta = 0.0;
        for (std::uint32_t i = 0; i < sub.n; ++i) {
          theta += pi[i] * cost_of[scratch.visit_order[members[i]]];
        }
        result.policy_thetas[ordinal] = theta;
        ++worker_evaluated[static_cast<std::size_t>(wk)];
        if (theta < worker_best[static_cast<std::size_t>(wk)]) {
          worker_best[static_cast<std::size_t>(wk)] = theta;
          worker_ordinal[static_cast<std::size_t>(wk)] = ordinal;
        }
      } else {
        ++worker_skipped[static_cast<std::size_t>(wk)];
      }

      // advance the policy counter
      for (std::uint32_t s = 0; s < S; ++s) {
        if (++digit[s] < choices[s].size()) break;
        digit[s] = 0;
      }
    }
  });

  double best = std::numeric_limits<double>::infinity();
  std::uint64_t best_ordinal = 0;
  for (int w = 0; w < threads; ++w) {
    const double th = worker_best[static_cast<std::size_t>(w)];
    const std::uint64_t ord = worker_ordinal[static_cast<std::size_t>(w)];
    if (th < best || (th == best && ord < best_ordinal)) {
      best = th;
      best_ordinal = ord;
    }
    result.evaluated += worker_evaluated[static_cast<std::size_t>(w)];
    result.skipped_multichain += worker_skipped[static_cast<std::size_t>(w)];
  }
  if (!std::isfinite(best)) {
    throw MultichainDetected("every enumerated policy induced multiple closed classes");
  }
  result.best_theta = best;
  result.best_ordinal = best_ordinal;

  // Materialize the winning policy on the full space.
  result.best_policy.action_id.assign(n, kNone);
  {
    std::vector<std::uint32_t> dev;
    for (std::uint64_t i = 0; i < n; ++i) {
      model.split_index(i, dev);
      if (support_pos[i] != kNone) continue;  // filled below from the ordinal
      for (std::uint32_t a = 0; a < model.action_count(); ++a) {
        if (model.action_feasible_at(dev, a)) {
          result.best_policy.action_id[i] = a;
          break;
        }
      }
    }
    std::uint64_t rest = best_ordinal;
    for (std::uint32_t s = 0; s < S; ++s) {
      const std::uint32_t d = static_cast<std::uint32_t>(rest % choices[s].size());
      rest /= choices[s].size();
      result.best_policy.action_id[support[s]] = choices[s][d];
    }
  }
  return result;
}

}  // namespace aoisched
