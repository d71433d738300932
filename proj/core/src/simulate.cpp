#include "aoisched/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "aoisched/errors.hpp"
#include "aoisched/parallel.hpp"

namespace aoisched {

namespace {

class TablePolicy final : public PolicySource {
 public:
  TablePolicy(const SystemModel& model, Policy policy, std::string name)
      : model_(model), policy_(std::move(policy)), name_(std::move(name)) {
    if (!model.state_count_exact() || policy_.action_id.size() != model.state_count())
      throw ConfigError("policy table size must match the joint state count");
  }

  std::uint32_t act(const std::vector<std::uint32_t>& dev, SplitMix64&) override {
    return policy_.action_id[model_.join_indices(dev)];
  }
  std::unique_ptr<PolicySource> clone() const override {
    return std::make_unique<TablePolicy>(model_, policy_, name_);
  }
  std::string name() const override { return name_; }

 private:
  const SystemModel& model_;
  Policy policy_;
  std::string name_;
};

class AllIdlePolicy final : public PolicySource {
 public:
  std::uint32_t act(const std::vector<std::uint32_t>&, SplitMix64&) override { return 0; }
  std::unique_ptr<PolicySource> clone() const override {
    return std::make_unique<AllIdlePolicy>();
  }
  std::string name() const override { return "all_idle"; }
};

void check_tables(const SystemModel& model, const DecompositionTables& tables) {
  const std::size_t n = static_cast<std::size_t>(model.device_count());
  if (tables.per_device.size() != n || tables.schedule_prob.size() != n)
    throw ConfigError("decomposition tables must cover every device");
  for (std::size_t k = 0; k < n; ++k) {
    const auto size = model.space(static_cast<int>(k)).size();
    if (tables.per_device[k].values.size() != size || tables.per_device[k].sampling.size() != size)
      throw ConfigError("per-device tables must match the device state space");
  }
}

class SuboptimalPolicy final : public PolicySource {
 public:
  SuboptimalPolicy(const SystemModel& model, DecompositionTables tables)
      : model_(model), tables_(std::move(tables)), actor_(model_, tables_) {
    check_tables(model_, tables_);
  }

  std::uint32_t act(const std::vector<std::uint32_t>& dev, SplitMix64&) override {
    return actor_.act(dev);
  }
  std::unique_ptr<PolicySource> clone() const override {
    return std::make_unique<SuboptimalPolicy>(model_, tables_);
  }
  std::string name() const override { return "suboptimal"; }

 private:
  const SystemModel& model_;
  DecompositionTables tables_;
  SuboptimalActor actor_;
};

class GreedyPolicy final : public PolicySource {
 public:
  GreedyPolicy(const SystemModel& model, DecompositionTables tables)
      : model_(model), tables_(std::move(tables)) {
    check_tables(model_, tables_);
  }

  std::uint32_t act(const std::vector<std::uint32_t>& dev, SplitMix64&) override {
    return greedy_action(model_, tables_, dev);
  }
  std::unique_ptr<PolicySource> clone() const override {
    return std::make_unique<GreedyPolicy>(model_, tables_);
  }
  std::string name() const override { return "greedy"; }

 private:
  const SystemModel& model_;
  DecompositionTables tables_;
};

class BasePolicy final : public PolicySource {
 public:
  BasePolicy(const SystemModel& model, DecompositionTables tables)
      : model_(model),
        tables_(std::move(tables)),
        scratch_(static_cast<std::size_t>(model.device_count()), DeviceAction::Idle) {
    check_tables(model_, tables_);
    // Validates the inclusion probabilities up front.
    (void)systematic_subset_law(tables_.schedule_prob, model_.config().max_scheduled);
  }

  /// Consumes exactly one uniform per slot regardless of the outcome.
  std::uint32_t act(const std::vector<std::uint32_t>& dev, SplitMix64& rng) override {
    const std::uint64_t mask = systematic_subset_draw(tables_.schedule_prob, rng.next_double());
    for (std::size_t k = 0; k < scratch_.size(); ++k)
      scratch_[k] = (mask >> k) & 1 ? tables_.per_device[k].sampling[dev[k]] : DeviceAction::Idle;
    return model_.action_id_of(scratch_);
  }
  std::unique_ptr<PolicySource> clone() const override {
    return std::make_unique<BasePolicy>(model_, tables_);
  }
  std::string name() const override { return "base"; }

 private:
  const SystemModel& model_;
  DecompositionTables tables_;
  SystemAction scratch_;
};

struct RepOutput {
  std::vector<std::uint64_t> age_sum;  // per device, over measured slots
  std::vector<std::vector<std::uint32_t>> trajectory;
};

RepOutput run_replication(const SystemModel& model, PolicySource& policy, const SimOptions& opts,
                          std::uint64_t rep, bool record) {
  const auto devices = static_cast<std::size_t>(model.device_count());
  const ModelVariant variant = model.variant();

  std::vector<SplitMix64> device_rng;
  device_rng.reserve(devices);
  for (std::size_t k = 0; k < devices; ++k)
    device_rng.emplace_back(stream_key(opts.seed, rep, k));
  SplitMix64 policy_rng(stream_key(opts.seed, rep, devices));

  std::vector<DeviceState> state(devices);
  std::vector<std::uint32_t> dev(devices);
  for (std::size_t k = 0; k < devices; ++k) {
    state[k] = model.reference_device_state(static_cast<int>(k));
    dev[k] = model.space(static_cast<int>(k)).index_of(state[k]);
  }

  RepOutput out;
  out.age_sum.assign(devices, 0);
  if (record) out.trajectory.reserve(opts.horizon);

  const std::uint64_t total = opts.burn_in + opts.horizon;
  for (std::uint64_t t = 0; t < total; ++t) {
    if (t >= opts.burn_in) {
      for (std::size_t k = 0; k < devices; ++k)
        out.age_sum[k] += static_cast<std::uint64_t>(state[k].receiver_age);
      if (record) {
        std::vector<std::uint32_t> row(devices);
        for (std::size_t k = 0; k < devices; ++k)
          row[k] = static_cast<std::uint32_t>(state[k].receiver_age);
        out.trajectory.push_back(std::move(row));
      }
    }
    const std::uint32_t action = policy.act(dev, policy_rng);
    const SystemAction& w = model.actions()[action];
    for (std::size_t k = 0; k < devices; ++k) {
      // Both coins are drawn every slot, channel first, so the outcome
      // sequences are identical for any two policies run on the same seed.
      const auto& params = model.config().devices[k];
      const bool delivered = device_rng[k].bernoulli(params.channel_reliability);
      const bool arrival = device_rng[k].bernoulli(params.arrival_rate);
      state[k] = device_step(params, variant, state[k], w[k], delivered, arrival);
      dev[k] = model.space(static_cast<int>(k)).index_of(state[k]);
    }
  }
  return out;
}

}  // namespace

std::unique_ptr<PolicySource> make_table_policy(const SystemModel& model, Policy policy,
                                                std::string name) {
  return std::make_unique<TablePolicy>(model, std::move(policy), std::move(name));
}

std::unique_ptr<PolicySource> make_all_idle_policy(const SystemModel&) {
  return std::make_unique<AllIdlePolicy>();
}

std::unique_ptr<PolicySource> make_suboptimal_policy(const SystemModel& model,
                                                     DecompositionTables tables) {
  return std::make_unique<SuboptimalPolicy>(model, std::move(tables));
}

std::unique_ptr<PolicySource> make_greedy_policy(const SystemModel& model,
                                                 DecompositionTables tables) {
  return std::make_unique<GreedyPolicy>(model, std::move(tables));
}

std::unique_ptr<PolicySource> make_base_policy(const SystemModel& model,
                                               DecompositionTables tables) {
  return std::make_unique<BasePolicy>(model, std::move(tables));
}

SimResult simulate(const SystemModel& model, const PolicySource& policy, const SimOptions& opts) {
  if (opts.horizon == 0) throw ConfigError("horizon must be positive");
  if (opts.replications < 1) throw ConfigError("replications must be positive");
  const auto devices = static_cast<std::size_t>(model.device_count());
  const auto reps = static_cast<std::uint64_t>(opts.replications);

  SimResult result;
  result.rep_overall.assign(reps, 0.0);
  result.rep_device.assign(reps, std::vector<double>(devices, 0.0));

  std::vector<std::vector<std::uint32_t>> trajectory;
  parallel_for(0, reps, opts.threads, [&](std::uint64_t begin, std::uint64_t end, int) {
    auto worker_policy = policy.clone();
    for (std::uint64_t r = begin; r < end; ++r) {
      const bool record = opts.record_trajectory && r == 0;
      RepOutput out = run_replication(model, *worker_policy, opts, r, record);
      std::uint64_t total = 0;
      for (std::size_t k = 0; k < devices; ++k) {
        result.rep_device[r][k] =
            static_cast<double>(out.age_sum[k]) / static_cast<double>(opts.horizon);
        total += out.age_sum[k];
      }
      result.rep_overall[r] = static_cast<double>(total) /
                              (static_cast<double>(opts.horizon) * static_cast<double>(devices));
      if (record) trajectory = std::move(out.trajectory);
    }
  });
  result.trajectory = std::move(trajectory);

  result.device_mean.assign(devices, 0.0);
  for (std::uint64_t r = 0; r < reps; ++r)
    for (std::size_t k = 0; k < devices; ++k) result.device_mean[k] += result.rep_device[r][k];
  for (std::size_t k = 0; k < devices; ++k)
    result.device_mean[k] /= static_cast<double>(reps);

  double mean = 0.0;
  for (double v : result.rep_overall) mean += v;
  mean /= static_cast<double>(reps);
  result.overall_mean = mean;
  if (reps >= 2) {
    double ss = 0.0;
    for (double v : result.rep_overall) ss += (v - mean) * (v - mean);
    result.std_error = std::sqrt(ss / static_cast<double>(reps - 1)) /
                       std::sqrt(static_cast<double>(reps));
  }
  return result;
}

Comparison compare_policies(const SystemModel& model,
                            const std::vector<const PolicySource*>& policies,
                            const SimOptions& opts) {
  if (policies.empty()) throw ConfigError("compare_policies needs at least one policy");
  Comparison cmp;
  cmp.names.reserve(policies.size());
  cmp.results.reserve(policies.size());
  for (const PolicySource* p : policies) {
    if (p == nullptr) throw ConfigError("compare_policies received a null policy");
    cmp.names.push_back(p->name());
    cmp.results.push_back(simulate(model, *p, opts));
  }

  const std::size_t m = policies.size();
  const auto reps = static_cast<std::size_t>(opts.replications);
  cmp.mean_diff.assign(m, std::vector<double>(m, 0.0));
  cmp.diff_std_error.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      double mean = 0.0;
      for (std::size_t r = 0; r < reps; ++r)
        mean += cmp.results[i].rep_overall[r] - cmp.results[j].rep_overall[r];
      mean /= static_cast<double>(reps);
      cmp.mean_diff[i][j] = mean;
      if (reps >= 2) {
        double ss = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
          const double d = cmp.results[i].rep_overall[r] - cmp.results[j].rep_overall[r] - mean;
          ss += d * d;
        }
        cmp.diff_std_error[i][j] =
            std::sqrt(ss / static_cast<double>(reps - 1)) / std::sqrt(static_cast<double>(reps));
      }
    }
  }
  return cmp;
}

}  // namespace aoisched
