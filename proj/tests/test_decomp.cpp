#include <cmath>
#include <cstdint>
#include <vector>

#include "aoisched/decomp.hpp"
#include "aoisched/errors.hpp"
#include "aoisched/exact_solver.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace aoisched;

TEST_CASE("base scheduling shares the budget by channel quality") {
  SystemConfig cfg = ts::gaw({ts::dev(2, 0.7), ts::dev(2, 0.8)}, 1);
  auto p = default_base_scheduling(cfg);
  REQUIRE(p.size() == 2);
  CHECK(p[0] == doctest::Approx(7.0 / 15.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(8.0 / 15.0).epsilon(1e-15));

  cfg = ts::gaw({ts::dev(3, 0.5), ts::dev(3, 0.7)}, 1);
  p = default_base_scheduling(cfg);
  CHECK(p[0] == doctest::Approx(5.0 / 12.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(7.0 / 12.0).epsilon(1e-15));

  // proportional shares clamp at one transmission per slot
  cfg = ts::gaw({ts::dev(2, 1.0), ts::dev(2, 0.1)}, 2);
  p = default_base_scheduling(cfg);
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(2.0 * 0.1 / 1.1).epsilon(1e-12));
}

TEST_CASE("single-device solves at the scheduling extremes") {
  SystemModel m(ts::gaw1(2, 1.0));

  // never scheduled: the receiver age saturates
  PerDeviceSolution never = solve_per_device(m, 0, 0.0);
  CHECK(std::abs(never.theta - 10.0) < 1e-6);

  // always scheduled on a sure channel: the two-packet delivery cycle
  PerDeviceSolution always = solve_per_device(m, 0, 1.0);
  CHECK(std::abs(always.theta - 2.5) < 1e-6);
}

TEST_CASE("frozen single-device average, fractional scheduling") {
  SystemModel m(ts::gaw1(3, 0.8, 6));
  const PerDeviceSolution sol = solve_per_device(m, 0, 0.5);
  CHECK(std::abs(sol.theta - 5.6865603644644676) < 1e-9);
}

TEST_CASE("single-device fleet reduces to the exact problem") {
  SystemModel m(ts::gaw1(3, 0.7, 6));
  const std::vector<double> prob = default_base_scheduling(m.config());
  REQUIRE(prob.size() == 1);
  CHECK(prob[0] == 1.0);

  const DecompositionTables tables = solve_decomposition(m, prob);
  const ValueTable vt = rvia_solve(m);
  CHECK(std::abs(tables.per_device[0].theta - vt.theta) < 1e-6);

  // the decomposed rule and the exact extraction pick identical actions
  const Policy exact = extract_policy(m, vt.values);
  std::vector<std::uint32_t> dev(1);
  for (std::uint64_t x = 0; x < m.state_count(); ++x) {
    dev[0] = static_cast<std::uint32_t>(x);
    CHECK(suboptimal_action(m, tables, dev) == exact.action_id[x]);
  }
}

TEST_CASE("joint values of the base policy split into per-device sums") {
  SystemModel m(ts::gaw({ts::dev(2, 0.6, 3), ts::dev(2, 0.8, 3)}, 1));
  SolverOptions tight;
  tight.tol = 1e-12;  // the frozen digits were recorded at this tolerance
  const DecompositionTables tables = solve_decomposition(m, {0.5, 0.5}, tight);
  const DecompositionReport rep = verify_decomposition(m, tables, tight);
  CHECK(rep.max_abs_gap <= 1e-6);
  CHECK(std::abs(rep.theta_sum - rep.theta_joint) <= 1e-8);
  // frozen values guard the solve itself
  CHECK(std::abs(rep.theta_joint - 5.8164835164823057) < 1e-9);
  CHECK(std::abs(rep.theta_sum - 5.8164835164811874) < 1e-9);
}

TEST_CASE("degenerate marginals reproduce the never-scheduled solution") {
  SystemModel m(ts::gaw({ts::dev(2, 0.7, 4), ts::dev(2, 0.7, 4)}, 1));
  const DecompositionTables tables = solve_decomposition(m, {1.0, 0.0});
  const PerDeviceSolution never = solve_per_device(m, 1, 0.0);
  CHECK(tables.per_device[1].theta == never.theta);
  CHECK(tables.per_device[1].values == never.values);
  const DecompositionReport rep = verify_decomposition(m, tables);
  CHECK(rep.max_abs_gap <= 1e-6);
}

TEST_CASE("subset law realizes the marginals without exceeding the budget") {
  const std::vector<std::vector<double>> probs{
      {5.0 / 12.0, 7.0 / 12.0}, {0.3, 0.3, 0.3}, {1.0, 2.0 / 11.0}, {0.5, 0.5, 0.5, 0.5}};
  const std::vector<int> budget{1, 1, 2, 2};
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const auto& p = probs[c];
    const auto law = systematic_subset_law(p, budget[c]);
    double total = 0.0;
    std::vector<double> marginal(p.size(), 0.0);
    for (const auto& [mask, q] : law) {
      CHECK(q > 0.0);
      total += q;
      int scheduled = 0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (mask & (std::uint64_t(1) << k)) {
          ++scheduled;
          marginal[k] += q;
        }
      }
      CHECK(scheduled <= budget[c]);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    for (std::size_t k = 0; k < p.size(); ++k)
      CHECK(marginal[k] == doctest::Approx(p[k]).epsilon(1e-12));

    // the single-draw form agrees with the enumerated law
    std::vector<double> hit(p.size(), 0.0);
    const int grid = 200000;
    for (int i = 0; i < grid; ++i) {
      const double u = (i + 0.5) / grid;
      const std::uint64_t mask = systematic_subset_draw(p, u);
      for (std::size_t k = 0; k < p.size(); ++k)
        if (mask & (std::uint64_t(1) << k)) hit[k] += 1.0 / grid;
    }
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(hit[k] - p[k]) < 1e-4);
  }

  CHECK_THROWS_AS((void)systematic_subset_law({0.9, 0.9}, 1), ConfigError);
}

TEST_CASE("decomposed policy: frozen two-device orderings") {
  SystemModel m(ts::gaw({ts::dev(3, 0.5), ts::dev(3, 0.7)}, 1));
  const DecompositionTables tables =
      solve_decomposition(m, default_base_scheduling(m.config()));
  CHECK(std::abs(tables.per_device[0].theta - 9.4463899320390432) < 1e-9);
  CHECK(std::abs(tables.per_device[1].theta - 7.9918861824913439) < 1e-9);

  const StructuredExtractResult mat = materialize_suboptimal_policy(m, tables);
  const EvalResult sub = exact_policy_evaluation(m, mat.policy);
  const EvalResult base = exact_policy_evaluation(m, base_policy_evaluator(m, tables));
  const ValueTable vt = rvia_solve(m);
  const EvalResult opt = exact_policy_evaluation(m, extract_policy(m, vt.values));

  CHECK(std::abs(opt.theta - 15.538092500766497) < 1e-9);
  CHECK(std::abs(sub.theta - 15.627508085179288) < 1e-9);
  CHECK(std::abs(base.theta - 17.438276114530016) < 1e-9);
  CHECK(opt.theta <= sub.theta + 1e-9);
  CHECK(sub.theta <= base.theta + 1e-9);
}

TEST_CASE("materialized decomposed policy equals the pointwise rule") {
  SystemModel m(ts::gaw({ts::dev(2, 0.6, 4), ts::dev(3, 0.8, 4)}, 1));
  const DecompositionTables tables =
      solve_decomposition(m, default_base_scheduling(m.config()));
  const StructuredExtractResult mat = materialize_suboptimal_policy(m, tables);
  CHECK(mat.propagated >= 1);  // the age-propagation shortcut must fire

  SuboptimalActor actor(m, tables);
  std::vector<std::uint32_t> dev;
  JointOdometer odo(m);
  for (std::uint64_t i = 0; i < m.state_count(); ++i, odo.advance()) {
    m.split_index(i, dev);
    const std::uint32_t direct = suboptimal_action(m, tables, dev);
    CHECK(mat.policy.action_id[i] == direct);
    CHECK(actor.act(dev) == direct);
  }
}

TEST_CASE("greedy rule: pinned scheduling picks") {
  SystemConfig cfg;
  cfg.variant = ModelVariant::GenerateAtWill;
  cfg.max_scheduled = 2;
  for (int k = 0; k < 3; ++k) cfg.devices.push_back(ts::dev(2, 0.8, 9));
  SystemModel m(cfg);
  const DecompositionTables tables =
      solve_decomposition(m, default_base_scheduling(cfg));

  auto scheduled = [&](std::vector<int> ages) {
    std::vector<std::uint32_t> dev(ages.size());
    for (std::size_t k = 0; k < ages.size(); ++k)
      dev[k] = m.space(int(k)).index_of(DeviceState{0, 0, ages[k], 2});
    const SystemAction& w = m.actions()[greedy_action(m, tables, dev)];
    std::vector<int> out;
    for (std::size_t k = 0; k < w.size(); ++k)
      if (w[k] != DeviceAction::Idle) out.push_back(int(k));
    return out;
  };

  // two largest receiver ages win
  CHECK(scheduled({1, 9, 4}) == std::vector<int>{1, 2});

  SystemConfig two = ts::gaw({ts::dev(2, 0.8, 9), ts::dev(2, 0.8, 9)}, 1);
  SystemModel m2(two);
  const DecompositionTables t2 = solve_decomposition(m2, default_base_scheduling(two));
  auto pick = [&](int r0, int r1) {
    std::vector<std::uint32_t> dev{m2.space(0).index_of(DeviceState{0, 0, r0, 2}),
                                   m2.space(1).index_of(DeviceState{0, 0, r1, 2})};
    const SystemAction& w = m2.actions()[greedy_action(m2, t2, dev)];
    return w[0] != DeviceAction::Idle ? 0 : 1;
  };
  CHECK(pick(5, 3) == 0);
  CHECK(pick(5, 5) == 0);  // ties go to the lowest device index
}

TEST_CASE("decomposed one-step costs satisfy the renewal dominance inequality") {
  SystemModel m(ts::gaw1(4, 0.8, 6));
  const DecompositionTables tables =
      solve_decomposition(m, default_base_scheduling(m.config()));
  const JInequalityReport rep = verify_j_inequality(m, decomposed_cost_fn(m, tables));
  CHECK(rep.violations == 0);
  CHECK(rep.checks > 0);
}
