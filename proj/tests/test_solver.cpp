#include <cmath>
#include <limits>
#include <vector>

#include "aoisched/errors.hpp"
#include "aoisched/exact_solver.hpp"
#include "aoisched/model.hpp"
#include "aoisched/oracle.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace aoisched;

namespace {

// Weak argmin membership of `action_id` at joint index `idx`.
bool minimizes_at(const SystemModel& m, std::uint64_t idx, std::uint32_t action_id,
                  const std::vector<double>& V) {
  std::vector<std::uint32_t> dev;
  m.split_index(idx, dev);
  if (!m.action_feasible_at(dev, action_id)) return false;
  const double candidate = state_action_cost(m, idx, action_id, V);
  for (std::uint32_t a = 0; a < m.action_count(); ++a) {
    if (a == action_id || !m.action_feasible_at(dev, a)) continue;
    if (state_action_cost(m, idx, a, V) < candidate) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("no transmission budget pins every age at its cap") {
  SystemConfig cfg = ts::gaw1(2, 0.5, 7);
  cfg.max_scheduled = 0;
  SystemModel m(cfg);
  CHECK(m.action_count() == 1);

  const ValueTable vt = rvia_solve(m);
  CHECK(std::abs(vt.theta - 7.0) < 1e-6);

  const Policy p = extract_policy(m, vt.values);
  for (std::uint32_t a : p.action_id) CHECK(a == 0);

  // the exhaustive search agrees: there is exactly one policy
  const OracleResult orc = enumerate_and_evaluate(m);
  CHECK(orc.evaluated == 1);
  CHECK(orc.best_theta == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("iterative solve, frozen reference instance") {
  // one device, four packets per update, channel 0.8, caps 10
  SystemModel m(ts::gaw1(4, 0.8));
  SolverOptions tight;
  tight.tol = 1e-12;  // the frozen digits were recorded at this tolerance
  const ValueTable vt = rvia_solve(m, tight);

  CHECK(std::abs(vt.theta - 6.7581954599113505) < 1e-9);
  CHECK(vt.final_span <= 1e-12);
  CHECK(vt.values[vt.reference_state] == 0.0);

  const Policy p = extract_policy(m, vt.values);
  const EvalResult ev = exact_policy_evaluation(m, p);
  CHECK(std::abs(ev.theta - 6.7581954599125993) < 1e-9);
  // the fixed-point estimate and the stationary evaluation must agree
  CHECK(std::abs(ev.theta - vt.theta) < 1e-6);
}

TEST_CASE("solution satisfies the optimality equation to solver precision") {
  std::vector<SystemConfig> cases{ts::gaw1(4, 0.8), ts::gaw1(2, 0.5, 2),
                                  ts::gaw({ts::dev(3, 0.5), ts::dev(3, 0.7)}, 1)};
  for (const SystemConfig& cfg : cases) {
    SystemModel m(cfg);
    SolverOptions opts;
    opts.tol = 1e-9;
    const ValueTable vt = rvia_solve(m, opts);
    double residual = 0.0;
    std::vector<std::uint32_t> dev;
    for (std::uint64_t x = 0; x < m.state_count(); ++x) {
      m.split_index(x, dev);
      double best = std::numeric_limits<double>::infinity();
      for (std::uint32_t a = 0; a < m.action_count(); ++a) {
        if (!m.action_feasible_at(dev, a)) continue;
        best = std::min(best, state_action_cost(m, x, a, vt.values));
      }
      residual = std::max(residual, std::abs(vt.theta + vt.values[x] - best));
    }
    CHECK(residual <= 10.0 * opts.tol);
  }
}

TEST_CASE("policy extraction ignores constant shifts of the values") {
  SystemModel m(ts::gaw1(4, 0.8));
  const ValueTable vt = rvia_solve(m);
  std::vector<double> shifted = vt.values;
  for (double& v : shifted) v += 100.0;
  CHECK(extract_policy(m, vt.values) == extract_policy(m, shifted));
}

TEST_CASE("fixed-policy evaluation on closed-form instances") {
  // a sure channel with two-packet updates cycles with mean age 2.5
  SystemModel m(ts::gaw1(2, 1.0));
  Policy always_continue;
  always_continue.action_id.assign(m.state_count(), 1);
  const EvalResult ev = exact_policy_evaluation(m, always_continue);
  CHECK(std::abs(ev.theta - 2.5) < 1e-12);

  // never transmitting drives the receiver age into its cap
  SystemModel idle_m(ts::gaw1(2, 0.6, 3));
  Policy idle;
  idle.action_id.assign(idle_m.state_count(), 0);
  const EvalResult iv = exact_policy_evaluation(idle_m, idle);
  CHECK(std::abs(iv.theta - 3.0) < 1e-12);
  CHECK(iv.recurrent == 1);
}

TEST_CASE("evaluation rejects policies with several closed classes") {
  SystemModel m(ts::gaw1(2, 0.5, 2));
  Policy p;
  p.action_id.assign(m.state_count(), 0);
  p.action_id[m.reference_index()] = 2;  // transmit once, then idle forever
  CHECK_THROWS_AS((void)exact_policy_evaluation(m, p), MultichainDetected);
}

TEST_CASE("failure modes carry their diagnostics") {
  SystemModel m(ts::gaw1(4, 0.8));

  SolverOptions tight;
  tight.tol = 1e-15;
  tight.max_iters = 5;
  try {
    (void)rvia_solve(m, tight);
    FAIL("expected the solver to give up");
  } catch (const NonConvergence& e) {
    CHECK(e.span > 0.0);
  }

  SolverOptions small;
  small.max_states = 10;
  CHECK_THROWS_AS((void)rvia_solve(m, small), BudgetExceeded);
}

TEST_CASE("worker count does not change the arithmetic") {
  SystemModel m(ts::gaw1(4, 0.8));
  SolverOptions serial;
  SolverOptions wide;
  wide.threads = 4;
  const ValueTable a = rvia_solve(m, serial);
  const ValueTable b = rvia_solve(m, wide);
  CHECK(a.theta == b.theta);
  CHECK(a.values == b.values);
  CHECK(extract_policy(m, a.values, 1) == extract_policy(m, b.values, 4));
}

TEST_CASE("sample-anew thresholds match a brute scan") {
  SystemModel m(ts::gaw1(4, 0.8));
  const ValueTable vt = rvia_solve(m);
  const ThresholdTable table = compute_thresholds(m, vt.values, 0, 2);
  REQUIRE(table.min_age.size() == 44);  // 11 receiver ages x 4 packet counts

  const DeviceSpace& space = m.space(0);
  std::size_t j = 0;
  for (int ar = 0; ar <= 10; ++ar) {
    for (int d = 1; d <= 4; ++d, ++j) {
      double expect = std::numeric_limits<double>::infinity();
      for (int ad = 0; ad <= 10; ++ad) {
        if (minimizes_at(m, space.index_of(DeviceState{0, ad, ar, d}), 2, vt.values)) {
          expect = ad;
          break;
        }
      }
      CHECK(table.min_age[j] == expect);
    }
  }
}

TEST_CASE("optimal values grow with every age coordinate") {
  SystemModel m(ts::gaw1(4, 0.8));
  const ValueTable vt = rvia_solve(m);
  const MonotonicityReport rep = verify_value_monotonicity(m, vt.values);
  CHECK(rep.checks == 880);
  CHECK(rep.violations == 0);

  SystemModel ra(ts::ra1(4, 0.8, 0.5));
  const ValueTable rv = rvia_solve(ra);
  const MonotonicityReport rrep = verify_value_monotonicity(ra, rv.values);
  CHECK(rrep.checks == 14036);
  CHECK(rrep.violations == 0);
}

TEST_CASE("raising a renewed device's age never hurts the renewing action") {
  SystemModel m(ts::gaw1(4, 0.8));
  const ValueTable vt = rvia_solve(m);
  const JInequalityReport rep = verify_j_inequality(m, vt.values);
  CHECK(rep.checks == 4840);
  CHECK(rep.violations == 0);
}

TEST_CASE("structure-aware extraction matches the exhaustive one") {
  SystemModel m(ts::gaw1(4, 0.8));
  const ValueTable vt = rvia_solve(m);
  const StructuredExtractResult fast = structure_aware_extract(m, vt.values);
  CHECK(fast.policy == extract_policy(m, vt.values));
  CHECK(fast.evaluated == 236);
  CHECK(fast.propagated == 248);
  CHECK(fast.evaluated + fast.propagated == m.state_count());
}

TEST_CASE("one-step cost is the stage cost plus expected continuation") {
  SystemModel m(ts::gaw1(2, 0.5, 2));
  std::vector<double> V(m.state_count());
  for (std::size_t i = 0; i < V.size(); ++i) V[i] = 0.25 * double(i) - 3.0;
  for (std::uint64_t x = 0; x < m.state_count(); ++x) {
    const SystemState s = m.state_at(x);
    for (std::uint32_t a = 0; a < m.action_count(); ++a) {
      std::vector<std::uint32_t> dev;
      m.split_index(x, dev);
      if (!m.action_feasible_at(dev, a)) continue;
      double expect = m.stage_cost_at(x);
      for (const auto& [y, prob] : m.system_transition(s, m.actions()[a]))
        expect += prob * V[y.index];
      CHECK(state_action_cost(m, x, a, V) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}
