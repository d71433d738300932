#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "aoisched/errors.hpp"
#include "aoisched/model.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace aoisched;

namespace {

using Dist = std::map<std::array<int, 4>, double>;

Dist as_map(const TransitionDistribution& t) {
  Dist m;
  for (const auto& e : t)
    m[{e.state.buffer_age, e.state.device_age, e.state.receiver_age, e.state.remaining}] +=
        e.prob;
  return m;
}

bool dist_eq(const Dist& a, const Dist& b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (const auto& [k, p] : a) {
    auto it = b.find(k);
    if (it == b.end() || std::abs(it->second - p) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("device space cardinality and index layout") {
  DeviceSpace gaw(ts::dev(4, 0.8), ModelVariant::GenerateAtWill);
  CHECK(gaw.size() == 484);  // 11 * 11 * 4

  DeviceSpace ra(ts::dev(4, 0.8), ModelVariant::RandomArrival);
  CHECK(ra.size() == 5324);  // 11 * 484, buffer age 0..10

  DeviceParams gp = ts::dev(4, 0.8);
  gp.generation_slots = 2;
  DeviceSpace gen(gp, ModelVariant::NonZeroGenerationTime);
  CHECK(gen.size() == 605);  // 11 * 11 * 5, remaining runs to L + tau - 1

  // remaining varies fastest along the packed index
  CHECK(gaw.state_at(0) == DeviceState{0, 0, 0, 1});
  CHECK(gaw.state_at(1) == DeviceState{0, 0, 0, 2});
  CHECK(gaw.state_at(gaw.receiver_stride()) == DeviceState{0, 0, 1, 1});
  CHECK(gaw.state_at(gaw.device_age_stride()) == DeviceState{0, 1, 0, 1});
  CHECK(ra.state_at(ra.buffer_stride()) == DeviceState{1, 0, 0, 1});

  for (std::uint32_t i = 0; i < gaw.size(); ++i) CHECK(gaw.index_of(gaw.state_at(i)) == i);
  for (std::uint32_t i = 0; i < ra.size(); ++i) CHECK(ra.index_of(ra.state_at(i)) == i);
  for (std::uint32_t i = 0; i < gen.size(); ++i) CHECK(gen.index_of(gen.state_at(i)) == i);

  CHECK(!gaw.contains(DeviceState{0, 0, 0, 5}));
  CHECK(!gaw.contains(DeviceState{1, 0, 0, 1}));  // no buffer coordinate here
  CHECK(!ra.contains(DeviceState{11, 0, 0, 1}));
  CHECK_THROWS_AS((void)gaw.index_of(DeviceState{0, 12, 0, 1}), std::out_of_range);
}

TEST_CASE("instantaneous-sampling kernel, pinned transitions") {
  DeviceParams p = ts::dev(4, 0.8);

  // mid-transmission: one packet down on success, ages always advance
  auto t = as_map(device_transition(p, {0, 2, 5, 3}, DeviceAction::Continue));
  CHECK(dist_eq(t, {{{0, 3, 6, 2}, 0.8}, {{0, 3, 6, 3}, 0.2}}));

  // last packet: delivery resets the receiver age to the update's age and
  // the device samples anew at once
  t = as_map(device_transition(p, {0, 4, 7, 1}, DeviceAction::Continue));
  CHECK(dist_eq(t, {{{0, 0, 5, 4}, 0.8}, {{0, 5, 8, 1}, 0.2}}));

  // sampling anew mid-transmission discards the old update
  t = as_map(device_transition(p, {0, 3, 5, 2}, DeviceAction::Fresh));
  CHECK(dist_eq(t, {{{0, 1, 6, 3}, 0.8}, {{0, 0, 6, 4}, 0.2}}));

  // saturated ages stay put under idling
  t = as_map(device_transition(p, {0, 10, 10, 2}, DeviceAction::Idle));
  CHECK(dist_eq(t, {{{0, 10, 10, 2}, 1.0}}));
}

TEST_CASE("buffered-arrival kernel, pinned transitions") {
  DeviceParams p = ts::dev(4, 0.8);
  p.arrival_rate = 0.5;

  // channel and arrival branches are independent
  auto t = as_map(device_transition_random_arrival(p, {3, 2, 5, 2}, DeviceAction::Continue));
  CHECK(dist_eq(t, {{{1, 3, 6, 1}, 0.4},
                    {{1, 3, 6, 2}, 0.1},
                    {{4, 3, 6, 1}, 0.4},
                    {{4, 3, 6, 2}, 0.1}}));

  // switching to the buffer adopts the buffered update's age, or the
  // fresh arrival's when one lands in the same slot
  t = as_map(device_transition_random_arrival(p, {3, 6, 8, 2}, DeviceAction::Fresh));
  CHECK(dist_eq(t, {{{1, 1, 9, 3}, 0.4},
                    {{1, 1, 9, 4}, 0.1},
                    {{4, 4, 9, 3}, 0.4},
                    {{4, 4, 9, 4}, 0.1}}));

  t = as_map(device_transition_random_arrival(p, {3, 2, 5, 2}, DeviceAction::Idle));
  CHECK(dist_eq(t, {{{1, 3, 6, 2}, 0.5}, {{4, 3, 6, 2}, 0.5}}));
}

TEST_CASE("generation-time kernel, pinned transitions") {
  DeviceParams p = ts::dev(2, 0.8);
  p.generation_slots = 2;

  // sampling anew starts the generation countdown; the channel is unused
  auto t = as_map(device_transition_gen_time(p, {0, 5, 7, 2}, DeviceAction::Fresh));
  CHECK(dist_eq(t, {{{0, 0, 8, 3}, 1.0}}));

  // while generating the countdown proceeds on its own
  t = as_map(device_transition_gen_time(p, {0, 0, 7, 3}, DeviceAction::Idle));
  CHECK(dist_eq(t, {{{0, 1, 8, 2}, 1.0}}));

  // completion starts generating the next update immediately
  DeviceParams sure = p;
  sure.channel_reliability = 1.0;
  t = as_map(device_transition_gen_time(sure, {0, 2, 6, 1}, DeviceAction::Continue));
  CHECK(dist_eq(t, {{{0, 0, 3, 3}, 1.0}}));
}

TEST_CASE("every kernel yields a proper distribution inside the space") {
  std::vector<std::pair<DeviceParams, ModelVariant>> grid;
  for (int L : {2, 3}) {
    for (double lam : {0.3, 1.0}) {
      DeviceParams p = ts::dev(L, lam, 5);
      grid.emplace_back(p, ModelVariant::GenerateAtWill);
      DeviceParams r = p;
      r.arrival_rate = 0.6;
      r.cap_buffer = 5;
      grid.emplace_back(r, ModelVariant::RandomArrival);
      DeviceParams g = p;
      g.generation_slots = 3;
      grid.emplace_back(g, ModelVariant::NonZeroGenerationTime);
    }
  }
  for (const auto& [p, variant] : grid) {
    DeviceSpace space(p, variant);
    for (std::uint32_t i = 0; i < space.size(); ++i) {
      const DeviceState x = space.state_at(i);
      for (DeviceAction a :
           {DeviceAction::Idle, DeviceAction::Continue, DeviceAction::Fresh}) {
        if (!device_action_feasible(p, variant, x, a)) {
          CHECK_THROWS_AS((void)device_transition(p, variant, x, a), InfeasibleAction);
          continue;
        }
        const TransitionDistribution t = device_transition(p, variant, x, a);
        double total = 0.0;
        Dist seen;
        for (const auto& e : t) {
          CHECK(e.prob > 0.0);
          CHECK(space.contains(e.state));
          std::array<int, 4> key{e.state.buffer_age, e.state.device_age,
                                 e.state.receiver_age, e.state.remaining};
          CHECK(seen.count(key) == 0);  // successors are merged
          seen[key] = e.prob;
          total += e.prob;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("sampled dynamics reproduce the exact kernel") {
  // device_step drives the simulator; summing it over the coin outcomes
  // weighted by their probabilities must recover device_transition exactly
  for (int L : {2, 3}) {
    for (double lam : {0.4, 1.0}) {
      for (double rho : {0.0, 0.5, 1.0}) {
        DeviceParams p = ts::dev(L, lam, 4);
        p.arrival_rate = rho;
        p.generation_slots = 2;
        for (ModelVariant variant :
             {ModelVariant::GenerateAtWill, ModelVariant::RandomArrival,
              ModelVariant::NonZeroGenerationTime}) {
          DeviceSpace space(p, variant);
          const double p_arr = variant == ModelVariant::RandomArrival ? rho : 0.0;
          for (std::uint32_t i = 0; i < space.size(); ++i) {
            const DeviceState x = space.state_at(i);
            for (DeviceAction a :
                 {DeviceAction::Idle, DeviceAction::Continue, DeviceAction::Fresh}) {
              if (!device_action_feasible(p, variant, x, a)) continue;
              Dist built;
              for (int coin = 0; coin < 4; ++coin) {
                const bool delivered = coin & 1;
                const bool arrival = coin & 2;
                const double w = (delivered ? lam : 1.0 - lam) *
                                 (arrival ? p_arr : 1.0 - p_arr);
                if (w == 0.0) continue;
                const DeviceState y = device_step(p, variant, x, a, delivered, arrival);
                built[{y.buffer_age, y.device_age, y.receiver_age, y.remaining}] += w;
              }
              CHECK(dist_eq(built, as_map(device_transition(p, variant, x, a))));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("feasibility: empty buffer and ongoing generation") {
  DeviceParams p = ts::dev(3, 0.8);
  p.arrival_rate = 0.5;
  // an empty buffer offers nothing to switch to
  CHECK(!device_action_feasible(p, ModelVariant::RandomArrival, {0, 2, 5, 2},
                                DeviceAction::Fresh));
  CHECK(device_action_feasible(p, ModelVariant::RandomArrival, {1, 2, 5, 2},
                               DeviceAction::Fresh));
  CHECK(device_action_feasible(p, ModelVariant::RandomArrival, {0, 2, 5, 2},
                               DeviceAction::Continue));

  DeviceParams g = ts::dev(2, 0.8);
  g.generation_slots = 3;
  // remaining above the packet count marks an update still being generated
  for (DeviceAction a : {DeviceAction::Continue, DeviceAction::Fresh}) {
    CHECK(!device_action_feasible(g, ModelVariant::NonZeroGenerationTime, {0, 1, 5, 3}, a));
    CHECK_THROWS_AS(
        (void)device_step(g, ModelVariant::NonZeroGenerationTime, {0, 1, 5, 3}, a, true, false),
        InfeasibleAction);
  }
  CHECK(device_action_feasible(g, ModelVariant::NonZeroGenerationTime, {0, 1, 5, 2},
                               DeviceAction::Continue));
}

TEST_CASE("joint action list is canonical") {
  auto chars = [](const SystemAction& w) {
    std::string s;
    for (DeviceAction a : w) s += action_char(a);
    return s;
  };

  auto one = feasible_system_actions(1, 1);
  REQUIRE(one.size() == 3);
  CHECK(chars(one[0]) == "I");
  CHECK(chars(one[1]) == "C");
  CHECK(chars(one[2]) == "F");

  // device 0 is the least significant digit; the all-idle action comes first
  auto two = feasible_system_actions(2, 1);
  REQUIRE(two.size() == 5);
  CHECK(chars(two[0]) == "II");
  CHECK(chars(two[1]) == "CI");
  CHECK(chars(two[2]) == "FI");
  CHECK(chars(two[3]) == "IC");
  CHECK(chars(two[4]) == "IF");

  CHECK(feasible_system_actions(2, 2).size() == 9);
  CHECK(feasible_system_actions(3, 1).size() == 7);
  CHECK(feasible_system_actions(3, 0).size() == 1);

  SystemModel m(ts::gaw({ts::dev(2, 0.5, 3), ts::dev(2, 0.5, 3)}, 1));
  for (std::uint32_t a = 0; a < m.action_count(); ++a)
    CHECK(m.action_id_of(m.actions()[a]) == a);
  CHECK_THROWS_AS((void)m.action_id_of({DeviceAction::Fresh, DeviceAction::Fresh}),
                  std::out_of_range);
}

TEST_CASE("joint indexing, reference state and stage cost") {
  SystemModel m(ts::gaw({ts::dev(2, 0.5, 3), ts::dev(3, 0.7, 2)}, 1));
  CHECK(m.state_count() == std::uint64_t(4 * 4 * 2) * std::uint64_t(3 * 3 * 3));
  CHECK(m.state_count_exact());
  CHECK(m.stride(0) == 1);
  CHECK(m.stride(1) == 4 * 4 * 2);

  const SystemState ref = m.state_at(m.reference_index());
  for (int k = 0; k < 2; ++k) {
    CHECK(ref.device[k].device_age == 0);
    CHECK(ref.device[k].receiver_age == 0);
    CHECK(ref.device[k].remaining == m.config().devices[k].packets_per_update);
    CHECK(ref.device[k] == m.reference_device_state(k));
  }

  std::vector<std::uint32_t> dev;
  JointOdometer odo(m);
  for (std::uint64_t i = 0; i < m.state_count(); ++i, odo.advance()) {
    CHECK(odo.index() == i);
    m.split_index(i, dev);
    CHECK(dev == odo.digits());
    CHECK(m.join_indices(dev) == i);
    const SystemState s = m.state_at(i);
    CHECK(m.index_of(s.device) == i);
    CHECK(m.stage_cost_at(i) ==
          double(s.device[0].receiver_age + s.device[1].receiver_age));
  }
}

TEST_CASE("configuration validation") {
  CHECK_NOTHROW(SystemModel(ts::gaw1(2, 0.5, 4)));

  SystemConfig degenerate = ts::gaw1(2, 0.5, 4);
  degenerate.max_scheduled = 0;  // all-idle fleet is a legal edge case
  CHECK_NOTHROW(SystemModel{degenerate});

  auto expect_reject = [](SystemConfig c) {
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };

  SystemConfig c = ts::gaw1(2, 0.5, 4);
  c.max_scheduled = 2;
  expect_reject(c);  // more transmitters than devices

  c = ts::gaw1(2, 0.5, 4);
  c.max_scheduled = -1;
  expect_reject(c);

  c = ts::gaw1(1, 0.5, 4);
  expect_reject(c);  // single-packet updates are outside the model

  c = ts::gaw1(2, 0.0, 4);
  expect_reject(c);  // channel can never deliver

  c = ts::gaw1(2, 1.5, 4);
  expect_reject(c);

  c = ts::gaw1(2, 0.5, 0);
  c.devices[0].cap_device = 0;
  expect_reject(c);

  c = ts::ra1(2, 0.5, -0.1, 4);
  expect_reject(c);

  c = ts::ra1(2, 0.5, 1.5, 4);
  expect_reject(c);

  c = ts::gen1(2, 0.5, 0, 4);
  expect_reject(c);  // generation must take at least one slot

  c = ts::gaw1(2, 0.5, 4);
  c.devices.clear();
  expect_reject(c);
}

TEST_CASE("buffered kernel marginals match the instantaneous kernel off delivery") {
  // Projecting out the buffer coordinate, Idle and Continue behave exactly as
  // under instantaneous sampling, except on the delivery branch where the
  // buffered model reloads an aged update instead of a fresh one. On that
  // branch only the failure mass is comparable.
  for (int L : {2, 3}) {
    for (double lam : {0.3, 0.8, 1.0}) {
      for (double rho : {0.4, 0.9}) {
        DeviceParams pr = ts::dev(L, lam, 4);
        pr.arrival_rate = rho;
        const DeviceParams pg = ts::dev(L, lam, 4);
        for (const DeviceState& xr :
             enumerate_device_states(pr, ModelVariant::RandomArrival)) {
          const DeviceState xg{0, xr.device_age, xr.receiver_age, xr.remaining};
          for (DeviceAction a : {DeviceAction::Idle, DeviceAction::Continue}) {
            if (!device_action_feasible(pr, ModelVariant::RandomArrival, xr, a)) continue;
            std::map<std::array<int, 3>, double> mr, mg;
            for (const auto& e : device_transition_random_arrival(pr, xr, a))
              mr[{e.state.device_age, e.state.receiver_age, e.state.remaining}] += e.prob;
            for (const auto& e : device_transition(pg, xg, a))
              mg[{e.state.device_age, e.state.receiver_age, e.state.remaining}] += e.prob;
            if (a == DeviceAction::Continue && xr.remaining == 1) {
              if (lam == 1.0) continue;  // no failure branch to compare
              std::array<int, 3> failure{};
              for (const auto& [k, p] : mg)
                if (k[2] == xr.remaining) failure = k;
              auto it = mr.find(failure);
              REQUIRE(it != mr.end());
              CHECK(std::abs(it->second - (1.0 - lam)) < 1e-12);
            } else {
              REQUIRE(mr.size() == mg.size());
              for (const auto& [k, p] : mg) {
                auto it = mr.find(k);
                REQUIRE(it != mr.end());
                CHECK(std::abs(it->second - p) < 1e-12);
              }
            }
          }
        }
      }
    }
  }
}

TEST_CASE("joint transitions are the product of device kernels") {
  SystemModel m(ts::gaw({ts::dev(2, 0.6, 2), ts::dev(2, 0.9, 2)}, 2));
  for (std::uint64_t i = 0; i < m.state_count(); ++i) {
    const SystemState x = m.state_at(i);
    for (std::uint32_t a = 0; a < m.action_count(); ++a) {
      const SystemAction& w = m.actions()[a];
      const auto joint = m.system_transition(x, w);
      double total = 0.0;
      for (const auto& [y, p] : joint) {
        total += p;
        // the joint probability factors over devices
        double expect = 1.0;
        for (int k = 0; k < 2; ++k) {
          double marg = 0.0;
          for (const auto& e :
               device_transition(m.config().devices[k], m.variant(), x.device[k], w[k]))
            if (e.state == y.device[k]) marg = e.prob;
          expect *= marg;
        }
        CHECK(std::abs(p - expect) < 1e-12);
        CHECK(m.index_of(y.device) == y.index);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}
