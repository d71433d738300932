#include <cmath>
#include <vector>

#include "aoisched/markov.hpp"
#include "doctest.h"

using namespace aoisched;

namespace {

SparseChain chain_from_rows(const std::vector<std::vector<std::pair<std::uint32_t, double>>>& rows) {
  SparseChain c;
  c.n = static_cast<std::uint32_t>(rows.size());
  c.row_ptr.push_back(0);
  for (const auto& row : rows) {
    for (const auto& [j, p] : row) {
      c.col.push_back(j);
      c.val.push_back(p);
    }
    c.row_ptr.push_back(c.col.size());
  }
  return c;
}

}  // namespace

TEST_CASE("stationary distribution of small chains") {
  // single absorbing state
  auto pi = stationary_distribution(chain_from_rows({{{0, 1.0}}}));
  REQUIRE(pi.size() == 1);
  CHECK(pi[0] == doctest::Approx(1.0).epsilon(1e-12));

  // deterministic two-cycle: periodic, but the linear solve does not care
  pi = stationary_distribution(chain_from_rows({{{1, 1.0}}, {{0, 1.0}}}));
  CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-12));

  // symmetric lazy walk
  pi = stationary_distribution(
      chain_from_rows({{{0, 0.7}, {1, 0.3}}, {{0, 0.3}, {1, 0.7}}}));
  CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-12));

  // birth-death chain with known stationary law pi_j ~ (p/q)^j
  const double p = 0.2, q = 0.6;
  auto bd = chain_from_rows({{{0, 1.0 - p}, {1, p}},
                             {{0, q}, {1, 1.0 - p - q}, {2, p}},
                             {{1, q}, {2, 1.0 - q}}});
  pi = stationary_distribution(bd);
  const double r = p / q;
  const double z = 1.0 + r + r * r;
  CHECK(pi[0] == doctest::Approx(1.0 / z).epsilon(1e-10));
  CHECK(pi[1] == doctest::Approx(r / z).epsilon(1e-10));
  CHECK(pi[2] == doctest::Approx(r * r / z).epsilon(1e-10));

  double total = 0.0;
  for (double v : pi) total += v;
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("strongly connected components in reverse topological order") {
  // 0 <-> 1 feed into 2 <-> 3, and 4 is an isolated sink
  auto c = chain_from_rows({{{1, 1.0}},
                            {{0, 0.5}, {2, 0.5}},
                            {{3, 1.0}},
                            {{2, 0.5}, {4, 0.5}},
                            {{4, 1.0}}});
  const ComponentMap m = strongly_connected_components(c);
  CHECK(m.count == 3);
  CHECK(m.comp[0] == m.comp[1]);
  CHECK(m.comp[2] == m.comp[3]);
  CHECK(m.comp[0] != m.comp[2]);
  // every edge leaving a component points to a lower id
  CHECK(m.comp[0] > m.comp[2]);
  CHECK(m.comp[2] > m.comp[4]);
}

TEST_CASE("recurrent classes are the closed components") {
  // two absorbing cycles fed by a transient chain
  auto c = chain_from_rows({{{1, 0.5}, {3, 0.5}},  // transient
                            {{2, 1.0}},            // cycle A
                            {{1, 1.0}},
                            {{4, 1.0}},            // cycle B
                            {{3, 1.0}}});
  const auto classes = recurrent_classes(c);
  REQUIRE(classes.size() == 2);
  CHECK(classes[0] == std::vector<std::uint32_t>{1, 2});
  CHECK(classes[1] == std::vector<std::uint32_t>{3, 4});

  // fully connected chain has a single class holding every state
  auto one = chain_from_rows({{{1, 1.0}}, {{0, 1.0}}});
  const auto single = recurrent_classes(one);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == std::vector<std::uint32_t>{0, 1});
}
