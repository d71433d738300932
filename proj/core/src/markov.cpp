#include "aoisched/markov.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

#include "aoisched/errors.hpp"

namespace aoisched {

ComponentMap strongly_connected_components(const SparseChain& chain) {
  const std::uint32_t n = chain.n;
  constexpr std::uint32_t kUnvisited = std::numeric_limits<std::uint32_t>::max();
  ComponentMap result;
  result.comp.assign(n, kUnvisited);
  std::vector<std::uint32_t> index(n, kUnvisited);
  std::vector<std::uint32_t> lowlink(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::uint32_t> stack;
  // Explicit DFS frames: (vertex, next edge offset) to survive deep chains.
  std::vector<std::pair<std::uint32_t, std::uint64_t>> frames;
  std::uint32_t next_index = 0;

  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    frames.emplace_back(root, chain.row_ptr[root]);
    index[root] = lowlink[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& [v, edge] = frames.back();
      if (edge < chain.row_ptr[v + 1]) {
        const std::uint32_t w = chain.col[edge];
        ++edge;
        if (index[w] == kUnvisited) {
          frames.emplace_back(w, chain.row_ptr[w]);
          index[w] = lowlink[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
        } else if (on_stack[w]) {
          lowlink[v] = std::min(lowlink[v], index[w]);
        }
      } else {
        const std::uint32_t v_done = v;
        frames.pop_back();
        if (!frames.empty()) {
          lowlink[frames.back().first] = std::min(lowlink[frames.back().first], lowlink[v_done]);
        }
        if (lowlink[v_done] == index[v_done]) {
          for (;;) {
            const std::uint32_t w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            result.comp[w] = result.count;
            if (w == v_done) break;
          }
          ++result.count;
        }
      }
    }
  }
  return result;
}

std::vector<std::vector<std::uint32_t>> recurrent_classes(const SparseChain& chain) {
  const ComponentMap map = strongly_connected_components(chain);
  std::vector<bool> has_exit(map.count, false);
  for (std::uint32_t i = 0; i < chain.n; ++i) {
    for (std::uint64_t e = chain.row_ptr[i]; e < chain.row_ptr[i + 1]; ++e) {
      if (map.comp[chain.col[e]] != map.comp[i]) has_exit[map.comp[i]] = true;
    }
  }
  std::vector<std::vector<std::uint32_t>> classes(map.count);
  for (std::uint32_t i = 0; i < chain.n; ++i) {
    if (!has_exit[map.comp[i]]) classes[map.comp[i]].push_back(i);
  }
  std::erase_if(classes, [](const auto& c) { return c.empty(); });
  std::sort(classes.begin(), classes.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return classes;
}

namespace {

/// Residual max_j |sum_i pi_i P(i,j) - pi_j|.
double stationary_residual(const SparseChain& chain, const std::vector<double>& pi) {
  std::vector<double> flow(chain.n, 0.0);
  for (std::uint32_t i = 0; i < chain.n; ++i) {
    for (std::uint64_t e = chain.row_ptr[i]; e < chain.row_ptr[i + 1]; ++e) {
      flow[chain.col[e]] += pi[i] * chain.val[e];
    }
  }
  double worst = 0.0;
  for (std::uint32_t j = 0; j < chain.n; ++j) worst = std::max(worst, std::abs(flow[j] - pi[j]));
  return worst;
}

std::vector<double> finish(const SparseChain& chain, std::vector<double> pi) {
  double total = 0.0;
  for (double& p : pi) {
    if (p < 0.0) {
      if (p < -1e-9) throw SingularSystem("stationary solve produced a negative mass");
      p = 0.0;
    }
    total += p;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw SingularSystem("stationary solve produced a degenerate distribution");
  }
  for (double& p : pi) p /= total;
  const double residual = stationary_residual(chain, pi);
  if (!(residual <= 1e-10)) {
    throw SingularSystem("stationary distribution residual " + std::to_string(residual) +
                         " above 1e-10");
  }
  return pi;
}

}  // namespace

std::vector<double> stationary_distribution(const SparseChain& chain) {
  const std::uint32_t n = chain.n;
  if (n == 0) throw SingularSystem("empty chain");
  if (n == 1) return {1.0};

  // Fix pi_0 = 1 and solve the remaining balance equations
  //   (I - P^T) restricted to states 1..n-1 times x = column 0 of P^T,
  // then renormalize. Dropping one row/column keeps the system nonsingular
  // for an irreducible chain and avoids a dense normalization row.
  const std::uint32_t m = n - 1;
  if (n <= 1024) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint64_t e = chain.row_ptr[i]; e < chain.row_ptr[i + 1]; ++e) {
        const std::uint32_t j = chain.col[e];
        if (j == 0) continue;
        if (i == 0) {
          b(j - 1) += chain.val[e];
        } else {
          A(j - 1, i - 1) -= chain.val[e];
        }
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd x = lu.solve(b);
    if (!x.allFinite()) throw SingularSystem("dense stationary solve failed");
    std::vector<double> pi(n);
    pi[0] = 1.0;
    for (std::uint32_t j = 0; j < m; ++j) pi[j + 1] = x(j);
    return finish(chain, pi);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(chain.col.size() + m);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (std::uint32_t j = 1; j < n; ++j) triplets.emplace_back(j - 1, j - 1, 1.0);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint64_t e = chain.row_ptr[i]; e < chain.row_ptr[i + 1]; ++e) {
      const std::uint32_t j = chain.col[e];
      if (j == 0) continue;
      if (i == 0) {
        b(j - 1) += chain.val[e];
      } else {
        triplets.emplace_back(j - 1, i - 1, -chain.val[e]);
      }
    }
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) throw SingularSystem("sparse stationary factorization failed");
  Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) {
    throw SingularSystem("sparse stationary solve failed");
  }
  std::vector<double> pi(n);
  pi[0] = 1.0;
  for (std::uint32_t j = 0; j < m; ++j) pi[j + 1] = x(j);
  return finish(chain, pi);
}

}  // namespace aoisched
