#pragma once

#include <cstdint>
#include <vector>

namespace aoisched {

/// Row-stochastic transition matrix in compressed-sparse-row form.
/// Row i lists the successors of state i; probabilities in a row sum to 1.
struct SparseChain {
  std::uint32_t n = 0;
  std::vector<std::uint64_t> row_ptr;  // n + 1 offsets into col/val
  std::vector<std::uint32_t> col;
  std::vector<double> val;
};

/// Tarjan components. comp[i] is the component id of state i; ids are dense
/// and assigned in reverse topological order (every edge leaving a component
/// points to a lower id).
struct ComponentMap {
  std::vector<std::uint32_t> comp;
  std::uint32_t count = 0;
};

ComponentMap strongly_connected_components(const SparseChain& chain);

/// States of each closed communicating class (component with no outgoing
/// edge), ascending within a class; classes ordered by their smallest state.
std::vector<std::vector<std::uint32_t>> recurrent_classes(const SparseChain& chain);

/// Stationary distribution of an irreducible chain. Solves the linear system
/// directly (no power iteration), so periodic chains are fine. Throws
/// SingularSystem if the solve fails or the result does not satisfy
/// pi * P = pi within 1e-10.
std::vector<double> stationary_distribution(const SparseChain& chain);

}  // namespace aoisched
