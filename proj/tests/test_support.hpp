#pragma once

#include "diaglab/systems.hpp"

#include <random>
#include <vector>

namespace diaglab::testing {

inline std::vector<std::int64_t> random_row(std::mt19937_64& rng, std::size_t s, std::int64_t lo, std::int64_t hi,
                                            bool nonzero = false) {
  std::uniform_int_distribution<std::int64_t> pick(lo, hi);
  std::vector<std::int64_t> row(s);
  for (auto& c : row) {
    do {
      c = pick(rng);
    } while (nonzero && c == 0);
  }
  return row;
}

// r x s block with entries in [lo, hi], resampled until highly non-singular.
inline EquationBlock random_non_singular_block(std::mt19937_64& rng, int degree, std::size_t r, std::size_t s,
                                               std::int64_t lo, std::int64_t hi) {
  while (true) {
    EquationBlock b{degree, {}};
    for (std::size_t i = 0; i < r; ++i) b.rows.push_back(random_row(rng, s, lo, hi, true));
    if (is_highly_non_singular(b.rows)) return b;
  }
}

// Superposition-shaped system: v cubic rows and u quadratic rows.
inline DiagonalSystem cubic_quadratic_system(std::mt19937_64& rng, std::size_t v, std::size_t u, std::size_t s,
                                             std::int64_t bound) {
  std::vector<EquationBlock> blocks;
  blocks.push_back(random_non_singular_block(rng, 2, u, s, -bound, bound));
  if (v > 0) blocks.push_back(random_non_singular_block(rng, 3, v, s, -bound, bound));
  return DiagonalSystem(s, std::move(blocks));
}

// Random system with s variables, degrees drawn from 1..max_degree, entries in
// [-bound, bound] (zeros allowed), one or two rows per degree.
inline DiagonalSystem random_system(std::mt19937_64& rng, std::size_t s, int max_degree, std::int64_t bound) {
  std::vector<EquationBlock> blocks;
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<std::size_t> rows(1, std::min<std::size_t>(2, s));
  for (int d = 1; d <= max_degree; ++d) {
    if (!coin(rng)) continue;
    EquationBlock b{d, {}};
    const auto n = rows(rng);
    for (std::size_t i = 0; i < n; ++i) b.rows.push_back(random_row(rng, s, -bound, bound));
    blocks.push_back(std::move(b));
  }
  if (blocks.empty()) {
    std::uniform_int_distribution<int> deg(1, max_degree);
    blocks.push_back(EquationBlock{deg(rng), {random_row(rng, s, -bound, bound)}});
  }
  return DiagonalSystem(s, std::move(blocks));
}

inline DiagonalSystem test_form() { return single_form(2, {1, 1, 1, -1, -1}); }

}  // namespace diaglab::testing
