#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace diaglab {

using BigInt = boost::multiprecision::cpp_int;

/*
 * Fraction-free (Bareiss) elimination on a square integer matrix.
 *
 * Every intermediate entry is a minor of the input, so each division by the
 * previous pivot is exact.  Row swaps flip the sign.  Input is row-major,
 * n*n entries.
 */
inline BigInt bareiss_determinant(std::vector<BigInt> m, std::size_t n) {
  if (n == 0) return BigInt(1);
  int sign = 1;
  BigInt prev(1);
  auto at = [&](std::size_t r, std::size_t c) -> BigInt& { return m[r * n + c]; };
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (at(k, k) == 0) {
      std::size_t swap = k + 1;
      while (swap < n && at(swap, k) == 0) ++swap;
      if (swap == n) return BigInt(0);
      for (std::size_t c = 0; c < n; ++c) std::swap(at(k, c), at(swap, c));
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < n; ++j) {
        at(i, j) = (at(i, j) * at(k, k) - at(i, k) * at(k, j)) / prev;
      }
      at(i, k) = 0;
    }
    prev = at(k, k);
  }
  BigInt det = at(n - 1, n - 1);
  return sign < 0 ? BigInt(-det) : det;
}

// Determinant of the square submatrix of an r x s row-major matrix formed by
// the given columns.
inline BigInt column_minor(std::span<const std::int64_t> matrix, std::size_t rows, std::size_t cols,
                           std::span<const std::size_t> columns) {
  std::vector<BigInt> sub;
  sub.reserve(rows * rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c : columns) sub.emplace_back(matrix[i * cols + c]);
  }
  return bareiss_determinant(std::move(sub), rows);
}

}  // namespace diaglab
