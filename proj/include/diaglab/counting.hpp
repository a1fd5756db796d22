#pragma once

#include "diaglab/count_table.hpp"
#include "diaglab/systems.hpp"

#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace diaglab {

enum class CountMethod { Oracle, Convolution, MeetInMiddle };

inline std::string to_string(CountMethod m) {
  switch (m) {
    case CountMethod::Oracle: return "oracle";
    case CountMethod::Convolution: return "convolution";
    case CountMethod::MeetInMiddle: return "meet-in-middle";
  }
  return "unknown";
}

enum class CountMode { Homogeneous, Difference };

struct CountReport {
  std::int64_t X = 0;
  BigInt count = 0;
  CountMethod method = CountMethod::Convolution;
  double seconds = 0;
  std::size_t peak_entries = 0;
};

struct CountOptions {
  ConvolveOptions convolve;
  // Number of variables on the first side of the homogeneous split;
  // defaults to ceil(s/2).
  std::optional<std::size_t> split;
};

// Number of points in [-X, X]^dims.
inline BigInt enumeration_size(std::size_t dims, std::int64_t X) {
  BigInt side = 2 * BigInt(X) + 1;
  return boost::multiprecision::pow(side, static_cast<unsigned>(dims));
}

inline void require_box(std::int64_t X) {
  if (X < 0) throw DomainError("X must be nonnegative");
}

// Contribution of variable j at value x to each equation, ordered by block
// then row: c_{i,j}^{(l)} x^l.
inline std::vector<i128> value_vector(const DiagonalSystem& sys, std::size_t j, std::int64_t x) {
  if (j >= sys.variables()) throw DomainError("invalid variable index");
  std::vector<i128> out;
  out.reserve(sys.equations());
  for (const auto& b : sys.blocks()) {
    const i128 power = checked_pow(x, b.degree);
    for (const auto& row : b.rows) out.push_back(checked_mul(row[j], power));
  }
  return out;
}

// Coordinate bounds sum_j |c_{i,j}| X^l covering every partial sum.
inline KeyCodec codec_for(const DiagonalSystem& sys, std::int64_t X) {
  std::vector<i128> bounds;
  for (const auto& b : sys.blocks()) {
    const i128 power = checked_pow(X, b.degree);
    for (const auto& row : b.rows) {
      i128 acc = 0;
      for (auto c : row) acc = checked_add(acc, checked_mul(c < 0 ? -static_cast<i128>(c) : c, power));
      bounds.push_back(acc);
    }
  }
  return KeyCodec(std::move(bounds));
}

namespace detail {

template <class Key>
CountTable<Key> variable_table(const DiagonalSystem& sys, const KeyCodec& codec, std::size_t j, std::int64_t X,
                               int sign) {
  std::vector<CountEntry<Key>> raw;
  raw.reserve(static_cast<std::size_t>(2 * X + 1));
  for (std::int64_t x = -X; x <= X; ++x) {
    const i128 packed = codec.encode(value_vector(sys, j, x));
    raw.push_back({static_cast<Key>(sign < 0 ? -packed : packed), 1});
  }
  return CountTable<Key>::from_unsorted(std::move(raw));
}

template <class Key>
CountTable<Key> distribution_with(const DiagonalSystem& sys, const KeyCodec& codec, const std::vector<std::size_t>& vars,
                                  std::int64_t X, int sign, const CountOptions& opts, std::size_t& peak) {
  auto table = CountTable<Key>::unit();
  for (auto j : vars) {
    table = convolve(table, variable_table<Key>(sys, codec, j, X, sign), opts.convolve);
    peak = std::max(peak, table.size());
  }
  return table;
}

template <class Fn>
decltype(auto) with_key_type(const KeyCodec& codec, Fn&& fn) {
  if (codec.fits_int64()) return fn(std::int64_t{});
  return fn(i128{});
}

inline double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

// T(v) = #{assignments of the selected variables in [-X, X] with
// sign * sum of value vectors = v}, keys packed with codec_for(sys, X).
template <class Key = i128>
CountTable<Key> distribution(const DiagonalSystem& sys, const std::vector<std::size_t>& vars, std::int64_t X,
                             int sign = +1, const CountOptions& opts = {}) {
  require_box(X);
  if (sign != 1 && sign != -1) throw DomainError("sign must be +1 or -1");
  for (auto j : vars)
    if (j >= sys.variables()) throw DomainError("invalid variable index");
  const auto codec = codec_for(sys, X);
  if constexpr (sizeof(Key) <= 8) {
    if (!codec.fits_int64()) throw DomainError("value range exceeds 64-bit keys");
  }
  std::size_t peak = 0;
  return detail::distribution_with<Key>(sys, codec, vars, X, sign, opts, peak);
}

// N(X): solutions of the homogeneous system in [-X, X]^s, by pairing the
// value distribution of the first ceil(s/2) variables against the negated
// distribution of the rest.
inline CountReport count_homogeneous(const DiagonalSystem& sys, std::int64_t X, const CountOptions& opts = {}) {
  require_box(X);
  const auto start = std::chrono::steady_clock::now();
  const auto s = sys.variables();
  const auto split = std::min(opts.split.value_or((s + 1) / 2), s);
  std::vector<std::size_t> first(split), second(s - split);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), split);
  const auto codec = codec_for(sys, X);

  CountReport rep;
  rep.X = X;
  rep.method = CountMethod::MeetInMiddle;
  detail::with_key_type(codec, [&](auto key_tag) {
    using Key = decltype(key_tag);
    auto ta = detail::distribution_with<Key>(sys, codec, first, X, +1, opts, rep.peak_entries);
    auto tb = detail::distribution_with<Key>(sys, codec, second, X, -1, opts, rep.peak_entries);
    rep.count = pair_sum(ta, tb);
  });
  rep.seconds = detail::elapsed(start);
  return rep;
}

// I(X): solutions (x, y) in [-X, X]^{2s} of sum_j c_j (x_j^l - y_j^l) = 0,
// equal to sum_v R(v)^2 with R the distribution of all s variables.
inline CountReport count_difference(const DiagonalSystem& sys, std::int64_t X, const CountOptions& opts = {}) {
  require_box(X);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> all(sys.variables());
  std::iota(all.begin(), all.end(), 0);
  const auto codec = codec_for(sys, X);
  CountReport rep;
  rep.X = X;
  rep.method = CountMethod::Convolution;
  detail::with_key_type(codec, [&](auto key_tag) {
    using Key = decltype(key_tag);
    auto r = detail::distribution_with<Key>(sys, codec, all, X, +1, opts, rep.peak_entries);
    rep.count = square_sum(r);
  });
  rep.seconds = detail::elapsed(start);
  return rep;
}

// J_{s,l}(X) for the full Vinogradov system of degrees 1..l.
inline CountReport count_vinogradov(std::size_t s, int l, std::int64_t X, const CountOptions& opts = {}) {
  if (s == 0) throw DomainError("s must be positive");
  return count_difference(vinogradov_system(s, l), X, opts);
}

// Solutions of x1^2 - x2^2 = 2(h1 z1 - h2 z2), x1 - x2 = h1 - h2 with
// |x_i|, |z_i| <= X and |h_i| <= H.  Each side (x, z, h) maps to the key
// (x^2 - 2hz, x - h); the count is the sum of squared key multiplicities.
inline CountReport count_shift_system(std::int64_t X, std::int64_t H, const CountOptions& opts = {}) {
  require_box(X);
  if (H < 0) throw DomainError("H must be nonnegative");
  const auto start = std::chrono::steady_clock::now();
  const i128 x = X, h = H;
  KeyCodec codec({checked_add(checked_mul(x, x), checked_mul(checked_mul(h, x), 2)), checked_add(x, h)});
  CountReport rep;
  rep.X = X;
  rep.method = CountMethod::MeetInMiddle;
  detail::with_key_type(codec, [&](auto key_tag) {
    using Key = decltype(key_tag);
    std::vector<CountEntry<Key>> raw;
    raw.reserve(static_cast<std::size_t>((2 * X + 1) * (2 * X + 1) * (2 * H + 1)));
    for (std::int64_t xv = -X; xv <= X; ++xv)
      for (std::int64_t hv = -H; hv <= H; ++hv)
        for (std::int64_t zv = -X; zv <= X; ++zv) {
          const i128 v[2] = {i128(xv) * xv - 2 * i128(hv) * zv, i128(xv) - hv};
          raw.push_back({static_cast<Key>(codec.encode(v)), 1});
        }
    if (raw.size() > opts.convolve.max_entries) throw DomainError("memory cap exceeded");
    auto table = CountTable<Key>::from_unsorted(std::move(raw));
    rep.peak_entries = table.size();
    rep.count = square_sum(table);
  });
  rep.seconds = detail::elapsed(start);
  return rep;
}

// ---------------------------------------------------------------------------
// Reference counter: plain nested loops, no tables.

inline constexpr double kOracleGuard = 1e9;

inline CountReport enumerate_oracle(const DiagonalSystem& sys, std::int64_t X, CountMode mode) {
  require_box(X);
  const auto start = std::chrono::steady_clock::now();
  const std::size_t s = sys.variables();
  const std::size_t dims = mode == CountMode::Difference ? 2 * s : s;
  if (static_cast<double>(enumeration_size(dims, X)) > kOracleGuard) throw DomainError("enumeration guard exceeded");
  const std::size_t r = sys.equations();
  const std::size_t width = static_cast<std::size_t>(2 * X + 1);

  // contrib[d][x + X] is the value vector of loop variable d at x; y-variables
  // enter with a minus sign.
  std::vector<std::vector<std::vector<i128>>> contrib(dims, std::vector<std::vector<i128>>(width));
  for (std::size_t d = 0; d < dims; ++d)
    for (std::int64_t x = -X; x <= X; ++x) {
      auto v = value_vector(sys, d % s, x);
      if (d >= s)
        for (auto& c : v) c = -c;
      contrib[d][static_cast<std::size_t>(x + X)] = std::move(v);
    }

  std::vector<std::vector<i128>> partial(dims + 1, std::vector<i128>(r, 0));
  std::uint64_t hits = 0;
  auto recurse = [&](auto&& self, std::size_t d) -> void {
    if (d == dims) {
      for (auto c : partial[d])
        if (c != 0) return;
      ++hits;
      return;
    }
    for (std::size_t xi = 0; xi < width; ++xi) {
      const auto& c = contrib[d][xi];
      for (std::size_t i = 0; i < r; ++i) partial[d + 1][i] = partial[d][i] + c[i];
      self(self, d + 1);
    }
  };
  recurse(recurse, 0);

  CountReport rep;
  rep.X = X;
  rep.count = hits;
  rep.method = CountMethod::Oracle;
  rep.seconds = detail::elapsed(start);
  return rep;
}

}  // namespace diaglab
