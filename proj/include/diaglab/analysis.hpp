#pragma once

#include "diaglab/bareiss.hpp"
#include "diaglab/error.hpp"
#include "diaglab/systems.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace diaglab {

// (X, count) pairs with strictly increasing X.
using GrowthSeries = std::vector<std::pair<std::int64_t, BigInt>>;

struct ExponentFit {
  double slope = 0;
  double intercept = 0;
  double residual = 0;  // RMS in log space
};

// Least squares of log(count) on log(X).
inline ExponentFit fit_exponent(const GrowthSeries& series) {
  if (series.size() < 3) throw DomainError("at least 3 points required");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& [X, count] = series[i];
    if (X < 1) throw DomainError("degenerate X value");
    if (i > 0 && X <= series[i - 1].first) throw DomainError("X values must be strictly increasing");
    if (count <= 0) throw DomainError("counts must be positive");
    xs.push_back(std::log(static_cast<double>(X)));
    ys.push_back(std::log(static_cast<double>(count)));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0) throw DomainError("degenerate X value");
  ExponentFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - fit.intercept - fit.slope * xs[i];
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

// count / (X^s + X^{2s-K})
inline double conjecture_ratio(const BigInt& count, std::int64_t s, std::int64_t K, std::int64_t X) {
  if (X < 1) throw DomainError("X must be at least 1");
  const double x = static_cast<double>(X);
  return static_cast<double>(count) / (std::pow(x, static_cast<double>(s)) + std::pow(x, static_cast<double>(2 * s - K)));
}

// ratio(2X) / ratio(X) for consecutive doublings present in the series.
inline std::vector<double> doubling_ratios(const GrowthSeries& series, std::int64_t s, std::int64_t K) {
  std::vector<double> out;
  for (const auto& [X, count] : series)
    for (const auto& [Y, other] : series)
      if (Y == 2 * X) out.push_back(conjecture_ratio(other, s, K, Y) / conjecture_ratio(count, s, K, X));
  return out;
}

// Allowed growth of the conjecture ratio per doubling of X.
inline const double kEpsilonProxy = std::sqrt(2.0);

struct RangeVerdict {
  std::int64_t s = 0, u = 0, v = 0, K = 0, kappa = 0, w = 0;
  std::int64_t sum_k = 0;
  bool divisible_total_degree = false;     // u >= 2v, u | K, s >= u
  bool admissible_u0 = false;              // some 2v <= u0 <= u with u0 | kappa, s >= u
  std::optional<std::int64_t> u0;
  bool remainder_ranges = false;           // u >= 2v and (u <= s <= K - w or s >= K + u - w)
  bool large_s = false;                    // s >= K + v
  bool small_s = false;                    // u <= s <= K + v - sum k_j
  bool even_kappa_two_quadratics = false;  // v = 1, u = 2, k = 1 or 2 mod 4

  bool any() const { return divisible_total_degree || admissible_u0 || remainder_ranges || large_s || small_s; }
};

inline RangeVerdict established_ranges(const DiagonalSystem& sys) {
  const auto d = derived_constants(sys);
  if (!d.superposition_shape) throw DomainError("system is not a superposition of truncated Vinogradov systems");
  RangeVerdict rv;
  rv.s = static_cast<std::int64_t>(sys.variables());
  rv.u = static_cast<std::int64_t>(d.u);
  rv.v = static_cast<std::int64_t>(d.v);
  rv.K = d.K;
  rv.kappa = d.kappa;
  rv.w = d.w;
  for (int k : d.slice_degrees) rv.sum_k += k;

  const bool wide = rv.u >= 2 * rv.v;
  rv.divisible_total_degree = wide && rv.K % rv.u == 0 && rv.s >= rv.u;
  rv.u0 = smallest_admissible_u0(rv.u, rv.v, rv.kappa);
  rv.admissible_u0 = rv.u0.has_value() && rv.s >= rv.u;
  rv.remainder_ranges = wide && ((rv.u <= rv.s && rv.s <= rv.K - rv.w) || rv.s >= rv.K + rv.u - rv.w);
  rv.large_s = rv.s >= rv.K + rv.v;
  rv.small_s = rv.u <= rv.s && rv.s <= rv.K + rv.v - rv.sum_k;
  rv.even_kappa_two_quadratics = rv.v == 1 && rv.u == 2 && (d.k % 4 == 1 || d.k % 4 == 2) && rv.kappa % 2 == 0;
  return rv;
}

}  // namespace diaglab
