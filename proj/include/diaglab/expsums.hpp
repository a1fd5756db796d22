#pragma once

#include "diaglab/count_table.hpp"
#include "diaglab/systems.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace diaglab {

using Complex = std::complex<double>;

struct ComplexSample {
  Complex value{0, 0};
  double error = 0;
};

// ---------------------------------------------------------------------------
// Phases as 128-bit fixed-point fractions of a turn.  A double in [0, 1) is
// exactly representable once it is at least 2^-75, and products with integers
// reduce mod 1 by wrapping.

using Fixed = u128;

inline Fixed to_fixed(double a) {
  if (!std::isfinite(a)) throw DomainError("non-finite phase");
  double f = a - std::floor(a);
  if (f >= 1.0) f = 0.0;
  if (f == 0.0) return 0;
  int e = 0;
  const double m = std::frexp(f, &e);
  const auto mant = static_cast<std::uint64_t>(std::ldexp(m, 53));
  const int shift = e + 75;
  if (shift >= 0) return Fixed(mant) << shift;
  if (shift > -64) return Fixed(mant >> -shift);
  return 0;
}

// floor(2^128 * (a mod q) / q)
inline Fixed fixed_rational(i128 a, std::int64_t q) {
  if (q <= 0) throw DomainError("modulus must be positive");
  i128 r = a % q;
  if (r < 0) r += q;
  const u128 uq = static_cast<u128>(q);
  const u128 hi = (static_cast<u128>(r) << 64) / uq;
  const u128 rem = (static_cast<u128>(r) << 64) % uq;
  const u128 lo = (rem << 64) / uq;
  return (hi << 64) + lo;
}

inline Fixed fixed_times(Fixed a, i128 n) { return a * static_cast<u128>(n); }

inline double fixed_to_double(Fixed t) {
  const double v = std::ldexp(static_cast<double>(t), -128);
  return v >= 1.0 ? 0.0 : v;
}

// e(t) = exp(2 pi i t)
inline Complex unit_root(Fixed t) {
  double x = std::ldexp(static_cast<double>(static_cast<std::uint64_t>(t >> 64)), -64);
  if (x >= 0.5) x -= 1.0;
  const double angle = 2 * std::numbers::pi * x;
  return {std::cos(angle), std::sin(angle)};
}

inline Complex unit_root(double t) {
  const double x = t - std::nearbyint(t);
  const double angle = 2 * std::numbers::pi * x;
  return {std::cos(angle), std::sin(angle)};
}

// e(n/q)
inline Complex unit_fraction(i128 n, std::int64_t q) {
  i128 r = n % q;
  if (r < 0) r += q;
  return unit_root(static_cast<double>(r) / static_cast<double>(q));
}

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0, comp_ = 0;
};

class ComplexCompensatedSum {
 public:
  void add(Complex z) {
    re_.add(z.real());
    im_.add(z.imag());
  }
  Complex value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum re_, im_;
};

// sum_{|x| <= X} e(sum_i phase_i x^{degree_i})
inline ComplexSample weyl_sum(std::span<const int> degrees, std::span<const Fixed> phases, std::int64_t X) {
  if (X < 0) throw DomainError("X must be nonnegative");
  if (degrees.size() != phases.size()) throw DomainError("shape mismatch");
  ComplexCompensatedSum acc;
  for (std::int64_t x = -X; x <= X; ++x) {
    Fixed t = 0;
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      u128 power = 1;
      for (int e = 0; e < degrees[i]; ++e) power *= static_cast<u128>(static_cast<i128>(x));
      t += phases[i] * power;
    }
    acc.add(unit_root(t));
  }
  return {acc.value(), 0};
}

inline std::vector<Fixed> to_fixed(std::span<const double> phases) {
  std::vector<Fixed> out;
  out.reserve(phases.size());
  for (double a : phases) out.push_back(to_fixed(a));
  return out;
}

inline std::vector<int> degree_range(int from, int to) {
  std::vector<int> d;
  for (int l = from; l <= to; ++l) d.push_back(l);
  return d;
}

// f_l(alpha; X), phases = (alpha^(1), ..., alpha^(l))
inline ComplexSample eval_f(int l, std::span<const double> phases, std::int64_t X) {
  if (l < 1 || phases.size() != static_cast<std::size_t>(l)) throw DomainError("shape mismatch");
  const auto fixed = to_fixed(phases);
  return weyl_sum(degree_range(1, l), fixed, X);
}

// g_l(alpha; X), phases = (alpha^(2), ..., alpha^(l))
inline ComplexSample eval_g(int l, std::span<const double> phases, std::int64_t X) {
  if (l < 2 || phases.size() != static_cast<std::size_t>(l - 1)) throw DomainError("shape mismatch");
  const auto fixed = to_fixed(phases);
  return weyl_sum(degree_range(2, l), fixed, X);
}

// K_l(alpha; X, H) = sum_{|h| <= H} sum_{|z| <= X}
//   e(h alpha^(1) + 2hz alpha^(2) + ... + l h z^{l-1} alpha^(l))
inline ComplexSample eval_K(int l, std::span<const double> phases, std::int64_t X, std::int64_t H) {
  if (X < 0 || H < 0) throw DomainError("X and H must be nonnegative");
  if (l < 1 || phases.size() != static_cast<std::size_t>(l)) throw DomainError("shape mismatch");
  const auto fixed = to_fixed(phases);
  ComplexCompensatedSum acc;
  for (std::int64_t h = -H; h <= H; ++h)
    for (std::int64_t z = -X; z <= X; ++z) {
      Fixed t = 0;
      u128 zp = 1;
      for (int m = 1; m <= l; ++m) {
        t += fixed[m - 1] * (static_cast<u128>(static_cast<i128>(m) * h) * zp);
        zp *= static_cast<u128>(static_cast<i128>(z));
      }
      acc.add(unit_root(t));
    }
  return {acc.value(), 0};
}

// ---------------------------------------------------------------------------
// Coefficient transforms.  Phase vectors are flat, ordered by block then row,
// matching value_vector.

struct PhaseVector {
  std::vector<double> alpha;

  static PhaseVector reduced(std::vector<double> values) {
    for (auto& a : values) a = fixed_to_double(to_fixed(a));
    return {std::move(values)};
  }
};

struct RationalPoint {
  std::int64_t q = 1;
  std::vector<std::int64_t> a;
};

// Per-variable transform: values[j][b] for variable j and block b.
template <class T>
struct ColumnTransform {
  std::vector<int> degrees;
  std::vector<std::vector<T>> values;
};

using GammaVector = ColumnTransform<double>;

namespace detail {

inline void require_shape(const DiagonalSystem& sys, std::size_t n) {
  if (n != sys.equations()) throw DomainError("shape mismatch");
}

inline std::vector<int> block_degrees(const DiagonalSystem& sys) {
  std::vector<int> d;
  for (const auto& b : sys.blocks()) d.push_back(b.degree);
  return d;
}

}  // namespace detail

// gamma_j^(l) = sum_i c_{i,j}^(l) alpha_i^(l), reduced mod 1 exactly.
inline ColumnTransform<Fixed> gamma_fixed(const DiagonalSystem& sys, std::span<const Fixed> alpha) {
  detail::require_shape(sys, alpha.size());
  ColumnTransform<Fixed> out{detail::block_degrees(sys), {}};
  out.values.assign(sys.variables(), std::vector<Fixed>(sys.blocks().size(), 0));
  std::size_t idx = 0;
  for (std::size_t b = 0; b < sys.blocks().size(); ++b)
    for (const auto& row : sys.blocks()[b].rows) {
      for (std::size_t j = 0; j < sys.variables(); ++j) out.values[j][b] += fixed_times(alpha[idx], row[j]);
      ++idx;
    }
  return out;
}

inline GammaVector gamma_transform(const DiagonalSystem& sys, const PhaseVector& phases) {
  const auto fixed = gamma_fixed(sys, to_fixed(phases.alpha));
  GammaVector out{fixed.degrees, {}};
  for (const auto& col : fixed.values) {
    std::vector<double> v;
    for (auto g : col) v.push_back(fixed_to_double(g));
    out.values.push_back(std::move(v));
  }
  return out;
}

// Lambda_j^(l) = sum_i c_{i,j}^(l) a_i^(l)
inline ColumnTransform<i128> lambda_transform(const DiagonalSystem& sys, const RationalPoint& point) {
  detail::require_shape(sys, point.a.size());
  ColumnTransform<i128> out{detail::block_degrees(sys), {}};
  out.values.assign(sys.variables(), std::vector<i128>(sys.blocks().size(), 0));
  std::size_t idx = 0;
  for (std::size_t b = 0; b < sys.blocks().size(); ++b)
    for (const auto& row : sys.blocks()[b].rows) {
      for (std::size_t j = 0; j < sys.variables(); ++j)
        out.values[j][b] = checked_add(out.values[j][b], checked_mul(row[j], point.a[idx]));
      ++idx;
    }
  return out;
}

// theta_j^(l) = sum_i c_{i,j}^(l) beta_i^(l)
inline ColumnTransform<double> theta_transform(const DiagonalSystem& sys, std::span<const double> beta) {
  detail::require_shape(sys, beta.size());
  ColumnTransform<double> out{detail::block_degrees(sys), {}};
  out.values.assign(sys.variables(), std::vector<double>(sys.blocks().size(), 0));
  for (std::size_t j = 0; j < sys.variables(); ++j) {
    std::size_t idx = 0;
    for (std::size_t b = 0; b < sys.blocks().size(); ++b) {
      CompensatedSum acc;
      for (const auto& row : sys.blocks()[b].rows) acc.add(static_cast<double>(row[j]) * beta[idx++]);
      out.values[j][b] = acc.value();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Complete sums modulo q.

inline std::int64_t pow_mod(std::int64_t x, int e, std::int64_t q) {
  i128 r = 1 % q, b = ((x % q) + q) % q;
  for (int i = 0; i < e; ++i) r = r * b % q;
  return static_cast<std::int64_t>(r);
}

// sum_{x=1}^q e((sum_i a_i x^{degree_i}) / q)
inline ComplexSample complete_sum(std::int64_t q, std::span<const int> degrees, std::span<const i128> a) {
  if (q < 1) throw DomainError("modulus must be positive");
  if (degrees.size() != a.size()) throw DomainError("shape mismatch");
  std::vector<i128> coeff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) coeff[i] = ((a[i] % q) + q) % q;
  ComplexCompensatedSum acc;
  for (std::int64_t x = 1; x <= q; ++x) {
    i128 n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n = (n + coeff[i] * pow_mod(x, degrees[i], q)) % q;
    acc.add(unit_fraction(n, q));
  }
  return {acc.value(), 0};
}

// S_k(q, a), a = (a^(2), ..., a^(k))
inline ComplexSample eval_S(int k, std::int64_t q, std::span<const std::int64_t> a) {
  if (k < 2 || a.size() != static_cast<std::size_t>(k - 1)) throw DomainError("shape mismatch");
  std::vector<i128> wide(a.begin(), a.end());
  return complete_sum(q, degree_range(2, k), wide);
}

inline std::int64_t content_gcd(std::int64_t q, std::span<const std::int64_t> a) {
  std::int64_t g = q;
  for (auto x : a) g = std::gcd(g, x);
  return g;
}

struct WeylRatio {
  double ratio = 0;
  std::int64_t content = 1;  // (q, a)
  bool degenerate = false;   // (q, a) = q
};

// |S_k(q, a)| / ((q, a)^{1/k} q^{1 - 1/k})
inline WeylRatio weyl_ratio_S(int k, std::int64_t q, std::span<const std::int64_t> a) {
  if (q < 2) throw DomainError("q must be at least 2");
  const auto s = eval_S(k, q, a);
  WeylRatio w;
  w.content = content_gcd(q, a);
  w.degenerate = w.content == q;
  w.ratio = std::abs(s.value) /
            (std::pow(static_cast<double>(w.content), 1.0 / k) * std::pow(static_cast<double>(q), 1.0 - 1.0 / k));
  return w;
}

struct WeylScan {
  double max_ratio = 0;
  std::vector<std::int64_t> argmax;  // (a^(2), ..., a^(k))
  std::uint64_t points = 0;
};

// max of weyl_ratio_S over all a in [0, q)^{k-1} with (q, a) = 1.
inline WeylScan scan_weyl_ratio(int k, std::int64_t q) {
  if (k < 2) throw DomainError("k must be at least 2");
  if (q < 2) throw DomainError("q must be at least 2");
  const auto n = static_cast<std::size_t>(q);
  std::vector<Complex> roots(n);
  for (std::size_t m = 0; m < n; ++m) roots[m] = unit_fraction(static_cast<i128>(m), q);
  std::vector<std::vector<std::int64_t>> powers(k + 1, std::vector<std::int64_t>(n));
  for (int l = 2; l <= k; ++l)
    for (std::size_t x = 0; x < n; ++x) powers[l][x] = pow_mod(static_cast<std::int64_t>(x), l, q);

  WeylScan scan;
  const double norm = std::pow(static_cast<double>(q), 1.0 - 1.0 / k);
  std::vector<std::int64_t> a(k - 1, 0);
  // level[l] holds sum_{m >= l} a^(m) x^m mod q for each x
  std::vector<std::vector<std::int64_t>> level(k + 2, std::vector<std::int64_t>(n, 0));
  auto recurse = [&](auto&& self, int l) -> void {
    if (l < 2) {
      const auto g = content_gcd(q, a);
      if (g != 1) return;
      Complex s{0, 0};
      for (std::size_t x = 0; x < n; ++x) s += roots[level[2][x]];
      ++scan.points;
      const double ratio = std::abs(s) / norm;
      if (ratio > scan.max_ratio) {
        scan.max_ratio = ratio;
        scan.argmax = a;
      }
      return;
    }
    auto& cur = level[l];
    cur = level[l + 1];
    for (std::int64_t c = 0; c < q; ++c) {
      a[l - 2] = c;
      self(self, l - 1);
      for (std::size_t x = 0; x < n; ++x) {
        cur[x] += powers[l][x];
        if (cur[x] >= q) cur[x] -= q;
      }
    }
  };
  recurse(recurse, k);
  return scan;
}

// ---------------------------------------------------------------------------
// Oscillatory integrals v_k(beta; X) = int_{-X}^X e(sum_l beta^(l) z^l) dz.

struct QuadratureOptions {
  double tol = 1e-8;
  std::size_t max_panels = std::size_t(1) << 22;
};

namespace detail {

struct GaussRule {
  std::array<double, 16> nodes{}, weights{};
  GaussRule() {
    using G = boost::math::quadrature::gauss<double, 16>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      nodes[n] = x[i];
      weights[n++] = w[i];
      nodes[n] = -x[i];
      weights[n++] = w[i];
    }
  }
};

inline const GaussRule& gauss16() {
  static const GaussRule rule;
  return rule;
}

inline double phase_at(std::span<const int> degrees, std::span<const double> beta, double z) {
  double t = 0;
  for (std::size_t i = 0; i < degrees.size(); ++i) t += beta[i] * std::pow(z, degrees[i]);
  return t;
}

inline Complex composite_gauss(std::span<const int> degrees, std::span<const double> beta, double X,
                               std::size_t panels) {
  const auto& g = gauss16();
  const double h = 2 * X / static_cast<double>(panels);
  ComplexCompensatedSum acc;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = -X + h * (static_cast<double>(p) + 0.5);
    Complex part{0, 0};
    for (std::size_t n = 0; n < 16; ++n) part += g.weights[n] * unit_root(phase_at(degrees, beta, mid + 0.5 * h * g.nodes[n]));
    acc.add(part * (0.5 * h));
  }
  return acc.value();
}

}  // namespace detail

// Total phase variation bound 1 + sum_l |beta^(l)| X^l.
inline double phase_scale(std::span<const int> degrees, std::span<const double> beta, double X) {
  double s = 1;
  for (std::size_t i = 0; i < degrees.size(); ++i) s += std::abs(beta[i]) * std::pow(X, degrees[i]);
  return s;
}

inline ComplexSample oscillatory_integral(std::span<const int> degrees, std::span<const double> beta, double X,
                                          const QuadratureOptions& opts = {}) {
  if (!(X > 0)) throw DomainError("X must be positive");
  if (degrees.size() != beta.size()) throw DomainError("shape mismatch");
  bool zero = true;
  for (double b : beta)
    if (b != 0) zero = false;
  if (zero) return {{2 * X, 0}, 0};
  const double start = std::ceil(2 * phase_scale(degrees, beta, X));
  if (start * 2 > static_cast<double>(opts.max_panels)) throw DomainError("tolerance unreachable within panel budget");
  auto panels = static_cast<std::size_t>(start);
  Complex prev = detail::composite_gauss(degrees, beta, X, panels);
  while (true) {
    panels *= 2;
    if (panels > opts.max_panels) throw DomainError("tolerance unreachable within panel budget");
    const Complex next = detail::composite_gauss(degrees, beta, X, panels);
    const double diff = std::abs(next - prev);
    if (diff < opts.tol) return {next, diff};
    prev = next;
  }
}

// v_k(beta; X), betas = (beta^(2), ..., beta^(k))
inline ComplexSample eval_v(int k, std::span<const double> betas, double X, const QuadratureOptions& opts = {}) {
  if (k < 2 || betas.size() != static_cast<std::size_t>(k - 1)) throw DomainError("shape mismatch");
  return oscillatory_integral(degree_range(2, k), betas, X, opts);
}

// |v| (1 + sum |beta^(l)| X^l)^{1/k} / X
inline double decay_ratio_v(int k, std::span<const double> betas, double X, const QuadratureOptions& opts = {}) {
  const auto v = eval_v(k, betas, X, opts);
  return std::abs(v.value) * std::pow(phase_scale(degree_range(2, k), betas, X), 1.0 / k) / X;
}

// ---------------------------------------------------------------------------
// Major-arc approximation for one variable.

inline bool in_major_arc(const DiagonalSystem& sys, const RationalPoint& point, std::span<const double> beta, double Y,
                         double Q) {
  if (point.q < 1 || static_cast<double>(point.q) > Q) return false;
  if (point.a.size() != sys.equations() || beta.size() != sys.equations()) return false;
  for (auto a : point.a)
    if (a < 0 || a > point.q) return false;
  if (content_gcd(point.q, point.a) != 1) return false;
  std::size_t idx = 0;
  for (const auto& b : sys.blocks())
    for (std::size_t i = 0; i < b.rows.size(); ++i, ++idx)
      if (std::abs(beta[idx]) > Q * std::pow(Y, -b.degree)) return false;
  return true;
}

struct MajorArcApprox {
  ComplexSample approx, exact;
  double residual = 0;
};

// approx = q^{-1} S(q, Lambda_j) v(theta_j; X), exact = g(gamma_j; X) at
// alpha = a/q + beta.
inline MajorArcApprox major_arc_approx(const DiagonalSystem& sys, std::size_t j, const RationalPoint& point,
                                       std::span<const double> beta, std::int64_t X, double Q,
                                       const QuadratureOptions& opts = {}) {
  require_no_linear(sys);
  if (j >= sys.variables()) throw DomainError("invalid variable index");
  if (X < 1) throw DomainError("X must be positive");
  if (!in_major_arc(sys, point, beta, static_cast<double>(X), Q)) throw DomainError("point outside the major arc");

  std::vector<Fixed> alpha;
  for (std::size_t i = 0; i < beta.size(); ++i) alpha.push_back(fixed_rational(point.a[i], point.q) + to_fixed(beta[i]));
  const auto gamma = gamma_fixed(sys, alpha);
  const auto lambda = lambda_transform(sys, point);
  const auto theta = theta_transform(sys, beta);

  MajorArcApprox out;
  out.exact = weyl_sum(gamma.degrees, gamma.values[j], X);
  const auto s = complete_sum(point.q, lambda.degrees, lambda.values[j]);
  const auto v = oscillatory_integral(theta.degrees, theta.values[j], static_cast<double>(X), opts);
  const double scale = 1.0 / static_cast<double>(point.q);
  out.approx.value = scale * s.value * v.value;
  out.approx.error = scale * std::abs(s.value) * v.error;
  out.residual = std::abs(out.exact.value - out.approx.value);
  return out;
}

}  // namespace diaglab
