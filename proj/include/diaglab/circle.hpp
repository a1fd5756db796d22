#pragma once

#include "diaglab/bareiss.hpp"
#include "diaglab/count_table.hpp"
#include "diaglab/counting.hpp"
#include "diaglab/expsums.hpp"
#include "diaglab/parallel.hpp"
#include "diaglab/rng.hpp"
#include "diaglab/systems.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace diaglab {

using Rational = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Elementary number theory.

inline bool is_prime(std::int64_t n) {
  if (n < 2) return false;
  for (std::int64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

inline std::vector<std::int64_t> primes_up_to(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t p = 2; p <= n; ++p)
    if (is_prime(p)) out.push_back(p);
  return out;
}

inline int mobius(std::int64_t n) {
  int mu = 1;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    if (n % p) continue;
    n /= p;
    if (n % p == 0) return 0;
    mu = -mu;
  }
  return n > 1 ? -mu : mu;
}

inline std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = 1; d <= n; ++d)
    if (n % d == 0) out.push_back(d);
  return out;
}

inline int valuation(const BigInt& n, std::int64_t p) {
  if (n == 0) return std::numeric_limits<int>::max();
  BigInt m = n;
  int v = 0;
  while (m % p == 0) {
    m /= p;
    ++v;
  }
  return v;
}

inline Rational rational_pow(std::int64_t base, std::int64_t e) {
  const BigInt b = boost::multiprecision::pow(BigInt(base), static_cast<unsigned>(e < 0 ? -e : e));
  return e < 0 ? Rational(1) / Rational(b) : Rational(b);
}

// ---------------------------------------------------------------------------
// Major arcs.

struct ArcWitness {
  RationalPoint point;
  std::vector<double> beta;
};

// Smallest q <= Q with |alpha_i - a_i/q| <= Q Y^{-l} (distances mod 1) and
// (q, a) = 1; residues reported as 1 <= a <= q.
inline std::optional<ArcWitness> major_arc_locate(const DiagonalSystem& sys, const PhaseVector& phases, double Y,
                                                  double Q) {
  if (!(Q >= 1) || Q > Y) throw DomainError("require 1 <= Q <= Y");
  detail::require_shape(sys, phases.alpha.size());
  std::vector<int> degree_of;
  for (const auto& b : sys.blocks())
    for (std::size_t i = 0; i < b.rows.size(); ++i) degree_of.push_back(b.degree);

  const auto qmax = static_cast<std::int64_t>(std::floor(Q));
  for (std::int64_t q = 1; q <= qmax; ++q) {
    ArcWitness w{{q, {}}, {}};
    bool inside = true;
    for (std::size_t i = 0; i < phases.alpha.size() && inside; ++i) {
      const double a = phases.alpha[i] - std::floor(phases.alpha[i]);
      const auto num = static_cast<std::int64_t>(std::llround(a * static_cast<double>(q)));
      const double beta = a - static_cast<double>(num) / static_cast<double>(q);
      if (std::abs(beta) > Q * std::pow(Y, -degree_of[i])) inside = false;
      std::int64_t res = num % q;
      if (res <= 0) res += q;
      w.point.a.push_back(res);
      w.beta.push_back(beta);
    }
    if (inside && content_gcd(q, w.point.a) == 1) return w;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Congruence counts.

struct CongruenceOptions {
  std::size_t max_entries = 200'000'000;
};

namespace detail {

// Dense distribution over (Z/q)^r, mixed radix with equation 0 fastest.
struct ModTable {
  std::int64_t q = 1;
  std::size_t dims = 0;
  std::vector<std::uint64_t> counts;
};

inline std::size_t mod_table_size(std::int64_t q, std::size_t dims, const CongruenceOptions& opts) {
  double n = 1;
  for (std::size_t i = 0; i < dims; ++i) n *= static_cast<double>(q);
  if (n > static_cast<double>(opts.max_entries)) throw DomainError("memory cap exceeded");
  return static_cast<std::size_t>(n);
}

inline std::vector<std::int64_t> key_digits(std::size_t key, std::int64_t q, std::size_t dims) {
  std::vector<std::int64_t> d(dims);
  for (std::size_t i = 0; i < dims; ++i) {
    d[i] = static_cast<std::int64_t>(key % static_cast<std::size_t>(q));
    key /= static_cast<std::size_t>(q);
  }
  return d;
}

// Residue distribution of one variable x in {0, step, 2 step, ...} mod q.
inline std::vector<std::pair<std::size_t, std::uint64_t>> residue_list(const DiagonalSystem& sys, std::size_t j,
                                                                       std::int64_t q, std::int64_t step, int sign) {
  std::map<std::size_t, std::uint64_t> acc;
  for (std::int64_t x = 0; x < q; x += step) {
    std::size_t key = 0, radix = 1;
    for (const auto& b : sys.blocks()) {
      const i128 xp = pow_mod(x, b.degree, q);
      for (const auto& row : b.rows) {
        i128 v = (static_cast<i128>(row[j] % q) * xp * sign) % q;
        if (v < 0) v += q;
        key += static_cast<std::size_t>(v) * radix;
        radix *= static_cast<std::size_t>(q);
      }
    }
    ++acc[key];
  }
  return {acc.begin(), acc.end()};
}

inline ModTable mod_convolve(const ModTable& a, const std::vector<std::pair<std::size_t, std::uint64_t>>& b) {
  ModTable out{a.q, a.dims, std::vector<std::uint64_t>(a.counts.size(), 0)};
  const auto n = a.counts.size();
  const auto q = static_cast<std::size_t>(a.q);
  if (a.dims == 1) {
    for (const auto& [shift, c] : b) {
      const std::uint64_t* src = a.counts.data();
      std::uint64_t* dst = out.counts.data();
      for (std::size_t k = 0; k + shift < n; ++k) dst[k + shift] += src[k] * c;
      for (std::size_t k = n - shift; k < n; ++k) dst[k + shift - n] += src[k] * c;
    }
    return out;
  }
  std::vector<std::size_t> weight(a.dims, 1);
  for (std::size_t i = 1; i < a.dims; ++i) weight[i] = weight[i - 1] * q;
  for (const auto& [shift, c] : b) {
    const auto sd = key_digits(shift, a.q, a.dims);
    std::vector<std::vector<std::size_t>> moved(a.dims, std::vector<std::size_t>(q));
    for (std::size_t i = 0; i < a.dims; ++i)
      for (std::size_t d = 0; d < q; ++d) moved[i][d] = ((d + static_cast<std::size_t>(sd[i])) % q) * weight[i];
    std::vector<std::size_t> digit(a.dims, 0);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t target = 0;
      for (std::size_t i = 0; i < a.dims; ++i) target += moved[i][digit[i]];
      out.counts[target] += a.counts[k] * c;
      for (std::size_t i = 0; i < a.dims; ++i) {
        if (++digit[i] < q) break;
        digit[i] = 0;
      }
    }
  }
  return out;
}

inline ModTable mod_distribution(const DiagonalSystem& sys, std::size_t from, std::size_t to, std::int64_t q,
                                 std::int64_t step, int sign, const CongruenceOptions& opts) {
  ModTable t{q, sys.equations(), std::vector<std::uint64_t>(mod_table_size(q, sys.equations(), opts), 0)};
  t.counts[0] = 1;
  for (std::size_t j = from; j < to; ++j) t = mod_convolve(t, residue_list(sys, j, q, step, sign));
  return t;
}

}  // namespace detail

// Solutions x in (Z/q)^s of the system, each x_j restricted to multiples of
// step (step = 1 for the plain count).
inline BigInt congruence_count(const DiagonalSystem& sys, std::int64_t q, std::int64_t step = 1,
                               const CongruenceOptions& opts = {}) {
  if (q < 1) throw DomainError("modulus must be positive");
  if (step < 1) throw DomainError("step must be positive");
  if (q == 1) return 1;
  const auto s = sys.variables();
  const auto half = (s + 1) / 2;
  // counts in one side are bounded by its point count
  const double per_var = std::ceil(static_cast<double>(q) / static_cast<double>(step));
  if (std::pow(per_var, static_cast<double>(half)) >= 1.8e19) throw DomainError("count overflow");
  const auto a = detail::mod_distribution(sys, 0, half, q, step, +1, opts);
  const auto b = detail::mod_distribution(sys, half, s, q, step, -1, opts);
  ProductAccumulator acc;
  for (std::size_t k = 0; k < a.counts.size(); ++k)
    if (a.counts[k] && b.counts[k]) acc.add(a.counts[k], b.counts[k]);
  return acc.value();
}

inline BigInt M_count(const DiagonalSystem& sys, std::int64_t q, const CongruenceOptions& opts = {}) {
  require_no_linear(sys);
  return congruence_count(sys, q, 1, opts);
}

// Memo for repeated congruence counts.
class CongruenceCache {
 public:
  explicit CongruenceCache(const DiagonalSystem& sys, CongruenceOptions opts = {}) : sys_(sys), opts_(opts) {}
  const BigInt& count(std::int64_t q, std::int64_t step = 1) {
    const auto key = std::make_pair(q, step);
    auto it = memo_.find(key);
    if (it == memo_.end()) it = memo_.emplace(key, congruence_count(sys_, q, step, opts_)).first;
    return it->second;
  }
  const DiagonalSystem& system() const { return sys_; }

 private:
  DiagonalSystem sys_;
  CongruenceOptions opts_;
  std::map<std::pair<std::int64_t, std::int64_t>, BigInt> memo_;
};

// A(q) = sum_{d | q} mu(q/d) d^{r-s} M(d)
inline Rational A_count(CongruenceCache& cache, std::int64_t q) {
  if (q < 1) throw DomainError("modulus must be positive");
  const auto& sys = cache.system();
  require_no_linear(sys);
  const auto e = static_cast<std::int64_t>(sys.equations()) - static_cast<std::int64_t>(sys.variables());
  Rational total = 0;
  for (auto d : divisors(q)) {
    const int mu = mobius(q / d);
    if (mu == 0) continue;
    total += Rational(mu) * rational_pow(d, e) * Rational(cache.count(d));
  }
  return total;
}

inline Rational A_count(const DiagonalSystem& sys, std::int64_t q) {
  CongruenceCache cache(sys);
  return A_count(cache, q);
}

// A(q) = q^{-s} sum_{1 <= a <= q, (q, a) = 1} prod_j S_k(q, Lambda_j)
inline double A_exp(const DiagonalSystem& sys, std::int64_t q) {
  require_no_linear(sys);
  if (q < 1) throw DomainError("modulus must be positive");
  const auto r = sys.equations(), s = sys.variables(), nb = sys.blocks().size();
  const auto n = static_cast<std::size_t>(q);
  std::vector<Complex> roots(n);
  for (std::size_t m = 0; m < n; ++m) roots[m] = unit_fraction(static_cast<i128>(m), q);
  std::vector<std::vector<std::int64_t>> powers(nb, std::vector<std::int64_t>(n));
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t x = 0; x < n; ++x) powers[b][x] = pow_mod(static_cast<std::int64_t>(x), sys.blocks()[b].degree, q);

  std::vector<std::int64_t> a(r, 1);
  ComplexCompensatedSum total;
  double scale_check = 0;
  while (true) {
    if (content_gcd(q, a) == 1) {
      const auto lam = lambda_transform(sys, {q, a});
      Complex prod{1, 0};
      for (std::size_t j = 0; j < s; ++j) {
        std::vector<std::int64_t> coeff(nb);
        for (std::size_t b = 0; b < nb; ++b) coeff[b] = static_cast<std::int64_t>(((lam.values[j][b] % q) + q) % q);
        Complex sj{0, 0};
        for (std::size_t x = 0; x < n; ++x) {
          i128 t = 0;
          for (std::size_t b = 0; b < nb; ++b) t += static_cast<i128>(coeff[b]) * powers[b][x];
          sj += roots[static_cast<std::size_t>(t % q)];
        }
        prod *= sj / static_cast<double>(q);
      }
      total.add(prod);
      scale_check += std::abs(prod);
    }
    std::size_t i = 0;
    while (i < r && ++a[i] > q) a[i++] = 1;
    if (i == r) break;
  }
  const Complex v = total.value();
  if (std::abs(v.imag()) > 1e-9 * std::max(1.0, scale_check))
    throw std::logic_error("A(q) has a non-negligible imaginary part");
  return v.real();
}

// ---------------------------------------------------------------------------
// Truncated singular series.

struct SingularSeriesReport {
  std::int64_t Q = 1;
  double partial = 0;
  std::optional<Rational> partial_exact;
  std::vector<std::pair<std::int64_t, double>> terms;
  double cauchy_gap = 0;  // |S(Q) - S(floor(Q/2))|
};

enum class SeriesMethod { Exact, Float };

inline SingularSeriesReport singular_series_truncated(const DiagonalSystem& sys, std::int64_t Q,
                                                      SeriesMethod method = SeriesMethod::Exact,
                                                      const CongruenceOptions& opts = {}) {
  require_no_linear(sys);
  if (Q < 1) throw DomainError("Q must be at least 1");
  SingularSeriesReport rep;
  rep.Q = Q;
  CongruenceCache cache(sys, opts);
  Rational exact = 0, half_exact = 0;
  CompensatedSum sum, half_sum;
  for (std::int64_t q = 1; q <= Q; ++q) {
    double term;
    if (method == SeriesMethod::Exact) {
      const auto a = A_count(cache, q);
      exact += a;
      if (q <= Q / 2) half_exact += a;
      term = static_cast<double>(a);
    } else {
      term = A_exp(sys, q);
    }
    sum.add(term);
    if (q <= Q / 2) half_sum.add(term);
    rep.terms.emplace_back(q, term);
  }
  if (method == SeriesMethod::Exact) {
    rep.partial_exact = exact;
    rep.partial = static_cast<double>(exact);
    rep.cauchy_gap = std::abs(static_cast<double>(exact - half_exact));
  } else {
    rep.partial = sum.value();
    rep.cauchy_gap = std::abs(sum.value() - half_sum.value());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// p-adic densities.

struct LocalDensityReport {
  std::int64_t p = 2;
  std::vector<std::pair<int, double>> iterates;            // (i, p^{-i(s-r)} M(p^i))
  std::vector<std::pair<int, double>> primitive_iterates;  // same for x not all divisible by p
  double chi_p = 1;
  bool stabilized = false;
  int i_used = 0;
  int i_min = 1;  // first level at which primitive iterates are Hensel-stable
  bool truncated = false;
};

// Upper bound for the p-adic valuation of an r x r Jacobian minor at a
// primitive point.
inline int jacobian_valuation_bound(const DiagonalSystem& sys, std::int64_t p) {
  int worst = 0;
  for (const auto& b : sys.blocks())
    for (const auto& row : b.rows)
      for (auto c : row)
        if (c != 0) worst = std::max(worst, valuation(BigInt(c) * b.degree, p));
  return worst * static_cast<int>(sys.equations());
}

// chi_p = lim p^{-i(s-r)} M(p^i).  Solutions with every x_j divisible by p
// contribute p^{K-s} chi_p, so chi_p = chi*_p / (1 - p^{K-s}) with chi*_p
// the primitive density, whose iterates are constant once Hensel applies.
inline LocalDensityReport chi_p(const DiagonalSystem& sys, std::int64_t p, int i_max = 6, double tol = 1e-6,
                                const CongruenceOptions& opts = {}) {
  require_no_linear(sys);
  if (!is_prime(p)) throw DomainError("p must be prime");
  if (i_max < 2) throw DomainError("i_max must be at least 2");
  const auto s = static_cast<std::int64_t>(sys.variables());
  const auto r = static_cast<std::int64_t>(sys.equations());
  const auto K = derived_constants(sys).K;
  const bool geometric = s > K;

  LocalDensityReport rep;
  rep.p = p;
  rep.i_min = std::max(1, 2 * jacobian_valuation_bound(sys, p) + 1);
  rep.iterates.emplace_back(0, 1.0);
  CongruenceCache cache(sys, opts);
  const Rational tail = Rational(1) - rational_pow(p, K - s);

  std::int64_t q = 1;
  for (int i = 1; i <= i_max; ++i) {
    q *= p;
    BigInt all, imprimitive;
    try {
      all = cache.count(q);
      imprimitive = cache.count(q, p);
    } catch (const DomainError&) {
      rep.truncated = true;
      break;
    }
    const Rational scale = rational_pow(p, -static_cast<std::int64_t>(i) * (s - r));
    const double raw = static_cast<double>(scale * Rational(all));
    const double prim = static_cast<double>(scale * Rational(all - imprimitive));
    rep.iterates.emplace_back(i, raw);
    rep.primitive_iterates.emplace_back(i, prim);
    rep.i_used = i;
    rep.chi_p = geometric ? static_cast<double>(Rational(scale * Rational(all - imprimitive)) / tail) : raw;

    if (geometric) {
      if (prim == 0) {
        rep.stabilized = true;
        rep.chi_p = 0;
        break;
      }
      if (i >= rep.i_min + 1) {
        const double prev = rep.primitive_iterates[rep.primitive_iterates.size() - 2].second;
        if (std::abs(prim - prev) < tol * std::abs(prim)) {
          rep.stabilized = true;
          break;
        }
      }
    } else if (i >= rep.i_min + 1) {
      const double prev = rep.iterates[rep.iterates.size() - 2].second;
      if (std::abs(raw - prev) < tol * std::max(std::abs(raw), 1e-300)) {
        rep.stabilized = true;
        break;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Singular integral.

struct SingularIntegralReport {
  std::string method;
  double value = 0;
  double error = 0;
  double Q = 0;
  double T = 0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  double cauchy_gap = 0;
};

struct SingularIntegralOptions {
  QuadratureOptions v;
  std::size_t max_dims = 4;
};

namespace detail {

class BetaIntegrator {
 public:
  BetaIntegrator(const DiagonalSystem& sys, bool absolute, const QuadratureOptions& vopts)
      : sys_(sys), absolute_(absolute), vopts_(vopts), degrees_(block_degrees(sys)) {
    std::size_t idx = 0;
    for (const auto& b : sys.blocks())
      for (const auto& row : b.rows) {
        double w = 0;
        for (auto c : row) w += std::abs(static_cast<double>(c));
        width_.push_back(1.0 / std::max(w, 1.0));
        ++idx;
      }
  }

  // Integral over [lo_0, hi_0] x prod_{d >= 1} [-half_d, half_d].
  std::pair<double, double> integrate(double lo0, double hi0, const std::vector<double>& half) {
    std::vector<double> beta(sys_.equations(), 0.0);
    return level(beta, 0, lo0, hi0, half);
  }

 private:
  Complex v_at(std::vector<double> theta) {
    bool flip = false;
    for (double t : theta)
      if (t != 0) {
        flip = t < 0;
        break;
      }
    if (flip)
      for (auto& t : theta) t = -t;
    auto it = memo_.find(theta);
    if (it == memo_.end()) it = memo_.emplace(theta, oscillatory_integral(degrees_, theta, 1.0, vopts_).value).first;
    return flip ? std::conj(it->second) : it->second;
  }

  double integrand(const std::vector<double>& beta) {
    const auto th = theta_transform(sys_, beta);
    Complex prod{1, 0};
    for (const auto& col : th.values) {
      bool zero = true;
      for (double t : col)
        if (t != 0) zero = false;
      prod *= zero ? Complex(2, 0) : v_at(col);
    }
    return absolute_ ? std::abs(prod) : prod.real();
  }

  std::pair<double, double> level(std::vector<double>& beta, std::size_t d, double lo, double hi,
                                  const std::vector<double>& half) {
    if (hi <= lo) return {0, 0};
    const auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / width_[d]));
    const double h = (hi - lo) / static_cast<double>(panels);
    CompensatedSum value;
    double error = 0, inner_error = 0;
    for (std::size_t p = 0; p < panels; ++p) {
      const double a = lo + h * static_cast<double>(p), b = a + h;
      auto f = [&](double x) {
        beta[d] = x;
        if (d + 1 == beta.size()) return integrand(beta);
        const auto [v, e] = level(beta, d + 1, -half[d + 1], half[d + 1], half);
        inner_error = std::max(inner_error, e);
        return v;
      };
      double err = 0;
      value.add(boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &err));
      error += err * 0.5 * h;
    }
    return {value.value(), error + inner_error * (hi - lo)};
  }

  DiagonalSystem sys_;
  bool absolute_;
  QuadratureOptions vopts_;
  std::vector<int> degrees_;
  std::vector<double> width_;
  std::map<std::vector<double>, Complex> memo_;
};

}  // namespace detail

// J_1(Q) = int over [-Q, Q]^r of prod_j v_k(theta_j; 1), using the conjugate
// symmetry beta -> -beta to integrate over beta_0 >= 0.
inline SingularIntegralReport singular_integral_Q(const DiagonalSystem& sys, double Q,
                                                  const SingularIntegralOptions& opts = {}) {
  require_no_linear(sys);
  if (sys.equations() > opts.max_dims) throw DomainError("dimension guard: r too large for tensor quadrature");
  if (!(Q >= 1)) throw DomainError("Q must be at least 1");
  detail::BetaIntegrator integ(sys, false, opts.v);
  const auto r = sys.equations();
  SingularIntegralReport rep;
  rep.method = "quadrature";
  rep.Q = Q;
  if (r == 1) {
    const auto inner = integ.integrate(0, Q / 2, {Q / 2});
    const auto outer = integ.integrate(Q / 2, Q, {Q});
    rep.value = 2 * (inner.first + outer.first);
    rep.cauchy_gap = 2 * std::abs(outer.first);
    rep.error = 2 * (inner.second + outer.second) + rep.cauchy_gap;
  } else {
    const auto full = integ.integrate(0, Q, std::vector<double>(r, Q));
    const auto halfbox = integ.integrate(0, Q / 2, std::vector<double>(r, Q / 2));
    rep.value = 2 * full.first;
    rep.cauchy_gap = 2 * std::abs(full.first - halfbox.first);
    rep.error = 2 * full.second + rep.cauchy_gap;
  }
  return rep;
}

// J*_1(W) = int over [-W, W]^r of prod_j |v_k(theta_j; 1)|
inline double singular_integral_abs(const DiagonalSystem& sys, double W, const SingularIntegralOptions& opts = {}) {
  require_no_linear(sys);
  if (sys.equations() > opts.max_dims) throw DomainError("dimension guard: r too large for tensor quadrature");
  if (W < 0) throw DomainError("W must be nonnegative");
  if (W == 0) return 0;
  detail::BetaIntegrator integ(sys, true, opts.v);
  return 2 * integ.integrate(0, W, std::vector<double>(sys.equations(), W)).first;
}

// w_T(y) = T(1 - T|y|) for |y| <= 1/T, else 0
inline double schmidt_weight(double T, double y) {
  const double t = 1 - T * std::abs(y);
  return t > 0 ? T * t : 0;
}

inline constexpr std::uint64_t kSchmidtChunk = std::uint64_t(1) << 16;

namespace detail {

// Coordinate integrated exactly inside each Monte Carlo sample: the column
// with the most nonzero coefficients.
inline std::size_t schmidt_line_variable(const DiagonalSystem& sys) {
  std::size_t best = 0, best_count = 0;
  for (std::size_t j = 0; j < sys.variables(); ++j) {
    std::size_t n = 0;
    for (const auto& b : sys.blocks())
      for (const auto& row : b.rows)
        if (row[j] != 0) ++n;
    if (n > best_count) {
      best = j;
      best_count = n;
    }
  }
  return best;
}

// int_{-1}^{1} prod_i w_T(rest_i + c_i z^{l_i}) dz.  Between the points where
// some factor hits 0 or +-1/T the integrand is a polynomial of degree at most
// sum l_i, which 16-point Gauss integrates exactly when that is <= 31.
inline double schmidt_line_integral(double T, std::span<const double> rest, std::span<const double> coeff,
                                    std::span<const int> degree, std::vector<double>& cuts) {
  const double h = 1 / T;
  cuts.assign({-1.0, 1.0});
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (coeff[i] == 0) {
      if (std::abs(rest[i]) >= h) return 0;
      continue;
    }
    for (double b : {-rest[i] - h, -rest[i], -rest[i] + h}) {
      const double t = b / coeff[i];
      if (degree[i] % 2 == 0) {
        if (t < 0) continue;
        const double z = std::pow(t, 1.0 / degree[i]);
        if (z < 1) {
          cuts.push_back(z);
          cuts.push_back(-z);
        }
      } else {
        const double z = std::copysign(std::pow(std::abs(t), 1.0 / degree[i]), t);
        if (std::abs(z) < 1) cuts.push_back(z);
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());
  auto weight = [&](double z) {
    double w = 1;
    for (std::size_t i = 0; i < rest.size(); ++i) w *= schmidt_weight(T, rest[i] + coeff[i] * std::pow(z, degree[i]));
    return w;
  };
  const auto& g = gauss16();
  double total = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    if (b <= a || weight(0.5 * (a + b)) == 0) continue;
    double part = 0;
    for (std::size_t n = 0; n < 16; ++n) part += g.weights[n] * weight(0.5 * (a + b) + 0.5 * (b - a) * g.nodes[n]);
    total += 0.5 * (b - a) * part;
  }
  return total;
}

}  // namespace detail

// W_T = int_{[-1,1]^s} prod_{l,i} w_T(Phi_i^(l)(z)) dz for several T at once,
// with common samples; sample n uses PhiloxStream(seed, n) for the other
// coordinates and integrates one coordinate exactly.  Chunks are summed in
// index order, so results do not depend on the worker count.
inline std::vector<SingularIntegralReport> chi_infinity_schmidt(const DiagonalSystem& sys, const std::vector<double>& Ts,
                                                               std::uint64_t samples, std::uint64_t seed,
                                                               unsigned workers = 1) {
  require_no_linear(sys);
  for (double T : Ts)
    if (!(T >= 1)) throw DomainError("T must be at least 1");
  if (samples < 1000) throw DomainError("samples must be at least 1000");
  const auto s = sys.variables();
  const auto nT = Ts.size();
  const auto line = detail::schmidt_line_variable(sys);
  std::vector<double> coeff;
  std::vector<int> degree;
  for (const auto& b : sys.blocks())
    for (const auto& row : b.rows) {
      coeff.push_back(static_cast<double>(row[line]));
      degree.push_back(b.degree);
    }
  const std::size_t chunks = (samples + kSchmidtChunk - 1) / kSchmidtChunk;
  std::vector<std::vector<double>> sum(chunks, std::vector<double>(nT, 0)), sum2 = sum;

  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<double> z(s), rest(sys.equations()), cuts;
    std::vector<CompensatedSum> acc(nT), acc2(nT);
    const std::uint64_t begin = c * kSchmidtChunk, end = std::min(samples, begin + kSchmidtChunk);
    for (std::uint64_t n = begin; n < end; ++n) {
      PhiloxStream rng(seed, n);
      for (auto& x : z) x = rng.uniform(-1.0, 1.0);
      std::size_t idx = 0;
      for (const auto& b : sys.blocks())
        for (const auto& row : b.rows) {
          double v = 0;
          for (std::size_t j = 0; j < s; ++j)
            if (j != line) v += static_cast<double>(row[j]) * std::pow(z[j], b.degree);
          rest[idx++] = v;
        }
      for (std::size_t t = 0; t < nT; ++t) {
        const double w = detail::schmidt_line_integral(Ts[t], rest, coeff, degree, cuts);
        acc[t].add(w);
        acc2[t].add(w * w);
      }
    }
    for (std::size_t t = 0; t < nT; ++t) {
      sum[c][t] = acc[t].value();
      sum2[c][t] = acc2[t].value();
    }
  });

  const double volume = std::ldexp(1.0, static_cast<int>(s) - 1);
  std::vector<SingularIntegralReport> out;
  for (std::size_t t = 0; t < nT; ++t) {
    CompensatedSum total, total2;
    for (std::size_t c = 0; c < chunks; ++c) {
      total.add(sum[c][t]);
      total2.add(sum2[c][t]);
    }
    const double n = static_cast<double>(samples);
    const double mean = total.value() / n;
    const double var = std::max(0.0, total2.value() / n - mean * mean);
    SingularIntegralReport rep;
    rep.method = "schmidt";
    rep.value = volume * mean;
    rep.error = 3 * volume * std::sqrt(var / n);
    rep.T = Ts[t];
    rep.samples = samples;
    rep.seed = seed;
    out.push_back(rep);
  }
  return out;
}

inline SingularIntegralReport chi_infinity_schmidt(const DiagonalSystem& sys, double T, std::uint64_t samples,
                                                   std::uint64_t seed, unsigned workers = 1) {
  return chi_infinity_schmidt(sys, std::vector<double>{T}, samples, seed, workers).front();
}

// ---------------------------------------------------------------------------
// Local solubility.

namespace detail {

inline std::vector<i128> form_values_mod(const DiagonalSystem& sys, const std::vector<std::int64_t>& x, i128 m) {
  std::vector<i128> out;
  for (const auto& b : sys.blocks())
    for (const auto& row : b.rows) {
      i128 acc = 0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        i128 p = 1;
        for (int e = 0; e < b.degree; ++e) p = p * x[j] % m;
        acc = (acc + static_cast<i128>(row[j] % m) * p) % m;
      }
      out.push_back(((acc % m) + m) % m);
    }
  return out;
}

// min over r-column subsets of v_p(det of the Jacobian minor) at x
inline int jacobian_minor_valuation(const DiagonalSystem& sys, const std::vector<std::int64_t>& x, std::int64_t p) {
  const auto r = sys.equations(), s = sys.variables();
  std::vector<BigInt> jac;
  for (const auto& b : sys.blocks())
    for (const auto& row : b.rows)
      for (std::size_t j = 0; j < s; ++j)
        jac.push_back(BigInt(row[j]) * b.degree * boost::multiprecision::pow(BigInt(x[j]), b.degree - 1));
  int best = std::numeric_limits<int>::max();
  std::vector<std::size_t> cols(r);
  for (std::size_t i = 0; i < r; ++i) cols[i] = i;
  while (true) {
    std::vector<BigInt> sub;
    for (std::size_t i = 0; i < r; ++i)
      for (auto c : cols) sub.push_back(jac[i * s + c]);
    best = std::min(best, valuation(bareiss_determinant(std::move(sub), r), p));
    if (best == 0) return 0;
    std::size_t i = r;
    while (i > 0 && cols[i - 1] == s - r + i - 1) --i;
    if (i == 0) break;
    ++cols[i - 1];
    for (std::size_t k = i; k < r; ++k) cols[k] = cols[k - 1] + 1;
  }
  return best;
}

}  // namespace detail

struct PadicWitness {
  bool found = false;
  std::int64_t p = 2;
  int level = 0;  // solution modulo p^level
  int delta = 0;  // valuation of the best Jacobian minor
  std::vector<std::int64_t> x;
  std::string message;
};

inline constexpr double kPadicSearchGuard = 2e7;

// Searches x mod p^j, j <= depth, with F(x) = 0 mod p^j and j >= 2 delta + 1,
// delta the least valuation of an r x r Jacobian minor at x; such a point
// lifts to a non-singular p-adic solution.
inline PadicWitness local_solubility_p(const DiagonalSystem& sys, std::int64_t p, int depth = 4) {
  if (!is_prime(p)) throw DomainError("p must be prime");
  const auto s = sys.variables();
  PadicWitness w;
  w.p = p;
  std::int64_t m = 1;
  for (int j = 1; j <= depth; ++j) {
    m *= p;
    if (std::pow(static_cast<double>(m), static_cast<double>(s)) > kPadicSearchGuard) break;
    std::vector<std::int64_t> x(s, 0);
    while (true) {
      bool primitive = false;
      for (auto v : x)
        if (v % p) primitive = true;
      if (primitive) {
        bool zero = true;
        for (auto v : detail::form_values_mod(sys, x, m))
          if (v != 0) zero = false;
        if (zero) {
          const int delta = detail::jacobian_minor_valuation(sys, x, p);
          if (delta != std::numeric_limits<int>::max() && j >= 2 * delta + 1) {
            w.found = true;
            w.level = j;
            w.delta = delta;
            w.x = x;
            w.message = "non-singular p-adic point found";
            return w;
          }
        }
      }
      std::size_t i = s;
      while (i > 0 && ++x[i - 1] == m) x[--i] = 0;
      if (i == 0) break;
    }
  }
  w.message = "none found to depth " + std::to_string(depth);
  return w;
}

// Lifts a witness to a solution modulo p^target congruent to it modulo
// p^{level - delta}.
inline std::optional<std::vector<std::int64_t>> hensel_lift(const DiagonalSystem& sys, const PadicWitness& w,
                                                            int target) {
  if (!w.found) return std::nullopt;
  const auto s = sys.variables();
  const auto p = w.p;
  std::vector<std::int64_t> x = w.x;
  std::int64_t mod = 1, shift = 1;
  for (int i = 0; i < w.level; ++i) mod *= p;
  for (int i = 0; i < w.level - w.delta; ++i) shift *= p;
  for (int m = w.level; m < target; ++m) {
    const std::int64_t next = mod * p;
    std::vector<std::int64_t> t(s, 0);
    bool lifted = false;
    while (!lifted) {
      std::vector<std::int64_t> y(s);
      for (std::size_t j = 0; j < s; ++j) y[j] = (x[j] + shift * t[j]) % next;
      bool zero = true;
      for (auto v : detail::form_values_mod(sys, y, next))
        if (v != 0) zero = false;
      if (zero) {
        x = y;
        lifted = true;
        break;
      }
      std::size_t i = s;
      while (i > 0 && ++t[i - 1] == p) t[--i] = 0;
      if (i == 0) break;
    }
    if (!lifted) return std::nullopt;
    mod = next;
    shift *= p;
  }
  return x;
}

struct RealWitness {
  bool found = false;
  std::vector<double> x;
  double residual = 0;
  std::size_t rank = 0;
  int starts_used = 0;
};

namespace detail {

inline Eigen::VectorXd form_values(const DiagonalSystem& sys, const Eigen::VectorXd& x) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(sys.equations()));
  Eigen::Index idx = 0;
  for (const auto& b : sys.blocks())
    for (const auto& row : b.rows) {
      double acc = 0;
      for (std::size_t j = 0; j < row.size(); ++j) acc += static_cast<double>(row[j]) * std::pow(x[j], b.degree);
      f[idx++] = acc;
    }
  return f;
}

inline Eigen::MatrixXd form_jacobian(const DiagonalSystem& sys, const Eigen::VectorXd& x) {
  Eigen::MatrixXd J(static_cast<Eigen::Index>(sys.equations()), static_cast<Eigen::Index>(sys.variables()));
  Eigen::Index idx = 0;
  for (const auto& b : sys.blocks())
    for (const auto& row : b.rows) {
      for (std::size_t j = 0; j < row.size(); ++j)
        J(idx, static_cast<Eigen::Index>(j)) = static_cast<double>(row[j]) * b.degree * std::pow(x[j], b.degree - 1);
      ++idx;
    }
  return J;
}

inline std::size_t numeric_rank(const Eigen::MatrixXd& J) {
  if (J.rows() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  const auto& sv = svd.singularValues();
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-8) ++rank;
  return rank;
}

}  // namespace detail

// Multi-start damped Newton on F(x) = 0 together with s - r random affine
// slices through the start point.
inline RealWitness local_solubility_real(const DiagonalSystem& sys, int starts = 64, std::uint64_t seed = 0) {
  const auto s = static_cast<Eigen::Index>(sys.variables());
  const auto r = static_cast<Eigen::Index>(sys.equations());
  RealWitness best;
  for (int start = 0; start < starts; ++start) {
    best.starts_used = start + 1;
    PhiloxStream rng(seed, static_cast<std::uint64_t>(start));
    Eigen::VectorXd x0(s), x(s);
    for (Eigen::Index j = 0; j < s; ++j) x0[j] = rng.uniform(-0.9, 0.9);
    Eigen::MatrixXd L(s - r > 0 ? s - r : 0, s);
    for (Eigen::Index i = 0; i < L.rows(); ++i)
      for (Eigen::Index j = 0; j < s; ++j) L(i, j) = rng.uniform(-1.0, 1.0);
    x = x0;
    for (int iter = 0; iter < 100; ++iter) {
      Eigen::VectorXd g(s);
      g << detail::form_values(sys, x), L * (x - x0);
      if (g.norm() < 1e-14) break;
      Eigen::MatrixXd J(s, s);
      J << detail::form_jacobian(sys, x), L;
      const Eigen::VectorXd step = J.colPivHouseholderQr().solve(-g);
      double lambda = 1;
      while (lambda > 1e-4) {
        Eigen::VectorXd y = x + lambda * step;
        Eigen::VectorXd gy(s);
        gy << detail::form_values(sys, y), L * (y - x0);
        if (gy.norm() < g.norm()) {
          x = y;
          break;
        }
        lambda /= 2;
      }
      if (lambda <= 1e-4) break;
    }
    const double residual = detail::form_values(sys, x).cwiseAbs().maxCoeff();
    const auto rank = detail::numeric_rank(detail::form_jacobian(sys, x));
    const bool inside = x.cwiseAbs().maxCoeff() < 1;
    if (residual < 1e-10 && inside && rank == static_cast<std::size_t>(r)) {
      best.found = true;
      best.x.assign(x.data(), x.data() + s);
      best.residual = residual;
      best.rank = rank;
      return best;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Prediction.

enum class IntegralMethod { Auto, Quadrature, Schmidt };

struct PredictOptions {
  std::int64_t P0 = 100;
  int i_max = 6;
  double tol = 1e-6;
  double Q = 128;
  double T = 32;
  std::uint64_t samples = std::uint64_t(1) << 22;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  IntegralMethod method = IntegralMethod::Auto;
  bool cross_check = false;
  int real_starts = 64;
  SingularIntegralOptions integral;
  CongruenceOptions congruence;
};

struct PredictionReport {
  SingularIntegralReport chi_infinity;
  std::optional<SingularIntegralReport> cross_check;
  std::vector<LocalDensityReport> local;
  std::int64_t P0 = 100;
  double local_product = 1;
  double constant = 0;
  std::int64_t exponent = 0;
  bool real_witness = false;
  std::vector<std::string> caveats;
};

inline PredictionReport predict(const DiagonalSystem& sys, const PredictOptions& opts = {}) {
  require_no_linear(sys);
  const auto d = derived_constants(sys);
  PredictionReport rep;
  rep.P0 = opts.P0;
  rep.exponent = static_cast<std::int64_t>(sys.variables()) - d.K;

  const bool quadrature = opts.method == IntegralMethod::Quadrature ||
                          (opts.method == IntegralMethod::Auto && sys.equations() == 1);
  if (quadrature)
    rep.chi_infinity = singular_integral_Q(sys, opts.Q, opts.integral);
  else
    rep.chi_infinity = chi_infinity_schmidt(sys, opts.T, opts.samples, opts.seed, opts.workers);
  if (opts.cross_check) {
    rep.cross_check = quadrature ? chi_infinity_schmidt(sys, opts.T, opts.samples, opts.seed, opts.workers)
                                 : singular_integral_Q(sys, opts.Q, opts.integral);
    if (std::abs(rep.cross_check->value - rep.chi_infinity.value) >
        rep.cross_check->error + rep.chi_infinity.error)
      rep.caveats.push_back("singular integral methods disagree beyond error bars");
  }

  double product = 1;
  for (auto p : primes_up_to(opts.P0)) {
    auto local = chi_p(sys, p, opts.i_max, opts.tol, opts.congruence);
    if (!local.stabilized) rep.caveats.push_back("chi_p not stabilized at p=" + std::to_string(p));
    product *= local.chi_p;
    rep.local.push_back(std::move(local));
  }
  rep.local_product = product;
  rep.constant = rep.chi_infinity.value * product;
  rep.caveats.push_back("tail truncation at P0=" + std::to_string(opts.P0));
  if (static_cast<std::int64_t>(sys.variables()) < 2 * d.K + 1)
    rep.caveats.push_back("s < 2K+1; asymptotic formula not covered");

  rep.real_witness = local_solubility_real(sys, opts.real_starts, opts.seed).found;
  if (!rep.real_witness) rep.caveats.push_back("no real witness found");
  return rep;
}

struct CompareRow {
  std::int64_t X = 0;
  BigInt count = 0;
  double predicted = 0;
  double ratio = 0;
  bool degenerate = false;
};

inline CompareRow compare_row(const BigInt& count, std::int64_t X, double constant, std::int64_t exponent) {
  CompareRow row;
  row.X = X;
  row.count = count;
  row.predicted = constant * std::pow(static_cast<double>(X), static_cast<double>(exponent));
  row.degenerate = X == 0 || row.predicted == 0;
  row.ratio = row.degenerate ? 0 : static_cast<double>(count) / row.predicted;
  return row;
}

inline std::vector<CompareRow> compare(const DiagonalSystem& sys, const std::vector<std::int64_t>& Xs,
                                       const PredictionReport& prediction, const CountOptions& opts = {}) {
  std::vector<CompareRow> rows;
  for (auto X : Xs)
    rows.push_back(compare_row(count_homogeneous(sys, X, opts).count, X, prediction.constant, prediction.exponent));
  return rows;
}

}  // namespace diaglab
