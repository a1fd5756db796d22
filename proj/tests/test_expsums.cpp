#include "diaglab/expsums.hpp"
#include "diaglab/rng.hpp"
#include "test_support.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include <random>

using namespace diaglab;
using Float50 = boost::multiprecision::cpp_bin_float_50;
using Rational = boost::multiprecision::cpp_rational;

namespace {

// e(sum_i phase_i x^{deg_i}) summed in 50-digit arithmetic from the exact
// binary values of the phases.
Complex oracle_sum(const std::vector<int>& degrees, const std::vector<double>& phases, std::int64_t lo,
                   std::int64_t hi) {
  const Float50 two_pi = 2 * boost::math::constants::pi<Float50>();
  Float50 re = 0, im = 0;
  for (std::int64_t x = lo; x <= hi; ++x) {
    Float50 t = 0;
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      Float50 p = 1;
      for (int e = 0; e < degrees[i]; ++e) p *= x;
      t += Float50(phases[i]) * p;
    }
    t -= floor(t);
    re += cos(two_pi * t);
    im += sin(two_pi * t);
  }
  return {static_cast<double>(re), static_cast<double>(im)};
}

std::vector<double> random_phases(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<double> out(n);
  for (auto& a : out) a = u(rng);
  return out;
}

std::vector<double> negate(std::vector<double> v) {
  for (auto& x : v) x = -x;
  return v;
}

}  // namespace

TEST(Philox, KnownAnswers) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamsAreReproducible) {
  PhiloxStream a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 20; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_NE(x, c.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(FixedPhase, ReductionIsExact) {
  EXPECT_EQ(to_fixed(0.0), Fixed(0));
  EXPECT_EQ(to_fixed(3.0), Fixed(0));
  EXPECT_EQ(to_fixed(0.5), Fixed(1) << 127);
  EXPECT_EQ(to_fixed(-0.25), Fixed(3) << 126);
  EXPECT_EQ(fixed_rational(1, 4), Fixed(1) << 126);
  EXPECT_EQ(fixed_rational(-1, 2), Fixed(1) << 127);
  EXPECT_DOUBLE_EQ(fixed_to_double(fixed_rational(1, 3)), 1.0 / 3);
}

TEST(EvalF, TrivialPhases) {
  for (std::int64_t X : {0, 1, 17, 100}) {
    const std::vector<double> zero(3, 0.0);
    const auto f = eval_f(3, zero, X);
    EXPECT_EQ(f.value, Complex(2 * X + 1, 0));
    EXPECT_EQ(f.error, 0);
    const std::vector<double> integers{2, -5, 7};
    EXPECT_NEAR(std::abs(eval_f(3, integers, X).value - Complex(2 * X + 1, 0)), 0, 1e-12);
  }
}

TEST(EvalF, MatchesExtendedPrecisionOracle) {
  std::mt19937_64 rng(5);
  for (int l = 1; l <= 4; ++l)
    for (int trial = 0; trial < 3; ++trial) {
      const auto a = random_phases(rng, l);
      const auto f = eval_f(l, a, 50);
      const auto o = oracle_sum(degree_range(1, l), a, -50, 50);
      EXPECT_LT(std::abs(f.value - o), 1e-10);
    }
}

TEST(EvalF, ConjugationPeriodicityAndBound) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int l = 1 + static_cast<int>(rng() % 4);
    // dyadic phases so that integer shifts are exact in binary
    auto a = random_phases(rng, l);
    for (auto& x : a) x = std::ldexp(std::round(std::ldexp(x, 40)), -40);
    const std::int64_t X = static_cast<std::int64_t>(rng() % 200);
    const auto f = eval_f(l, a, X).value;
    EXPECT_LT(std::abs(eval_f(l, negate(a), X).value - std::conj(f)), 1e-12);
    auto shifted = a;
    for (auto& x : shifted) x += static_cast<double>(static_cast<int>(rng() % 7) - 3);
    EXPECT_LT(std::abs(eval_f(l, shifted, X).value - f), 1e-12 * (2 * X + 1) + 1e-12);
    EXPECT_LE(std::abs(f), 2.0 * X + 1 + 1e-9);
  }
}

TEST(EvalF, DiscreteOrthogonality) {
  for (std::int64_t X : {0, 3, 10, 20}) {
    const std::int64_t n = 4 * (2 * X + 1);
    CompensatedSum acc;
    for (std::int64_t m = 0; m < n; ++m) {
      const double a[1] = {static_cast<double>(m) / static_cast<double>(n)};
      acc.add(std::norm(eval_f(1, a, X).value));
    }
    EXPECT_NEAR(acc.value() / static_cast<double>(n), 2.0 * X + 1, 1e-6);
  }
}

TEST(EvalG, Identities) {
  std::mt19937_64 rng(7);
  const std::vector<double> zero(2, 0.0);
  EXPECT_EQ(eval_g(3, zero, 9).value, Complex(19, 0));
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_phases(rng, 3);
    const auto g = eval_g(4, a, 40).value;
    std::vector<double> with_linear{0.0};
    with_linear.insert(with_linear.end(), a.begin(), a.end());
    EXPECT_EQ(g, eval_f(4, with_linear, 40).value);
    EXPECT_NEAR(std::abs(eval_g(4, negate(a), 40).value), std::abs(g), 1e-12);
    EXPECT_LT(std::abs(eval_g(4, negate(a), 40).value - std::conj(g)), 1e-12);
    EXPECT_LT(std::abs(g - oracle_sum({2, 3, 4}, a, -40, 40)), 1e-10);
  }
}

TEST(EvalK, Identities) {
  const std::vector<double> zero(3, 0.0);
  EXPECT_EQ(eval_K(3, zero, 4, 6).value, Complex(13 * 9, 0));
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_phases(rng, 3);
    const auto k = eval_K(3, a, 12, 7).value;
    EXPECT_LE(std::abs(k), 15.0 * 25 + 1e-9);
    EXPECT_LT(std::abs(eval_K(3, negate(a), 12, 7).value - std::conj(k)), 1e-12);
  }
}

TEST(EvalK, MatchesDirectOracleAtDegreeTwo) {
  std::mt19937_64 rng(9);
  const Float50 two_pi = 2 * boost::math::constants::pi<Float50>();
  for (int trial = 0; trial < 2; ++trial) {
    const auto a = random_phases(rng, 2);
    const std::int64_t X = 30, H = 30;
    Float50 re = 0, im = 0;
    for (std::int64_t h = -H; h <= H; ++h)
      for (std::int64_t z = -X; z <= X; ++z) {
        Float50 t = Float50(a[0]) * h + Float50(a[1]) * (2 * h * z);
        t -= floor(t);
        re += cos(two_pi * t);
        im += sin(two_pi * t);
      }
    EXPECT_LT(std::abs(eval_K(2, a, X, H).value - Complex(static_cast<double>(re), static_cast<double>(im))), 1e-10);
  }
}

TEST(GammaTransform, Examples) {
  const auto sys = single_form(2, {1, 1, -1});
  const auto zero = gamma_transform(sys, {{0.0}});
  for (const auto& col : zero.values) EXPECT_EQ(col[0], 0.0);
  const auto g = gamma_transform(sys, {{0.25}});
  EXPECT_EQ(g.values[0][0], 0.25);
  EXPECT_EQ(g.values[1][0], 0.25);
  EXPECT_EQ(g.values[2][0], 0.75);  // -0.25 reduced mod 1
}

TEST(GammaTransform, MatchesRationalOracle) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = diaglab::testing::cubic_quadratic_system(rng, 1, 2, 5, 50);
    const auto alpha = random_phases(rng, sys.equations());
    const auto g = gamma_transform(sys, {alpha});
    for (std::size_t j = 0; j < sys.variables(); ++j) {
      std::size_t idx = 0;
      for (std::size_t b = 0; b < sys.blocks().size(); ++b) {
        Rational acc = 0;
        for (const auto& row : sys.blocks()[b].rows) acc += Rational(row[j]) * Rational(alpha[idx++]);
        acc -= Rational(boost::multiprecision::cpp_int(
            boost::multiprecision::numerator(acc) / boost::multiprecision::denominator(acc)));
        if (acc < 0) acc += 1;
        const double expect = static_cast<double>(acc);
        const double diff = std::abs(g.values[j][b] - expect);
        EXPECT_LE(std::min(diff, 1 - diff), 2e-16);
      }
    }
  }
}

TEST(LambdaTheta, Transforms) {
  const auto sys = single_form(2, {2, -3});
  RationalPoint p{5, {2}};
  const auto lam = lambda_transform(sys, p);
  EXPECT_EQ(lam.values[0][0], 4);
  EXPECT_EQ(lam.values[1][0], -6);
  const double beta[1] = {0.125};
  const auto th = theta_transform(sys, beta);
  EXPECT_EQ(th.values[0][0], 0.25);
  EXPECT_EQ(th.values[1][0], -0.375);
}

TEST(EvalS, Examples) {
  const std::int64_t a1[1] = {1};
  EXPECT_EQ(eval_S(2, 1, a1).value, Complex(1, 0));
  EXPECT_LT(std::abs(eval_S(2, 2, a1).value), 1e-15);
  const auto s3 = eval_S(2, 3, a1).value;
  EXPECT_LT(std::abs(s3 - (1.0 + 2.0 * unit_root(1.0 / 3))), 1e-14);
  EXPECT_NEAR(std::abs(s3), std::sqrt(3.0), 1e-14);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::int64_t q = 1 + static_cast<std::int64_t>(rng() % 60);
    const std::int64_t a[2] = {static_cast<std::int64_t>(rng() % 100), static_cast<std::int64_t>(rng() % 100)};
    EXPECT_LE(std::abs(eval_S(3, q, a).value), static_cast<double>(q) + 1e-9);
  }
}

TEST(WeylRatio, GaussSumsHaveUnitRatio) {
  for (std::int64_t q : {3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97})
    for (std::int64_t a = 1; a < q; a += 1 + q / 7) {
      const std::int64_t av[1] = {a};
      const auto w = weyl_ratio_S(2, q, av);
      EXPECT_NEAR(w.ratio, 1.0, 1e-9) << q << " " << a;
      EXPECT_FALSE(w.degenerate);
    }
  const std::int64_t zero[2] = {7, 14};
  const auto w = weyl_ratio_S(3, 7, zero);
  EXPECT_TRUE(w.degenerate);
  EXPECT_EQ(w.content, 7);
}

TEST(EvalV, Examples) {
  const double zero[2] = {0, 0};
  EXPECT_EQ(eval_v(3, zero, 2.5).value, Complex(5, 0));
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> b = random_phases(rng, 2);
    for (auto& x : b) x *= 10;
    const auto v = eval_v(3, b, 1.0).value;
    EXPECT_LT(std::abs(eval_v(3, negate(b), 1.0).value - std::conj(v)), 1e-8);
  }
}

TEST(EvalV, FresnelAgainstSimpsonOracle) {
  const std::size_t n = 1000000;
  const double h = 2.0 / n;
  Complex acc{0, 0};
  for (std::size_t i = 0; i <= n; ++i) {
    const double z = -1 + h * static_cast<double>(i);
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * unit_root(z * z);
  }
  acc *= h / 3;
  const double beta[1] = {1.0};
  EXPECT_LT(std::abs(eval_v(2, beta, 1.0).value - acc), 1e-6);
}

TEST(EvalV, PanelBudget) {
  const double beta[1] = {1e6};
  QuadratureOptions opts;
  opts.max_panels = 64;
  EXPECT_THROW(eval_v(2, beta, 1.0, opts), DomainError);
}

TEST(DecayRatio, ZeroAndScan) {
  const double zero[1] = {0};
  EXPECT_DOUBLE_EQ(decay_ratio_v(2, zero, 3.0), 2.0);
  for (int k = 2; k <= 3; ++k)
    for (double mag = 1e-2; mag <= 1e4; mag *= std::sqrt(10.0)) {
      std::vector<double> b(k - 1, 0.0);
      b.back() = mag;
      EXPECT_LE(decay_ratio_v(k, b, 1.0), 10.0);
      b.back() = -mag;
      EXPECT_LE(decay_ratio_v(k, b, 1.0), 10.0);
    }
}

TEST(MajorArcApprox, Examples) {
  const auto sys = single_form(2, {1});
  const double zero[1] = {0};
  const auto m = major_arc_approx(sys, 0, {1, {1}}, zero, 10, 1.0);
  EXPECT_NEAR(m.approx.value.real(), 20, 1e-9);
  EXPECT_NEAR(m.exact.value.real(), 21, 1e-9);
  EXPECT_NEAR(m.residual, 1.0, 1e-9);

  const auto half = major_arc_approx(sys, 0, {2, {1}}, zero, 100, 2.0);
  EXPECT_TRUE(std::isfinite(half.residual));
  EXPECT_LE(half.residual, 50 * 4.0);

  const double outside[1] = {1.0};
  EXPECT_THROW(major_arc_approx(sys, 0, {1, {1}}, outside, 10, 1.0), DomainError);
  EXPECT_THROW(major_arc_approx(sys, 0, {2, {2}}, zero, 10, 2.0), DomainError);
}
