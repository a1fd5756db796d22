#include "diaglab/counting.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace diaglab;
using diaglab::testing::cubic_quadratic_system;
using diaglab::testing::random_row;
using diaglab::testing::random_system;

namespace {

// Literal six-fold loop over the shift system.
std::uint64_t shift_system_brute(std::int64_t X, std::int64_t H) {
  std::uint64_t n = 0;
  for (std::int64_t x1 = -X; x1 <= X; ++x1)
    for (std::int64_t x2 = -X; x2 <= X; ++x2)
      for (std::int64_t z1 = -X; z1 <= X; ++z1)
        for (std::int64_t z2 = -X; z2 <= X; ++z2)
          for (std::int64_t h1 = -H; h1 <= H; ++h1)
            for (std::int64_t h2 = -H; h2 <= H; ++h2)
              if (x1 - x2 == h1 - h2 && x1 * x1 - x2 * x2 == 2 * (h1 * z1 - h2 * z2)) ++n;
  return n;
}

DiagonalSystem permute_columns(const DiagonalSystem& sys, const std::vector<std::size_t>& perm) {
  std::vector<EquationBlock> blocks = sys.blocks();
  for (auto& b : blocks)
    for (auto& row : b.rows) {
      std::vector<std::int64_t> out(row.size());
      for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[perm[j]];
      row = out;
    }
  return DiagonalSystem(sys.variables(), blocks);
}

}  // namespace

TEST(ValueVector, Examples) {
  const auto quad = single_form(2, {1, 1, -1});
  EXPECT_EQ(value_vector(quad, 2, 0), std::vector<i128>{0});
  EXPECT_EQ(value_vector(quad, 2, 2), std::vector<i128>{-4});
  EXPECT_THROW(value_vector(quad, 3, 1), DomainError);

  std::mt19937_64 rng(1);
  const auto sys = cubic_quadratic_system(rng, 1, 3, 3, 5);
  const auto v = value_vector(sys, 0, -3);
  ASSERT_EQ(v.size(), 4u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(v[i], i128(sys.blocks()[0].rows[i][0]) * 9);
  EXPECT_EQ(v[3], i128(sys.blocks()[1].rows[0][0]) * -27);
}

TEST(ValueVector, OverflowIsReported) {
  const auto sys = single_form(7, {INT64_MAX});
  try {
    value_vector(sys, 0, 1000000);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("value overflow; reduce X"), std::string::npos);
  }
  EXPECT_THROW(count_homogeneous(single_form(9, {INT64_MAX, 1}), 100000), DomainError);
}

TEST(Distribution, Examples) {
  const auto quad = single_form(2, {1});
  const auto empty = distribution(quad, {}, 3);
  ASSERT_EQ(empty.size(), 1u);
  EXPECT_EQ(empty.entries()[0].key, 0);
  EXPECT_EQ(empty.entries()[0].count, 1u);

  const auto t = distribution(quad, {0}, 1);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.find(0), 1u);
  EXPECT_EQ(t.find(1), 2u);
}

TEST(Distribution, TwoVariablesMatchOracle) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sys = random_system(rng, 2, 3, 3);
    const std::int64_t X = static_cast<std::int64_t>(rng() % 5);
    const auto codec = codec_for(sys, X);
    const auto t = distribution(sys, {0, 1}, X, -1);
    std::map<i128, std::uint64_t> expect;
    for (std::int64_t a = -X; a <= X; ++a)
      for (std::int64_t b = -X; b <= X; ++b) {
        auto va = value_vector(sys, 0, a), vb = value_vector(sys, 1, b);
        for (std::size_t i = 0; i < va.size(); ++i) va[i] = -(va[i] + vb[i]);
        ++expect[codec.encode(va)];
      }
    ASSERT_EQ(t.size(), expect.size());
    for (const auto& [k, c] : expect) EXPECT_EQ(t.find(k), c);
    EXPECT_EQ(t.total(), enumeration_size(2, X));
  }
}

TEST(CountHomogeneous, Examples) {
  EXPECT_EQ(count_homogeneous(single_form(2, {1, 1, -1}), 0).count, 1);
  EXPECT_EQ(count_homogeneous(single_form(2, {1, 1, -1}), 5).count,
            enumerate_oracle(single_form(2, {1, 1, -1}), 5, CountMode::Homogeneous).count);
  EXPECT_EQ(count_homogeneous(single_form(2, {1, 1, 1, 1}), 7).count, 1);
}

TEST(CountHomogeneous, PythagoreanTriplesHandCount) {
  // x^2 + y^2 = z^2 with |x|,|y|,|z| <= 5: origin, 40 axis points (0,y,±y),
  // (x,0,±x), and the 16 signed variants of (3,4,5),(4,3,5).
  EXPECT_EQ(count_homogeneous(single_form(2, {1, 1, -1}), 5).count, 1 + 40 + 16);
}

TEST(CountDifference, Examples) {
  for (std::int64_t X : {0, 1, 5, 17}) EXPECT_EQ(count_difference(single_form(2, {3}), X).count, 4 * X + 1);
  std::mt19937_64 rng(2);
  const auto sys = cubic_quadratic_system(rng, 1, 3, 3, 4);
  EXPECT_EQ(count_difference(sys, 4).count, enumerate_oracle(sys, 4, CountMode::Difference).count);
}

TEST(CountVinogradov, Examples) {
  for (int l = 1; l <= 4; ++l)
    for (std::int64_t X : {0, 3, 10}) EXPECT_EQ(count_vinogradov(1, l, X).count, 2 * X + 1);
  EXPECT_EQ(count_vinogradov(2, 2, 5).count, enumerate_oracle(vinogradov_system(2, 2), 5, CountMode::Difference).count);
  // J_{2,2}: only the trivial permutations of (y1, y2), 2(2X+1)^2 - (2X+1).
  EXPECT_EQ(count_vinogradov(2, 2, 5).count, 2 * 121 - 11);
}

TEST(CountVinogradov, J32RatioGrowsSlowly) {
  double prev = 0;
  for (std::int64_t X : {16, 32, 64, 128}) {
    const auto j = count_vinogradov(3, 2, X).count;
    const double ratio = static_cast<double>(j) / std::pow(static_cast<double>(X), 3);
    EXPECT_GT(ratio, prev);
    if (prev > 0) EXPECT_LT(ratio / prev, 1.5);
    prev = ratio;
  }
}

TEST(CountShiftSystem, Examples) {
  EXPECT_EQ(count_shift_system(0, 0).count, 1);
  EXPECT_EQ(count_shift_system(6, 6).count, shift_system_brute(6, 6));
  EXPECT_EQ(count_shift_system(3, 5).count, shift_system_brute(3, 5));
  EXPECT_EQ(count_shift_system(5, 1).count, shift_system_brute(5, 1));
  const double bound = 100.0 * 400.0 * std::pow(40.0, 1.1);
  EXPECT_LE(static_cast<double>(count_shift_system(20, 20).count), bound);
}

TEST(EnumerateOracle, GuardAndZero) {
  EXPECT_THROW(enumerate_oracle(single_form(2, std::vector<std::int64_t>(10, 1)), 10, CountMode::Homogeneous),
               DomainError);
  const auto sys = single_form(3, {1, 2, -3});
  EXPECT_EQ(enumerate_oracle(sys, 0, CountMode::Homogeneous).count, 1);
  EXPECT_EQ(enumerate_oracle(sys, 0, CountMode::Difference).count, 1);
}

TEST(OracleEquivalence, HomogeneousRandom) {
  std::mt19937_64 rng(1001);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t s = 1 + rng() % 4;
    const auto sys = random_system(rng, s, 3, 3);
    const std::int64_t X = static_cast<std::int64_t>(rng() % 6);
    ASSERT_EQ(count_homogeneous(sys, X).count, enumerate_oracle(sys, X, CountMode::Homogeneous).count)
        << serialize_system(sys) << " X=" << X;
  }
}

TEST(OracleEquivalence, DifferenceRandom) {
  std::mt19937_64 rng(1002);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t s = 1 + rng() % 3;
    const auto sys = random_system(rng, s, 3, 3);
    const std::int64_t X = static_cast<std::int64_t>(rng() % 5);
    ASSERT_EQ(count_difference(sys, X).count, enumerate_oracle(sys, X, CountMode::Difference).count)
        << serialize_system(sys) << " X=" << X;
  }
}

TEST(OracleEquivalence, AnySplitAgrees) {
  std::mt19937_64 rng(1003);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = random_system(rng, 4, 3, 4);
    const auto expect = enumerate_oracle(sys, 3, CountMode::Homogeneous).count;
    for (std::size_t split = 0; split <= 4; ++split) {
      CountOptions opts;
      opts.split = split;
      EXPECT_EQ(count_homogeneous(sys, 3, opts).count, expect);
    }
  }
}

TEST(CountProperties, RowScalingAndPermutation) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 15; ++trial) {
    const auto sys = random_system(rng, 4, 3, 3);
    const std::int64_t X = 4;
    const auto base_h = count_homogeneous(sys, X).count;
    const auto base_d = count_difference(select_columns(sys, {0, 1, 2}), 3).count;

    auto blocks = sys.blocks();
    for (auto& b : blocks)
      for (auto& row : b.rows) {
        std::int64_t f = static_cast<std::int64_t>(rng() % 5) + 1;
        if (rng() % 2) f = -f;
        for (auto& c : row) c *= f;
      }
    const DiagonalSystem scaled(sys.variables(), blocks);
    EXPECT_EQ(count_homogeneous(scaled, X).count, base_h);

    std::vector<std::size_t> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    EXPECT_EQ(count_homogeneous(permute_columns(sys, perm), X).count, base_h);
    std::vector<std::size_t> p3{2, 0, 1};
    EXPECT_EQ(count_difference(permute_columns(select_columns(sys, {0, 1, 2}), p3), 3).count, base_d);
  }
}

TEST(CountProperties, MonotoneAndDiagonalBound) {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = random_system(rng, 3, 3, 5);
    BigInt prev_h = 0, prev_d = 0;
    for (std::int64_t X = 0; X <= 8; ++X) {
      const auto h = count_homogeneous(sys, X).count;
      const auto d = count_difference(sys, X).count;
      EXPECT_GE(h, prev_h);
      EXPECT_GE(d, prev_d);
      EXPECT_GE(d, enumeration_size(3, X));
      prev_h = h;
      prev_d = d;
    }
  }
}

TEST(CountProperties, WorkerCountDoesNotChangeResults) {
  std::mt19937_64 rng(79);
  const auto sys = cubic_quadratic_system(rng, 1, 3, 6, 5);
  const auto base = count_homogeneous(sys, 12);
  for (unsigned w : {2u, 3u, 8u}) {
    CountOptions opts;
    opts.convolve.workers = w;
    EXPECT_EQ(count_homogeneous(sys, 12, opts).count, base.count);
  }
  const auto quad = single_form(2, {1, 2, 3, -4, -5});
  const auto ref = count_difference(quad, 20);
  CountOptions opts;
  opts.convolve.workers = 5;
  EXPECT_EQ(count_difference(quad, 20, opts).count, ref.count);
}

TEST(CountProperties, MemoryCapIsEnforced) {
  CountOptions opts;
  opts.convolve.max_entries = 1000;
  EXPECT_THROW(count_difference(vinogradov_system(3, 3), 30, opts), DomainError);
}
