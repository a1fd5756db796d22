#pragma once

#include "diaglab/bareiss.hpp"
#include "diaglab/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace diaglab {

// One degree's worth of equations: row i is sum_j rows[i][j] * x_j^degree = 0.
struct EquationBlock {
  int degree = 0;
  std::vector<std::vector<std::int64_t>> rows;

  std::size_t equations() const { return rows.size(); }
  bool operator==(const EquationBlock&) const = default;
};

// A system of diagonal equations in s variables, at most one block per
// degree, blocks stored in increasing degree.
class DiagonalSystem {
 public:
  DiagonalSystem() = default;

  DiagonalSystem(std::size_t variables, std::vector<EquationBlock> blocks)
      : s_(variables), blocks_(std::move(blocks)) {
    if (s_ == 0) throw ParseError("system must have at least one variable");
    std::sort(blocks_.begin(), blocks_.end(),
              [](const EquationBlock& a, const EquationBlock& b) { return a.degree < b.degree; });
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      if (blk.degree < 1) throw ParseError("degree < 1");
      if (b > 0 && blocks_[b - 1].degree == blk.degree)
        throw ParseError("duplicate block for degree " + std::to_string(blk.degree));
      if (blk.rows.empty()) throw ParseError("empty block for degree " + std::to_string(blk.degree));
      for (const auto& row : blk.rows) {
        if (row.size() != s_) throw ParseError("row length mismatch");
      }
    }
  }

  std::size_t variables() const { return s_; }
  const std::vector<EquationBlock>& blocks() const { return blocks_; }

  std::size_t equations() const {
    std::size_t r = 0;
    for (const auto& b : blocks_) r += b.equations();
    return r;
  }

  int max_degree() const { return blocks_.empty() ? 0 : blocks_.back().degree; }
  int min_degree() const { return blocks_.empty() ? 0 : blocks_.front().degree; }

  // r_l, zero when the degree is absent.
  std::size_t equations_of_degree(int degree) const {
    for (const auto& b : blocks_)
      if (b.degree == degree) return b.equations();
    return 0;
  }

  const EquationBlock* block_of_degree(int degree) const {
    for (const auto& b : blocks_)
      if (b.degree == degree) return &b;
    return nullptr;
  }

  bool operator==(const DiagonalSystem&) const = default;

 private:
  std::size_t s_ = 0;
  std::vector<EquationBlock> blocks_;
};

// Circle-method code requires every degree >= 2.
inline void require_no_linear(const DiagonalSystem& sys) {
  if (sys.blocks().empty()) throw DomainError("system has no equations");
  if (sys.min_degree() < 2) throw DomainError("circle-method pipelines require all degrees >= 2");
}

// ---------------------------------------------------------------------------
// System-description documents (JSON):
//   {"s": 3, "equations": [{"degree": 2, "coeffs": [1, 1, -1]}, ...]}
// Rows of one degree keep their document order.

inline DiagonalSystem parse_system(const std::string& text, bool strict = false) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("s") || !doc.contains("equations"))
    throw ParseError("malformed document: expected fields 's' and 'equations'");
  const auto& sj = doc.at("s");
  if (!sj.is_number_integer() || sj.get<std::int64_t>() < 1)
    throw ParseError("malformed document: 's' must be a positive integer");
  const auto s = static_cast<std::size_t>(sj.get<std::int64_t>());
  const auto& eqs = doc.at("equations");
  if (!eqs.is_array()) throw ParseError("malformed document: 'equations' must be a list");

  std::map<int, EquationBlock> by_degree;
  for (const auto& rec : eqs) {
    if (!rec.is_object() || !rec.contains("degree") || !rec.contains("coeffs"))
      throw ParseError("malformed document: equation needs 'degree' and 'coeffs'");
    const auto& dj = rec.at("degree");
    if (!dj.is_number_integer()) throw ParseError("malformed document: degree must be an integer");
    const auto degree = dj.get<std::int64_t>();
    if (degree < 1) throw ParseError("degree < 1");
    if (degree > 64) throw ParseError("degree too large");
    const auto& cj = rec.at("coeffs");
    if (!cj.is_array()) throw ParseError("malformed document: coeffs must be a list");
    std::vector<std::int64_t> row;
    for (const auto& c : cj) {
      if (c.is_number_unsigned()) {
        if (c.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
          throw ParseError("coefficient overflow");
        row.push_back(static_cast<std::int64_t>(c.get<std::uint64_t>()));
      } else if (c.is_number_integer()) {
        row.push_back(c.get<std::int64_t>());
      } else if (c.is_number_float()) {
        throw ParseError("coefficient overflow or non-integer coefficient");
      } else {
        throw ParseError("malformed document: coefficients must be integers");
      }
    }
    if (row.size() != s) throw ParseError("row length mismatch");
    auto& blk = by_degree[static_cast<int>(degree)];
    blk.degree = static_cast<int>(degree);
    if (strict && std::find(blk.rows.begin(), blk.rows.end(), row) != blk.rows.end())
      throw ParseError("duplicate equation row for degree " + std::to_string(degree));
    blk.rows.push_back(std::move(row));
  }
  std::vector<EquationBlock> blocks;
  for (auto& [d, b] : by_degree) blocks.push_back(std::move(b));
  return DiagonalSystem(s, std::move(blocks));
}

inline nlohmann::json system_to_json(const DiagonalSystem& sys) {
  nlohmann::json eqs = nlohmann::json::array();
  for (const auto& b : sys.blocks())
    for (const auto& row : b.rows) eqs.push_back({{"degree", b.degree}, {"coeffs", row}});
  return {{"s", sys.variables()}, {"equations", eqs}};
}

// Canonical form: blocks by degree, rows in stored order, compact JSON.
inline std::string serialize_system(const DiagonalSystem& sys) { return system_to_json(sys).dump(); }

// FNV-1a over the canonical serialization; stable across runs and platforms.
inline std::string system_hash(const DiagonalSystem& sys) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_system(sys)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Derived constants.

struct DerivedConstants {
  std::size_t r = 0;       // total equation count
  std::int64_t K = 0;      // total degree, sum of l * r_l
  std::int64_t kappa = 0;  // sum over the v higher slices of (k_j(k_j+1)/2 - 3)
  std::size_t u = 0;       // r_2
  std::size_t v = 0;       // r_3
  int k = 0;               // maximal degree
  std::optional<std::int64_t> t;  // K / u when u | K
  std::int64_t w = 0;             // K mod u (0 when u = 0)
  bool superposition_shape = false;
  std::vector<int> slice_degrees;  // k_1 >= ... >= k_v, present when superposition_shape
};

// True when the system is a superposition of Vinogradov systems missing the
// linear slice plus extra quadratics: no degree-1 block, degrees 2..k all
// present, r_l nonincreasing in l.
inline bool is_superposition_shape(const DiagonalSystem& sys) {
  if (sys.blocks().empty() || sys.min_degree() != 2) return false;
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (int l = 2; l <= sys.max_degree(); ++l) {
    const auto rl = sys.equations_of_degree(l);
    if (rl == 0 || rl > prev) return false;
    prev = rl;
  }
  return true;
}

// k_j = max{ l : r_l >= j } for j = 1..v (conjugate of the profile r_l).
inline std::vector<int> slice_degrees(const DiagonalSystem& sys) {
  std::vector<int> ks;
  const auto v = sys.equations_of_degree(3);
  for (std::size_t j = 1; j <= v; ++j) {
    int kj = 2;
    for (int l = 3; l <= sys.max_degree(); ++l)
      if (sys.equations_of_degree(l) >= j) kj = l;
    ks.push_back(kj);
  }
  return ks;
}

inline DerivedConstants derived_constants(const DiagonalSystem& sys) {
  DerivedConstants d;
  d.r = sys.equations();
  for (const auto& b : sys.blocks()) d.K += static_cast<std::int64_t>(b.degree) * static_cast<std::int64_t>(b.equations());
  d.u = sys.equations_of_degree(2);
  d.v = sys.equations_of_degree(3);
  d.k = sys.max_degree();
  d.superposition_shape = is_superposition_shape(sys);
  if (d.superposition_shape) {
    d.slice_degrees = slice_degrees(sys);
    for (int kj : d.slice_degrees) d.kappa += kj * (kj + 1) / 2 - 3;
  } else {
    d.kappa = d.K - 2 * static_cast<std::int64_t>(d.u);
  }
  if (d.u >= 1) {
    const auto u = static_cast<std::int64_t>(d.u);
    d.w = d.K % u;
    if (d.w == 0) d.t = d.K / u;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Highly non-singular matrices: every r-column submatrix is invertible.

struct NonSingularVerdict {
  bool non_singular = true;
  bool exhaustive = true;                     // false: sampled ("probabilistic pass")
  std::uint64_t subsets_checked = 0;
  std::vector<std::size_t> singular_columns;  // 0-based witness when non_singular is false
};

struct NonSingularOptions {
  std::uint64_t subset_cap = 1'000'000;
  std::uint64_t seed = 0;
};

inline double binomial(std::size_t n, std::size_t k) {
  double c = 1;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

inline NonSingularVerdict check_highly_non_singular(const std::vector<std::vector<std::int64_t>>& rows,
                                                     const NonSingularOptions& opts = {}) {
  const std::size_t r = rows.size();
  if (r == 0) throw DomainError("empty matrix");
  const std::size_t s = rows.front().size();
  if (s < r) throw DomainError("too few columns");
  std::vector<std::int64_t> flat;
  for (const auto& row : rows) {
    if (row.size() != s) throw ParseError("row length mismatch");
    flat.insert(flat.end(), row.begin(), row.end());
  }

  NonSingularVerdict out;
  auto test = [&](const std::vector<std::size_t>& cols) {
    ++out.subsets_checked;
    if (column_minor(flat, r, s, cols) == 0) {
      out.non_singular = false;
      out.singular_columns = cols;
      return false;
    }
    return true;
  };

  if (binomial(s, r) <= static_cast<double>(opts.subset_cap)) {
    std::vector<std::size_t> cols(r);
    std::iota(cols.begin(), cols.end(), 0);
    while (true) {
      if (!test(cols)) return out;
      std::size_t i = r;
      while (i > 0 && cols[i - 1] == s - r + i - 1) --i;
      if (i == 0) break;
      ++cols[i - 1];
      for (std::size_t j = i; j < r; ++j) cols[j] = cols[j - 1] + 1;
    }
    return out;
  }

  out.exhaustive = false;
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> all(s);
  std::iota(all.begin(), all.end(), 0);
  for (std::uint64_t n = 0; n < opts.subset_cap; ++n) {
    for (std::size_t i = 0; i < r; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, s - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    std::vector<std::size_t> cols(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(r));
    std::sort(cols.begin(), cols.end());
    if (!test(cols)) return out;
  }
  return out;
}

inline bool is_highly_non_singular(const std::vector<std::vector<std::int64_t>>& rows) {
  return check_highly_non_singular(rows).non_singular;
}

// ---------------------------------------------------------------------------
// Validation against the hypotheses of the mean-value and asymptotic results.

struct BlockVerdict {
  int degree = 0;
  NonSingularVerdict verdict;
  bool enough_columns = true;
};

struct ValidationReport {
  std::vector<BlockVerdict> blocks;
  DerivedConstants constants;
  bool u_at_least_2v = false;
  bool u_divides_K = false;
  std::optional<std::int64_t> u0;  // smallest 2v <= u0 <= u with u0 | kappa
  bool s_at_least_2K_plus_1 = false;
  bool cubic_quadratic_shape = false;  // degrees within {2,3}, u >= 3v, s >= 6v+4u+1
  std::int64_t cubic_quadratic_threshold = 0;

  bool all_blocks_non_singular() const {
    return std::all_of(blocks.begin(), blocks.end(),
                       [](const BlockVerdict& b) { return b.enough_columns && b.verdict.non_singular; });
  }
  bool mean_value_hypotheses() const { return u_at_least_2v && u_divides_K; }
};

inline std::optional<std::int64_t> smallest_admissible_u0(std::int64_t u, std::int64_t v, std::int64_t kappa) {
  for (std::int64_t u0 = std::max<std::int64_t>(2 * v, 1); u0 <= u; ++u0)
    if (kappa % u0 == 0) return u0;
  return std::nullopt;
}

inline ValidationReport validate_system(const DiagonalSystem& sys, const NonSingularOptions& opts = {}) {
  ValidationReport rep;
  for (const auto& b : sys.blocks()) {
    BlockVerdict bv;
    bv.degree = b.degree;
    if (b.equations() > sys.variables()) {
      bv.enough_columns = false;
      bv.verdict.non_singular = false;
    } else {
      bv.verdict = check_highly_non_singular(b.rows, opts);
    }
    rep.blocks.push_back(std::move(bv));
  }
  const auto& d = rep.constants = derived_constants(sys);
  const auto u = static_cast<std::int64_t>(d.u);
  const auto v = static_cast<std::int64_t>(d.v);
  const auto s = static_cast<std::int64_t>(sys.variables());
  rep.u_at_least_2v = u >= 2 * v && u >= 1;
  rep.u_divides_K = u >= 1 && d.K % u == 0;
  rep.u0 = smallest_admissible_u0(u, v, d.kappa);
  rep.s_at_least_2K_plus_1 = s >= 2 * d.K + 1;
  rep.cubic_quadratic_threshold = 6 * v + 4 * u + 1;
  rep.cubic_quadratic_shape = sys.min_degree() >= 2 && sys.max_degree() <= 3 && u >= 1 && u >= 3 * v &&
                              s >= rep.cubic_quadratic_threshold;
  return rep;
}

// ---------------------------------------------------------------------------

// Restrict every block to the given (0-based, strictly increasing) columns.
inline DiagonalSystem select_columns(const DiagonalSystem& sys, const std::vector<std::size_t>& columns) {
  if (columns.empty()) throw DomainError("empty column selection");
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] >= sys.variables()) throw DomainError("invalid column index " + std::to_string(columns[i]));
    if (i > 0 && columns[i] <= columns[i - 1]) throw DomainError("column selection must be strictly increasing");
  }
  std::vector<EquationBlock> blocks;
  for (const auto& b : sys.blocks()) {
    EquationBlock nb{b.degree, {}};
    for (const auto& row : b.rows) {
      std::vector<std::int64_t> nr;
      for (auto c : columns) nr.push_back(row[c]);
      nb.rows.push_back(std::move(nr));
    }
    blocks.push_back(std::move(nb));
  }
  return DiagonalSystem(columns.size(), std::move(blocks));
}

// Convenience constructors used by tests, tools and the acceptance suite.
inline DiagonalSystem single_form(int degree, std::vector<std::int64_t> coeffs) {
  const auto s = coeffs.size();
  return DiagonalSystem(s, {EquationBlock{degree, {std::move(coeffs)}}});
}

// Full Vinogradov system of degrees 1..l with unit coefficients.
inline DiagonalSystem vinogradov_system(std::size_t s, int l) {
  if (l < 1) throw DomainError("degree must be >= 1");
  std::vector<EquationBlock> blocks;
  for (int d = 1; d <= l; ++d) blocks.push_back(EquationBlock{d, {std::vector<std::int64_t>(s, 1)}});
  return DiagonalSystem(s, std::move(blocks));
}

}  // namespace diaglab
