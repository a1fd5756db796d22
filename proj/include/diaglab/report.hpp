#pragma once

#include "diaglab/analysis.hpp"
#include "diaglab/circle.hpp"
#include "diaglab/counting.hpp"
#include "diaglab/expsums.hpp"
#include "diaglab/systems.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace diaglab {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// Shortest decimal that round-trips to the same double.
inline std::string format_double(double x) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline Json complex_json(const Complex& z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

inline Json to_json(const ComplexSample& c) {
  return Json{{"re", c.value.real()}, {"im", c.value.imag()}, {"error", c.error}};
}

inline Json to_json(const DerivedConstants& d) {
  Json j{{"r", d.r}, {"K", d.K}, {"kappa", d.kappa}, {"u", d.u}, {"v", d.v}, {"k", d.k}};
  j["t"] = d.t ? Json(*d.t) : Json(nullptr);
  j["w"] = d.w;
  j["superposition_shape"] = d.superposition_shape;
  j["slice_degrees"] = d.slice_degrees;
  return j;
}

inline Json to_json(const RangeVerdict& rv) {
  return Json{{"divisible_total_degree", rv.divisible_total_degree},
              {"admissible_u0", rv.admissible_u0},
              {"u0", rv.u0 ? Json(*rv.u0) : Json(nullptr)},
              {"remainder_ranges", rv.remainder_ranges},
              {"large_s", rv.large_s},
              {"small_s", rv.small_s},
              {"even_kappa_two_quadratics", rv.even_kappa_two_quadratics},
              {"w", rv.w}};
}

inline std::string singular_columns_message(const std::vector<std::size_t>& cols) {
  std::string out = "columns {";
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + std::to_string(cols[i] + 1);
  return out + "} singular";
}

inline Json to_json(const ValidationReport& rep) {
  Json blocks = Json::array();
  for (const auto& b : rep.blocks) {
    Json j{{"degree", b.degree},
           {"non_singular", b.enough_columns && b.verdict.non_singular},
           {"exhaustive", b.verdict.exhaustive},
           {"subsets_checked", b.verdict.subsets_checked}};
    if (!b.enough_columns)
      j["message"] = "too few columns";
    else if (!b.verdict.non_singular)
      j["message"] = singular_columns_message(b.verdict.singular_columns);
    else if (!b.verdict.exhaustive)
      j["message"] = "probabilistic pass";
    blocks.push_back(std::move(j));
  }
  return Json{{"blocks", blocks},
              {"constants", to_json(rep.constants)},
              {"u_at_least_2v", rep.u_at_least_2v},
              {"u_divides_K", rep.u_divides_K},
              {"u0", rep.u0 ? Json(*rep.u0) : Json(nullptr)},
              {"s_at_least_2K_plus_1", rep.s_at_least_2K_plus_1},
              {"cubic_quadratic_shape", rep.cubic_quadratic_shape},
              {"cubic_quadratic_threshold", rep.cubic_quadratic_threshold},
              {"all_blocks_non_singular", rep.all_blocks_non_singular()}};
}

inline Json to_json(const LocalDensityReport& rep) {
  Json it = Json::array(), prim = Json::array();
  for (const auto& [i, a] : rep.iterates) it.push_back({i, a});
  for (const auto& [i, a] : rep.primitive_iterates) prim.push_back({i, a});
  return Json{{"p", rep.p},         {"chi_p", rep.chi_p},           {"stabilized", rep.stabilized},
              {"i_used", rep.i_used}, {"i_min", rep.i_min},         {"truncated", rep.truncated},
              {"iterates", it},     {"primitive_iterates", prim}};
}

inline Json to_json(const SingularSeriesReport& rep) {
  Json terms = Json::array();
  for (const auto& [q, a] : rep.terms) terms.push_back({q, a});
  Json j{{"Q", rep.Q}, {"partial", rep.partial}};
  j["partial_exact"] = rep.partial_exact ? Json(rep.partial_exact->str()) : Json(nullptr);
  j["cauchy_gap"] = rep.cauchy_gap;
  j["terms"] = terms;
  return j;
}

inline Json to_json(const SingularIntegralReport& rep) {
  Json j{{"method", rep.method}, {"value", rep.value}, {"error", rep.error}};
  if (rep.method == "quadrature") {
    j["Q"] = rep.Q;
    j["cauchy_gap"] = rep.cauchy_gap;
  } else {
    j["T"] = rep.T;
    j["samples"] = rep.samples;
    j["seed"] = rep.seed;
  }
  return j;
}

inline Json to_json(const PadicWitness& w) {
  Json j{{"p", w.p}, {"found", w.found}, {"message", w.message}};
  if (w.found) {
    j["level"] = w.level;
    j["delta"] = w.delta;
    j["x"] = w.x;
  }
  return j;
}

inline Json to_json(const RealWitness& w) {
  Json j{{"found", w.found}, {"starts_used", w.starts_used}};
  if (w.found) {
    j["x"] = w.x;
    j["residual"] = w.residual;
    j["rank"] = w.rank;
  }
  return j;
}

inline Json to_json(const PredictionReport& rep) {
  Json local = Json::array();
  for (const auto& l : rep.local) local.push_back(to_json(l));
  Json j{{"exponent", rep.exponent},
         {"constant", rep.constant},
         {"chi_infinity", to_json(rep.chi_infinity)}};
  j["cross_check"] = rep.cross_check ? to_json(*rep.cross_check) : Json(nullptr);
  j["P0"] = rep.P0;
  j["local_product"] = rep.local_product;
  j["real_witness"] = rep.real_witness;
  j["chi_p"] = local;
  j["caveats"] = rep.caveats;
  return j;
}

inline Json to_json(const CompareRow& row) {
  return Json{{"X", row.X},
              {"count", row.count.str()},
              {"predicted", row.predicted},
              {"ratio", row.degenerate ? Json(nullptr) : Json(row.ratio)},
              {"degenerate", row.degenerate}};
}

inline Json to_json(const ExponentFit& fit) {
  return Json{{"slope", fit.slope}, {"intercept", fit.intercept}, {"residual", fit.residual}};
}

// Fixed-schema CSV with '#' metadata lines ahead of the header.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw std::logic_error("csv row width mismatch");
    rows_.push_back(std::move(row));
  }

  std::string str(const std::vector<std::string>& metadata) const {
    std::ostringstream os;
    for (const auto& m : metadata) os << "# " << m << '\n';
    write_row(os, header_);
    for (const auto& r : rows_) write_row(os, r);
    return os.str();
  }

 private:
  static void write_row(std::ostringstream& os, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct ReportEnvelope {
  std::string command;
  Json config;
  std::uint64_t seed = 0;
  std::optional<std::string> system_hash;

  Json wrap(Json result) const {
    Json j{{"tool", "diaglab"}, {"version", kToolVersion}, {"command", command}, {"config", config}, {"seed", seed}};
    j["system_hash"] = system_hash ? Json(*system_hash) : Json(nullptr);
    j["result"] = std::move(result);
    return j;
  }

  std::vector<std::string> csv_metadata() const {
    return {std::string("diaglab ") + kToolVersion + " " + command, "config " + config.dump(),
            "seed " + std::to_string(seed), "system_hash " + (system_hash ? *system_hash : std::string("none"))};
  }
};

}  // namespace diaglab
