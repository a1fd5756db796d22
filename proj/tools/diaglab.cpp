#include "diaglab/analysis.hpp"
#include "diaglab/circle.hpp"
#include "diaglab/counting.hpp"
#include "diaglab/expsums.hpp"
#include "diaglab/report.hpp"
#include "diaglab/systems.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace diaglab;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string system_path;
  std::string X;
  std::string mode = "homogeneous";
  bool oracle = false;
  bool timing = false;
  std::int64_t Q = 128;
  double T = 32;
  std::int64_t P0 = 100;
  int imax = 6;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::uint64_t samples = std::uint64_t(1) << 22;
  std::string method = "auto";
  bool cross_check = false;
  std::string out;
  std::string format;
  // expsum
  std::string kind = "S";
  int degree = 2;
  std::vector<double> phases;
  std::int64_t H = 0;
  std::int64_t q = 1;
  std::vector<std::int64_t> a;
  double Xreal = 1;
  // localsolve
  int depth = 4;
  int starts = 64;
  // fit
  std::string input;
  std::int64_t s = 0, K = 0;
};

// "4,8,16" or geometric "start:stop:factor"
std::vector<std::int64_t> parse_x_list(const std::string& text) {
  std::vector<std::int64_t> out;
  auto number = [&](const std::string& t) {
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(t, &used);
    } catch (const std::exception&) {
      throw UsageError("invalid --X value '" + t + "'");
    }
    if (used != t.size() || v < 0) throw UsageError("invalid --X value '" + t + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw UsageError("--X range must be START:STOP:FACTOR");
    const auto start = number(parts[0]), stop = number(parts[1]), factor = number(parts[2]);
    if (start < 1 || factor < 2) throw UsageError("--X range needs START >= 1 and FACTOR >= 2");
    for (std::int64_t x = start; x <= stop; x *= factor) out.push_back(x);
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) throw UsageError("--X list is empty");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] <= out[i - 1]) throw UsageError("--X values must be strictly increasing");
  return out;
}

DiagonalSystem load_system(const std::string& path) {
  if (path.empty()) throw UsageError("--system is required");
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read system file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_system(buf.str());
}

GrowthSeries read_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read input file '" + path + "'");
  GrowthSeries series;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string xs, cs;
    std::getline(ss, xs, ',');
    std::getline(ss, cs, ',');
    if (xs == "X") continue;
    try {
      series.emplace_back(std::stoll(xs), BigInt(cs));
    } catch (const std::exception&) {
      throw UsageError("malformed series row '" + line + "'");
    }
  }
  return series;
}

CountMode count_mode(const std::string& mode) {
  return mode == "difference" ? CountMode::Difference : CountMode::Homogeneous;
}

CountReport run_count(const DiagonalSystem& sys, std::int64_t X, const RunConfig& cfg) {
  CountOptions opts;
  opts.convolve.workers = cfg.workers;
  if (cfg.oracle) return enumerate_oracle(sys, X, count_mode(cfg.mode));
  return cfg.mode == "difference" ? count_difference(sys, X, opts) : count_homogeneous(sys, X, opts);
}

class Runner {
 public:
  explicit Runner(RunConfig cfg) : cfg_(std::move(cfg)) {}

  int run() {
    const auto& c = cfg_.command;
    if (c == "validate") return validate();
    if (c == "count") return count();
    if (c == "expsum") return expsum();
    if (c == "sseries") return sseries();
    if (c == "sintegral") return sintegral();
    if (c == "localsolve") return localsolve();
    if (c == "predict") return predict_cmd();
    if (c == "fit") return fit();
    throw UsageError("unknown subcommand");
  }

 private:
  std::string format(const char* fallback) const { return cfg_.format.empty() ? fallback : cfg_.format; }

  void emit(const std::string& text) const {
    if (cfg_.out.empty()) {
      std::cout << text;
      std::cout.flush();
      return;
    }
    std::ofstream out(cfg_.out, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + cfg_.out + "'");
    out << text;
  }

  void emit_json(const ReportEnvelope& env, Json result) const { emit(env.wrap(std::move(result)).dump(2) + "\n"); }

  ReportEnvelope envelope(Json config, const DiagonalSystem* sys, bool seeded = false) const {
    ReportEnvelope env;
    env.command = cfg_.command;
    config["system"] = cfg_.system_path.empty() ? Json(nullptr) : Json(cfg_.system_path);
    env.config = std::move(config);
    env.seed = seeded ? cfg_.seed : 0;
    if (sys) env.system_hash = system_hash(*sys);
    return env;
  }

  int validate() {
    const auto sys = load_system(cfg_.system_path);
    const auto rep = validate_system(sys, NonSingularOptions{1'000'000, cfg_.seed});
    Json result = to_json(rep);
    std::optional<RangeVerdict> ranges;
    if (rep.constants.superposition_shape) ranges = established_ranges(sys);
    result["ranges"] = ranges ? to_json(*ranges) : Json(nullptr);
    const auto env = envelope(Json::object(), &sys);
    if (format("json") == "csv") {
      CsvTable t({"degree", "non_singular", "exhaustive", "subsets_checked", "message"});
      for (const auto& b : result["blocks"])
        t.add({std::to_string(b["degree"].get<int>()), b["non_singular"].get<bool>() ? "true" : "false",
               b["exhaustive"].get<bool>() ? "true" : "false", std::to_string(b["subsets_checked"].get<std::uint64_t>()),
               b.contains("message") ? b["message"].get<std::string>() : ""});
      emit(t.str(env.csv_metadata()));
    } else {
      emit_json(env, result);
    }
    for (const auto& b : result["blocks"])
      if (!b["non_singular"].get<bool>())
        std::cerr << "degree " << b["degree"].get<int>() << ": " << b["message"].get<std::string>() << "\n";
    return rep.all_blocks_non_singular() ? 0 : 1;
  }

  int count() {
    const auto sys = load_system(cfg_.system_path);
    const auto xs = parse_x_list(cfg_.X);
    Json config{{"X", xs}, {"mode", cfg_.mode}, {"oracle", cfg_.oracle}, {"timing", cfg_.timing}};
    const auto env = envelope(config, &sys);
    CsvTable t({"X", "count", "method", "seconds"});
    Json rows = Json::array();
    for (auto X : xs) {
      std::cerr << "count X=" << X << " ..." << std::endl;
      const auto rep = run_count(sys, X, cfg_);
      const std::string secs = cfg_.timing ? format_double(rep.seconds) : "";
      t.add({std::to_string(X), rep.count.str(), to_string(rep.method), secs});
      Json row{{"X", X}, {"count", rep.count.str()}, {"method", to_string(rep.method)}};
      row["seconds"] = cfg_.timing ? Json(rep.seconds) : Json(nullptr);
      rows.push_back(row);
    }
    if (format("csv") == "csv")
      emit(t.str(env.csv_metadata()));
    else
      emit_json(env, Json{{"rows", rows}});
    return 0;
  }

  int expsum() {
    Json config{{"kind", cfg_.kind}, {"degree", cfg_.degree}, {"phases", cfg_.phases}, {"X", cfg_.Xreal},
                {"H", cfg_.H},       {"q", cfg_.q},           {"a", cfg_.a}};
    const auto env = envelope(config, nullptr);
    const auto X = static_cast<std::int64_t>(cfg_.Xreal);
    auto integral_X = [&] {
      if (cfg_.kind != "v" && static_cast<double>(X) != cfg_.Xreal) throw UsageError("--X must be an integer");
    };
    Json result;
    if (cfg_.kind == "f") {
      integral_X();
      result = to_json(eval_f(cfg_.degree, cfg_.phases, X));
    } else if (cfg_.kind == "g") {
      integral_X();
      result = to_json(eval_g(cfg_.degree, cfg_.phases, X));
    } else if (cfg_.kind == "K") {
      integral_X();
      result = to_json(eval_K(cfg_.degree, cfg_.phases, X, cfg_.H));
    } else if (cfg_.kind == "S") {
      std::vector<std::int64_t> a = cfg_.a;
      if (a.empty()) a.assign(static_cast<std::size_t>(std::max(cfg_.degree - 1, 1)), 1);
      result = to_json(eval_S(cfg_.degree, cfg_.q, a));
    } else if (cfg_.kind == "v") {
      result = to_json(eval_v(cfg_.degree, cfg_.phases, cfg_.Xreal));
    } else if (cfg_.kind == "weyl") {
      const auto w = weyl_ratio_S(cfg_.degree, cfg_.q, cfg_.a);
      result = Json{{"ratio", w.ratio}, {"content", w.content}, {"degenerate", w.degenerate}};
    } else if (cfg_.kind == "decay") {
      result = Json{{"ratio", decay_ratio_v(cfg_.degree, cfg_.phases, cfg_.Xreal)}};
    }
    if (format("json") == "csv") {
      CsvTable t({"kind", "re", "im", "error"});
      if (!result.contains("re")) throw UsageError("csv output is only available for sum values");
      t.add({cfg_.kind, format_double(result["re"].get<double>()), format_double(result["im"].get<double>()),
             format_double(result["error"].get<double>())});
      emit(t.str(env.csv_metadata()));
    } else {
      emit_json(env, result);
    }
    return 0;
  }

  int sseries() {
    const auto sys = load_system(cfg_.system_path);
    if (cfg_.method != "auto" && cfg_.method != "exact" && cfg_.method != "float")
      throw UsageError("--method must be exact or float for sseries");
    const auto method = cfg_.method == "float" ? SeriesMethod::Float : SeriesMethod::Exact;
    const auto rep = singular_series_truncated(sys, cfg_.Q, method);
    const auto env = envelope(Json{{"Q", cfg_.Q}, {"method", method == SeriesMethod::Float ? "float" : "exact"}}, &sys);
    if (format("json") == "csv") {
      CsvTable t({"q", "A", "partial"});
      double partial = 0;
      for (const auto& [q, a] : rep.terms) {
        partial += a;
        t.add({std::to_string(q), format_double(a), format_double(partial)});
      }
      emit(t.str(env.csv_metadata()));
    } else {
      emit_json(env, to_json(rep));
    }
    return 0;
  }

  int sintegral() {
    const auto sys = load_system(cfg_.system_path);
    std::string method = cfg_.method;
    if (method == "auto") method = sys.equations() == 1 ? "quadrature" : "schmidt";
    Json config{{"method", method}};
    Json result;
    bool seeded = false;
    if (method == "quadrature") {
      config["Q"] = cfg_.Q;
      result = to_json(singular_integral_Q(sys, static_cast<double>(cfg_.Q)));
    } else if (method == "schmidt") {
      config["T"] = cfg_.T;
      config["samples"] = cfg_.samples;
      seeded = true;
      result = to_json(chi_infinity_schmidt(sys, cfg_.T, cfg_.samples, cfg_.seed, cfg_.workers));
    } else if (method == "abs") {
      config["W"] = cfg_.Q;
      result = Json{{"method", "abs"}, {"W", cfg_.Q}, {"value", singular_integral_abs(sys, static_cast<double>(cfg_.Q))}};
    } else {
      throw UsageError("--method must be quadrature, schmidt or abs for sintegral");
    }
    const auto env = envelope(config, &sys, seeded);
    if (format("json") == "csv") {
      CsvTable t({"method", "value", "error"});
      t.add({method, format_double(result["value"].get<double>()),
             result.contains("error") ? format_double(result["error"].get<double>()) : ""});
      emit(t.str(env.csv_metadata()));
    } else {
      emit_json(env, result);
    }
    return 0;
  }

  int localsolve() {
    const auto sys = load_system(cfg_.system_path);
    Json primes = Json::array();
    CsvTable t({"place", "found", "level", "delta", "witness"});
    for (auto p : primes_up_to(cfg_.P0)) {
      const auto w = local_solubility_p(sys, p, cfg_.depth);
      primes.push_back(to_json(w));
      std::string x;
      for (std::size_t i = 0; i < w.x.size(); ++i) x += (i ? " " : "") + std::to_string(w.x[i]);
      t.add({std::to_string(p), w.found ? "true" : "false", w.found ? std::to_string(w.level) : "",
             w.found ? std::to_string(w.delta) : "", x});
    }
    const auto real = local_solubility_real(sys, cfg_.starts, cfg_.seed);
    std::string rx;
    for (std::size_t i = 0; i < real.x.size(); ++i) rx += (i ? " " : "") + format_double(real.x[i]);
    t.add({"real", real.found ? "true" : "false", "", "", rx});
    const auto env =
        envelope(Json{{"P0", cfg_.P0}, {"depth", cfg_.depth}, {"starts", cfg_.starts}}, &sys, true);
    if (format("json") == "csv")
      emit(t.str(env.csv_metadata()));
    else
      emit_json(env, Json{{"p_adic", primes}, {"real", to_json(real)}});
    return 0;
  }

  int predict_cmd() {
    const auto sys = load_system(cfg_.system_path);
    PredictOptions opts;
    opts.P0 = cfg_.P0;
    opts.i_max = cfg_.imax;
    opts.tol = cfg_.tol;
    opts.Q = static_cast<double>(cfg_.Q);
    opts.T = cfg_.T;
    opts.samples = cfg_.samples;
    opts.seed = cfg_.seed;
    opts.workers = cfg_.workers;
    opts.cross_check = cfg_.cross_check;
    if (cfg_.method == "quadrature")
      opts.method = IntegralMethod::Quadrature;
    else if (cfg_.method == "schmidt")
      opts.method = IntegralMethod::Schmidt;
    else if (cfg_.method != "auto")
      throw UsageError("--method must be auto, quadrature or schmidt for predict");
    std::vector<std::int64_t> xs;
    if (!cfg_.X.empty()) xs = parse_x_list(cfg_.X);

    Json config{{"P0", cfg_.P0}, {"imax", cfg_.imax}, {"tol", cfg_.tol},         {"Q", cfg_.Q},
                {"T", cfg_.T},   {"samples", cfg_.samples}, {"method", cfg_.method}, {"cross_check", cfg_.cross_check},
                {"X", xs}};
    const auto env = envelope(config, &sys, true);
    const auto pr = predict(sys, opts);
    for (const auto& c : pr.caveats)
      if (c == "no real witness found") std::cerr << "warning: " << c << "\n";

    CountOptions copts;
    copts.convolve.workers = cfg_.workers;
    std::vector<CompareRow> rows;
    for (auto X : xs) {
      std::cerr << "count X=" << X << " ..." << std::endl;
      rows.push_back(compare_row(count_homogeneous(sys, X, copts).count, X, pr.constant, pr.exponent));
    }
    if (format("json") == "csv") {
      CsvTable t({"X", "count", "predicted", "ratio"});
      for (const auto& r : rows)
        t.add({std::to_string(r.X), r.count.str(), format_double(r.predicted),
               r.degenerate ? "degenerate" : format_double(r.ratio)});
      emit(t.str(env.csv_metadata()));
    } else {
      Json result{{"prediction", to_json(pr)}};
      Json cmp = Json::array();
      for (const auto& r : rows) cmp.push_back(to_json(r));
      result["compare"] = cmp;
      emit_json(env, result);
    }
    return 0;
  }

  int fit() {
    GrowthSeries series;
    std::optional<DiagonalSystem> sys;
    std::int64_t s = cfg_.s, K = cfg_.K;
    if (!cfg_.input.empty()) {
      series = read_series(cfg_.input);
    } else {
      sys = load_system(cfg_.system_path);
      for (auto X : parse_x_list(cfg_.X)) series.emplace_back(X, run_count(*sys, X, cfg_).count);
      if (s == 0) s = static_cast<std::int64_t>(sys->variables());
      if (K == 0) K = derived_constants(*sys).K;
    }
    const auto f = fit_exponent(series);
    Json result = to_json(f);
    Json ratios = Json::array();
    if (s > 0) {
      for (const auto& [X, c] : series) ratios.push_back({{"X", X}, {"ratio", conjecture_ratio(c, s, K, X)}});
      result["target_slope"] = std::max(s, 2 * s - K);
      result["doubling_ratios"] = doubling_ratios(series, s, K);
    }
    result["conjecture_ratios"] = ratios;
    Json config{{"input", cfg_.input.empty() ? Json(nullptr) : Json(cfg_.input)},
                {"X", cfg_.X},
                {"mode", cfg_.mode},
                {"s", s},
                {"K", K}};
    const auto env = envelope(config, sys ? &*sys : nullptr);
    if (format("json") == "csv") {
      CsvTable t({"slope", "intercept", "residual"});
      t.add({format_double(f.slope), format_double(f.intercept), format_double(f.residual)});
      emit(t.str(env.csv_metadata()));
    } else {
      emit_json(env, result);
    }
    return 0;
  }

  RunConfig cfg_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diaglab: counts, exponential sums and circle-method predictions for diagonal systems"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "output path (default: standard output)");
    sub->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--workers", cfg.workers, "worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_option("--seed", cfg.seed, "random seed");
  };
  auto with_system = [&](CLI::App* sub) { sub->add_option("--system", cfg.system_path, "system file")->required(); };

  auto* validate = app.add_subcommand("validate", "check coefficient matrices and report hypotheses");
  with_system(validate);
  common(validate);

  auto* count = app.add_subcommand("count", "exact solution counts");
  with_system(count);
  common(count);
  count->add_option("--X", cfg.X, "X list or START:STOP:FACTOR")->required();
  count->add_option("--mode", cfg.mode, "homogeneous or difference")
      ->check(CLI::IsMember({"homogeneous", "difference"}));
  count->add_flag("--oracle", cfg.oracle, "plain enumeration");
  count->add_flag("--timing", cfg.timing, "record wall-clock seconds");

  auto* expsum = app.add_subcommand("expsum", "exponential sums and integrals");
  common(expsum);
  expsum->add_option("--kind", cfg.kind, "f, g, K, S, v, weyl or decay")
      ->check(CLI::IsMember({"f", "g", "K", "S", "v", "weyl", "decay"}));
  expsum->add_option("--degree", cfg.degree, "l for f/g/K, k for S/v/weyl/decay");
  expsum->add_option("--phases", cfg.phases, "phases or betas")->delimiter(',');
  expsum->add_option("--X", cfg.Xreal, "length");
  expsum->add_option("--H", cfg.H, "shift range for K");
  expsum->add_option("--q", cfg.q, "modulus");
  expsum->add_option("--a", cfg.a, "numerators")->delimiter(',');

  auto* sseries = app.add_subcommand("sseries", "truncated singular series");
  with_system(sseries);
  common(sseries);
  sseries->add_option("--Q", cfg.Q, "cutoff")->check(CLI::PositiveNumber);
  sseries->add_option("--method", cfg.method, "exact or float");

  auto* sintegral = app.add_subcommand("sintegral", "singular integral");
  with_system(sintegral);
  common(sintegral);
  sintegral->add_option("--method", cfg.method, "auto, quadrature, schmidt or abs");
  sintegral->add_option("--Q", cfg.Q, "box size (W for abs)")->check(CLI::NonNegativeNumber);
  sintegral->add_option("--T", cfg.T, "Schmidt weight parameter");
  sintegral->add_option("--samples", cfg.samples, "Monte Carlo samples");

  auto* localsolve = app.add_subcommand("localsolve", "p-adic and real solubility");
  with_system(localsolve);
  common(localsolve);
  localsolve->add_option("--P0", cfg.P0, "largest prime checked")->check(CLI::PositiveNumber);
  localsolve->add_option("--depth", cfg.depth, "largest power of p searched")->check(CLI::Range(1, 12));
  localsolve->add_option("--starts", cfg.starts, "Newton starts")->check(CLI::PositiveNumber);

  auto* predict = app.add_subcommand("predict", "predicted asymptotic and comparison with counts");
  with_system(predict);
  common(predict);
  predict->add_option("--X", cfg.X, "X list or START:STOP:FACTOR for the compare table");
  predict->add_option("--P0", cfg.P0, "prime cutoff")->check(CLI::PositiveNumber);
  predict->add_option("--imax", cfg.imax, "largest prime-power level")->check(CLI::Range(2, 12));
  predict->add_option("--tol", cfg.tol, "stabilization tolerance")->check(CLI::PositiveNumber);
  predict->add_option("--Q", cfg.Q, "quadrature box")->check(CLI::PositiveNumber);
  predict->add_option("--T", cfg.T, "Schmidt weight parameter");
  predict->add_option("--samples", cfg.samples, "Monte Carlo samples");
  predict->add_option("--method", cfg.method, "auto, quadrature or schmidt");
  predict->add_flag("--cross-check", cfg.cross_check, "evaluate the other singular-integral method too");

  auto* fit = app.add_subcommand("fit", "log-log exponent fit");
  common(fit);
  fit->add_option("--input", cfg.input, "CSV with X,count rows");
  fit->add_option("--system", cfg.system_path, "system file (counts computed on the fly)");
  fit->add_option("--X", cfg.X, "X list or START:STOP:FACTOR");
  fit->add_option("--mode", cfg.mode, "homogeneous or difference")->check(CLI::IsMember({"homogeneous", "difference"}));
  fit->add_option("--s", cfg.s, "variables, for conjecture ratios");
  fit->add_option("--K", cfg.K, "total degree, for conjecture ratios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    return Runner(cfg).run();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
