// Command-line front end: fit, sample, divergence, marshall, risk, rates, bound.
#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcmle/density.hpp"
#include "lcmle/divergences.hpp"
#include "lcmle/experiments.hpp"
#include "lcmle/marshall.hpp"
#include "lcmle/mle.hpp"
#include "lcmle/rng.hpp"

using namespace lcmle;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string in;
  std::string out;
  std::string format;
};

class Usage : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json num_json(double x) {
  if (std::isfinite(x)) return x;
  return num(x);
}

std::string read_text(const std::string& path) {
  std::ostringstream ss;
  if (path.empty() || path == "-") {
    ss << std::cin.rdbuf();
  } else {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Usage("cannot open " + path);
    ss << f.rdbuf();
  }
  return ss.str();
}

std::vector<double> read_samples(const std::string& path) {
  std::vector<double> xs;
  std::istringstream lines(read_text(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      double x = 0.0;
      const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc() || end != tok.data() + tok.size() || !std::isfinite(x)) {
        throw InvalidSample("line " + std::to_string(lineno) + ": not a finite number: '" + tok + "'");
      }
      xs.push_back(x);
    }
  }
  return xs;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Usage("cannot write " + path);
  f << text;
}

// A named spec, or a path to a density JSON (bare, or the output of fit).
Density load_density(const std::string& text) {
  if (std::filesystem::is_regular_file(text)) {
    json j = json::parse(read_text(text));
    if (j.contains("density")) j = j["density"];
    return Density(density_from_json(j));
  }
  return Density(parse_named(text));
}

ExpSegmentSpec parse_spec(const std::string& text) {
  const NamedDensity named = parse_named("f1:" + text);
  const auto p = named.params();
  return {p[0], p[1], p[2]};
}

std::string format_or(const Common& c, const std::string& fallback) { return c.format.empty() ? fallback : c.format; }

std::string csv_table(const RiskTable& table, const std::optional<BoundCurve>& bound) {
  std::string s = bound ? "n,reps,mean,stderr,bound\n" : "n,reps,mean,stderr\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    s += std::to_string(r.n) + "," + std::to_string(r.reps) + "," + num(r.mean) + "," + num(r.std_error);
    if (bound) s += "," + num(bound->rows[i].bound);
    s += "\n";
  }
  return s;
}

json risk_json(const RiskTable& table, const std::optional<BoundCurve>& bound) {
  json rows = json::array();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    json row = {{"n", r.n},
                {"reps", r.reps},
                {"mean", num_json(r.mean)},
                {"stderr", num_json(r.std_error)},
                {"excluded", r.excluded},
                {"max_residual", num_json(r.max_residual)}};
    if (bound) row["bound"] = num_json(bound->rows[i].bound);
    rows.push_back(row);
  }
  return {{"truth", table.truth}, {"loss", to_string(table.loss)}, {"seed", table.seed}, {"rows", rows}};
}

// Fills unset options from a JSON config object with matching keys.
void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  const json j = json::parse(read_text(path));
  if (!j.is_object()) throw Usage("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) throw Usage("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;
    std::vector<std::string> results;
    auto push = [&](const json& v) { results.push_back(v.is_string() ? v.get<std::string>() : v.dump()); };
    if (value.is_array()) {
      for (const auto& v : value) push(v);
    } else {
      push(value);
    }
    opt->clear();
    for (const auto& r : results) opt->add_result(r);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"log-concave maximum likelihood density estimation"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "random seed")->capture_default_str();
  app.add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--in", common.in, "input path (default stdin)");
  app.add_option("--out", common.out, "output path (default stdout)");
  app.add_option("--format", common.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  // Global flags are accepted after the subcommand too.
  app.fallthrough();

  // fit
  auto* fit = app.add_subcommand("fit", "fit the MLE to newline-delimited samples");
  std::string evaluate;
  fit->add_option("--evaluate", evaluate, "density JSON whose objective on the sample is reported instead");

  // sample
  auto* samp = app.add_subcommand("sample", "draw a sample from a density");
  std::string samp_truth;
  std::size_t samp_n = 0;
  samp->add_option("--truth", samp_truth, "named spec or density JSON")->required();
  samp->add_option("--n", samp_n, "sample size")->required()->check(CLI::PositiveNumber);

  // divergence
  auto* div = app.add_subcommand("divergence", "divergence between two densities");
  std::string div_kind, div_a, div_b;
  std::size_t div_n = 0;
  div->add_option("--kind", div_kind, "tv, hellinger_sq, kl_sq, ks, dks_n, dx_sq")->required();
  div->add_option("--a", div_a, "first density (dx_sq and ks take the sample from --in instead)");
  div->add_option("--b", div_b, "second density")->required();
  div->add_option("--n", div_n, "sample size for dks_n");

  // marshall
  auto* mar = app.add_subcommand("marshall", "check the Marshall-type inequality on simulated samples");
  std::string mar_truth;
  std::size_t mar_n = 0, mar_reps = 0;
  mar->add_option("--truth", mar_truth, "named F* truth")->required();
  mar->add_option("--n", mar_n, "sample size")->required()->check(CLI::PositiveNumber);
  mar->add_option("--reps", mar_reps, "replications")->required()->check(CLI::PositiveNumber);

  // risk and rates share options
  std::string config, truth_text, loss_text = "tv", spec_text;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 0;
  bool log_correction = false;
  int max_iterations = FitOptions{}.max_iterations;
  auto risk_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON object supplying unset options");
    sub->add_option("--truth", truth_text, "named spec or density JSON");
    sub->add_option("--loss", loss_text, "tv, hellinger_sq, kl_sq, dx_sq, ks")->capture_default_str();
    sub->add_option("--n", n_grid, "sample sizes")->delimiter(',');
    sub->add_option("--reps", reps, "replications per n");
    sub->add_option("--max-iterations", max_iterations, "solver iteration cap")->capture_default_str();
  };
  auto* risk = app.add_subcommand("risk", "Monte-Carlo risk table");
  risk_opts(risk);
  risk->add_option("--spec", spec_text, "F1 member alpha,s1,s2 adding the tv bound column");
  auto* rates = app.add_subcommand("rates", "risk table with a log-log slope fit");
  risk_opts(rates);
  rates->add_flag("--log-correction", log_correction, "subtract (5/4) log log n before fitting");

  // bound
  auto* bnd = app.add_subcommand("bound", "explicit total variation bound curve");
  std::string bnd_spec, bnd_truth;
  std::vector<std::size_t> bnd_n;
  bool bnd_fstar = false;
  bnd->add_option("--spec", bnd_spec, "F1 member alpha,s1,s2")->required();
  bnd->add_option("--truth", bnd_truth, "truth (default: the F1 member itself)");
  bnd->add_option("--n", bnd_n, "sample sizes")->required()->delimiter(',');
  bnd->add_flag("--fstar", bnd_fstar, "the truth is in F*; also emit the constant-3 bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }

  try {
    if (fit->parsed()) {
      const auto xs = read_samples(common.in);
      const auto sample = WeightedSample::from_raw(xs);
      json j;
      if (!evaluate.empty()) {
        const json dj = json::parse(read_text(evaluate));
        const auto density = density_from_json(dj.contains("density") ? dj["density"] : dj);
        j = {{"objective", num_json(objective(sample, density))}};
      } else {
        const MleFit f = fit_mle(sample);
        const auto& d = f.diagnostics;
        json knots = json::array();
        for (double k : f.active_knots) knots.push_back(k);
        j = {{"density", to_json(f.density)},
             {"diagnostics",
              {{"objective", num_json(f.objective)},
               {"residuals",
                {{"dr_sup", d.dr_sup}, {"dr_knots", d.dr_knots}, {"srk_weighted", d.srk_weighted}, {"srk_raw", d.srk_raw}}},
               {"iterations", f.iterations},
               {"converged", f.converged},
               {"active_knots", knots}}}};
      }
      write_text(common.out, j.dump(2) + "\n");
      return 0;
    }

    if (samp->parsed()) {
      StreamRng rng(common.seed, {samp_n});
      const auto xs = sample(load_density(samp_truth), samp_n, rng);
      std::string s;
      if (format_or(common, "csv") == "json") {
        json arr = json::array();
        for (double x : xs) arr.push_back(x);
        s = arr.dump() + "\n";
      } else {
        for (double x : xs) s += num(x) + "\n";
      }
      write_text(common.out, s);
      return 0;
    }

    if (div->parsed()) {
      const DivergenceKind kind = parse_divergence_kind(div_kind);
      const Density b = load_density(div_b);
      DivergenceValue v{};
      if (kind == DivergenceKind::dx_sq || (kind == DivergenceKind::ks && div_a.empty())) {
        const auto xs = read_samples(common.in);
        const auto sample = WeightedSample::from_raw(xs);
        if (kind == DivergenceKind::dx_sq) {
          v = dx_sq(fit_mle(sample), sample, b);
        } else {
          v = ks_sup(std::span<const double>(xs), b);
        }
      } else {
        if (div_a.empty()) throw Usage("--a is required for " + div_kind);
        const Density a = load_density(div_a);
        switch (kind) {
          case DivergenceKind::tv: v = tv(a, b); break;
          case DivergenceKind::hellinger_sq: v = hellinger_sq(a, b); break;
          case DivergenceKind::kl_sq: v = kl_sq(a, b); break;
          case DivergenceKind::ks: v = ks_sup(a, b); break;
          case DivergenceKind::dks_n:
            if (div_n == 0) throw Usage("dks_n needs --n");
            v = dks_n(a, b, div_n);
            break;
          default: break;
        }
      }
      std::string s;
      if (format_or(common, "json") == "csv") {
        s = "kind,value,method\n" + std::string(to_string(v.kind)) + "," + num(v.value) + "," +
            std::string(to_string(v.method)) + "\n";
      } else {
        s = json{{"kind", to_string(v.kind)}, {"value", num_json(v.value)}, {"method", to_string(v.method)}}.dump() +
            "\n";
      }
      write_text(common.out, s);
      return 0;
    }

    if (mar->parsed()) {
      const FStarDensity truth = make_fstar(parse_named(mar_truth));
      const auto reports = marshall_sweep(truth, mar_n, mar_reps, common.seed, common.threads);
      const auto summary = summarize(reports);
      std::string s;
      if (format_or(common, "csv") == "json") {
        json rows = json::array();
        for (const auto& r : reports) {
          rows.push_back({{"seed", r.seed},
                          {"kappa", num_json(r.kappa)},
                          {"rho", num_json(r.rho_kappa)},
                          {"lhs", num_json(r.lhs)},
                          {"rhs", num_json(r.rho_kappa * r.rhs_base)},
                          {"ratio", num_json(r.ratio)},
                          {"holds", r.holds}});
        }
        s = json{{"truth", truth.name},
                 {"n", mar_n},
                 {"runs", summary.runs},
                 {"violations", summary.violations},
                 {"max_ratio", num_json(summary.max_ratio)},
                 {"reports", rows}}
                .dump(2) +
            "\n";
      } else {
        s = "seed,kappa,rho,lhs,rhs,ratio,holds\n";
        for (const auto& r : reports) {
          s += std::to_string(r.seed) + "," + num(r.kappa) + "," + num(r.rho_kappa) + "," + num(r.lhs) + "," +
               num(r.rho_kappa * r.rhs_base) + "," + num(r.ratio) + "," + (r.holds ? "1" : "0") + "\n";
        }
      }
      write_text(common.out, s);
      return 0;
    }

    if (risk->parsed() || rates->parsed()) {
      CLI::App* sub = risk->parsed() ? risk : rates;
      apply_config(*sub, config);
      if (truth_text.empty()) throw Usage("--truth is required");
      if (n_grid.empty()) throw Usage("--n is required");
      if (reps == 0) throw Usage("--reps is required");
      const Density truth = load_density(truth_text);
      McOptions opts;
      opts.threads = common.threads;
      opts.fit.max_iterations = max_iterations;
      const RiskTable table = mc_risk(truth, parse_loss(loss_text), n_grid, reps, common.seed, opts);
      std::optional<BoundCurve> bound;
      if (!spec_text.empty()) {
        std::vector<std::size_t> sorted;
        for (const auto& r : table.rows) sorted.push_back(r.n);
        bound = tv_bound_curve(parse_spec(spec_text), truth, sorted, false);
      }
      std::optional<RateFit> rate;
      if (rates->parsed()) rate = fit_rate(table, log_correction);
      std::string s;
      if (format_or(common, "csv") == "json") {
        json j = risk_json(table, bound);
        if (rate) {
          j["rate"] = {{"slope", num_json(rate->slope)},
                       {"intercept", num_json(rate->intercept)},
                       {"slope_stderr", num_json(rate->slope_std_error)},
                       {"log_corrected", rate->log_corrected}};
        }
        s = j.dump(2) + "\n";
      } else {
        s = csv_table(table, bound);
        if (rate) {
          s += "# slope," + num(rate->slope) + "\n";
          s += "# slope_stderr," + num(rate->slope_std_error) + "\n";
          s += "# intercept," + num(rate->intercept) + "\n";
          s += std::string("# log_corrected,") + (rate->log_corrected ? "1" : "0") + "\n";
        }
      }
      write_text(common.out, s);
      return 0;
    }

    if (bnd->parsed()) {
      const ExpSegmentSpec spec = parse_spec(bnd_spec);
      const Density truth = bnd_truth.empty() ? Density(make_f1(spec)) : load_density(bnd_truth);
      const BoundCurve curve = tv_bound_curve(spec, truth, bnd_n, bnd_fstar);
      std::string s;
      if (format_or(common, "csv") == "json") {
        json rows = json::array();
        for (const auto& r : curve.rows) {
          json row = {{"n", r.n},
                      {"c_n", num_json(r.c_n)},
                      {"d_tv", num_json(r.d_tv)},
                      {"d_ks_n", num_json(r.d_ks_n)},
                      {"bound", num_json(r.bound)}};
          if (r.fstar_bound) row["fstar_bound"] = num_json(*r.fstar_bound);
          rows.push_back(row);
        }
        s = json{{"kappa_star", num_json(curve.kappa_star)}, {"rho", num_json(curve.rho)}, {"rows", rows}}.dump(2) +
            "\n";
      } else {
        s = bnd_fstar ? "n,c_n,d_tv,d_ks_n,bound,fstar_bound\n" : "n,c_n,d_tv,d_ks_n,bound\n";
        for (const auto& r : curve.rows) {
          s += std::to_string(r.n) + "," + num(r.c_n) + "," + num(r.d_tv) + "," + num(r.d_ks_n) + "," + num(r.bound);
          if (r.fstar_bound) s += "," + num(*r.fstar_bound);
          s += "\n";
        }
      }
      write_text(common.out, s);
      return 0;
    }
  } catch (const ExcessiveExclusions& e) {
    std::cerr << json{{"error", "excessive_exclusions"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << json{{"error", "json"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << json{{"error", "validation"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << json{{"error", "domain"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 1;
}
