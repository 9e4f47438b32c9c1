// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "lcmle/divergences.hpp"
#include "lcmle/experiments.hpp"
#include "lcmle/marshall.hpp"
#include "lcmle/mle.hpp"
#include "oracles.hpp"

using namespace lcmle;

namespace {

int failures = 0;

void verdict(bool pass, const std::string& label, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", label.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Certificate and KL <= d_X^2 bookkeeping over every fit of the run.
struct Ledger {
  std::mutex mu;
  std::size_t fits = 0;
  std::size_t unconverged = 0;
  double worst = 0.0;      // dr and weighted band
  double worst_raw = 0.0;  // band with width 1/n
  std::size_t kl_checked = 0;
  double kl_excess = -kInf;  // max of kl_sq - dx_sq

  void add(const MleFit& fit) {
    std::lock_guard lock(mu);
    ++fits;
    if (!fit.converged) ++unconverged;
    worst = std::max(worst, fit.diagnostics.max_residual());
    worst_raw = std::max(worst_raw, fit.diagnostics.srk_raw);
  }

  void add_kl(double kl, double dx) {
    std::lock_guard lock(mu);
    ++kl_checked;
    kl_excess = std::max(kl_excess, kl - dx);
  }

  void add(const MarshallReport& r) {
    std::lock_guard lock(mu);
    ++fits;
    if (!r.fit_converged) ++unconverged;
    worst = std::max(worst, r.fit_residual);
    worst_raw = std::max(worst_raw, r.fit_srk_raw);
  }
};

Ledger ledger;

McOptions observed(const Density& truth) {
  McOptions opts;
  opts.threads = threads();
  opts.on_fit = [&truth](std::size_t, std::size_t, const MleFit& fit, const WeightedSample& sample) {
    ledger.add(fit);
    if (!fit.converged) return;
    const double kl = kl_sq(Density(fit.density), truth).value;
    const double dx = dx_sq(fit, sample, truth).value;
    ledger.add_kl(kl, dx);
  };
  return opts;
}

void uniform_bound() {
  const Density truth(parse_named("uniform:0,1"));
  const std::vector<std::size_t> grid{25, 100, 400};
  const auto table = mc_risk(truth, LossKind::tv, grid, 500, 2101, observed(truth));
  bool ok = true;
  std::string detail;
  for (const auto& row : table.rows) {
    const double bound = 4.0 / std::sqrt(static_cast<double>(row.n));
    ok = ok && row.reps == 500 && row.mean <= bound && row.mean + 3.0 * row.std_error <= bound;
    detail += "n=" + std::to_string(row.n) + " mean " + fmt("%.5f", row.mean) + " (se " + fmt("%.5f", row.std_error) +
              ") <= " + fmt("%.5f", bound) + "; ";
  }
  verdict(ok, "[1] uniform tv risk under 4/sqrt(n)", detail + "500 reps each");
}

void marshall_suite() {
  std::size_t runs = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;
  for (const auto& member : fstar_members()) {
    for (std::size_t n : {20u, 200u}) {
      const auto reports = marshall_sweep(member, n, 200, 2202, threads());
      for (const auto& r : reports) ledger.add(r);
      const auto s = summarize(reports);
      runs += s.runs;
      violations += s.violations;
      max_ratio = std::max(max_ratio, s.max_ratio);
    }
  }
  verdict(runs == 1600 && violations == 0, "[2] Marshall inequality",
          std::to_string(violations) + " violations in " + std::to_string(runs) + " runs (4 truths x n in {20,200} x " +
              "200 seeds), max lhs/(rho rhs) " + fmt("%.6f", max_ratio));
}

void oracle_suite() {
  StreamRng rng(2404);
  double worst = 0.0;
  double worst_uniform = 0.0;
  std::size_t count = 0;
  for (std::size_t n : {2u, 3u, 4u}) {
    for (int r = 0; r < 50; ++r) {
      const double scale = std::exp(oracle::between(rng, -2.0, 2.0));
      const double shift = oracle::between(rng, -3.0, 3.0);
      std::vector<double> xs(n);
      for (auto& x : xs) x = shift + scale * rng.uniform();
      const auto sample = WeightedSample::from_raw(xs);
      const auto fit = fit_mle(sample);
      ledger.add(fit);
      const double direct = oracle::direct_search_mle(sample.points(), sample.weights());
      worst = std::max(worst, std::abs(fit.objective - direct));
      if (n == 2) {
        const double level = -std::log(sample.max() - sample.min());
        worst_uniform = std::max(worst_uniform, static_cast<double>(fit.density.knots().size()) - 2.0);
        for (double v : fit.density.log_values()) {
          worst_uniform = std::max(worst_uniform, std::abs(v - level) / std::max(1.0, std::abs(level)));
        }
      }
      ++count;
    }
  }
  verdict(worst <= 1e-6 && worst_uniform <= 1e-12, "[4] direct-search MLE oracle",
          std::to_string(count) + " samples (50 per n in {2,3,4}), max |loglik gap| " + fmt("%.3g", worst) +
              ", n=2 deviation from uniform on hull " + fmt("%.3g", worst_uniform));
}

struct RateCase {
  const char* truth;
  bool log_correction;
  double lo;
  double hi;
  std::uint64_t seed;
};

void rate_suite() {
  const std::vector<std::size_t> grid{100, 200, 400, 800, 1600, 3200, 6400};
  const RateCase cases[] = {{"uniform:0,1", true, -1.15, -0.85, 2505},
                            {"laplace:0,1", true, -1.15, -0.85, 2506},
                            {"gaussian:0,1", false, -0.90, -0.70, 2507}};
  for (const auto& c : cases) {
    const Density truth(parse_named(c.truth));
    const auto start = std::chrono::steady_clock::now();
    const auto table = mc_risk(truth, LossKind::dx_sq, grid, 1000, c.seed, observed(truth));
    const auto rate = fit_rate(table, c.log_correction);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string means;
    for (const auto& row : table.rows) means += fmt("%.4g", row.mean) + " ";
    const bool ok = rate.slope >= c.lo && rate.slope <= c.hi;
    verdict(ok, std::string("[5] rate for ") + c.truth,
            std::string(c.log_correction ? "log-corrected " : "uncorrected ") + "slope " + fmt("%.4f", rate.slope) +
                " (se " + fmt("%.4f", rate.slope_std_error) + ") in [" + fmt("%.2f", c.lo) + ", " + fmt("%.2f", c.hi) +
                "]; 1000 reps per n, mean dx_sq " + means + "(" + fmt("%.0f", secs) + " s)");
    const bool widened = rate.slope >= c.lo - 3.0 * rate.slope_std_error && rate.slope <= c.hi + 3.0 * rate.slope_std_error;
    std::printf("INFO [5] %s: slope %s the window widened by 3 se\n", c.truth, widened ? "inside" : "outside");
  }
}

std::vector<double> joint_cuts(const Density& f, const Density& g) {
  auto cuts = f.breakpoints();
  const auto more = g.breakpoints();
  cuts.insert(cuts.end(), more.begin(), more.end());
  return cuts;
}

void divergence_suite() {
  StreamRng rng(2606);
  double worst = 0.0;
  std::size_t chain_failures = 0;
  for (int i = 0; i < 500; ++i) {
    const Density f(make_f1(oracle::random_f1(rng)));
    const Density g(make_f1(oracle::random_f1(rng)));
    const double lo = std::min(f.lower(), g.lower());
    const double hi = std::max(f.upper(), g.upper());
    const auto cuts = joint_cuts(f, g);
    const double q_tv =
        0.5 * oracle::integrate([&](double x) { return std::abs(f.pdf(x) - g.pdf(x)); }, lo, hi, cuts);
    const double q_h = oracle::integrate(
        [&](double x) {
          const double d = std::sqrt(f.pdf(x)) - std::sqrt(g.pdf(x));
          return d * d;
        },
        lo, hi, cuts);
    const double d_tv = tv(f, g).value;
    const double d_h = hellinger_sq(f, g).value;
    const double d_kl = kl_sq(f, g).value;
    worst = std::max({worst, std::abs(d_tv - q_tv), std::abs(d_h - q_h)});
    if (f.lower() >= g.lower() && f.upper() <= g.upper()) {
      const double q_kl = oracle::integrate(
          [&](double x) {
            const double p = f.pdf(x);
            return p > 0.0 ? p * (f.log_pdf(x) - g.log_pdf(x)) : 0.0;
          },
          f.lower(), f.upper(), cuts);
      worst = std::max(worst, std::abs(d_kl - q_kl));
    } else if (!std::isinf(d_kl)) {
      worst = kInf;
    }
    if (!(d_tv * d_tv <= d_h + 1e-15 && d_h <= d_kl + 1e-15)) ++chain_failures;
  }
  verdict(worst <= 1e-8 && chain_failures == 0, "[6] divergence oracles",
          "500 random F1 pairs, max |closed form - quadrature| " + fmt("%.3g", worst) + ", chain failures " +
              std::to_string(chain_failures));
}

}  // namespace

int main() {
  std::printf("threads: %zu\n", threads());
  uniform_bound();
  marshall_suite();
  oracle_suite();
  rate_suite();
  divergence_suite();

  verdict(ledger.unconverged == 0 && ledger.worst <= 1e-8 && ledger.worst_raw <= 1e-8, "[3] characterization certificate",
          std::to_string(ledger.fits) + " fits, " + std::to_string(ledger.unconverged) + " unconverged, max residual " +
              fmt("%.3g", ledger.worst) + ", max raw 1/n band residual " + fmt("%.3g", ledger.worst_raw));
  verdict(ledger.kl_checked > 0 && ledger.kl_excess <= 1e-9, "[6] kl_sq <= dx_sq on fitted reps",
          std::to_string(ledger.kl_checked) + " fits, max kl_sq - dx_sq " + fmt("%.3g", ledger.kl_excess));
  std::printf("N/A [7] minimax lower bound over all estimators: not testable at desk scale; covered by [5]\n");
  std::printf("%s\n", failures == 0 ? "ALL PASS" : (std::to_string(failures) + " FAILED").c_str());
  return failures == 0 ? 0 : 1;
}
