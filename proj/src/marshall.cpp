#include "lcmle/marshall.hpp"

#include <algorithm>
#include <cmath>

#include "lcmle/divergences.hpp"
#include "lcmle/numerics.hpp"
#include "lcmle/parallel.hpp"

namespace lcmle {

FStarDensity make_fstar(const NamedDensity& density) {
  auto parts = density.fstar();
  if (!parts) throw NotFStar(density.name() + " has no e^{gamma x} h(x) decomposition with concave h");
  return {density.name(), Density(density), std::move(*parts)};
}

std::vector<FStarDensity> fstar_members() {
  return {make_fstar(NamedDensity::uniform(0.0, 1.0)),
          make_fstar(NamedDensity::truncated_exponential({-1.0, 0.0, 2.0})),
          make_fstar(NamedDensity::triangular(0.0, 0.5, 1.0)), make_fstar(NamedDensity::gamma(1.5, 1.0))};
}

namespace {

struct HullShape {
  bool concave = true;
  bool touches_zero = false;
};

// Second differences of h on a 10^3-point grid over the hull.
HullShape inspect_h(const FStarParts& parts, double lo, double hi) {
  constexpr int kGrid = 1000;
  HullShape shape;
  std::vector<double> h(kGrid + 1);
  double scale = 0.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double x = lo + (hi - lo) * i / kGrid;
    h[static_cast<std::size_t>(i)] = parts.h(x);
    scale = std::max(scale, std::abs(h[static_cast<std::size_t>(i)]));
    if (h[static_cast<std::size_t>(i)] < 0.0) shape.concave = false;
    if (h[static_cast<std::size_t>(i)] == 0.0) shape.touches_zero = true;
  }
  for (std::size_t i = 1; i < kGrid; ++i) {
    if (h[i - 1] - 2.0 * h[i] + h[i + 1] > 1e-9 * std::max(1.0, scale)) shape.concave = false;
  }
  return shape;
}

}  // namespace

MarshallReport marshall_check(std::span<const double> raw, const FStarDensity& truth, const FitOptions& options) {
  const auto sample = WeightedSample::from_raw(raw);
  const double lo = sample.min();
  const double hi = sample.max();
  if (lo < truth.parts.lo || hi > truth.parts.hi) throw NotFStar("sample leaves the domain of h");
  const auto shape = inspect_h(truth.parts, lo, hi);
  if (!shape.concave) throw NotFStar("h is not concave on the data hull");

  const auto fit = fit_mle(sample, options);
  MarshallReport report;
  report.kappa = truth.parts.gamma * (hi - lo);
  report.rho_kappa = rho_eval(std::abs(report.kappa));
  report.lhs = ks_sup(Density(fit.density), truth.density).value;
  report.rhs_base = ks_sup(sample, truth.density).value;
  const double bound = report.rho_kappa * report.rhs_base;
  report.ratio = bound > 0.0 ? report.lhs / bound : (report.lhs > 0.0 ? kInf : 0.0);
  report.unscaled_ratio = report.rhs_base > 0.0 ? report.lhs / report.rhs_base : 0.0;
  report.holds = report.lhs <= bound + kMarshallSlack;
  report.h_touches_zero = shape.touches_zero;
  report.fit_residual = fit.diagnostics.max_residual();
  report.fit_srk_raw = fit.diagnostics.srk_raw;
  report.fit_converged = fit.converged;
  return report;
}

std::vector<MarshallReport> marshall_sweep(const FStarDensity& truth, std::size_t n, std::size_t reps,
                                           std::uint64_t seed, std::size_t threads, const FitOptions& options) {
  std::vector<MarshallReport> reports(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = StreamRng(seed, {n, r})();
    StreamRng rng(rep_seed);
    const auto xs = sample(truth.density, n, rng);
    reports[r] = marshall_check(xs, truth, options);
    reports[r].seed = rep_seed;
  });
  return reports;
}

MarshallSummary& MarshallSummary::operator+=(const MarshallReport& report) {
  ++runs;
  if (!report.holds) ++violations;
  if (report.h_touches_zero) ++touching;
  if (!report.fit_converged) ++unconverged;
  max_ratio = std::max(max_ratio, report.ratio);
  return *this;
}

MarshallSummary& MarshallSummary::operator+=(const MarshallSummary& other) {
  runs += other.runs;
  violations += other.violations;
  touching += other.touching;
  unconverged += other.unconverged;
  max_ratio = std::max(max_ratio, other.max_ratio);
  return *this;
}

MarshallSummary summarize(std::span<const MarshallReport> reports) {
  MarshallSummary s;
  for (const auto& r : reports) s += r;
  return s;
}

}  // namespace lcmle
