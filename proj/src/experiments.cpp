#include "lcmle/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcmle/divergences.hpp"
#include "lcmle/numerics.hpp"
#include "lcmle/parallel.hpp"

namespace lcmle {

std::string_view to_string(LossKind loss) {
  switch (loss) {
    case LossKind::tv:
      return "tv";
    case LossKind::hellinger_sq:
      return "hellinger_sq";
    case LossKind::kl_sq:
      return "kl_sq";
    case LossKind::dx_sq:
      return "dx_sq";
    case LossKind::ks:
      return "ks";
  }
  return "";
}

LossKind parse_loss(std::string_view text) {
  for (auto loss : {LossKind::tv, LossKind::hellinger_sq, LossKind::kl_sq, LossKind::dx_sq, LossKind::ks}) {
    if (to_string(loss) == text) return loss;
  }
  throw std::invalid_argument("unknown loss '" + std::string(text) + "'");
}

double evaluate_loss(LossKind loss, const MleFit& fit, const WeightedSample& sample, const Density& truth) {
  const Density estimate(fit.density);
  switch (loss) {
    case LossKind::tv:
      return tv(estimate, truth).value;
    case LossKind::hellinger_sq:
      return hellinger_sq(estimate, truth).value;
    case LossKind::kl_sq:
      return kl_sq(estimate, truth).value;
    case LossKind::dx_sq:
      return dx_sq(fit, sample, truth).value;
    case LossKind::ks:
      return ks_sup(estimate, truth).value;
  }
  return 0.0;
}

RiskTable mc_risk(const Density& truth, LossKind loss, std::span<const std::size_t> n_grid, std::size_t reps,
                  std::uint64_t seed, const McOptions& options) {
  if (reps < 2) throw std::invalid_argument("mc_risk needs at least two replications");
  std::vector<std::size_t> grid(n_grid.begin(), n_grid.end());
  std::sort(grid.begin(), grid.end());
  for (std::size_t n : grid) {
    if (n < 2) throw std::invalid_argument("every n must be at least 2");
  }

  RiskTable table{truth.describe(), loss, seed, {}};
  for (std::size_t n : grid) {
    struct Outcome {
      double loss = 0.0;
      double residual = 0.0;
      bool ok = false;
    };
    std::vector<Outcome> outcomes(reps);
    parallel_for(reps, options.threads, [&](std::size_t r) {
      StreamRng rng(seed, {n, r});
      const auto xs = sample(truth, n, rng);
      const auto ws = WeightedSample::from_raw(xs);
      const auto fit = fit_mle(ws, options.fit);
      if (options.on_fit) options.on_fit(n, r, fit, ws);
      outcomes[r].residual = fit.diagnostics.max_residual();
      outcomes[r].ok = fit.converged;
      if (fit.converged) outcomes[r].loss = evaluate_loss(loss, fit, ws, truth);
    });

    // Serial reduction in replication order.
    RiskRow row;
    row.n = n;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& o : outcomes) {
      row.max_residual = std::max(row.max_residual, o.residual);
      if (!o.ok) {
        ++row.excluded;
        continue;
      }
      ++row.reps;
      sum += o.loss;
      sum_sq += o.loss * o.loss;
    }
    if (static_cast<double>(row.excluded) > options.max_excluded_fraction * static_cast<double>(reps) ||
        row.reps < 2) {
      throw ExcessiveExclusions("n = " + std::to_string(n) + ": " + std::to_string(row.excluded) + " of " +
                                std::to_string(reps) + " fits did not converge");
    }
    const double count = static_cast<double>(row.reps);
    row.mean = sum / count;
    const double var = std::max(0.0, (sum_sq - count * row.mean * row.mean) / (count - 1.0));
    row.std_error = std::sqrt(var / count);
    table.rows.push_back(row);
  }
  return table;
}

RateFit fit_rate(const RiskTable& table, bool log_correction) {
  if (table.rows.size() < 3) throw std::invalid_argument("a rate fit needs at least three rows");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& row : table.rows) {
    if (!(row.mean > 0.0)) throw std::invalid_argument("rate fits need strictly positive mean risks");
    const double log_n = std::log(static_cast<double>(row.n));
    double y = std::log(row.mean);
    if (log_correction) y -= 1.25 * std::log(log_n);
    xs.push_back(log_n);
    ys.push_back(y);
  }
  const double m = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.intercept - fit.slope * xs[i];
    rss += r * r;
  }
  fit.slope_std_error = std::sqrt(rss / (m - 2.0) / sxx);
  fit.log_corrected = log_correction;
  return fit;
}

BoundCurve tv_bound_curve(const ExpSegmentSpec& spec, const Density& f0, std::span<const std::size_t> n_grid,
                          bool f0_in_fstar) {
  spec.validate();
  const Density member(make_f1(spec));
  BoundCurve curve;
  curve.spec = spec;
  curve.kappa_star = spec.kappa_star();
  curve.rho = rho_eval(std::abs(curve.kappa_star));
  const double d_tv = tv(member, f0).value;
  for (std::size_t n : n_grid) {
    if (n < 5) throw std::invalid_argument("the total variation bound needs n >= 5");
    BoundRow row;
    row.n = n;
    const double nd = static_cast<double>(n);
    row.c_n = std::min(2.0 * curve.rho, 6.0 * std::log(nd));
    row.d_tv = d_tv;
    row.d_ks_n = d_tv == 0.0 ? 0.0 : dks_n(member, f0, n).value;
    row.bound = row.c_n / std::sqrt(nd) + (1.0 + row.c_n) * row.d_tv + row.d_ks_n;
    if (f0_in_fstar) row.fstar_bound = row.c_n / std::sqrt(nd) + 3.0 * row.d_tv + row.d_ks_n;
    curve.rows.push_back(row);
  }
  return curve;
}

double oracle_rhs(std::size_t k, std::size_t n, double kl_term) {
  if (k == 0 || n == 0) throw std::invalid_argument("oracle_rhs needs k, n >= 1");
  if (!(kl_term >= 0.0)) throw std::invalid_argument("kl_term must be nonnegative");
  const double nd = static_cast<double>(n);
  return static_cast<double>(k) / nd * std::pow(std::log(nd), 1.25) + kl_term;
}

std::vector<double> truth_piece_masses(const Density& f0, const KAffineSpec& pieces) {
  std::vector<double> p;
  for (const auto& piece : pieces.pieces()) {
    const double hi = std::isinf(piece.hi) ? 1.0 : f0.cdf(piece.hi);
    const double lo = std::isinf(piece.lo) ? 0.0 : f0.cdf(piece.lo);
    p.push_back(hi - lo);
  }
  return p;
}

}  // namespace lcmle
