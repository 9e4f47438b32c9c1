#include "lcmle/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Core>

#include "lcmle/numerics.hpp"

namespace lcmle {

// ---------------------------------------------------------------------------
// WeightedSample

WeightedSample::WeightedSample(std::vector<double> points, std::vector<double> weights, std::size_t raw_count)
    : points_(std::move(points)), weights_(std::move(weights)), raw_count_(raw_count) {
  if (points_.size() != weights_.size()) throw InvalidSample("points and weights differ in length");
  if (points_.size() < 2) throw InvalidSample("sample needs at least two distinct points");
  if (raw_count_ < points_.size()) throw InvalidSample("raw count is smaller than the number of distinct points");
  double total = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i])) throw InvalidSample("sample points must be finite");
    if (i > 0 && !(points_[i - 1] < points_[i])) throw InvalidSample("sample points must be strictly increasing");
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) throw InvalidSample("weights must be positive");
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidSample("weights must sum to one");
}

WeightedSample WeightedSample::from_raw(std::span<const double> xs) {
  std::vector<double> sorted(xs.begin(), xs.end());
  for (double x : sorted) {
    if (!std::isfinite(x)) throw InvalidSample("sample points must be finite");
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> points;
  std::vector<double> weights;
  const double unit = 1.0 / static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    points.push_back(sorted[i]);
    weights.push_back(static_cast<double>(j - i) * unit);
    i = j;
  }
  if (points.size() < 2) throw InvalidSample("sample needs at least two distinct points");
  return {std::move(points), std::move(weights), sorted.size()};
}

double WeightedSample::ecdf(double x) const {
  const auto end = std::upper_bound(points_.begin(), points_.end(), x);
  const auto count = static_cast<std::size_t>(end - points_.begin());
  if (count == points_.size()) return 1.0;
  return std::accumulate(weights_.begin(), weights_.begin() + static_cast<std::ptrdiff_t>(count), 0.0);
}

WeightedSample WeightedSample::pushforward(double a, double b) const {
  if (!(a != 0.0)) throw InvalidSample("affine map needs a != 0");
  std::vector<double> pts(points_.size());
  std::vector<double> wts(weights_.size());
  const std::size_t m = points_.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t src = a > 0 ? i : m - 1 - i;
    pts[i] = a * points_[src] + b;
    wts[i] = weights_[src];
  }
  return {std::move(pts), std::move(wts), raw_count_};
}

void FitOptions::validate() const {
  if (!(objective_tolerance > 0.0) || !(characterization_tolerance > 0.0) || max_iterations <= 0) {
    throw std::invalid_argument("fit options must be strictly positive");
  }
}

double CharacterizationReport::max_residual() const { return std::max({dr_sup, dr_knots, srk_weighted}); }

// ---------------------------------------------------------------------------
// Active-set Newton solver

namespace {

using Eigen::VectorXd;

/// Solves the symmetric positive definite tridiagonal system (diag, off) x = rhs.
VectorXd solve_tridiagonal(VectorXd diag, const VectorXd& off, VectorXd rhs) {
  const Eigen::Index n = diag.size();
  VectorXd lower(std::max<Eigen::Index>(n - 1, 0));
  const double scale = diag.cwiseAbs().maxCoeff();
  auto guard = [scale](double& pivot) {
    if (!(pivot > 1e-14 * scale)) pivot += 1e-12 * std::max(1.0, scale);
  };
  guard(diag[0]);
  for (Eigen::Index j = 0; j + 1 < n; ++j) {
    lower[j] = off[j] / diag[j];
    diag[j + 1] -= lower[j] * off[j];
    guard(diag[j + 1]);
    rhs[j + 1] -= lower[j] * rhs[j];
  }
  rhs.array() /= diag.array();
  for (Eigen::Index j = n - 2; j >= 0; --j) rhs[j] -= lower[j] * rhs[j + 1];
  return rhs;
}

/// Concave maximisation of L over log-densities that are affine between the
/// active knots, with the concavity constraint enforced by ratio tests.
class KnotSolver {
 public:
  KnotSolver(const WeightedSample& sample) : x_(sample.points()), w_(sample.weights()) {
    const std::size_t m = x_.size();
    knots_ = {0, m - 1};
    const double start = -std::log(x_.back() - x_.front());
    theta_ = VectorXd::Constant(2, start);
    rebuild();
  }

  const std::vector<std::size_t>& knots() const { return knots_; }
  const VectorXd& theta() const { return theta_; }

  /// Damped Newton with knot dropping until the Newton decrement vanishes.
  void optimize(double tolerance) {
    for (int it = 0; it < 200; ++it) {
      const std::size_t k = knots_.size();
      VectorXd grad = coef_;
      VectorXd diag = VectorXd::Zero(static_cast<Eigen::Index>(k));
      VectorXd off = VectorXd::Zero(static_cast<Eigen::Index>(k - 1));
      for (std::size_t j = 0; j + 1 < k; ++j) {
        const double len = gap(j);
        const auto m = exp_affine_moments(theta_[j], theta_[j + 1]);
        grad[j] -= len * m.ia;
        grad[j + 1] -= len * m.ib;
        diag[j] += len * m.iaa;
        diag[j + 1] += len * m.ibb;
        off[j] = len * m.iab;
      }
      const VectorXd step = solve_tridiagonal(diag, off, grad);
      const double decrement = grad.dot(step);
      if (!(decrement > tolerance)) return;

      // Largest step keeping every interior kink concave.
      double t_max = std::numeric_limits<double>::infinity();
      const VectorXd z0 = kinks(theta_);
      const VectorXd zd = kinks(step);
      for (Eigen::Index j = 0; j < z0.size(); ++j) {
        if (zd[j] < 0.0) t_max = std::min(t_max, std::max(0.0, z0[j]) / -zd[j]);
      }
      double t = std::min(1.0, t_max);
      if (t > 0.0) {
        const double base = value(theta_);
        const double slack = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(base));
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
          const double trial = value(theta_ + t * step);
          if (trial - base >= 1e-4 * t * decrement - slack) {
            accepted = true;
            break;
          }
          t *= 0.5;
        }
        if (!accepted) return;
        theta_ += t * step;
      }
      if (t >= t_max) {
        // Drop every kink that reached zero on the boundary of the step.
        const VectorXd z = kinks(theta_);
        std::vector<std::size_t> keep_knots{knots_.front()};
        std::vector<double> keep_theta{theta_[0]};
        for (Eigen::Index j = 0; j < z.size(); ++j) {
          const bool binding = zd[j] < 0.0 && std::max(0.0, z0[j]) / -zd[j] <= t_max * (1.0 + 1e-12);
          if (!binding && z[j] > 0.0) {
            keep_knots.push_back(knots_[static_cast<std::size_t>(j) + 1]);
            keep_theta.push_back(theta_[j + 1]);
          }
        }
        keep_knots.push_back(knots_.back());
        keep_theta.push_back(theta_[theta_.size() - 1]);
        knots_ = std::move(keep_knots);
        theta_ = Eigen::Map<VectorXd>(keep_theta.data(), static_cast<Eigen::Index>(keep_theta.size()));
        rebuild();
      }
    }
  }

  /// log-density at every data point.
  std::vector<double> phi_at_data() const {
    std::vector<double> phi(x_.size());
    for (std::size_t j = 0; j + 1 < knots_.size(); ++j) {
      const std::size_t a = knots_[j];
      const std::size_t b = knots_[j + 1];
      const double slope = (theta_[static_cast<Eigen::Index>(j) + 1] - theta_[static_cast<Eigen::Index>(j)]) /
                           (x_[b] - x_[a]);
      for (std::size_t i = a; i < b; ++i) phi[i] = theta_[static_cast<Eigen::Index>(j)] + slope * (x_[i] - x_[a]);
    }
    phi.back() = theta_[theta_.size() - 1];
    return phi;
  }

  void insert_knot(std::size_t index, double value) {
    auto pos = std::lower_bound(knots_.begin(), knots_.end(), index);
    const auto offset = pos - knots_.begin();
    knots_.insert(pos, index);
    VectorXd next(theta_.size() + 1);
    next << theta_.head(offset), value, theta_.tail(theta_.size() - offset);
    theta_ = std::move(next);
    rebuild();
  }

 private:
  double gap(std::size_t j) const { return x_[knots_[j + 1]] - x_[knots_[j]]; }

  void rebuild() {
    coef_ = VectorXd::Zero(static_cast<Eigen::Index>(knots_.size()));
    for (std::size_t j = 0; j + 1 < knots_.size(); ++j) {
      const std::size_t a = knots_[j];
      const std::size_t b = knots_[j + 1];
      const double len = x_[b] - x_[a];
      for (std::size_t i = a; i < b; ++i) {
        const double lambda = (x_[i] - x_[a]) / len;
        coef_[static_cast<Eigen::Index>(j)] += w_[i] * (1.0 - lambda);
        coef_[static_cast<Eigen::Index>(j) + 1] += w_[i] * lambda;
      }
    }
    coef_[coef_.size() - 1] += w_.back();
  }

  double value(const VectorXd& theta) const {
    double integral = 0.0;
    for (std::size_t j = 0; j + 1 < knots_.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      integral += segment_mass(0.0, theta[jj], theta[jj + 1], x_[knots_[j]], x_[knots_[j + 1]]);
    }
    return coef_.dot(theta) - integral;
  }

  /// Slope decrease at each interior knot (nonnegative iff concave there).
  VectorXd kinks(const VectorXd& theta) const {
    const auto k = static_cast<Eigen::Index>(knots_.size());
    VectorXd z(std::max<Eigen::Index>(k - 2, 0));
    for (Eigen::Index j = 1; j + 1 < k; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const double left = (theta[j] - theta[j - 1]) / gap(ju - 1);
      const double right = (theta[j + 1] - theta[j]) / gap(ju);
      z[j - 1] = left - right;
    }
    return z;
  }

  const std::vector<double>& x_;
  const std::vector<double>& w_;
  std::vector<std::size_t> knots_;
  VectorXd theta_;
  VectorXd coef_;
};

/// D(x_i) = int_{-inf}^{x_i} (F_hat - F_n) at every data point, for a
/// log-density given by its values at the data points.
std::vector<double> integrated_cdf_gap(const std::vector<double>& x, const std::vector<double>& w,
                                       const std::vector<double>& phi) {
  std::vector<double> d(x.size(), 0.0);
  double f_hat = 0.0;
  double f_emp = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    f_emp += w[i];
    const double len = x[i + 1] - x[i];
    const auto m = exp_affine_moments(phi[i], phi[i + 1]);
    d[i + 1] = d[i] + (f_hat - f_emp) * len + len * len * m.ia;
    f_hat += len * m.i0;
  }
  return d;
}

/// Non-knot neighbours of knots whose fitted cdf leaves the band by more
/// than `threshold`.
std::vector<std::size_t> band_repairs(const std::vector<double>& x, const std::vector<double>& w,
                                      const std::vector<double>& phi, const std::vector<char>& is_knot,
                                      double threshold) {
  const std::size_t m = x.size();
  std::vector<double> f_hat(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    f_hat[i + 1] = f_hat[i] + (x[i + 1] - x[i]) * exp_affine_moments(phi[i], phi[i + 1]).i0;
  }
  const double total = f_hat.back();
  std::vector<std::size_t> out;
  double f_emp = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    f_emp += w[i];
    if (!is_knot[i] || i == 0 || i + 1 == m) continue;
    const double f = f_hat[i] / total;
    if (f - f_emp > threshold && !is_knot[i + 1]) out.push_back(i + 1);
    if (f_emp - w[i] - f > threshold && !is_knot[i - 1]) out.push_back(i - 1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

MleFit fit_mle(const WeightedSample& sample, const FitOptions& options) {
  options.validate();
  const auto& x = sample.points();
  const auto& w = sample.weights();
  const double add_threshold = 0.01 * options.characterization_tolerance;
  const double newton_tolerance = std::min(1e-26, options.objective_tolerance * 1e-14);

  KnotSolver solver(sample);
  std::vector<char> is_knot(x.size(), 0);
  int iterations = 0;
  bool exhausted = true;
  for (; iterations < options.max_iterations; ++iterations) {
    solver.optimize(newton_tolerance);
    std::fill(is_knot.begin(), is_knot.end(), 0);
    for (std::size_t k : solver.knots()) is_knot[k] = 1;
    const auto phi = solver.phi_at_data();
    const auto gap = integrated_cdf_gap(x, w, phi);
    std::size_t best = x.size();
    double best_gap = add_threshold;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
      if (!is_knot[i] && gap[i] > best_gap) {
        best_gap = gap[i];
        best = i;
      }
    }
    if (best != x.size()) {
      solver.insert_knot(best, phi[best]);
      continue;
    }
    // D is flat to within the threshold, but a knot may still sit just off
    // the band F_n(s) - w(s) <= F_hat(s) <= F_n(s); the neighbour on the
    // offending side then belongs in the knot set.
    const auto repairs = band_repairs(x, w, phi, is_knot, add_threshold);
    if (repairs.empty()) {
      exhausted = false;
      break;
    }
    for (std::size_t i : repairs) solver.insert_knot(i, phi[i]);
  }

  std::vector<double> knots;
  std::vector<double> logs;
  for (std::size_t j = 0; j < solver.knots().size(); ++j) {
    knots.push_back(x[solver.knots()[j]]);
    logs.push_back(solver.theta()[static_cast<Eigen::Index>(j)]);
  }
  auto density = PiecewiseLogLinearDensity::normalized(knots, std::move(logs));
  MleFit fit{std::move(density), std::move(knots), 0.0, {}, iterations, false};
  fit.objective = objective(sample, fit.density);
  fit.diagnostics = check_characterization(fit, sample);
  fit.converged = !exhausted && fit.diagnostics.certifies(options.characterization_tolerance);
  return fit;
}

double objective(const WeightedSample& sample, const PiecewiseLogLinearDensity& density) {
  double total = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double lp = density.log_pdf(sample.points()[i]);
    if (lp == -kInf) return -kInf;
    total += sample.weights()[i] * lp;
  }
  return total - density.mass() + 1.0;
}

CharacterizationReport check_characterization(const PiecewiseLogLinearDensity& density,
                                              std::span<const double> active_knots,
                                              const WeightedSample& sample) {
  const auto& x = sample.points();
  const auto& w = sample.weights();
  std::vector<double> grid(x.begin(), x.end());
  grid.insert(grid.end(), density.knots().begin(), density.knots().end());
  grid.insert(grid.end(), active_knots.begin(), active_knots.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  // Walk the grid accumulating int_{-inf}^t F_n; D(t) = int F_hat - that.
  std::vector<double> gap(grid.size());
  double emp_integral = 0.0;
  double emp_cdf = 0.0;
  std::size_t next_point = 0;
  double prev = grid.front();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    emp_integral += emp_cdf * (grid[g] - prev);
    while (next_point < x.size() && x[next_point] <= grid[g]) emp_cdf += w[next_point++];
    prev = grid[g];
    gap[g] = density.cdf_integral(grid[g]) - emp_integral;
  }

  CharacterizationReport report;
  for (double d : gap) report.dr_sup = std::max(report.dr_sup, d);
  const double unit = 1.0 / static_cast<double>(sample.raw_count());
  for (double s : active_knots) {
    const auto g = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), s) - grid.begin());
    report.dr_knots = std::max(report.dr_knots, std::abs(gap[g]));
    const double f_hat = density.cdf(s);
    const double f_emp = sample.ecdf(s);
    const auto at = std::lower_bound(x.begin(), x.end(), s);
    const double weight = (at != x.end() && *at == s) ? w[static_cast<std::size_t>(at - x.begin())] : 0.0;
    const double upper = std::max(0.0, f_hat - f_emp);
    report.srk_weighted = std::max({report.srk_weighted, upper, f_emp - weight - f_hat});
    report.srk_raw = std::max({report.srk_raw, upper, f_emp - unit - f_hat});
  }
  return report;
}

CharacterizationReport check_characterization(const MleFit& fit, const WeightedSample& sample) {
  return check_characterization(fit.density, fit.active_knots, sample);
}

// ---------------------------------------------------------------------------
// Split fits

SplitFitDensity::SplitFitDensity(std::vector<Component> components) : components_(std::move(components)) {}

double SplitFitDensity::log_pdf(double x) const {
  for (const auto& c : components_) {
    if (x >= c.lo && x <= c.hi) {
      const double lp = c.density.log_pdf(x);
      if (lp > -kInf) return std::log(c.weight) + lp;
    }
  }
  return -kInf;
}

double SplitFitDensity::pdf(double x) const { return std::exp(log_pdf(x)); }

double SplitFitDensity::mass() const {
  double total = 0.0;
  for (const auto& c : components_) total += c.weight * c.density.mass();
  return total;
}

SplitFitDensity split_fit(std::span<const double> raw, std::span<const std::pair<double, double>> partition,
                          const FitOptions& options) {
  if (partition.empty()) throw InvalidSample("partition must contain at least one interval");
  for (std::size_t j = 0; j < partition.size(); ++j) {
    if (!(partition[j].first <= partition[j].second)) throw InvalidSample("partition intervals need lo <= hi");
    if (j > 0 && !(partition[j - 1].second < partition[j].first)) {
      throw InvalidSample("partition intervals must be sorted and disjoint");
    }
  }
  std::vector<std::vector<double>> members(partition.size());
  for (double x : raw) {
    for (std::size_t j = 0; j < partition.size(); ++j) {
      if (x >= partition[j].first && x <= partition[j].second) {
        members[j].push_back(x);
        break;
      }
    }
  }
  std::size_t total = 0;
  for (const auto& m : members) total += m.size();
  std::vector<SplitFitDensity::Component> components;
  for (std::size_t j = 0; j < partition.size(); ++j) {
    auto sub = WeightedSample::from_raw(members[j]);  // throws below two distinct points
    auto fit = fit_mle(sub, options);
    components.push_back({partition[j].first, partition[j].second,
                          static_cast<double>(members[j].size()) / static_cast<double>(total), members[j].size(),
                          std::move(fit.density)});
  }
  return SplitFitDensity(std::move(components));
}

double objective(std::span<const double> raw, const SplitFitDensity& density) {
  double total = 0.0;
  std::size_t count = 0;
  for (double x : raw) {
    const bool inside = std::any_of(density.components().begin(), density.components().end(),
                                    [x](const auto& c) { return x >= c.lo && x <= c.hi; });
    if (!inside) continue;
    const double lp = density.log_pdf(x);
    if (lp == -kInf) return -kInf;
    total += lp;
    ++count;
  }
  if (count == 0) return -kInf;
  return total / static_cast<double>(count) - density.mass() + 1.0;
}

}  // namespace lcmle
