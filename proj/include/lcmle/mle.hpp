// Log-concave maximum likelihood estimation with an optimality certificate.
#ifndef LCMLE_MLE_HPP
#define LCMLE_MLE_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lcmle/density.hpp"

namespace lcmle {

class InvalidSample : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sorted distinct points with positive weights summing to one. Duplicates
/// in raw data are merged into weights; the raw count is kept for the 1/n
/// band of the knot inequality.
class WeightedSample {
 public:
  WeightedSample(std::vector<double> points, std::vector<double> weights, std::size_t raw_count);

  static WeightedSample from_raw(std::span<const double> xs);

  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return points_.size(); }
  std::size_t raw_count() const { return raw_count_; }
  double min() const { return points_.front(); }
  double max() const { return points_.back(); }

  /// Empirical distribution function (right-continuous).
  double ecdf(double x) const;

  WeightedSample pushforward(double a, double b) const;

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
  std::size_t raw_count_;
};

struct FitOptions {
  double objective_tolerance = 1e-12;
  double characterization_tolerance = 1e-8;
  int max_iterations = 500;

  void validate() const;
};

/// Residuals of the optimality characterisation. With D(t) = int_{-inf}^t
/// (F_hat - F_n):
///   dr_sup       sup_t D(t), clipped at zero (must be <= tol);
///   dr_knots     max |D(s)| over active knots s;
///   srk_weighted max violation of F_n(s) - w(s) <= F_hat(s) <= F_n(s), with
///                w(s) the merged weight at s;
///   srk_raw      the same band with width 1/n for the raw count n.
struct CharacterizationReport {
  double dr_sup = 0.0;
  double dr_knots = 0.0;
  double srk_weighted = 0.0;
  double srk_raw = 0.0;

  /// Largest residual of the certificate (raw band excluded; see srk_raw).
  double max_residual() const;
  bool certifies(double tolerance) const { return max_residual() <= tolerance; }
};

struct MleFit {
  PiecewiseLogLinearDensity density;
  std::vector<double> active_knots;
  double objective = 0.0;
  CharacterizationReport diagnostics;
  int iterations = 0;
  bool converged = false;
};

/// The log-concave MLE. Never throws on non-convergence: the best iterate is
/// returned with converged = false.
MleFit fit_mle(const WeightedSample& sample, const FitOptions& options = {});

/// sum_i w_i log f(x_i) - int f + 1; -inf when some f(x_i) = 0.
double objective(const WeightedSample& sample, const PiecewiseLogLinearDensity& density);

CharacterizationReport check_characterization(const PiecewiseLogLinearDensity& density,
                                              std::span<const double> active_knots,
                                              const WeightedSample& sample);
CharacterizationReport check_characterization(const MleFit& fit, const WeightedSample& sample);

/// Mixture of per-interval MLEs weighted by count fractions N_j / M.
class SplitFitDensity {
 public:
  struct Component {
    double lo;
    double hi;
    double weight;
    std::size_t count;
    PiecewiseLogLinearDensity density;
  };

  explicit SplitFitDensity(std::vector<Component> components);

  const std::vector<Component>& components() const { return components_; }
  double log_pdf(double x) const;
  double pdf(double x) const;
  double mass() const;

 private:
  std::vector<Component> components_;
};

/// Fits the MLE separately on the sample points inside each closed interval
/// and mixes them by count. Each interval needs at least two distinct points.
SplitFitDensity split_fit(std::span<const double> raw, std::span<const std::pair<double, double>> partition,
                          const FitOptions& options = {});

/// Criterion of the split problem over the points inside the partition:
/// (1/M) sum log f(x_i) - int f + 1.
double objective(std::span<const double> raw, const SplitFitDensity& density);

}  // namespace lcmle

#endif  // LCMLE_MLE_HPP
