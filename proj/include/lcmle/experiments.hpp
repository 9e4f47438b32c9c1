// Monte-Carlo risk tables, log-log rate fits and the explicit total
// variation bound curves.
#ifndef LCMLE_EXPERIMENTS_HPP
#define LCMLE_EXPERIMENTS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lcmle/density.hpp"
#include "lcmle/mle.hpp"

namespace lcmle {

enum class LossKind { tv, hellinger_sq, kl_sq, dx_sq, ks };

std::string_view to_string(LossKind loss);
LossKind parse_loss(std::string_view text);

/// Loss of a fitted density against the truth. kl_sq is d_KL^2(f_hat, f0);
/// ks is ||F_hat - F0||_inf.
double evaluate_loss(LossKind loss, const MleFit& fit, const WeightedSample& sample, const Density& truth);

/// Thrown when more than the allowed fraction of replications fail to
/// produce a certified fit.
class ExcessiveExclusions : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RiskRow {
  std::size_t n = 0;
  std::size_t reps = 0;  // replications that entered the mean
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t excluded = 0;
  double max_residual = 0.0;  // worst characterisation residual among the fits
};

struct RiskTable {
  std::string truth;
  LossKind loss = LossKind::tv;
  std::uint64_t seed = 0;
  std::vector<RiskRow> rows;
};

struct McOptions {
  std::size_t threads = 1;
  FitOptions fit;
  double max_excluded_fraction = 0.01;
  /// Called on the worker thread after every fit, converged or not.
  std::function<void(std::size_t n, std::size_t rep, const MleFit& fit, const WeightedSample& sample)> on_fit;
};

/// For each n, draws reps samples (stream (seed, n, rep)), fits the MLE and
/// averages the loss. Non-converged fits are excluded and counted.
RiskTable mc_risk(const Density& truth, LossKind loss, std::span<const std::size_t> n_grid, std::size_t reps,
                  std::uint64_t seed, const McOptions& options = {});

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  bool log_corrected = false;
};

/// Least squares of log(mean risk) on log n; with log_correction the
/// response is log(mean risk) - (5/4) log log n.
RateFit fit_rate(const RiskTable& table, bool log_correction);

struct BoundRow {
  std::size_t n = 0;
  double c_n = 0.0;
  double d_tv = 0.0;
  double d_ks_n = 0.0;
  double bound = 0.0;                 // c_n / sqrt n + (1 + c_n) d_tv + d_ks_n
  std::optional<double> fstar_bound;  // c_n / sqrt n + 3 d_tv + d_ks_n
};

struct BoundCurve {
  ExpSegmentSpec spec;
  double kappa_star = 0.0;
  double rho = 0.0;
  std::vector<BoundRow> rows;
};

/// Explicit bound on E d_TV(f_hat_n, f0) through the F^1 member `spec`, with
/// c_n = min{2 rho(|kappa*|), 6 log n}. The constant-3 variant is emitted
/// when f0_in_fstar is set. Requires n >= 5.
BoundCurve tv_bound_curve(const ExpSegmentSpec& spec, const Density& f0, std::span<const std::size_t> n_grid,
                          bool f0_in_fstar);

/// (k/n) log^{5/4} n + kl_term: the oracle-inequality shape with its
/// unknown constant set to one. Unnormalized; compare rates only.
double oracle_rhs(std::size_t k, std::size_t n, double kl_term);

/// p_j = int_{I_j} f0 over the pieces of a k-affine density.
std::vector<double> truth_piece_masses(const Density& f0, const KAffineSpec& pieces);

}  // namespace lcmle

#endif  // LCMLE_EXPERIMENTS_HPP
