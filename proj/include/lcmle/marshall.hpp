// Checks of the Marshall-type inequality
//   ||F_hat_n - F0||_inf <= rho(|kappa|) ||F_n - F0||_inf
// for truths of the form f0 = e^{gamma x} h(x) with h concave.
#ifndef LCMLE_MARSHALL_HPP
#define LCMLE_MARSHALL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcmle/density.hpp"
#include "lcmle/mle.hpp"

namespace lcmle {

class NotFStar : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FStarDensity {
  std::string name;
  Density density;
  FStarParts parts;
};

/// Wraps a named density with its (gamma, h) decomposition; throws NotFStar
/// for densities without one.
FStarDensity make_fstar(const NamedDensity& density);

/// Built-in catalog: uniform(0,1), e^{-x} truncated to [0,2],
/// triangular(0,0.5,1) and Gamma(1.5,1).
std::vector<FStarDensity> fstar_members();

struct MarshallReport {
  std::uint64_t seed = 0;
  double kappa = 0.0;
  double rho_kappa = 0.0;
  double lhs = 0.0;       // ||F_hat_n - F0||_inf
  double rhs_base = 0.0;  // ||F_n - F0||_inf
  double ratio = 0.0;     // lhs / (rho_kappa rhs_base)
  /// lhs / rhs_base, exported for inspection only.
  double unscaled_ratio = 0.0;
  bool holds = false;
  /// h vanishes somewhere on the data hull.
  bool h_touches_zero = false;
  double fit_residual = 0.0;
  double fit_srk_raw = 0.0;  // band with width 1/n
  bool fit_converged = false;
};

/// Absolute slack on the inequality absorbing solver residuals.
inline constexpr double kMarshallSlack = 1e-9;

MarshallReport marshall_check(std::span<const double> raw, const FStarDensity& truth, const FitOptions& options = {});

/// reps independent samples of size n drawn from the truth; replication r
/// uses the stream (seed, n, r).
std::vector<MarshallReport> marshall_sweep(const FStarDensity& truth, std::size_t n, std::size_t reps,
                                           std::uint64_t seed, std::size_t threads = 1,
                                           const FitOptions& options = {});

struct MarshallSummary {
  std::size_t runs = 0;
  std::size_t violations = 0;
  std::size_t touching = 0;
  std::size_t unconverged = 0;
  double max_ratio = 0.0;

  MarshallSummary& operator+=(const MarshallReport& report);
  MarshallSummary& operator+=(const MarshallSummary& other);
};

MarshallSummary summarize(std::span<const MarshallReport> reports);

}  // namespace lcmle

#endif  // LCMLE_MARSHALL_HPP
