// Distances and divergences between densities: total variation, squared
// Hellinger, Kullback-Leibler, the empirical divergence d_X^2, Kolmogorov-
// Smirnov sups and the extreme-order-statistic discrepancy d_KS^(n).
#ifndef LCMLE_DIVERGENCES_HPP
#define LCMLE_DIVERGENCES_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lcmle/density.hpp"
#include "lcmle/mle.hpp"

namespace lcmle {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class DivergenceKind { tv, hellinger_sq, kl_sq, dx_sq, ks, dks_n };

/// closed_form: exact piecewise formulas; quadrature: adaptive integration or
/// a guarded scan with local refinement (tolerance 1e-9).
enum class Method { closed_form, quadrature };

struct DivergenceValue {
  DivergenceKind kind;
  double value;
  Method method;
};

std::string_view to_string(DivergenceKind kind);
std::string_view to_string(Method method);
DivergenceKind parse_divergence_kind(std::string_view text);

/// (1/2) int |f - g|.
DivergenceValue tv(const Density& f, const Density& g);
/// int (sqrt f - sqrt g)^2.
DivergenceValue hellinger_sq(const Density& f, const Density& g);
/// int f log(f/g); +inf when the support of f is not inside that of g.
DivergenceValue kl_sq(const Density& f, const Density& g);
/// (1/n) sum_i log(f_hat(X_i) / f0(X_i)) with raw multiplicities.
DivergenceValue dx_sq(const MleFit& fit, const WeightedSample& sample, const Density& f0);
/// sup_x |F_n(x) - F0(x)|, exact over the jump points.
DivergenceValue ks_sup(const WeightedSample& sample, const Density& f0);
/// The same for raw observations; accepts a single point.
DivergenceValue ks_sup(std::span<const double> raw, const Density& f0);
/// sup_x |F(x) - G(x)|.
DivergenceValue ks_sup(const Density& f, const Density& g);
/// ||F^n - G^n||_inf + ||(1-F)^n - (1-G)^n||_inf.
DivergenceValue dks_n(const Density& f, const Density& g, std::size_t n);

}  // namespace lcmle

#endif  // LCMLE_DIVERGENCES_HPP
