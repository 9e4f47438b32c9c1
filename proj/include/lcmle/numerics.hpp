// Scalar kernels shared by every module: the q/rho multiplier functions and
// numerically stable integrals of exp(affine) over a segment.
#ifndef LCMLE_NUMERICS_HPP
#define LCMLE_NUMERICS_HPP

#include <cmath>
#include <limits>

namespace lcmle {

namespace detail {

// Power series of the numerator and denominator of q after dividing both by
// x^3:  P(x) = sum_j (-1)^j (j+1)/(j+3)! x^j,  Q(x) = sum_j (-1)^j (j+1)/(j+2)! x^j.
template <typename Scalar>
void q_series(Scalar x, Scalar& p, Scalar& q) {
  p = Scalar(0);
  q = Scalar(0);
  Scalar power(1);            // x^j
  Scalar inv_fact_j2 = Scalar(0.5);  // 1/(j+2)!
  for (int j = 0; j < 30; ++j) {
    const Scalar sign = (j % 2 == 0) ? Scalar(1) : Scalar(-1);
    const Scalar inv_fact_j3 = inv_fact_j2 / Scalar(j + 3);
    p += sign * Scalar(j + 1) * inv_fact_j3 * power;
    q += sign * Scalar(j + 1) * inv_fact_j2 * power;
    power *= x;
    inv_fact_j2 = inv_fact_j3;
  }
}

}  // namespace detail

/// q(x) = (x - 2 + e^{-x}(x+2)) / (x (1 - e^{-x}(x+1))), q(0) = 1/3.
/// Continuous and strictly increasing from 0 (x -> -inf) to 1 (x -> +inf).
template <typename Scalar>
Scalar q_eval(Scalar x) {
  using std::abs;
  using std::exp;
  using std::isinf;
  if (isinf(x)) return x > 0 ? Scalar(1) : Scalar(0);
  if (abs(x) < Scalar(2)) {
    Scalar p, q;
    detail::q_series(x, p, q);
    return p / q;
  }
  if (x > 0) {
    const Scalar e = exp(-x);
    return (x - Scalar(2) + e * (x + Scalar(2))) / (x * (Scalar(1) - e * (x + Scalar(1))));
  }
  // x <= -2: multiply through by e^{x} so nothing overflows.
  const Scalar e = exp(x);
  return ((x - Scalar(2)) * e + x + Scalar(2)) / (x * (e - x - Scalar(1)));
}

/// 1 - q(x), evaluated without cancellation for large positive x.
template <typename Scalar>
Scalar one_minus_q(Scalar x) {
  using std::exp;
  using std::isinf;
  if (isinf(x)) return x > 0 ? Scalar(0) : Scalar(1);
  if (x >= Scalar(1)) {
    const Scalar e = exp(-x);
    const Scalar num = Scalar(2) - e * (x * x + Scalar(2) * x + Scalar(2));
    return num / (x * (Scalar(1) - e * (x + Scalar(1))));
  }
  return Scalar(1) - q_eval(x);
}

/// rho(x) = (1 + q(x)) / (1 - q(x)); rho(+inf) = +inf.
template <typename Scalar>
Scalar rho_eval(Scalar x) {
  using std::isinf;
  if (isinf(x) && x > 0) return std::numeric_limits<Scalar>::infinity();
  return (Scalar(1) + q_eval(x)) / one_minus_q(x);
}

/// E(u) = (e^u - 1)/u with E(0) = 1.
template <typename Scalar>
Scalar expm1_ratio(Scalar u) {
  using std::abs;
  using std::expm1;
  if (abs(u) < Scalar(1e-8)) return Scalar(1) + u / Scalar(2) + u * u / Scalar(6);
  return expm1(u) / u;
}

/// log E(u), finite for every finite u (E itself overflows past u ~ 709).
template <typename Scalar>
Scalar log_expm1_ratio(Scalar u) {
  using std::abs;
  using std::exp;
  using std::log;
  using std::log1p;
  if (u > Scalar(30)) return u + log1p(-exp(-u)) - log(u);
  if (u < Scalar(-30)) return log1p(-exp(u)) - log(-u);
  return log(expm1_ratio(u));
}

/// Integral of e^{phi} over [lo, hi] for phi affine with phi(lo)=phi_lo,
/// phi(hi)=phi_hi. The slope argument is implied by the endpoint values and
/// is accepted for call-site symmetry only.
template <typename Scalar>
Scalar segment_mass(Scalar /*slope*/, Scalar phi_lo, Scalar phi_hi, Scalar lo, Scalar hi) {
  using std::exp;
  // Anchor on the larger endpoint so the exponential never overflows needlessly.
  if (phi_hi > phi_lo) return (hi - lo) * exp(phi_hi) * expm1_ratio(phi_lo - phi_hi);
  return (hi - lo) * exp(phi_lo) * expm1_ratio(phi_hi - phi_lo);
}

/// Moments M_k(d) = int_0^1 t^k e^{t d} dt for k = 0, 1, 2.
template <typename Scalar>
struct UnitMoments {
  Scalar m0, m1, m2;
};

template <typename Scalar>
UnitMoments<Scalar> unit_moments(Scalar d) {
  using std::abs;
  using std::exp;
  using std::expm1;
  UnitMoments<Scalar> m{};
  if (abs(d) < Scalar(3)) {
    // sum_j d^j / (j! (j + k + 1))
    Scalar term(1);
    m.m0 = m.m1 = m.m2 = Scalar(0);
    for (int j = 0; j < 45; ++j) {
      m.m0 += term / Scalar(j + 1);
      m.m1 += term / Scalar(j + 2);
      m.m2 += term / Scalar(j + 3);
      term *= d / Scalar(j + 1);
    }
    return m;
  }
  const Scalar ed = exp(d);
  m.m0 = expm1(d) / d;
  m.m1 = (ed * (d - Scalar(1)) + Scalar(1)) / (d * d);
  m.m2 = (ed * (d * d - Scalar(2) * d + Scalar(2)) - Scalar(2)) / (d * d * d);
  return m;
}

/// Weighted integrals over t in [0,1] of e^{(1-t) a + t b}:
///   i0 = int e, ia = int (1-t) e, ib = int t e,
///   iaa = int (1-t)^2 e, iab = int t(1-t) e, ibb = int t^2 e.
/// These are the value, gradient and Hessian of J(a,b) = (e^b - e^a)/(b - a).
template <typename Scalar>
struct ExpAffineMoments {
  Scalar i0, ia, ib, iaa, iab, ibb;
};

template <typename Scalar>
ExpAffineMoments<Scalar> exp_affine_moments(Scalar a, Scalar b) {
  using std::exp;
  const bool flip = b > a;
  const Scalar top = flip ? b : a;
  const auto m = unit_moments(flip ? a - b : b - a);
  const Scalar scale = exp(top);
  // Moments with weight t measured from the larger endpoint.
  const Scalar near0 = scale * m.m0;
  const Scalar far1 = scale * m.m1;                        // weight on the far end
  const Scalar near1 = scale * (m.m0 - m.m1);              // weight on the near end
  const Scalar far2 = scale * m.m2;
  const Scalar near2 = scale * (m.m0 - Scalar(2) * m.m1 + m.m2);
  const Scalar mixed = scale * (m.m1 - m.m2);
  if (!flip) return {near0, near1, far1, near2, mixed, far2};
  return {near0, far1, near1, far2, mixed, near2};
}

}  // namespace lcmle

#endif  // LCMLE_NUMERICS_HPP
