// Independent reference computations for the tests: adaptive quadrature,
// random members of F^1, and a direct-search log-concave MLE for tiny n.
#ifndef LCMLE_TESTS_ORACLES_HPP
#define LCMLE_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gsl/gsl_multimin.h>

#include "lcmle/density.hpp"
#include "lcmle/rng.hpp"

namespace oracle {

/// Adaptive Gauss-Kronrod over [lo, hi] split at `cuts`; infinite limits
/// are mapped by Boost.
inline double integrate(const std::function<double(double)>& f, double lo, double hi, std::vector<double> cuts = {}) {
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double c) { return !(c > lo && c < hi); }), cuts.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.insert(cuts.begin(), lo);
  cuts.push_back(hi);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    if (std::isinf(a) || std::isinf(b)) {
      total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
      continue;
    }
    // Boost's termination test misbehaves on short intervals; work on [-1, 1].
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    auto unit = [&](double t) { return f(mid + half * t); };
    total += half * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(unit, -1.0, 1.0, 15, 1e-12);
  }
  return total;
}

inline double between(lcmle::StreamRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// Random member of F^1: a bounded segment with alpha in [-6, 6] three
/// times in four, otherwise a half-line exponential.
inline lcmle::ExpSegmentSpec random_f1(lcmle::StreamRng& rng) {
  const double u = rng.uniform();
  if (u < 0.75) {
    const double s1 = between(rng, -3.0, 3.0);
    return {between(rng, -6.0, 6.0), s1, s1 + between(rng, 0.2, 4.0)};
  }
  const double rate = between(rng, 0.3, 3.0);
  const double edge = between(rng, -2.0, 2.0);
  if (u < 0.875) return {-rate, edge, lcmle::kInf};
  return {rate, -lcmle::kInf, edge};
}

/// Profile log-likelihood of the concave piecewise-linear log with knots at
/// the data x (sorted, distinct) and slopes s: sum w_i psi(x_i) - log int e^psi.
inline double profile_loglik(const std::vector<double>& x, const std::vector<double>& w,
                             const std::vector<double>& s) {
  std::vector<double> psi(x.size(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) psi[i + 1] = psi[i] + s[i] * (x[i + 1] - x[i]);
  // log of each segment integral, then log-sum-exp.
  std::vector<double> logs;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double d = x[i + 1] - x[i];
    const double top = std::max(psi[i], psi[i + 1]);
    const double drop = -std::abs(psi[i + 1] - psi[i]);
    const double ratio = drop == 0.0 ? 1.0 : -std::expm1(drop) / -drop;
    logs.push_back(top + std::log(d * ratio));
  }
  const double m = *std::max_element(logs.begin(), logs.end());
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - m);
  double fit = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) fit += w[i] * psi[i];
  return fit - (m + std::log(acc));
}

struct DirectSearch {
  std::vector<double> x;
  std::vector<double> w;
};

// Slopes from unconstrained parameters: s_0 = p_0, s_{j+1} = s_j - p_{j+1}^2.
inline std::vector<double> slopes_from(const gsl_vector* p, std::size_t count) {
  std::vector<double> s(count);
  s[0] = gsl_vector_get(p, 0);
  for (std::size_t j = 1; j < count; ++j) {
    const double u = gsl_vector_get(p, j);
    s[j] = s[j - 1] - u * u;
  }
  return s;
}

inline double negative_profile(const gsl_vector* p, void* params) {
  const auto* problem = static_cast<const DirectSearch*>(params);
  return -profile_loglik(problem->x, problem->w, slopes_from(p, problem->x.size() - 1));
}

/// Maximum of the profile log-likelihood by 1-D golden-section search
/// (two points) or restarted Nelder-Mead simplex (three or more).
inline double direct_search_mle(const std::vector<double>& x, const std::vector<double>& w) {
  DirectSearch problem{x, w};
  const std::size_t dim = x.size() - 1;
  if (dim == 1) {
    std::vector<double> s(1);
    auto g = [&](double a) {
      s[0] = a;
      return profile_loglik(x, w, s);
    };
    const double span = 200.0 / (x.back() - x.front());
    double lo = -span;
    double hi = span;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - r * (hi - lo);
    double d = lo + r * (hi - lo);
    while (hi - lo > 1e-12 * (1.0 + std::abs(lo))) {
      if (g(c) > g(d)) {
        hi = d;
      } else {
        lo = c;
      }
      c = hi - r * (hi - lo);
      d = lo + r * (hi - lo);
    }
    return g(0.5 * (lo + hi));
  }

  gsl_multimin_function fn{&negative_profile, dim, &problem};
  gsl_vector* start = gsl_vector_alloc(dim);
  gsl_vector* step = gsl_vector_alloc(dim);
  gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
  const double scale = 1.0 / (x.back() - x.front());
  double best = -std::numeric_limits<double>::infinity();
  lcmle::StreamRng rng(2024, {dim});
  for (int restart = 0; restart < 40; ++restart) {
    if (restart == 0) {
      gsl_vector_set_zero(start);
    } else if (restart < 20) {
      for (std::size_t j = 0; j < dim; ++j) gsl_vector_set(start, j, between(rng, -3.0, 3.0) * std::sqrt(scale));
      gsl_vector_set(start, 0, between(rng, -5.0, 5.0) * scale);
    } else {
      // Polish from the incumbent.
      gsl_vector_memcpy(start, gsl_multimin_fminimizer_x(solver));
    }
    gsl_vector_set_all(step, restart < 20 ? scale : 1e-3 * scale);
    gsl_multimin_fminimizer_set(solver, &fn, start, step);
    for (int it = 0; it < 20000; ++it) {
      if (gsl_multimin_fminimizer_iterate(solver)) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver), 1e-13) == GSL_SUCCESS) break;
    }
    best = std::max(best, -gsl_multimin_fminimizer_minimum(solver));
  }
  gsl_multimin_fminimizer_free(solver);
  gsl_vector_free(step);
  gsl_vector_free(start);
  return best;
}

/// Random concave piecewise-linear log-density on [lo, hi], normalised.
inline lcmle::PiecewiseLogLinearDensity random_concave(lcmle::StreamRng& rng, double lo, double hi) {
  const int pieces = 1 + static_cast<int>(rng.uniform() * 5);
  std::vector<double> knots{lo, hi};
  for (int j = 1; j < pieces; ++j) knots.push_back(between(rng, lo, hi));
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  const double width = hi - lo;
  double slope = between(rng, -6.0, 6.0) / width;
  std::vector<double> logs{0.0};
  for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
    logs.push_back(logs.back() + slope * (knots[j + 1] - knots[j]));
    slope -= between(rng, 0.0, 8.0) / width;
  }
  return lcmle::PiecewiseLogLinearDensity::normalized(knots, logs);
}

}  // namespace oracle

#endif  // LCMLE_TESTS_ORACLES_HPP
