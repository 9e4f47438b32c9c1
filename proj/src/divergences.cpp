#include "lcmle/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "lcmle/numerics.hpp"

namespace lcmle {

std::string_view to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::tv:
      return "tv";
    case DivergenceKind::hellinger_sq:
      return "hellinger_sq";
    case DivergenceKind::kl_sq:
      return "kl_sq";
    case DivergenceKind::dx_sq:
      return "dx_sq";
    case DivergenceKind::ks:
      return "ks";
    case DivergenceKind::dks_n:
      return "dks_n";
  }
  return "";
}

std::string_view to_string(Method method) { return method == Method::closed_form ? "closed_form" : "quadrature"; }

DivergenceKind parse_divergence_kind(std::string_view text) {
  for (auto kind : {DivergenceKind::tv, DivergenceKind::hellinger_sq, DivergenceKind::kl_sq, DivergenceKind::dx_sq,
                    DivergenceKind::ks, DivergenceKind::dks_n}) {
    if (to_string(kind) == text) return kind;
  }
  throw std::invalid_argument("unknown divergence kind '" + std::string(text) + "'");
}

namespace {

constexpr double kQuadratureTolerance = 1e-12;

/// A cell of the common refinement of two piecewise log-linear densities;
/// each density is either absent or log-affine on the whole cell.
struct Cell {
  double u;
  double v;
  std::optional<LogAffinePiece> f;
  std::optional<LogAffinePiece> g;
};

std::optional<LogAffinePiece> piece_covering(const std::vector<LogAffinePiece>& pieces, double u, double v) {
  double probe;
  if (std::isfinite(u) && std::isfinite(v)) {
    probe = 0.5 * (u + v);
  } else if (std::isfinite(u)) {
    probe = u + 1.0;
  } else {
    probe = v - 1.0;
  }
  for (const auto& p : pieces) {
    if (probe >= p.lo && probe <= p.hi) return p;
  }
  return std::nullopt;
}

std::vector<Cell> common_refinement(const PiecewiseLogLinearDensity& f, const PiecewiseLogLinearDensity& g) {
  std::vector<double> cuts = f.knots();
  cuts.insert(cuts.end(), g.knots().begin(), g.knots().end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  if (std::min(f.lower(), g.lower()) == -kInf) cuts.insert(cuts.begin(), -kInf);
  if (std::max(f.upper(), g.upper()) == kInf) cuts.push_back(kInf);
  const auto fp = f.pieces();
  const auto gp = g.pieces();
  std::vector<Cell> cells;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    cells.push_back({cuts[i], cuts[i + 1], piece_covering(fp, cuts[i], cuts[i + 1]),
                     piece_covering(gp, cuts[i], cuts[i + 1])});
  }
  return cells;
}

double finite_point(const Cell& c) { return std::isfinite(c.u) ? c.u : c.v; }

/// Root of log f - log g inside the open cell, if any.
std::optional<double> crossing(const Cell& c) {
  const double at = finite_point(c);
  const double delta = c.f->log_at(at) - c.g->log_at(at);
  const double rate = c.f->slope - c.g->slope;
  if (rate == 0.0) return std::nullopt;
  const double root = at - delta / rate;
  if (root > c.u && root < c.v) return root;
  return std::nullopt;
}

/// Sorted finite breakpoints of both densities.
std::vector<double> joint_breakpoints(const Density& f, const Density& g) {
  std::vector<double> cuts = f.breakpoints();
  const auto more = g.breakpoints();
  cuts.insert(cuts.end(), more.begin(), more.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

template <class F>
double integrate_pieces(const std::vector<double>& cuts, double lo, double hi, F integrand) {
  std::vector<double> ends{lo};
  for (double c : cuts) {
    if (c > lo && c < hi) ends.push_back(c);
  }
  ends.push_back(hi);
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
    const double a = ends[i];
    const double b = ends[i + 1];
    if (std::isinf(a) || std::isinf(b)) {
      total += GK::integrate(integrand, a, b, 20, kQuadratureTolerance);
      continue;
    }
    // Boost floors its error estimate at 2 eps |K| on [-1, 1] but compares it
    // with a tolerance scaled by the half-width, so short pieces never
    // terminate. Integrate on [-1, 1] directly.
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    auto unit = [&](double t) { return integrand(mid + half * t); };
    total += half * GK::integrate(unit, -1.0, 1.0, 20, kQuadratureTolerance);
  }
  return total;
}

double spread(const Density& d) {
  const double iqr = d.quantile(0.75) - d.quantile(0.25);
  return iqr > 0.0 ? iqr : 1.0;
}

/// Candidate points for sup |F - G|: breakpoints and crossings of f and g.
std::vector<double> crossing_candidates(const Density& f, const Density& g) {
  auto cuts = joint_breakpoints(f, g);
  std::vector<double> candidates = cuts;
  const double lo = std::min(f.lower(), g.lower());
  const double hi = std::max(f.upper(), g.upper());
  std::vector<double> ends;
  if (lo == -kInf) ends.push_back(-kInf);
  ends.insert(ends.end(), cuts.begin(), cuts.end());
  if (hi == kInf) ends.push_back(kInf);
  const double scale = std::max(spread(f), spread(g));
  auto diff = [&](double x) { return f.pdf(x) - g.pdf(x); };
  constexpr int kGrid = 160;
  for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
    const double u = ends[i];
    const double v = ends[i + 1];
    auto point = [&](int k) {
      const double s = static_cast<double>(k) / kGrid;
      if (std::isfinite(u) && std::isfinite(v)) return u + (v - u) * s;
      const double stretch = scale * s / (1.0 - s);
      return std::isfinite(u) ? u + stretch : v - stretch;
    };
    // Interior grid only: pdf values at the cell ends may belong to the neighbour.
    double prev_x = point(1);
    double prev = diff(prev_x);
    for (int k = 2; k < kGrid; ++k) {
      const double x = point(k);
      const double cur = diff(x);
      if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
        // On a left half-line the grid runs right to left.
        const bool forward = prev_x < x;
        boost::uintmax_t iters = 100;
        const auto bracket = boost::math::tools::toms748_solve(
            diff, forward ? prev_x : x, forward ? x : prev_x, forward ? prev : cur, forward ? cur : prev,
            boost::math::tools::eps_tolerance<double>(50), iters);
        candidates.push_back(0.5 * (bracket.first + bracket.second));
      }
      prev_x = x;
      prev = cur;
    }
  }
  return candidates;
}

}  // namespace

DivergenceValue tv(const Density& f, const Density& g) {
  if (f.exact() && g.exact()) {
    double total = 0.0;
    for (const auto& c : common_refinement(*f.exact(), *g.exact())) {
      if (c.f && c.g) {
        std::vector<double> ends{c.u};
        if (auto r = crossing(c)) ends.push_back(*r);
        ends.push_back(c.v);
        for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
          total += std::abs(piece_integrals(*c.f, ends[i], ends[i + 1]).mass -
                            piece_integrals(*c.g, ends[i], ends[i + 1]).mass);
        }
      } else if (c.f) {
        total += piece_integrals(*c.f, c.u, c.v).mass;
      } else if (c.g) {
        total += piece_integrals(*c.g, c.u, c.v).mass;
      }
    }
    return {DivergenceKind::tv, std::clamp(0.5 * total, 0.0, 1.0), Method::closed_form};
  }
  const auto cuts = joint_breakpoints(f, g);
  const double value = integrate_pieces(cuts, std::min(f.lower(), g.lower()), std::max(f.upper(), g.upper()),
                                        [&](double x) { return std::abs(f.pdf(x) - g.pdf(x)); });
  return {DivergenceKind::tv, std::clamp(0.5 * value, 0.0, 1.0), Method::quadrature};
}

DivergenceValue hellinger_sq(const Density& f, const Density& g) {
  if (f.exact() && g.exact()) {
    double total = 0.0;
    for (const auto& c : common_refinement(*f.exact(), *g.exact())) {
      if (c.f && c.g) {
        const double at = finite_point(c);
        const LogAffinePiece mean{c.u, c.v, at, 0.5 * (c.f->log_at(at) + c.g->log_at(at)),
                                  0.5 * (c.f->slope + c.g->slope)};
        const double cell = piece_integrals(*c.f, c.u, c.v).mass + piece_integrals(*c.g, c.u, c.v).mass -
                            2.0 * piece_integrals(mean, c.u, c.v).mass;
        total += std::max(0.0, cell);
      } else if (c.f) {
        total += piece_integrals(*c.f, c.u, c.v).mass;
      } else if (c.g) {
        total += piece_integrals(*c.g, c.u, c.v).mass;
      }
    }
    return {DivergenceKind::hellinger_sq, std::clamp(total, 0.0, 2.0), Method::closed_form};
  }
  const auto cuts = joint_breakpoints(f, g);
  const double value =
      integrate_pieces(cuts, std::min(f.lower(), g.lower()), std::max(f.upper(), g.upper()), [&](double x) {
        const double d = std::sqrt(f.pdf(x)) - std::sqrt(g.pdf(x));
        return d * d;
      });
  return {DivergenceKind::hellinger_sq, std::clamp(value, 0.0, 2.0), Method::quadrature};
}

DivergenceValue kl_sq(const Density& f, const Density& g) {
  const bool exact = f.exact() && g.exact();
  const Method method = exact ? Method::closed_form : Method::quadrature;
  if (f.lower() < g.lower() || f.upper() > g.upper()) return {DivergenceKind::kl_sq, kInf, method};
  if (exact) {
    double total = 0.0;
    for (const auto& c : common_refinement(*f.exact(), *g.exact())) {
      if (!c.f) continue;
      const auto in = piece_integrals(*c.f, c.u, c.v);
      const double delta = c.f->log_at(in.about) - c.g->log_at(in.about);
      total += delta * in.mass + (c.f->slope - c.g->slope) * in.moment;
    }
    return {DivergenceKind::kl_sq, std::max(0.0, total), Method::closed_form};
  }
  const auto cuts = joint_breakpoints(f, g);
  const double value = integrate_pieces(cuts, f.lower(), f.upper(), [&](double x) {
    const double lf = f.log_pdf(x);
    if (lf == -kInf) return 0.0;
    return std::exp(lf) * (lf - g.log_pdf(x));
  });
  return {DivergenceKind::kl_sq, std::max(0.0, value), Method::quadrature};
}

DivergenceValue dx_sq(const MleFit& fit, const WeightedSample& sample, const Density& f0) {
  double total = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double x = sample.points()[i];
    const double l0 = f0.log_pdf(x);
    if (l0 == -kInf) throw DomainError("truth density vanishes at a sample point");
    total += sample.weights()[i] * (fit.density.log_pdf(x) - l0);
  }
  return {DivergenceKind::dx_sq, total, Method::closed_form};
}

DivergenceValue ks_sup(const WeightedSample& sample, const Density& f0) {
  double sup = 0.0;
  double before = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double after = (i + 1 == sample.size()) ? 1.0 : before + sample.weights()[i];
    const double f = f0.cdf(sample.points()[i]);
    sup = std::max({sup, std::abs(f - before), std::abs(f - after)});
    before = after;
  }
  return {DivergenceKind::ks, sup, Method::closed_form};
}

DivergenceValue ks_sup(std::span<const double> raw, const Density& f0) {
  if (raw.empty()) throw std::invalid_argument("ks_sup needs at least one observation");
  std::vector<double> xs(raw.begin(), raw.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = f0.cdf(xs[i]);
    // Ties: only the outermost jump of a block matters, and both ends are visited.
    sup = std::max({sup, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  return {DivergenceKind::ks, sup, Method::closed_form};
}

DivergenceValue ks_sup(const Density& f, const Density& g) {
  std::vector<double> candidates;
  Method method = Method::closed_form;
  if (f.exact() && g.exact()) {
    for (const auto& c : common_refinement(*f.exact(), *g.exact())) {
      if (std::isfinite(c.u)) candidates.push_back(c.u);
      if (std::isfinite(c.v)) candidates.push_back(c.v);
      if (c.f && c.g) {
        if (auto r = crossing(c)) candidates.push_back(*r);
      }
    }
  } else {
    candidates = crossing_candidates(f, g);
    method = Method::quadrature;
  }
  double sup = 0.0;
  for (double x : candidates) sup = std::max(sup, std::abs(f.cdf(x) - g.cdf(x)));
  return {DivergenceKind::ks, sup, method};
}

DivergenceValue dks_n(const Density& f, const Density& g, std::size_t n) {
  if (n == 0) throw std::invalid_argument("dks_n needs n >= 1");
  const double power = static_cast<double>(n);
  auto lower_term = [&](double x) { return std::abs(std::pow(f.cdf(x), power) - std::pow(g.cdf(x), power)); };
  auto upper_term = [&](double x) {
    return std::abs(std::pow(1.0 - f.cdf(x), power) - std::pow(1.0 - g.cdf(x), power));
  };

  // Guarded grid: breakpoints, crossings and quantiles of both distributions.
  std::vector<double> grid = crossing_candidates(f, g);
  constexpr int kPerDensity = 50000;
  for (const Density* d : {&f, &g}) {
    for (int i = 0; i < kPerDensity; ++i) grid.push_back(d->quantile((i + 0.5) / kPerDensity));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  auto refine = [&](auto term) {
    std::size_t best = 0;
    double best_value = -1.0;
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      values[i] = term(grid[i]);
      if (values[i] > best_value) {
        best_value = values[i];
        best = i;
      }
    }
    // Local maximisation on each side of the best grid point.
    for (std::size_t side = 0; side < 2; ++side) {
      if ((side == 0 && best == 0) || (side == 1 && best + 1 == grid.size())) continue;
      const double a = side == 0 ? grid[best - 1] : grid[best];
      const double b = side == 0 ? grid[best] : grid[best + 1];
      const auto r = boost::math::tools::brent_find_minima([&](double x) { return -term(x); }, a, b, 40);
      best_value = std::max(best_value, -r.second);
    }
    return best_value;
  };
  return {DivergenceKind::dks_n, refine(lower_term) + refine(upper_term), Method::quadrature};
}

}  // namespace lcmle
