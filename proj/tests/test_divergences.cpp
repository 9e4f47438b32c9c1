#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "lcmle/divergences.hpp"
#include "oracles.hpp"

using namespace lcmle;

namespace {

Density named(const char* spec) { return Density(parse_named(spec)); }

std::vector<double> joint_cuts(const Density& f, const Density& g) {
  auto cuts = f.breakpoints();
  const auto more = g.breakpoints();
  cuts.insert(cuts.end(), more.begin(), more.end());
  return cuts;
}

double quad_tv(const Density& f, const Density& g) {
  return 0.5 * oracle::integrate([&](double x) { return std::abs(f.pdf(x) - g.pdf(x)); },
                                 std::min(f.lower(), g.lower()), std::max(f.upper(), g.upper()), joint_cuts(f, g));
}

double quad_hellinger(const Density& f, const Density& g) {
  return oracle::integrate(
      [&](double x) {
        const double d = std::sqrt(f.pdf(x)) - std::sqrt(g.pdf(x));
        return d * d;
      },
      std::min(f.lower(), g.lower()), std::max(f.upper(), g.upper()), joint_cuts(f, g));
}

double quad_kl(const Density& f, const Density& g) {
  return oracle::integrate(
      [&](double x) {
        const double p = f.pdf(x);
        return p > 0.0 ? p * (f.log_pdf(x) - g.log_pdf(x)) : 0.0;
      },
      f.lower(), f.upper(), joint_cuts(f, g));
}

// Dense grid over a finite window, then golden-section polish around the best node.
double grid_sup(const std::function<double(double)>& h, double lo, double hi, int points) {
  double best = -1.0;
  int at = 0;
  for (int i = 0; i <= points; ++i) {
    const double v = h(lo + (hi - lo) * i / points);
    if (v > best) {
      best = v;
      at = i;
    }
  }
  const double step = (hi - lo) / points;
  const double a = lo + step * std::max(0, at - 1);
  const double b = lo + step * std::min(points, at + 1);
  const auto r = boost::math::tools::brent_find_minima([&](double x) { return -h(x); }, a, b, 50);
  return std::max(best, -r.second);
}

double window_lo(const Density& f, const Density& g) {
  return std::min(std::isfinite(f.lower()) ? f.lower() : f.quantile(1e-12),
                  std::isfinite(g.lower()) ? g.lower() : g.quantile(1e-12));
}
double window_hi(const Density& f, const Density& g) {
  return std::max(std::isfinite(f.upper()) ? f.upper() : f.quantile(1 - 1e-12),
                  std::isfinite(g.upper()) ? g.upper() : g.quantile(1 - 1e-12));
}

bool support_inside(const Density& f, const Density& g) { return f.lower() >= g.lower() && f.upper() <= g.upper(); }

// Pairs sharing a support so that every divergence is finite.
std::pair<ExpSegmentSpec, ExpSegmentSpec> common_support_pair(StreamRng& rng) {
  auto s = oracle::random_f1(rng);
  auto t = oracle::random_f1(rng);
  t.s1 = s.s1;
  t.s2 = s.s2;
  if (std::isinf(s.s2)) t.alpha = -std::abs(t.alpha) - 0.1;
  if (std::isinf(s.s1)) t.alpha = std::abs(t.alpha) + 0.1;
  return {s, t};
}

}  // namespace

TEST_CASE("documented values") {
  const auto u1 = named("uniform:0,1");
  const auto u2 = named("uniform:0,2");
  const auto e1 = named("exponential:1");
  const auto e2 = named("exponential:2");
  CHECK(tv(u1, u1).value == 0.0);
  CHECK(tv(u1, u2).value == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tv(e1, e2).value == doctest::Approx(quad_tv(e1, e2)).epsilon(1e-9));
  CHECK(tv(e1, e2).value == doctest::Approx(0.25).epsilon(1e-14));  // crossing at log 2
  CHECK(hellinger_sq(e1, e1).value == doctest::Approx(0.0).scale(1.0));
  CHECK(hellinger_sq(e1, e2).value == doctest::Approx(2.0 - 4.0 * std::sqrt(2.0) / 3.0).epsilon(1e-14));
  CHECK(kl_sq(e1, e1).value == doctest::Approx(0.0).scale(1.0));
  CHECK(kl_sq(e1, e2).value == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-14));
  CHECK(std::isinf(kl_sq(u2, u1).value));
  CHECK(kl_sq(u1, u2).value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(tv(e1, e2).method == Method::closed_form);
}

TEST_CASE("closed forms agree with quadrature on random F1 pairs") {
  StreamRng rng(500);
  for (int i = 0; i < 500; ++i) {
    const auto s = oracle::random_f1(rng);
    const auto t = oracle::random_f1(rng);
    const Density f(make_f1(s));
    const Density g(make_f1(t));
    CAPTURE(i);
    CHECK(std::abs(tv(f, g).value - quad_tv(f, g)) <= 1e-8);
    CHECK(std::abs(hellinger_sq(f, g).value - quad_hellinger(f, g)) <= 1e-8);
    const double kl = kl_sq(f, g).value;
    if (support_inside(f, g)) {
      CHECK(std::abs(kl - quad_kl(f, g)) <= 1e-8 * std::max(1.0, kl));
    } else {
      CHECK(std::isinf(kl));
    }
  }
}

TEST_CASE("named truths take the quadrature route") {
  const auto g = named("gaussian:0,1");
  const auto l = named("laplace:0,1");
  const auto value = tv(g, l);
  CHECK(value.method == Method::quadrature);
  CHECK(value.value == doctest::Approx(quad_tv(g, l)).epsilon(1e-9));
  CHECK(hellinger_sq(g, l).value == doctest::Approx(quad_hellinger(g, l)).epsilon(1e-9));
  CHECK(kl_sq(g, l).value == doctest::Approx(quad_kl(g, l)).epsilon(1e-9));
  const auto gm = named("gamma:1.5,1");
  const auto ex = named("exponential:1");
  CHECK(kl_sq(gm, ex).value == doctest::Approx(quad_kl(gm, ex)).epsilon(1e-9));
  CHECK(std::isinf(kl_sq(g, ex).value));
}

TEST_CASE("chain tv^2 <= hellinger_sq <= kl_sq") {
  StreamRng rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const auto [s, t] = common_support_pair(rng);
    const Density f(make_f1(s));
    const Density g(make_f1(t));
    const double d_tv = tv(f, g).value;
    const double d_h = hellinger_sq(f, g).value;
    const double d_kl = kl_sq(f, g).value;
    CAPTURE(i);
    CHECK(d_tv * d_tv <= d_h + 1e-15);
    CHECK(d_h <= d_kl + 1e-15);
    CHECK(d_tv <= 1.0);
    CHECK(d_h <= 2.0);
    CHECK(d_tv >= 0.0);
  }
}

TEST_CASE("symmetry") {
  StreamRng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Density f(make_f1(oracle::random_f1(rng)));
    const Density g(i % 2 ? make_f1(oracle::random_f1(rng)) : oracle::random_concave(rng, -1.0, 1.0));
    CHECK(std::abs(tv(f, g).value - tv(g, f).value) <= 1e-12);
    CHECK(std::abs(hellinger_sq(f, g).value - hellinger_sq(g, f).value) <= 1e-12);
    CHECK(std::abs(ks_sup(f, g).value - ks_sup(g, f).value) <= 1e-12);
  }
}

TEST_CASE("affine invariance of every divergence") {
  StreamRng rng(44);
  for (int i = 0; i < 20; ++i) {
    const auto [s, t] = common_support_pair(rng);
    const double a = (i % 2 ? 1.0 : -1.0) * oracle::between(rng, 0.3, 4.0);
    const double b = oracle::between(rng, -3.0, 3.0);
    const Density f(make_f1(s));
    const Density g(make_f1(t));
    const Density fa(make_f1(s.pushforward(a, b)));
    const Density ga(make_f1(t.pushforward(a, b)));
    CAPTURE(i);
    CHECK(tv(fa, ga).value == doctest::Approx(tv(f, g).value).epsilon(1e-9).scale(1.0));
    CHECK(hellinger_sq(fa, ga).value == doctest::Approx(hellinger_sq(f, g).value).epsilon(1e-9).scale(1.0));
    CHECK(kl_sq(fa, ga).value == doctest::Approx(kl_sq(f, g).value).epsilon(1e-9).scale(1.0));
    CHECK(ks_sup(fa, ga).value == doctest::Approx(ks_sup(f, g).value).epsilon(1e-9).scale(1.0));
    CHECK(dks_n(fa, ga, 7).value == doctest::Approx(dks_n(f, g, 7).value).epsilon(1e-9).scale(1.0));
  }
  // dx_sq: the Jacobian cancels between the fit and the truth.
  const auto truth = parse_named("gamma:1.5,1");
  StreamRng draw(3);
  const auto xs = sample(Density(truth), 300, draw);
  const auto ws = WeightedSample::from_raw(xs);
  const auto fit = fit_mle(ws);
  const auto moved = ws.pushforward(-2.0, 1.0);
  const auto fit_moved = fit_mle(moved);
  // The truth must move with the data; a piecewise truth makes that exact.
  const auto pl_truth = oracle::random_concave(draw, ws.min() - 0.1, ws.max() + 0.1);
  const double before = dx_sq(fit, ws, Density(pl_truth)).value;
  const double after = dx_sq(fit_moved, moved, Density(pl_truth.pushforward(-2.0, 1.0))).value;
  CHECK(after == doctest::Approx(before).epsilon(1e-9).scale(1.0));
}

TEST_CASE("Kolmogorov-Smirnov distances") {
  const auto u = named("uniform:0,1");
  CHECK(ks_sup(std::vector<double>{0.5}, u).value == 0.5);
  for (std::size_t n : {1u, 5u, 40u}) {
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = (i + 0.5) / n;
    CHECK(ks_sup(xs, u).value == doctest::Approx(0.5 / n).epsilon(1e-14));
    if (n >= 2) CHECK(ks_sup(WeightedSample::from_raw(xs), u).value == doctest::Approx(0.5 / n).epsilon(1e-14));
  }
  CHECK(ks_sup(std::vector<double>{0.2, 0.2, 0.9}, u).value == doctest::Approx(2.0 / 3.0 - 0.2).epsilon(1e-14));

  StreamRng rng(12);
  for (int i = 0; i < 20; ++i) {
    const Density f(i % 3 ? make_f1(oracle::random_f1(rng)) : oracle::random_concave(rng, -1.0, 2.0));
    const Density g(make_f1(oracle::random_f1(rng)));
    const double grid = grid_sup([&](double x) { return std::abs(f.cdf(x) - g.cdf(x)); }, window_lo(f, g),
                                 window_hi(f, g), 1000000);
    CHECK(std::abs(ks_sup(f, g).value - grid) <= 1e-6);
  }
  const auto gs = named("gaussian:0,1");
  const auto lp = named("laplace:0.3,1");
  const double grid = grid_sup([&](double x) { return std::abs(gs.cdf(x) - lp.cdf(x)); }, -20.0, 20.0, 1000000);
  CHECK(std::abs(ks_sup(gs, lp).value - grid) <= 1e-6);
}

TEST_CASE("extreme order statistic discrepancy") {
  const auto u1 = named("uniform:0,1");
  const auto u2 = named("uniform:0,2");
  CHECK(dks_n(u1, u1, 5).value == 0.0);
  CHECK_THROWS_AS(dks_n(u1, u2, 0), std::invalid_argument);

  StreamRng rng(9);
  for (int i = 0; i < 10; ++i) {
    const Density f(make_f1(oracle::random_f1(rng)));
    const Density g(make_f1(oracle::random_f1(rng)));
    CHECK(dks_n(f, g, 1).value == doctest::Approx(2.0 * ks_sup(f, g).value).epsilon(1e-9));
  }

  auto lower = [&](double x) { return std::abs(std::pow(u1.cdf(x), 3) - std::pow(u2.cdf(x), 3)); };
  auto upper = [&](double x) { return std::abs(std::pow(1 - u1.cdf(x), 3) - std::pow(1 - u2.cdf(x), 3)); };
  const double oracle_value = grid_sup(lower, 0.0, 2.0, 1000000) + grid_sup(upper, 0.0, 2.0, 1000000);
  CHECK(std::abs(dks_n(u1, u2, 3).value - oracle_value) <= 1e-8);
  // By hand: 7/8 from the maxima and the interior stationary point of the upper term.
  const double x = (std::sqrt(2.0) - 1.0) / (std::sqrt(2.0) - 0.5);
  const double by_hand = 7.0 / 8.0 + std::abs(std::pow(1 - x, 3) - std::pow(1 - x / 2, 3));
  CHECK(dks_n(u1, u2, 3).value == doctest::Approx(by_hand).epsilon(1e-12));
}

TEST_CASE("empirical divergence") {
  const auto u = named("uniform:0,1");
  const std::vector<double> xs{0.0, 1.0};
  const auto ws = WeightedSample::from_raw(xs);
  const auto fit = fit_mle(ws);
  CHECK(std::abs(dx_sq(fit, ws, u).value) < 1e-12);
  CHECK(dx_sq(fit, ws, Density(fit.density)).value == 0.0);

  for (const char* truth : {"uniform:0,1", "laplace:0,1", "gaussian:0,1", "gamma:1.5,1"}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      StreamRng rng(seed, {31});
      const Density f0 = named(truth);
      const auto sample = WeightedSample::from_raw(lcmle::sample(f0, 100, rng));
      const auto f = fit_mle(sample);
      CAPTURE(truth);
      CHECK(kl_sq(Density(f.density), f0).value <= dx_sq(f, sample, f0).value + 1e-9);
    }
  }

  StreamRng rng(4);
  const auto outside = WeightedSample::from_raw(sample(named("uniform:0,2"), 50, rng));
  const auto wide = fit_mle(outside);
  CHECK_THROWS_AS(dx_sq(wide, outside, u), DomainError);
}

TEST_CASE("divergence names") {
  for (auto kind : {DivergenceKind::tv, DivergenceKind::hellinger_sq, DivergenceKind::kl_sq, DivergenceKind::dx_sq,
                    DivergenceKind::ks, DivergenceKind::dks_n}) {
    CHECK(parse_divergence_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_divergence_kind("wasserstein"), std::invalid_argument);
}
