#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "lcmle/density.hpp"

namespace lcmle {

namespace {

using Kind = NamedDensity::Kind;

std::string format_number(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

double parse_number(std::string_view token) {
  if (token == "inf" || token == "+inf") return kInf;
  if (token == "-inf") return -kInf;
  double v = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw InvalidDensity("malformed number '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace

NamedDensity::NamedDensity(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {
  for (double p : params_) {
    if (std::isnan(p)) throw InvalidDensity("density parameters must not be NaN");
  }
  const auto& p = params_;
  switch (kind_) {
    case Kind::uniform:
      if (!(std::isfinite(p[0]) && std::isfinite(p[1]) && p[0] < p[1])) throw InvalidDensity("uniform needs a < b");
      exact_ = make_f1({0.0, p[0], p[1]});
      break;
    case Kind::exponential:
      if (!(p[0] > 0.0 && std::isfinite(p[0]))) throw InvalidDensity("exponential needs rate > 0");
      exact_ = make_f1({-p[0], 0.0, kInf});
      break;
    case Kind::truncated_exponential:
      exact_ = make_f1({p[0], p[1], p[2]});
      break;
    case Kind::laplace: {
      if (!(std::isfinite(p[0]) && p[1] > 0.0 && std::isfinite(p[1]))) throw InvalidDensity("laplace needs scale > 0");
      const double b = p[1];
      exact_ = PiecewiseLogLinearDensity({p[0]}, {-std::log(2.0 * b)}, 1.0 / b, -1.0 / b);
      break;
    }
    case Kind::gaussian:
      if (!(std::isfinite(p[0]) && p[1] > 0.0 && std::isfinite(p[1]))) throw InvalidDensity("gaussian needs sigma > 0");
      break;
    case Kind::gamma:
      if (!(p[0] >= 1.0 && p[0] <= 2.0)) throw InvalidDensity("gamma shape must lie in [1, 2]");
      if (!(p[1] > 0.0 && std::isfinite(p[1]))) throw InvalidDensity("gamma needs scale > 0");
      if (p[0] == 1.0) exact_ = make_f1({-1.0 / p[1], 0.0, kInf});
      break;
    case Kind::triangular:
      if (!(std::isfinite(p[0]) && std::isfinite(p[2]) && p[0] <= p[1] && p[1] <= p[2] && p[0] < p[2])) {
        throw InvalidDensity("triangular needs a <= c <= b with a < b");
      }
      break;
  }
}

NamedDensity NamedDensity::uniform(double a, double b) { return {Kind::uniform, {a, b}}; }
NamedDensity NamedDensity::exponential(double rate) { return {Kind::exponential, {rate}}; }
NamedDensity NamedDensity::truncated_exponential(const ExpSegmentSpec& spec) {
  return {Kind::truncated_exponential, {spec.alpha, spec.s1, spec.s2}};
}
NamedDensity NamedDensity::laplace(double mu, double scale) { return {Kind::laplace, {mu, scale}}; }
NamedDensity NamedDensity::gaussian(double mu, double sigma) { return {Kind::gaussian, {mu, sigma}}; }
NamedDensity NamedDensity::gamma(double shape, double scale) { return {Kind::gamma, {shape, scale}}; }
NamedDensity NamedDensity::triangular(double a, double mode, double b) { return {Kind::triangular, {a, mode, b}}; }

std::string NamedDensity::name() const {
  static constexpr const char* kNames[] = {"uniform", "exponential", "f1", "laplace", "gaussian", "gamma", "triangular"};
  std::string out = kNames[static_cast<int>(kind_)];
  out += ':';
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (i) out += ',';
    out += format_number(params_[i]);
  }
  return out;
}

double NamedDensity::log_pdf(double x) const {
  if (exact_) return exact_->log_pdf(x);
  const auto& p = params_;
  switch (kind_) {
    case Kind::gaussian: {
      const double z = (x - p[0]) / p[1];
      return -0.5 * z * z - std::log(p[1]) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    case Kind::gamma: {
      if (x < 0.0) return -kInf;
      if (x == 0.0) return p[0] == 1.0 ? -std::log(p[1]) : -kInf;
      return (p[0] - 1.0) * std::log(x) - x / p[1] - std::lgamma(p[0]) - p[0] * std::log(p[1]);
    }
    case Kind::triangular:
      return std::log(pdf(x));
    default:
      return -kInf;
  }
}

double NamedDensity::pdf(double x) const {
  if (kind_ == Kind::triangular) {
    const double a = params_[0];
    const double c = params_[1];
    const double b = params_[2];
    if (x < a || x > b) return 0.0;
    if (x < c) return 2.0 * (x - a) / ((b - a) * (c - a));
    if (x == c) return 2.0 / (b - a);
    return 2.0 * (b - x) / ((b - a) * (b - c));
  }
  return std::exp(log_pdf(x));
}

double NamedDensity::cdf(double x) const {
  if (exact_) return exact_->cdf(x);
  const auto& p = params_;
  switch (kind_) {
    case Kind::gaussian:
      return boost::math::cdf(boost::math::normal_distribution<double>(p[0], p[1]), x);
    case Kind::gamma:
      if (x <= 0.0) return 0.0;
      if (std::isinf(x)) return 1.0;
      return boost::math::cdf(boost::math::gamma_distribution<double>(p[0], p[1]), x);
    case Kind::triangular: {
      const double a = p[0];
      const double c = p[1];
      const double b = p[2];
      if (x <= a) return 0.0;
      if (x >= b) return 1.0;
      if (x <= c) return (x - a) * (x - a) / ((b - a) * (c - a));
      return 1.0 - (b - x) * (b - x) / ((b - a) * (b - c));
    }
    default:
      return 0.0;
  }
}

double NamedDensity::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile level must lie in (0, 1)");
  if (exact_) return exact_->quantile(p);
  const auto& q = params_;
  switch (kind_) {
    case Kind::gaussian:
      return boost::math::quantile(boost::math::normal_distribution<double>(q[0], q[1]), p);
    case Kind::gamma:
      return boost::math::quantile(boost::math::gamma_distribution<double>(q[0], q[1]), p);
    case Kind::triangular: {
      const double a = q[0];
      const double c = q[1];
      const double b = q[2];
      const double split = (c - a) / (b - a);
      if (p <= split) return a + std::sqrt(p * (b - a) * (c - a));
      return b - std::sqrt((1.0 - p) * (b - a) * (b - c));
    }
    default:
      return 0.0;
  }
}

double NamedDensity::lower() const {
  if (exact_) return exact_->lower();
  switch (kind_) {
    case Kind::gaussian:
      return -kInf;
    case Kind::gamma:
      return 0.0;
    default:
      return params_[0];
  }
}

double NamedDensity::upper() const {
  if (exact_) return exact_->upper();
  switch (kind_) {
    case Kind::triangular:
      return params_[2];
    default:
      return kInf;
  }
}

std::vector<double> NamedDensity::kinks() const {
  switch (kind_) {
    case Kind::laplace:
    case Kind::triangular:
      return {params_[kind_ == Kind::laplace ? 0 : 1]};
    default:
      return {};
  }
}

std::optional<PiecewiseLogLinearDensity> NamedDensity::piecewise() const { return exact_; }

std::optional<FStarParts> NamedDensity::fstar() const {
  const auto p = params_;
  switch (kind_) {
    case Kind::uniform: {
      const double height = 1.0 / (p[1] - p[0]);
      return FStarParts{0.0, [height](double) { return height; }, p[0], p[1]};
    }
    case Kind::exponential: {
      const double rate = p[0];
      return FStarParts{-rate, [rate](double) { return rate; }, 0.0, kInf};
    }
    case Kind::truncated_exponential: {
      // f = e^{alpha x} c with c the normalizer.
      const auto f = *exact_;
      const double alpha = p[0];
      const double anchor = f.knots().front();
      const double c = std::exp(f.log_values().front() - alpha * anchor);
      return FStarParts{alpha, [c](double) { return c; }, f.lower(), f.upper()};
    }
    case Kind::gamma: {
      const double shape = p[0];
      const double scale = p[1];
      const double log_c = -std::lgamma(shape) - shape * std::log(scale);
      return FStarParts{-1.0 / scale,
                        [shape, log_c](double x) { return x <= 0.0 ? (shape == 1.0 ? std::exp(log_c) : 0.0)
                                                                   : std::exp(log_c + (shape - 1.0) * std::log(x)); },
                        0.0, kInf};
    }
    case Kind::triangular: {
      const NamedDensity self = *this;
      return FStarParts{0.0, [self](double x) { return self.pdf(x); }, p[0], p[2]};
    }
    default:
      return std::nullopt;
  }
}

NamedDensity parse_named(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw InvalidDensity("expected name:params, got '" + std::string(text) + "'");
  const std::string_view name = text.substr(0, colon);
  std::vector<double> params;
  std::string_view rest = text.substr(colon + 1);
  while (true) {
    const auto comma = rest.find(',');
    params.push_back(parse_number(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  auto expect = [&](std::size_t count) {
    if (params.size() != count) {
      throw InvalidDensity(std::string(name) + " takes " + std::to_string(count) + " parameters");
    }
  };
  if (name == "uniform") {
    expect(2);
    return NamedDensity::uniform(params[0], params[1]);
  }
  if (name == "exponential") {
    expect(1);
    return NamedDensity::exponential(params[0]);
  }
  if (name == "f1" || name == "truncexp") {
    expect(3);
    return NamedDensity::truncated_exponential({params[0], params[1], params[2]});
  }
  if (name == "laplace") {
    expect(2);
    return NamedDensity::laplace(params[0], params[1]);
  }
  if (name == "gaussian") {
    expect(2);
    return NamedDensity::gaussian(params[0], params[1]);
  }
  if (name == "gamma") {
    expect(2);
    return NamedDensity::gamma(params[0], params[1]);
  }
  if (name == "triangular") {
    expect(3);
    return NamedDensity::triangular(params[0], params[1], params[2]);
  }
  throw InvalidDensity("unknown density '" + std::string(name) + "'");
}

}  // namespace lcmle
