#include "lcmle/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "lcmle/numerics.hpp"

namespace lcmle {

namespace {

constexpr double kMassTolerance = 1e-10;

bool slopes_concave(double left, double right) {
  return right <= left + 1e-9 * std::max(1.0, std::max(std::abs(left), std::abs(right)));
}

}  // namespace

PieceIntegrals piece_integrals(const LogAffinePiece& piece, double u, double v) {
  if (!(u < v)) return {0.0, 0.0, std::isfinite(u) ? u : v};
  if (std::isinf(v)) {
    // [u, inf): needs a strictly negative slope.
    const double e = std::exp(piece.log_at(u));
    return {e / -piece.slope, e / (piece.slope * piece.slope), u};
  }
  if (std::isinf(u)) {
    const double e = std::exp(piece.log_at(v));
    return {e / piece.slope, -e / (piece.slope * piece.slope), v};
  }
  const double len = v - u;
  const auto m = exp_affine_moments(piece.log_at(u), piece.log_at(v));
  return {len * m.i0, len * len * m.ib, u};
}

// ---------------------------------------------------------------------------
// PiecewiseLogLinearDensity

PiecewiseLogLinearDensity::PiecewiseLogLinearDensity(Unchecked, std::vector<double> knots,
                                                     std::vector<double> log_values,
                                                     std::optional<double> left_tail,
                                                     std::optional<double> right_tail)
    : knots_(std::move(knots)),
      log_values_(std::move(log_values)),
      left_tail_(left_tail),
      right_tail_(right_tail) {
  build();
}

PiecewiseLogLinearDensity::PiecewiseLogLinearDensity(std::vector<double> knots, std::vector<double> log_values,
                                                     std::optional<double> left_tail,
                                                     std::optional<double> right_tail)
    : PiecewiseLogLinearDensity(Unchecked{}, std::move(knots), std::move(log_values), left_tail, right_tail) {
  if (std::abs(mass_ - 1.0) > kMassTolerance) {
    throw InvalidDensity("density mass " + std::to_string(mass_) + " differs from 1");
  }
}

PiecewiseLogLinearDensity PiecewiseLogLinearDensity::normalized(std::vector<double> knots,
                                                                std::vector<double> log_values,
                                                                std::optional<double> left_tail,
                                                                std::optional<double> right_tail) {
  PiecewiseLogLinearDensity raw(Unchecked{}, knots, log_values, left_tail, right_tail);
  if (!(raw.mass_ > 0.0) || !std::isfinite(raw.mass_)) throw InvalidDensity("cannot normalize density");
  const double shift = std::log(raw.mass_);
  for (double& v : log_values) v -= shift;
  return PiecewiseLogLinearDensity(std::move(knots), std::move(log_values), left_tail, right_tail);
}

void PiecewiseLogLinearDensity::build() {
  const std::size_t k = knots_.size();
  if (k == 0) throw InvalidDensity("density needs at least one knot");
  if (log_values_.size() != k) throw InvalidDensity("knots and log_values differ in length");
  if (k == 1 && !(left_tail_ || right_tail_)) throw InvalidDensity("bounded support needs two knots");
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::isfinite(knots_[i]) || !std::isfinite(log_values_[i])) {
      throw InvalidDensity("knots and log_values must be finite");
    }
    if (i > 0 && !(knots_[i - 1] < knots_[i])) throw InvalidDensity("knots must be strictly increasing");
  }
  if (left_tail_ && !(*left_tail_ > 0.0 && std::isfinite(*left_tail_))) {
    throw InvalidDensity("left tail slope must be positive");
  }
  if (right_tail_ && !(*right_tail_ < 0.0 && std::isfinite(*right_tail_))) {
    throw InvalidDensity("right tail slope must be negative");
  }

  slopes_.resize(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    slopes_[i] = (log_values_[i + 1] - log_values_[i]) / (knots_[i + 1] - knots_[i]);
    if (i > 0 && !slopes_concave(slopes_[i - 1], slopes_[i])) throw InvalidDensity("log-density is not concave");
  }
  if (left_tail_ && !slopes_.empty() && !slopes_concave(*left_tail_, slopes_.front())) {
    throw InvalidDensity("left tail breaks concavity");
  }
  if (right_tail_ && !slopes_.empty() && !slopes_concave(slopes_.back(), *right_tail_)) {
    throw InvalidDensity("right tail breaks concavity");
  }
  if (left_tail_ && right_tail_ && slopes_.empty() && !slopes_concave(*left_tail_, *right_tail_)) {
    throw InvalidDensity("tails break concavity");
  }

  cum_.assign(k, 0.0);
  cum_int_.assign(k, 0.0);
  if (left_tail_) {
    const double e = std::exp(log_values_[0]);
    cum_[0] = e / *left_tail_;
    cum_int_[0] = e / (*left_tail_ * *left_tail_);
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double len = knots_[i + 1] - knots_[i];
    const auto m = exp_affine_moments(log_values_[i], log_values_[i + 1]);
    cum_[i + 1] = cum_[i] + len * m.i0;
    // int_{t_i}^{t_{i+1}} F = F(t_i) len + int (t_{i+1} - x) f(x) dx
    cum_int_[i + 1] = cum_int_[i] + cum_[i] * len + len * len * m.ia;
  }
  mass_ = cum_.back();
  if (right_tail_) mass_ += std::exp(log_values_.back()) / -*right_tail_;
}

std::vector<LogAffinePiece> PiecewiseLogLinearDensity::pieces() const {
  std::vector<LogAffinePiece> out;
  out.reserve(knots_.size() + 1);
  if (left_tail_) out.push_back({-kInf, knots_.front(), knots_.front(), log_values_.front(), *left_tail_});
  for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
    out.push_back({knots_[i], knots_[i + 1], knots_[i], log_values_[i], slopes_[i]});
  }
  if (right_tail_) out.push_back({knots_.back(), kInf, knots_.back(), log_values_.back(), *right_tail_});
  return out;
}

double PiecewiseLogLinearDensity::log_pdf(double x) const {
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x < knots_.front()) {
    if (!left_tail_) return -kInf;
    return log_values_.front() + *left_tail_ * (x - knots_.front());
  }
  if (x > knots_.back()) {
    if (!right_tail_) return -kInf;
    return log_values_.back() + *right_tail_ * (x - knots_.back());
  }
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  if (it == knots_.end()) return log_values_.back();
  const auto i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  // Interpolate from the nearer knot.
  const double t = (x - knots_[i]) / (knots_[i + 1] - knots_[i]);
  return t <= 0.5 ? log_values_[i] + slopes_[i] * (x - knots_[i])
                  : log_values_[i + 1] - slopes_[i] * (knots_[i + 1] - x);
}

double PiecewiseLogLinearDensity::pdf(double x) const { return std::exp(log_pdf(x)); }

double PiecewiseLogLinearDensity::cdf(double x) const {
  if (x < knots_.front()) {
    if (!left_tail_) return 0.0;
    return std::exp(log_pdf(x)) / *left_tail_;
  }
  if (x >= knots_.back()) {
    if (!right_tail_) return 1.0;
    const double b = *right_tail_;
    const double tail = std::exp(log_values_.back()) * -std::expm1(b * (x - knots_.back())) / -b;
    return std::min(1.0, cum_.back() + tail);
  }
  const auto i = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
  const double phi_x = log_values_[i] + slopes_[i] * (x - knots_[i]);
  return std::min(1.0, cum_[i] + segment_mass(slopes_[i], log_values_[i], phi_x, knots_[i], x));
}

double PiecewiseLogLinearDensity::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile level must lie in (0, 1)");
  if (left_tail_ && p < cum_.front()) {
    const double b = *left_tail_;
    return knots_.front() + (std::log(p * b) - log_values_.front()) / b;
  }
  if (p >= cum_.back()) {
    if (!right_tail_) return knots_.back();
    const double b = *right_tail_;
    const double r = p - cum_.back();
    const double arg = b * r * std::exp(-log_values_.back());
    if (arg <= -1.0) return kInf;
    return knots_.back() + std::log1p(arg) / b;
  }
  auto it = std::upper_bound(cum_.begin(), cum_.end(), p);
  const auto i = static_cast<std::size_t>(it - cum_.begin()) - 1;
  const double len = knots_[i + 1] - knots_[i];
  const double r = p - cum_[i];
  const double s = slopes_[i];
  const double scaled = r * std::exp(-log_values_[i]);
  double y;
  if (std::abs(s * scaled) < 1e-12) {
    y = scaled * (1.0 - 0.5 * s * scaled);
  } else {
    const double arg = s * scaled;
    y = arg <= -1.0 ? len : std::log1p(arg) / s;
  }
  return knots_[i] + std::clamp(y, 0.0, len);
}

double PiecewiseLogLinearDensity::cdf_integral(double x) const {
  if (x <= knots_.front()) {
    if (!left_tail_) return 0.0;
    const double b = *left_tail_;
    return std::exp(log_pdf(x)) / (b * b);
  }
  const std::size_t k = knots_.size();
  if (x >= knots_.back()) {
    double base = cum_int_.back();
    const double len = x - knots_.back();
    if (!right_tail_) return base + len;
    // F(t) = 1 - tail(t); int_{t_k}^x F = len - int tail.
    const double b = *right_tail_;
    const double e = std::exp(log_values_.back());
    const double tail_at_knot = e / -b;
    // int_{t_k}^x (mass beyond t) dt = (e/b^2) (1 - e^{b len})
    const double tail_int = e / (b * b) * -std::expm1(b * len);
    return base + cum_[k - 1] * len + (tail_at_knot * len - tail_int);
  }
  const auto i = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
  const double len = x - knots_[i];
  const double phi_x = log_values_[i] + slopes_[i] * len;
  const auto m = exp_affine_moments(log_values_[i], phi_x);
  return cum_int_[i] + cum_[i] * len + len * len * m.ia;
}

PiecewiseLogLinearDensity PiecewiseLogLinearDensity::pushforward(double a, double b) const {
  if (!(a != 0.0) || !std::isfinite(a) || !std::isfinite(b)) throw InvalidDensity("affine map needs finite a != 0");
  const double shift = std::log(std::abs(a));
  std::vector<double> knots(knots_.size());
  std::vector<double> logs(knots_.size());
  std::optional<double> left;
  std::optional<double> right;
  if (a > 0) {
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      knots[i] = a * knots_[i] + b;
      logs[i] = log_values_[i] - shift;
    }
    if (left_tail_) left = *left_tail_ / a;
    if (right_tail_) right = *right_tail_ / a;
  } else {
    const std::size_t k = knots_.size();
    for (std::size_t i = 0; i < k; ++i) {
      knots[i] = a * knots_[k - 1 - i] + b;
      logs[i] = log_values_[k - 1 - i] - shift;
    }
    if (right_tail_) left = *right_tail_ / a;
    if (left_tail_) right = *left_tail_ / a;
  }
  return normalized(std::move(knots), std::move(logs), left, right);
}

nlohmann::json to_json(const PiecewiseLogLinearDensity& density) {
  nlohmann::json j;
  j["knots"] = density.knots();
  j["log_values"] = density.log_values();
  j["left_tail"] = density.left_tail() ? nlohmann::json(*density.left_tail()) : nlohmann::json(nullptr);
  j["right_tail"] = density.right_tail() ? nlohmann::json(*density.right_tail()) : nlohmann::json(nullptr);
  return j;
}

PiecewiseLogLinearDensity density_from_json(const nlohmann::json& j) {
  try {
    auto tail = [&](const char* key) -> std::optional<double> {
      if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
      return j.at(key).get<double>();
    };
    return PiecewiseLogLinearDensity(j.at("knots").get<std::vector<double>>(),
                                     j.at("log_values").get<std::vector<double>>(), tail("left_tail"),
                                     tail("right_tail"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidDensity(std::string("malformed density JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// F^1

bool ExpSegmentSpec::is_valid() const {
  if (std::isnan(alpha) || std::isnan(s1) || std::isnan(s2) || !std::isfinite(alpha)) return false;
  if (std::isfinite(s1) && std::isfinite(s2)) return s1 < s2;
  if (s1 == -kInf && std::isfinite(s2)) return alpha > 0.0;
  if (std::isfinite(s1) && s2 == kInf) return alpha < 0.0;
  return false;
}

void ExpSegmentSpec::validate() const {
  if (!is_valid()) throw InvalidDensity("(alpha, s1, s2) is outside the F1 parameter set");
}

double ExpSegmentSpec::kappa_star() const {
  if (alpha == 0.0) return 0.0;
  return alpha * (s2 - s1);
}

ExpSegmentSpec ExpSegmentSpec::pushforward(double a, double b) const {
  validate();
  if (!(a != 0.0)) throw InvalidDensity("affine map needs a != 0");
  if (a > 0) return {alpha / a, a * s1 + b, a * s2 + b};
  return {alpha / a, a * s2 + b, a * s1 + b};
}

PiecewiseLogLinearDensity make_f1(const ExpSegmentSpec& spec) {
  spec.validate();
  const double a = spec.alpha;
  if (std::isinf(spec.s2)) return PiecewiseLogLinearDensity({spec.s1}, {std::log(-a)}, std::nullopt, a);
  if (std::isinf(spec.s1)) return PiecewiseLogLinearDensity({spec.s2}, {std::log(a)}, a, std::nullopt);
  const double len = spec.s2 - spec.s1;
  // log f(s1) = -log int_{s1}^{s2} e^{a(x - s1)} dx = -log(len E(a len))
  const double log_lo = -(std::log(len) + log_expm1_ratio(a * len));
  return PiecewiseLogLinearDensity::normalized({spec.s1, spec.s2}, {log_lo, log_lo + a * len});
}

CanonicalForm canonical_form(const ExpSegmentSpec& spec) {
  spec.validate();
  const double alpha = spec.alpha;
  const double kappa = std::abs(spec.kappa_star());
  double a;
  double b;
  if (alpha == 0.0) {
    a = 1.0 / (spec.s2 - spec.s1);
    b = -spec.s1 / (spec.s2 - spec.s1);
  } else if (kappa < 18.0) {
    const double len = spec.s2 - spec.s1;
    if (alpha > 0.0) {
      a = -1.0 / len;
      b = spec.s2 / len;
    } else {
      a = 1.0 / len;
      b = -spec.s1 / len;
    }
  } else {
    a = -alpha;
    b = alpha > 0.0 ? alpha * spec.s2 : alpha * spec.s1;
  }
  // The image of spec under x -> a x + b, with endpoints pinned exactly.
  ExpSegmentSpec canon;
  if (alpha == 0.0) {
    canon = {0.0, 0.0, 1.0};
  } else if (kappa < 18.0) {
    canon = {-kappa, 0.0, 1.0};
  } else {
    canon = {-1.0, 0.0, kappa};
  }
  return {a, b, canon};
}

// ---------------------------------------------------------------------------
// KAffineSpec

namespace {

PiecewiseLogLinearDensity assemble_k_affine(const std::vector<AffinePiece>& pieces) {
  if (pieces.empty()) throw InvalidDensity("k-affine density needs at least one piece");
  const std::size_t k = pieces.size();
  for (std::size_t j = 0; j < k; ++j) {
    const auto& p = pieces[j];
    if (!(p.lo < p.hi) || !std::isfinite(p.slope) || !std::isfinite(p.intercept)) {
      throw InvalidDensity("each piece needs lo < hi and finite coefficients");
    }
    if (std::isinf(p.lo) && (j != 0 || !(p.slope > 0.0))) {
      throw InvalidDensity("only the first piece may extend to -inf, with positive slope");
    }
    if (std::isinf(p.hi) && (j + 1 != k || !(p.slope < 0.0))) {
      throw InvalidDensity("only the last piece may extend to +inf, with negative slope");
    }
    if (j > 0) {
      const auto& prev = pieces[j - 1];
      if (prev.hi != p.lo) throw InvalidDensity("k-affine pieces must abut without gaps or overlaps");
      const double left = prev.slope * p.lo + prev.intercept;
      const double right = p.slope * p.lo + p.intercept;
      if (std::abs(left - right) > 1e-9 * std::max(1.0, std::abs(left))) {
        throw InvalidDensity("log-density jumps at an interior piece boundary");
      }
      if (!slopes_concave(prev.slope, p.slope)) throw InvalidDensity("piece slopes must be nonincreasing");
    }
  }
  std::vector<double> knots;
  std::vector<double> logs;
  for (std::size_t j = 0; j < k; ++j) {
    const auto& p = pieces[j];
    if (std::isfinite(p.lo)) {
      knots.push_back(p.lo);
      logs.push_back(p.slope * p.lo + p.intercept);
    }
  }
  const auto& last = pieces.back();
  if (std::isfinite(last.hi)) {
    knots.push_back(last.hi);
    logs.push_back(last.slope * last.hi + last.intercept);
  }
  std::optional<double> left;
  std::optional<double> right;
  if (std::isinf(pieces.front().lo)) left = pieces.front().slope;
  if (std::isinf(last.hi)) right = last.slope;
  return PiecewiseLogLinearDensity(std::move(knots), std::move(logs), left, right);
}

}  // namespace

KAffineSpec::KAffineSpec(std::vector<AffinePiece> pieces)
    : pieces_(std::move(pieces)), density_(assemble_k_affine(pieces_)) {
  masses_.reserve(pieces_.size());
  for (const auto& p : pieces_) {
    const LogAffinePiece piece{p.lo, p.hi, std::isfinite(p.lo) ? p.lo : p.hi,
                               p.slope * (std::isfinite(p.lo) ? p.lo : p.hi) + p.intercept, p.slope};
    masses_.push_back(piece_integrals(piece, p.lo, p.hi).mass);
  }
}

// ---------------------------------------------------------------------------
// Density wrapper and sampling

Density::Density(PiecewiseLogLinearDensity density) : value_(density), exact_(std::move(density)) {}

Density::Density(NamedDensity density) : value_(density), exact_(density.piecewise()) {}

double Density::pdf(double x) const {
  return std::visit([x](const auto& d) { return d.pdf(x); }, value_);
}
double Density::log_pdf(double x) const {
  return std::visit([x](const auto& d) { return d.log_pdf(x); }, value_);
}
double Density::cdf(double x) const {
  return std::visit([x](const auto& d) { return d.cdf(x); }, value_);
}
double Density::quantile(double p) const {
  return std::visit([p](const auto& d) { return d.quantile(p); }, value_);
}
double Density::lower() const {
  return std::visit([](const auto& d) { return d.lower(); }, value_);
}
double Density::upper() const {
  return std::visit([](const auto& d) { return d.upper(); }, value_);
}

std::vector<double> Density::breakpoints() const {
  std::vector<double> pts;
  if (exact_) {
    pts = exact_->knots();
  } else {
    const auto& named = std::get<NamedDensity>(value_);
    pts = named.kinks();
    if (std::isfinite(named.lower())) pts.push_back(named.lower());
    if (std::isfinite(named.upper())) pts.push_back(named.upper());
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

std::string Density::describe() const {
  if (const auto* named = std::get_if<NamedDensity>(&value_)) return named->name();
  return "piecewise";
}

std::vector<double> sample(const Density& density, std::size_t n, StreamRng& rng) {
  std::vector<double> xs(n);
  for (double& x : xs) x = density.quantile(rng.uniform());
  return xs;
}

}  // namespace lcmle
