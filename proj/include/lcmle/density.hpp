// Log-concave density families: piecewise log-linear densities, the
// one-piece family F^1 and its canonical forms, k-affine specifications,
// built-in benchmark truths, and a thin wrapper that lets the divergence and
// experiment code treat all of them uniformly.
#ifndef LCMLE_DENSITY_HPP
#define LCMLE_DENSITY_HPP

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lcmle/rng.hpp"

namespace lcmle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class InvalidDensity : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// log f(x) = log_anchor + slope * (x - anchor) on [lo, hi]. The anchor is
/// lo unless lo is -inf, in which case it is hi.
struct LogAffinePiece {
  double lo;
  double hi;
  double anchor;
  double log_anchor;
  double slope;

  double log_at(double x) const { return log_anchor + slope * (x - anchor); }
};

/// Integrals of e^{log f} over [u, v] within one piece: the mass and the
/// first moment about `about` (u when finite, v otherwise).
struct PieceIntegrals {
  double mass;
  double moment;
  double about;
};

PieceIntegrals piece_integrals(const LogAffinePiece& piece, double u, double v);

/// A log-concave density whose log is piecewise affine between finitely many
/// knots, optionally extended by exponential tails to -inf and/or +inf.
///
/// Only finite knots are stored. A left tail with slope b > 0 extends the
/// support to -inf with log f(x) = log_values[0] + b (x - knots[0]); the right
/// tail is the mirror image with b < 0.
class PiecewiseLogLinearDensity {
 public:
  PiecewiseLogLinearDensity(std::vector<double> knots, std::vector<double> log_values,
                            std::optional<double> left_tail = std::nullopt,
                            std::optional<double> right_tail = std::nullopt);

  /// Same as the constructor but shifts the log-values so the mass is one.
  static PiecewiseLogLinearDensity normalized(std::vector<double> knots, std::vector<double> log_values,
                                              std::optional<double> left_tail = std::nullopt,
                                              std::optional<double> right_tail = std::nullopt);

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& log_values() const { return log_values_; }
  /// Slopes of the finite segments between consecutive knots.
  const std::vector<double>& slopes() const { return slopes_; }
  std::optional<double> left_tail() const { return left_tail_; }
  std::optional<double> right_tail() const { return right_tail_; }

  double lower() const { return left_tail_ ? -kInf : knots_.front(); }
  double upper() const { return right_tail_ ? kInf : knots_.back(); }

  std::vector<LogAffinePiece> pieces() const;

  double log_pdf(double x) const;
  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;
  /// Closed-form total mass (one for every constructed density, up to rounding).
  double mass() const { return mass_; }
  /// int_{-inf}^x F(t) dt.
  double cdf_integral(double x) const;

  /// Density of aX + b when X has this density.
  PiecewiseLogLinearDensity pushforward(double a, double b) const;

  friend bool operator==(const PiecewiseLogLinearDensity&, const PiecewiseLogLinearDensity&) = default;

 private:
  struct Unchecked {};
  PiecewiseLogLinearDensity(Unchecked, std::vector<double> knots, std::vector<double> log_values,
                            std::optional<double> left_tail, std::optional<double> right_tail);
  void build();

  std::vector<double> knots_;
  std::vector<double> log_values_;
  std::optional<double> left_tail_;
  std::optional<double> right_tail_;
  std::vector<double> slopes_;
  std::vector<double> cum_;      // F at each knot
  std::vector<double> cum_int_;  // int_{-inf}^{knot} F
  double mass_ = 0.0;
};

nlohmann::json to_json(const PiecewiseLogLinearDensity& density);
PiecewiseLogLinearDensity density_from_json(const nlohmann::json& j);

/// (alpha, s1, s2): the density proportional to e^{alpha x} on [s1, s2].
struct ExpSegmentSpec {
  double alpha = 0.0;
  double s1 = 0.0;
  double s2 = 1.0;

  bool is_valid() const;
  void validate() const;
  /// alpha (s2 - s1); infinite for half-line supports.
  double kappa_star() const;
  /// Parameters of aX + b when X ~ f_{alpha,s1,s2}.
  ExpSegmentSpec pushforward(double a, double b) const;
};

PiecewiseLogLinearDensity make_f1(const ExpSegmentSpec& spec);

/// Affine map x -> a x + b carrying f_spec onto one of the canonical
/// members f_{0,0,1}, f_{-a0,0,1} with a0 in (0,18), or f_{-1,0,s0} with
/// s0 in [18, inf].
struct CanonicalForm {
  double a;
  double b;
  ExpSegmentSpec canonical;
};

CanonicalForm canonical_form(const ExpSegmentSpec& spec);

/// log f(x) = slope x + intercept on [lo, hi].
struct AffinePiece {
  double lo;
  double hi;
  double slope;
  double intercept;
};

/// A k-affine log-concave density given piece by piece, with the interval
/// masses q_j.
class KAffineSpec {
 public:
  explicit KAffineSpec(std::vector<AffinePiece> pieces);

  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  const std::vector<double>& masses() const { return masses_; }
  std::size_t size() const { return pieces_.size(); }
  const PiecewiseLogLinearDensity& density() const { return density_; }

  double pdf(double x) const { return density_.pdf(x); }
  double cdf(double x) const { return density_.cdf(x); }
  double quantile(double p) const { return density_.quantile(p); }

 private:
  std::vector<AffinePiece> pieces_;
  std::vector<double> masses_;
  PiecewiseLogLinearDensity density_;
};

/// f(x) = e^{gamma x} h(x) on [lo, hi] with h concave and nonnegative.
struct FStarParts {
  double gamma;
  std::function<double(double)> h;
  double lo;
  double hi;
};

/// Built-in benchmark truths.
class NamedDensity {
 public:
  enum class Kind { uniform, exponential, truncated_exponential, laplace, gaussian, gamma, triangular };

  static NamedDensity uniform(double a, double b);
  static NamedDensity exponential(double rate);
  static NamedDensity truncated_exponential(const ExpSegmentSpec& spec);
  static NamedDensity laplace(double mu, double scale);
  static NamedDensity gaussian(double mu, double sigma);
  /// Gamma with shape in [1, 2] and scale beta (so the tilt is -1/beta).
  static NamedDensity gamma(double shape, double scale);
  static NamedDensity triangular(double a, double mode, double b);

  Kind kind() const { return kind_; }
  std::span<const double> params() const { return {params_.data(), params_.size()}; }
  /// Mini-language spelling, e.g. "laplace:0,1".
  std::string name() const;

  double pdf(double x) const;
  double log_pdf(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;
  double lower() const;
  double upper() const;
  /// Interior points where the density is not smooth.
  std::vector<double> kinks() const;

  /// Exact piecewise log-linear representation, when one exists.
  std::optional<PiecewiseLogLinearDensity> piecewise() const;
  /// Decomposition f = e^{gamma x} h with h concave, when one is known.
  std::optional<FStarParts> fstar() const;

 private:
  NamedDensity(Kind kind, std::vector<double> params);

  Kind kind_;
  std::vector<double> params_;
  std::optional<PiecewiseLogLinearDensity> exact_;
};

/// Parses "uniform:a,b", "exponential:rate", "f1:alpha,s1,s2",
/// "truncexp:alpha,s1,s2", "laplace:mu,b", "gaussian:mu,sigma",
/// "gamma:shape,scale" or "triangular:a,c,b". Tokens inf/-inf are accepted
/// where an endpoint may be infinite.
NamedDensity parse_named(std::string_view text);

/// Either a piecewise log-linear density or a named truth.
class Density {
 public:
  Density(PiecewiseLogLinearDensity density);  // NOLINT(google-explicit-constructor)
  Density(NamedDensity density);               // NOLINT(google-explicit-constructor)

  double pdf(double x) const;
  double log_pdf(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;
  double lower() const;
  double upper() const;

  /// Piecewise log-linear form if the density has one; enables the exact
  /// divergence routes.
  const PiecewiseLogLinearDensity* exact() const { return exact_ ? &*exact_ : nullptr; }
  const NamedDensity* named() const { return std::get_if<NamedDensity>(&value_); }
  /// Finite support endpoints, knots and kinks, sorted and unique.
  std::vector<double> breakpoints() const;
  std::string describe() const;

 private:
  std::variant<PiecewiseLogLinearDensity, NamedDensity> value_;
  std::optional<PiecewiseLogLinearDensity> exact_;
};

/// n draws by inversion: quantile(U) with U uniform on (0, 1).
std::vector<double> sample(const Density& density, std::size_t n, StreamRng& rng);

}  // namespace lcmle

#endif  // LCMLE_DENSITY_HPP
