#pragma once

#include <utility>
#include <variant>
#include <vector>

namespace mogfit {

/// y = scale * x + shift
struct Affine {
  double scale = 1.0;
  double shift = 0.0;
};

/// y = (x - a) / (b - x), mapping [a, b) onto [0, inf).
struct ScaledOdds {
  double a = 0.0;
  double b = 1.0;
};

/// y = (x^p - 1) / p, or ln x at p = 0; positive x only.
struct BoxCox {
  double p = 1.0;
  /// Set when p came from rounding a searched optimum; consumers may then
  /// use the plain power x^p instead. The mapping itself is unchanged.
  bool rounded = false;
};

using TransformStep = std::variant<Affine, ScaledOdds, BoxCox>;

/// |p| below this is evaluated as the logarithm.
inline constexpr double kBoxCoxLogThreshold = 1e-8;

/// Open or half-open interval; endpoints may be infinite.
struct Interval {
  double lo;
  double hi;
  bool lo_closed = true;
  bool hi_closed = true;

  bool contains(double x) const;
};

/// Ordered composition of monotone steps; empty is the identity.
class TransformChain {
 public:
  TransformChain() = default;
  explicit TransformChain(std::vector<TransformStep> steps);

  const std::vector<TransformStep>& steps() const { return steps_; }
  bool empty() const { return steps_.empty(); }

  TransformChain then(const TransformStep& step) const;
  TransformChain then(const TransformChain& next) const;

  /// Throws DomainError when x is outside a step's domain.
  double apply(double x) const;
  double invert(double y) const;
  /// d apply / dx.
  double derivative(double x) const;
  /// ln |d apply / dx|, summed stage by stage.
  double log_derivative(double x) const;

  /// Whether x lies in the chain's domain (every intermediate value valid).
  bool in_domain(double x) const;
  /// Domain of the first step.
  Interval domain() const;
  /// Image of [lo, hi] (lo <= hi, clipped to the domain) under the chain.
  std::pair<double, double> image(double lo, double hi) const;

 private:
  std::vector<TransformStep> steps_;
};

double apply_step(const TransformStep& step, double x);
double invert_step(const TransformStep& step, double y);
double derivative_step(const TransformStep& step, double x);
double log_derivative_step(const TransformStep& step, double x);
Interval step_domain(const TransformStep& step);
/// Validates parameters (nonzero scale, a < b, finite values).
void validate_step(const TransformStep& step);

}  // namespace mogfit
