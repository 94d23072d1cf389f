#include "mogfit/transform_chain.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mogfit/error.hpp"

namespace mogfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool is_log(const BoxCox& s) { return std::abs(s.p) < kBoxCoxLogThreshold; }

[[noreturn]] void domain_failure(const char* step, double x,
                                 const char* expected) {
  std::ostringstream os;
  os.precision(17);
  os << step << " undefined at " << x << " (requires " << expected << ")";
  throw DomainError(os.str());
}

/// Value of an increasing step at x, allowing x to be an infinite or open
/// domain endpoint (the one-sided limit is returned).
double step_limit(const TransformStep& step, double x) {
  return std::visit(
      Overloaded{
          [&](const Affine& s) { return s.scale * x + s.shift; },
          [&](const ScaledOdds& s) {
            if (x >= s.b) return kInf;
            return (x - s.a) / (s.b - x);
          },
          [&](const BoxCox& s) {
            if (x <= 0.0) return is_log(s) || s.p < 0.0 ? -kInf : -1.0 / s.p;
            if (std::isinf(x)) return is_log(s) || s.p > 0.0 ? kInf : -1.0 / s.p;
            return apply_step(step, x);
          }},
      step);
}

/// Range of values the step can produce.
Interval step_image(const TransformStep& step) {
  return std::visit(
      Overloaded{
          [](const Affine&) { return Interval{-kInf, kInf, false, false}; },
          [](const ScaledOdds&) { return Interval{0.0, kInf, true, false}; },
          [](const BoxCox& s) {
            if (is_log(s)) return Interval{-kInf, kInf, false, false};
            if (s.p > 0.0) return Interval{-1.0 / s.p, kInf, false, false};
            return Interval{-kInf, -1.0 / s.p, false, false};
          }},
      step);
}

bool decreasing(const TransformStep& step) {
  const auto* a = std::get_if<Affine>(&step);
  return a != nullptr && a->scale < 0.0;
}

}  // namespace

bool Interval::contains(double x) const {
  const bool above = lo_closed ? x >= lo : x > lo;
  const bool below = hi_closed ? x <= hi : x < hi;
  return above && below;
}

void validate_step(const TransformStep& step) {
  std::visit(Overloaded{
                 [](const Affine& s) {
                   if (!std::isfinite(s.scale) || !std::isfinite(s.shift) ||
                       s.scale == 0.0) {
                     throw ValidationError(
                         "affine step needs a finite nonzero scale and a "
                         "finite shift");
                   }
                 },
                 [](const ScaledOdds& s) {
                   if (!std::isfinite(s.a) || !std::isfinite(s.b) ||
                       !(s.a < s.b)) {
                     throw ValidationError(
                         "scaled-odds step needs finite a < b");
                   }
                 },
                 [](const BoxCox& s) {
                   if (!std::isfinite(s.p)) {
                     throw ValidationError("box-cox power must be finite");
                   }
                 }},
             step);
}

double apply_step(const TransformStep& step, double x) {
  return std::visit(
      Overloaded{
          [&](const Affine& s) { return s.scale * x + s.shift; },
          [&](const ScaledOdds& s) {
            if (!(x >= s.a && x < s.b)) domain_failure("scaled odds", x, "a <= x < b");
            return (x - s.a) / (s.b - x);
          },
          [&](const BoxCox& s) {
            if (!(x > 0.0)) domain_failure("box-cox", x, "x > 0");
            const double lx = std::log(x);
            if (is_log(s)) return lx;
            return std::expm1(s.p * lx) / s.p;
          }},
      step);
}

double invert_step(const TransformStep& step, double y) {
  return std::visit(
      Overloaded{
          [&](const Affine& s) { return (y - s.shift) / s.scale; },
          [&](const ScaledOdds& s) {
            if (!(y >= 0.0)) domain_failure("inverse scaled odds", y, "y >= 0");
            if (std::isinf(y)) return s.b;
            return s.a + (s.b - s.a) * (y / (1.0 + y));
          },
          [&](const BoxCox& s) {
            if (is_log(s)) return std::exp(y);
            const double py = s.p * y;
            if (!(py > -1.0)) domain_failure("inverse box-cox", y, "p*y + 1 > 0");
            return std::exp(std::log1p(py) / s.p);
          }},
      step);
}

double derivative_step(const TransformStep& step, double x) {
  return std::visit(
      Overloaded{
          [&](const Affine& s) { return s.scale; },
          [&](const ScaledOdds& s) {
            if (!(x >= s.a && x < s.b)) domain_failure("scaled odds", x, "a <= x < b");
            const double d = s.b - x;
            return (s.b - s.a) / (d * d);
          },
          [&](const BoxCox& s) {
            if (!(x > 0.0)) domain_failure("box-cox", x, "x > 0");
            if (is_log(s)) return 1.0 / x;
            return std::exp((s.p - 1.0) * std::log(x));
          }},
      step);
}

double log_derivative_step(const TransformStep& step, double x) {
  return std::visit(
      Overloaded{
          [&](const Affine& s) { return std::log(std::abs(s.scale)); },
          [&](const ScaledOdds& s) {
            if (!(x >= s.a && x < s.b)) domain_failure("scaled odds", x, "a <= x < b");
            return std::log(s.b - s.a) - 2.0 * std::log(s.b - x);
          },
          [&](const BoxCox& s) {
            if (!(x > 0.0)) domain_failure("box-cox", x, "x > 0");
            const double p = is_log(s) ? 0.0 : s.p;
            return (p - 1.0) * std::log(x);
          }},
      step);
}

Interval step_domain(const TransformStep& step) {
  return std::visit(
      Overloaded{
          [](const Affine&) { return Interval{-kInf, kInf, false, false}; },
          [](const ScaledOdds& s) { return Interval{s.a, s.b, true, false}; },
          [](const BoxCox&) { return Interval{0.0, kInf, false, false}; }},
      step);
}

TransformChain::TransformChain(std::vector<TransformStep> steps)
    : steps_(std::move(steps)) {
  for (const TransformStep& s : steps_) validate_step(s);
}

TransformChain TransformChain::then(const TransformStep& step) const {
  std::vector<TransformStep> s = steps_;
  s.push_back(step);
  return TransformChain(std::move(s));
}

TransformChain TransformChain::then(const TransformChain& next) const {
  std::vector<TransformStep> s = steps_;
  s.insert(s.end(), next.steps_.begin(), next.steps_.end());
  return TransformChain(std::move(s));
}

double TransformChain::apply(double x) const {
  for (const TransformStep& s : steps_) x = apply_step(s, x);
  return x;
}

double TransformChain::invert(double y) const {
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    y = invert_step(*it, y);
  }
  return y;
}

double TransformChain::derivative(double x) const {
  double d = 1.0;
  for (const TransformStep& s : steps_) {
    d *= derivative_step(s, x);
    x = apply_step(s, x);
  }
  return d;
}

double TransformChain::log_derivative(double x) const {
  double d = 0.0;
  for (const TransformStep& s : steps_) {
    d += log_derivative_step(s, x);
    x = apply_step(s, x);
  }
  return d;
}

bool TransformChain::in_domain(double x) const {
  for (const TransformStep& s : steps_) {
    if (!step_domain(s).contains(x)) return false;
    x = apply_step(s, x);
  }
  return true;
}

Interval TransformChain::domain() const {
  Interval d{-kInf, kInf, false, false};
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    const TransformStep& s = *it;
    const Interval sd = step_domain(s);
    const Interval im = step_image(s);
    // Preimage of d, intersected with the step's own domain.
    double lo = d.lo;
    double hi = d.hi;
    bool lo_closed = d.lo_closed;
    bool hi_closed = d.hi_closed;
    if (decreasing(s)) {
      std::swap(lo, hi);
      std::swap(lo_closed, hi_closed);
    }
    Interval pre;
    if (decreasing(s)) {
      pre.lo = std::isinf(lo) ? -kInf : invert_step(s, lo);
      pre.hi = std::isinf(hi) ? kInf : invert_step(s, hi);
    } else {
      pre.lo = (lo <= im.lo) ? sd.lo : invert_step(s, lo);
      pre.hi = (hi >= im.hi) ? sd.hi : invert_step(s, hi);
    }
    pre.lo_closed = (lo <= im.lo) ? sd.lo_closed : lo_closed;
    pre.hi_closed = (hi >= im.hi) ? sd.hi_closed : hi_closed;
    if (pre.lo < sd.lo) {
      pre.lo = sd.lo;
      pre.lo_closed = sd.lo_closed;
    }
    if (pre.hi > sd.hi) {
      pre.hi = sd.hi;
      pre.hi_closed = sd.hi_closed;
    }
    d = pre;
  }
  return d;
}

std::pair<double, double> TransformChain::image(double lo, double hi) const {
  const Interval dom = domain();
  lo = std::max(lo, dom.lo);
  hi = std::min(hi, dom.hi);
  for (const TransformStep& s : steps_) {
    double a = step_limit(s, lo);
    double b = step_limit(s, hi);
    if (a > b) std::swap(a, b);
    lo = a;
    hi = b;
  }
  return {lo, hi};
}

}  // namespace mogfit
