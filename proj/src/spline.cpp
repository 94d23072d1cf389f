#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "mogfit/distribution.hpp"
#include "mogfit/error.hpp"

namespace mogfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_points(const std::vector<CdfPoint>& pts) {
  if (pts.size() < 3) {
    throw ValidationError("a spline CDF needs at least 3 points, got " +
                          std::to_string(pts.size()));
  }
  std::ostringstream bad;
  bad.precision(17);
  bool any = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const CdfPoint& p = pts[i];
    if (!std::isfinite(p.x) || !(p.F > 0.0 && p.F < 1.0)) {
      bad << (any ? "; " : "") << "point " << i << " (" << p.x << ", " << p.F
          << ") needs finite x and F in (0, 1)";
      any = true;
    }
    if (i > 0) {
      const CdfPoint& q = pts[i - 1];
      if (!(p.x > q.x) || !(p.F > q.F)) {
        bad << (any ? "; " : "") << "points " << i - 1 << " (" << q.x << ", "
            << q.F << ") and " << i << " (" << p.x << ", " << p.F
            << ") are not strictly increasing";
        any = true;
      }
    }
  }
  if (any) throw ValidationError("non-monotone spline points: " + bad.str());
}

}  // namespace

SplineCdf::SplineCdf(std::vector<CdfPoint> points, TailPolicy tail_policy,
                     int n_equiv)
    : points_(std::move(points)), tail_policy_(tail_policy), n_equiv_(n_equiv) {
  check_points(points_);
  if (n_equiv_ < 1) throw ValidationError("n_equiv must be a positive integer");

  const std::size_t n = points_.size();
  std::vector<double> h(n - 1);
  std::vector<double> secant(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = points_[k + 1].x - points_[k].x;
    secant[k] = (points_[k + 1].F - points_[k].F) / h[k];
  }
  slopes_.resize(n);
  slopes_[0] = secant[0];
  slopes_[n - 1] = secant[n - 2];
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    slopes_[k] = (w1 + w2) / (w1 / secant[k - 1] + w2 / secant[k]);
  }
}

double SplineCdf::lower() const {
  const CdfPoint& p = points_.front();
  if (tail_policy_ == TailPolicy::exponential_tails) return -kInf;
  return p.x - p.F / slopes_.front();
}

double SplineCdf::upper() const {
  const CdfPoint& p = points_.back();
  if (tail_policy_ == TailPolicy::exponential_tails) return kInf;
  return p.x + (1.0 - p.F) / slopes_.back();
}

double SplineCdf::cdf(double x) const {
  if (std::isnan(x)) {
    throw NumericalError("spline CDF evaluated at NaN");
  }
  const CdfPoint& first = points_.front();
  const CdfPoint& last = points_.back();
  if (x < first.x) {
    if (tail_policy_ == TailPolicy::bounded) {
      return std::max(0.0, first.F + slopes_.front() * (x - first.x));
    }
    return first.F * std::exp(slopes_.front() / first.F * (x - first.x));
  }
  if (x >= last.x) {
    if (tail_policy_ == TailPolicy::bounded) {
      return std::min(1.0, last.F + slopes_.back() * (x - last.x));
    }
    const double tail = 1.0 - last.F;
    return 1.0 - tail * std::exp(-slopes_.back() / tail * (x - last.x));
  }
  auto it = std::upper_bound(points_.begin(), points_.end(), x,
                             [](double v, const CdfPoint& p) { return v < p.x; });
  const std::size_t k = static_cast<std::size_t>(it - points_.begin()) - 1;
  const CdfPoint& a = points_[k];
  const CdfPoint& b = points_[k + 1];
  const double h = b.x - a.x;
  const double t = (x - a.x) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  const double F = h00 * a.F + h10 * h * slopes_[k] + h01 * b.F +
                   h11 * h * slopes_[k + 1];
  return std::clamp(F, a.F, b.F);
}

double SplineCdf::density(double x) const {
  if (std::isnan(x)) {
    throw NumericalError("spline density evaluated at NaN");
  }
  const CdfPoint& first = points_.front();
  const CdfPoint& last = points_.back();
  if (x < first.x) {
    if (tail_policy_ == TailPolicy::bounded) {
      return x >= lower() ? slopes_.front() : 0.0;
    }
    return slopes_.front() *
           std::exp(slopes_.front() / first.F * (x - first.x));
  }
  if (x >= last.x) {
    if (tail_policy_ == TailPolicy::bounded) {
      return x <= upper() ? slopes_.back() : 0.0;
    }
    const double tail = 1.0 - last.F;
    return slopes_.back() * std::exp(-slopes_.back() / tail * (x - last.x));
  }
  auto it = std::upper_bound(points_.begin(), points_.end(), x,
                             [](double v, const CdfPoint& p) { return v < p.x; });
  const std::size_t k = static_cast<std::size_t>(it - points_.begin()) - 1;
  const CdfPoint& a = points_[k];
  const CdfPoint& b = points_[k + 1];
  const double h = b.x - a.x;
  const double t = (x - a.x) / h;
  const double t2 = t * t;
  const double f = (6 * t2 - 6 * t) / h * a.F + (3 * t2 - 4 * t + 1) * slopes_[k] +
                   (-6 * t2 + 6 * t) / h * b.F + (3 * t2 - 2 * t) * slopes_[k + 1];
  if (!std::isfinite(f)) {
    std::ostringstream os;
    os.precision(17);
    os << "spline density not evaluable at x = " << x;
    throw NumericalError(os.str());
  }
  return std::max(f, 0.0);
}

double SplineCdf::quantile(double q) const {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw ValidationError("quantile level must lie in [0, 1]");
  }
  const CdfPoint& first = points_.front();
  const CdfPoint& last = points_.back();
  if (q <= first.F) {
    if (tail_policy_ == TailPolicy::bounded) {
      return first.x - (first.F - q) / slopes_.front();
    }
    if (q == 0.0) return -kInf;
    return first.x + std::log(q / first.F) * first.F / slopes_.front();
  }
  if (q >= last.F) {
    if (tail_policy_ == TailPolicy::bounded) {
      return last.x + (q - last.F) / slopes_.back();
    }
    if (q == 1.0) return kInf;
    const double tail = 1.0 - last.F;
    return last.x - std::log((1.0 - q) / tail) * tail / slopes_.back();
  }
  auto it = std::upper_bound(points_.begin(), points_.end(), q,
                             [](double v, const CdfPoint& p) { return v < p.F; });
  const std::size_t k = static_cast<std::size_t>(it - points_.begin()) - 1;
  // Safeguarded Newton on the monotone cubic of interval k.
  double lo = points_[k].x;
  double hi = points_[k + 1].x;
  double x = lo + (hi - lo) * (q - points_[k].F) /
                      (points_[k + 1].F - points_[k].F);
  for (int iter = 0; iter < 100; ++iter) {
    const double r = cdf(x) - q;
    if (r == 0.0) break;
    if (r > 0.0) hi = x; else lo = x;
    const double d = density(x);
    double next = d > 0.0 ? x - r / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

Empirical::Empirical(std::vector<double> values, std::vector<double> weights) {
  if (values.empty()) {
    throw ValidationError("an empirical distribution needs at least one value");
  }
  if (!weights.empty() && weights.size() != values.size()) {
    throw ValidationError("empirical weights and values differ in length");
  }
  if (weights.empty()) weights.assign(values.size(), 1.0);
  std::map<double, double> merged;
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("empirical value " + std::to_string(i) +
                            " is not finite");
    }
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw ValidationError("empirical weight " + std::to_string(i) +
                            " is negative or not finite");
    }
    if (weights[i] == 0.0) continue;
    merged[values[i]] += weights[i];
    total += weights[i];
  }
  if (!(total > 0.0)) {
    throw ValidationError("empirical weights sum to zero");
  }
  for (const auto& [v, w] : merged) {
    values_.push_back(v);
    weights_.push_back(w / total);
  }
}

DistributionSpec spline_from_points(std::vector<CdfPoint> points,
                                    std::optional<int> n_equiv,
                                    TailPolicy tail_policy) {
  const int n = n_equiv.value_or(static_cast<int>(points.size()));
  return DistributionSpec(SplineCdf(std::move(points), tail_policy, n));
}

}  // namespace mogfit
