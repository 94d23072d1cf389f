#include "analytic.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/triangular.hpp>
#include <boost/math/distributions/uniform.hpp>
#include <boost/math/special_functions/factorials.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "mogfit/error.hpp"

namespace mogfit::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t expected_params(Family f) {
  switch (f) {
    case Family::exponential: return 1;
    case Family::triangular: return 3;
    default: return 2;
  }
}

template <class F>
decltype(auto) with_boost(const Analytic& a, F&& fn) {
  const auto& p = a.params;
  switch (a.family) {
    case Family::uniform:
      return fn(boost::math::uniform_distribution<double>(p[0], p[1]));
    case Family::exponential:
      return fn(boost::math::exponential_distribution<double>(p[0]));
    case Family::gaussian:
      return fn(boost::math::normal_distribution<double>(p[0], std::sqrt(p[1])));
    case Family::lognormal:
      return fn(boost::math::lognormal_distribution<double>(p[0], std::sqrt(p[1])));
    case Family::beta:
      return fn(boost::math::beta_distribution<double>(p[0], p[1]));
    case Family::triangular:
      return fn(boost::math::triangular_distribution<double>(p[0], p[1], p[2]));
  }
  throw ValidationError("unknown distribution family");
}

bool inside(const Support& s, double x) { return x >= s.lo && x <= s.hi; }

}  // namespace

double binomial(int n, int k) {
  double b = 1.0;
  for (int j = 1; j <= k; ++j) b = b * (n - k + j) / j;
  return b;
}

void validate_analytic(const Analytic& a) {
  const auto& p = a.params;
  if (p.size() != expected_params(a.family)) {
    std::ostringstream os;
    os << to_string(a.family) << " takes " << expected_params(a.family)
       << " parameters, got " << p.size();
    throw ValidationError(os.str());
  }
  for (double v : p) {
    if (!std::isfinite(v)) {
      throw ValidationError(std::string(to_string(a.family)) +
                            " parameters must be finite");
    }
  }
  bool ok = true;
  switch (a.family) {
    case Family::uniform: ok = p[0] < p[1]; break;
    case Family::exponential: ok = p[0] > 0.0; break;
    case Family::gaussian:
    case Family::lognormal: ok = p[1] > 0.0; break;
    case Family::beta: ok = p[0] > 0.0 && p[1] > 0.0; break;
    case Family::triangular: ok = p[0] <= p[1] && p[1] <= p[2] && p[0] < p[2]; break;
  }
  if (!ok) {
    throw ValidationError(std::string("invalid ") + to_string(a.family) +
                          " parameters");
  }
}

Support analytic_support(const Analytic& a) {
  const auto& p = a.params;
  switch (a.family) {
    case Family::uniform: return {p[0], p[1]};
    case Family::exponential: return {0.0, kInf};
    case Family::gaussian: return {-kInf, kInf};
    case Family::lognormal: return {0.0, kInf};
    case Family::beta: return {0.0, 1.0};
    case Family::triangular: return {p[0], p[2]};
  }
  return {-kInf, kInf};
}

std::vector<double> analytic_knots(const Analytic& a) {
  if (a.family == Family::triangular) return {a.params[1]};
  return {};
}

double analytic_pdf(const Analytic& a, double x) {
  const Support s = analytic_support(a);
  if (!inside(s, x)) return 0.0;
  switch (a.family) {
    case Family::gaussian:
    case Family::lognormal:
    case Family::exponential:
      return std::exp(analytic_log_pdf(a, x));
    default:
      break;
  }
  return with_boost(a, [x](const auto& d) { return boost::math::pdf(d, x); });
}

double analytic_log_pdf(const Analytic& a, double x) {
  const Support s = analytic_support(a);
  if (!inside(s, x)) return -kInf;
  const auto& p = a.params;
  switch (a.family) {
    case Family::gaussian: {
      const double d = x - p[0];
      return -0.5 * std::log(2.0 * M_PI * p[1]) - 0.5 * d * d / p[1];
    }
    case Family::lognormal: {
      if (x <= 0.0) return -kInf;
      const double lx = std::log(x);
      const double d = lx - p[0];
      return -lx - 0.5 * std::log(2.0 * M_PI * p[1]) - 0.5 * d * d / p[1];
    }
    case Family::exponential:
      return std::log(p[0]) - p[0] * x;
    default:
      break;
  }
  return std::log(analytic_pdf(a, x));
}

double analytic_cdf(const Analytic& a, double x) {
  const Support s = analytic_support(a);
  if (x <= s.lo) return 0.0;
  if (x >= s.hi) return 1.0;
  return with_boost(a, [x](const auto& d) { return boost::math::cdf(d, x); });
}

double analytic_quantile(const Analytic& a, double q) {
  const Support s = analytic_support(a);
  if (q <= 0.0) return s.lo;
  if (q >= 1.0) return s.hi;
  return with_boost(a, [q](const auto& d) { return boost::math::quantile(d, q); });
}

std::optional<double> analytic_moment_about(const Analytic& a, double c,
                                            int r) {
  const auto& p = a.params;
  // Raw moments E[X^j], j = 0..r, for families where a shift is benign.
  auto shifted = [&](auto raw) {
    double s = 0.0;
    for (int j = 0; j <= r; ++j) {
      s += binomial(r, j) * raw(j) * std::pow(-c, r - j);
    }
    return s;
  };
  switch (a.family) {
    case Family::gaussian:
      return normal_raw_moment(r, p[0] - c, p[1]);
    case Family::uniform: {
      const double lo = p[0] - c;
      const double hi = p[1] - c;
      return (std::pow(hi, r + 1) - std::pow(lo, r + 1)) /
             ((r + 1) * (hi - lo));
    }
    case Family::exponential:
      return shifted([&](int j) {
        return boost::math::factorial<double>(static_cast<unsigned>(j)) /
               std::pow(p[0], j);
      });
    case Family::lognormal:
      return shifted([&](int j) {
        return std::exp(j * p[0] + 0.5 * j * j * p[1]);
      });
    case Family::beta:
      return shifted([&](int j) {
        double m = 1.0;
        for (int i = 0; i < j; ++i) m *= (p[0] + i) / (p[0] + p[1] + i);
        return m;
      });
    case Family::triangular:
      return std::nullopt;
  }
  return std::nullopt;
}

double invert_monotone(const std::function<double(double)>& F,
                       const std::function<double(double)>& density, double q,
                       double lo, double hi) {
  if (F(lo) >= q) return lo;
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    const double Fx = F(x);
    if (Fx >= q) hi = x; else lo = x;
    double next = 0.5 * (lo + hi);
    if (density) {
      const double d = density(x);
      if (d > 0.0) {
        const double newton = x - (Fx - q) / d;
        if (newton > lo && newton < hi) next = newton;
      }
    }
    if (next == x || hi - lo <= 4 * std::numeric_limits<double>::epsilon() *
                                     std::max(1.0, std::abs(x))) {
      break;
    }
    x = next;
  }
  return hi;
}

}  // namespace mogfit::detail
