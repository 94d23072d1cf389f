#include "mogfit/mixture.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "mogfit/error.hpp"

namespace mogfit {

namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

double overall_variance(const std::vector<Component>& cs) {
  double m1 = 0.0;
  double m2 = 0.0;
  for (const Component& c : cs) {
    m1 += c.weight * c.mean;
  }
  for (const Component& c : cs) {
    const double d = c.mean - m1;
    m2 += c.weight * (c.var + d * d);
  }
  return m2;
}

}  // namespace

double normal_pdf(double x, double mean, double var) {
  return std::exp(normal_log_pdf(x, mean, var));
}

double normal_log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -kLogSqrtTwoPi - 0.5 * std::log(var) - 0.5 * d * d / var;
}

double normal_cdf(double x, double mean, double var) {
  if (var == 0.0) return x >= mean ? 1.0 : 0.0;
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var));
}

double normal_quantile(double q, double mean, double var) {
  boost::math::normal dist(mean, std::sqrt(var));
  return boost::math::quantile(dist, q);
}

double normal_raw_moment(int r, double mean, double var) {
  // E[(mu + s Z)^r] = sum_{j even} C(r, j) mu^(r-j) var^(j/2) (j-1)!!
  double total = 0.0;
  double binom = 1.0;  // C(r, j)
  double dfact = 1.0;  // (j-1)!!
  for (int j = 0; j <= r; ++j) {
    if (j > 0) binom = binom * (r - j + 1) / j;
    if (j % 2 == 0) {
      if (j >= 2) dfact *= (j - 1);
      total += binom * std::pow(mean, r - j) * std::pow(var, j / 2) * dfact;
    }
  }
  return total;
}

GaussianMixture::GaussianMixture(std::vector<Component> components,
                                 std::optional<double> var_floor)
    : components_(std::move(components)) {
  if (components_.empty()) {
    throw ValidationError("a mixture needs at least one component");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const Component& c = components_[i];
    if (!std::isfinite(c.weight) || !std::isfinite(c.mean) ||
        !std::isfinite(c.var)) {
      throw ValidationError("component " + std::to_string(i) +
                            " has a non-finite parameter");
    }
    if (c.weight < 0.0 || c.weight > 1.0) {
      throw ValidationError("component " + std::to_string(i) +
                            " weight outside [0, 1]");
    }
    if (c.var < 0.0) {
      throw ValidationError("component " + std::to_string(i) +
                            " has negative variance");
    }
    sum += c.weight;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "mixture weights sum to " << sum << ", not 1";
    throw ValidationError(os.str());
  }
  var_floor_ = var_floor.value_or(1e-10 * overall_variance(components_));
  if (!(var_floor_ >= 0.0) || !std::isfinite(var_floor_)) {
    throw ValidationError("var_floor must be finite and nonnegative");
  }
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const double v = components_[i].var;
    if (v != 0.0 && v < var_floor_) {
      std::ostringstream os;
      os << "component " << i << " variance " << v << " below floor "
         << var_floor_;
      throw ValidationError(os.str());
    }
  }
}

GaussianMixture GaussianMixture::single(double mean, double var) {
  return GaussianMixture({Component{1.0, mean, var}});
}

double GaussianMixture::mean() const {
  double m = 0.0;
  for (const Component& c : components_) m += c.weight * c.mean;
  return m;
}

double GaussianMixture::variance() const {
  return overall_variance(components_);
}

double GaussianMixture::atom_mass() const {
  double m = 0.0;
  for (const Component& c : components_) {
    if (c.is_atom()) m += c.weight;
  }
  return m;
}

double mixture_density(const GaussianMixture& gm, double x) {
  double f = 0.0;
  for (const Component& c : gm.components()) {
    if (c.is_atom() || c.weight == 0.0) continue;
    f += c.weight * normal_pdf(x, c.mean, c.var);
  }
  return f;
}

double mixture_log_density(const GaussianMixture& gm, double x) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(gm.size());
  for (const Component& c : gm.components()) {
    if (c.is_atom() || c.weight == 0.0) continue;
    const double t = std::log(c.weight) + normal_log_pdf(x, c.mean, c.var);
    terms.push_back(t);
    best = std::max(best, t);
  }
  if (!std::isfinite(best)) return best;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - best);
  return best + std::log(s);
}

double mixture_cdf(const GaussianMixture& gm, double x) {
  double F = 0.0;
  for (const Component& c : gm.components()) {
    F += c.weight * normal_cdf(x, c.mean, c.var);
  }
  return std::clamp(F, 0.0, 1.0);
}

std::vector<double> responsibilities(const GaussianMixture& gm, double x) {
  const std::size_t m = gm.size();
  std::vector<double> r(m, 0.0);
  std::vector<double> logs(m, -std::numeric_limits<double>::infinity());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const Component& c = gm[i];
    if (c.is_atom() || c.weight == 0.0) continue;
    logs[i] = std::log(c.weight) + normal_log_pdf(x, c.mean, c.var);
    best = std::max(best, logs[i]);
  }
  if (!std::isfinite(best)) {
    std::ostringstream os;
    os << "mixture density is zero at x = " << x;
    throw DegenerateError(os.str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (std::isfinite(logs[i])) {
      r[i] = std::exp(logs[i] - best);
      s += r[i];
    }
  }
  for (double& v : r) v /= s;
  return r;
}

std::vector<double> mixture_raw_moments(const GaussianMixture& gm,
                                        int max_order) {
  std::vector<double> out(static_cast<std::size_t>(std::max(max_order, 0)));
  for (int r = 1; r <= max_order; ++r) {
    double s = 0.0;
    for (const Component& c : gm.components()) {
      s += c.weight * normal_raw_moment(r, c.mean, c.var);
    }
    out[r - 1] = s;
  }
  return out;
}

std::vector<double> sample(const GaussianMixture& gm, std::size_t count,
                           std::uint64_t seed) {
  return sample(gm, count, seed, nullptr);
}

std::vector<double> sample(const GaussianMixture& gm, std::size_t count,
                           std::uint64_t seed,
                           std::vector<std::size_t>* selectors) {
  if (count == 0) throw ValidationError("sample count must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<double> weights;
  for (const Component& c : gm.components()) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> selector(weights.begin(),
                                                   weights.end());
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> out;
  out.reserve(count);
  if (selectors) selectors->clear();
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = selector(rng);
    const Component& c = gm[i];
    out.push_back(c.is_atom() ? c.mean : c.mean + std::sqrt(c.var) * z(rng));
    if (selectors) selectors->push_back(i);
  }
  return out;
}

}  // namespace mogfit
