#include "mogfit/transform.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <sstream>

#include "mogfit/error.hpp"

namespace mogfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBoundSlack = 1e-9;
constexpr int kScanPoints = 31;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

/// Lowest location carrying mass: the smaller of the continuous support end
/// and the first atom.
double lowest_point(const DistributionSpec& spec) {
  double lo = kInf;
  if (total_atom_mass(spec) < 1.0 - 1e-12) lo = continuous_support(spec).lo;
  for (const Atom& a : atoms(spec)) lo = std::min(lo, a.x);
  return lo;
}

}  // namespace

void PowerSearchConfig::validate() const {
  if (!(std::isfinite(p_lo) && std::isfinite(p_hi) && p_lo < p_hi)) {
    throw ValidationError("power bracket needs finite p_lo < p_hi");
  }
  if (!(tolerance > 0.0)) throw ValidationError("power tolerance must be positive");
  if (!(rounding_threshold >= 0.0)) {
    throw ValidationError("rounding threshold must be nonnegative");
  }
}

DistributionSpec pushforward(const DistributionSpec& spec,
                             const TransformChain& chain) {
  if (chain.empty()) return spec;
  if (spec.extra_atoms().empty()) {
    if (const auto* p = spec.get_if<Pushforward>()) {
      return DistributionSpec(Pushforward{p->base, p->chain.then(chain)});
    }
  }
  return DistributionSpec(
      Pushforward{std::make_shared<const DistributionSpec>(spec), chain});
}

double transform_gap(const DistributionSpec& spec, const TransformChain& chain,
                     const QuadratureConfig& cfg) {
  if (!atoms(spec).empty()) {
    throw UnsupportedError("transform gap needs a distribution without atoms");
  }
  const DistributionSpec y = pushforward(spec, chain);
  const double var = mean_variance(y, cfg).second;
  if (!(var > 0.0)) throw DegenerateError("transformed variance is zero");
  const double h = entropy(spec, cfg);
  const double jac = chain.empty()
                         ? 0.0
                         : expect(spec, [&](double x) { return chain.log_derivative(x); },
                                  cfg);
  return 0.5 * (1.0 + std::log(2.0 * M_PI) + std::log(var)) - h - jac;
}

double power_objective(const DistributionSpec& spec, double p,
                       const QuadratureConfig& cfg) {
  const double lo = lowest_point(spec);
  if (!(lo > 0.0) && cdf(spec, 0.0) > 0.0) {
    throw DomainError("power transformations need a positive variable; mass " +
                      fmt(cdf(spec, 0.0)) +
                      " lies at or below 0, precondition (shift or scaled odds) first");
  }
  const DistributionSpec y = pushforward(spec, TransformChain({BoxCox{p}}));
  double var = 0.0;
  try {
    var = mean_variance(y, cfg).second;
  } catch (const DivergenceError&) {
    return kInf;
  }
  const double elog = expect(spec, [](double x) { return std::log(x); }, cfg);
  return 0.5 * std::log(var) - (p - 1.0) * elog;
}

PowerSearchResult optimal_power(const DistributionSpec& spec,
                                const PowerSearchConfig& search,
                                const QuadratureConfig& cfg) {
  search.validate();
  cfg.validate();
  // Surface domain problems before the scan swallows them.
  (void)power_objective(spec, 1.0, cfg);

  auto eval = [&](double p) {
    try {
      const double v = power_objective(spec, p, cfg);
      if (v == -kInf) {
        throw ValidationError("power objective is unbounded below at p = " + fmt(p) +
                              "; narrow the bracket");
      }
      return std::isnan(v) ? kInf : v;
    } catch (const ValidationError&) {
      throw;
    } catch (const Error&) {
      return kInf;
    }
  };

  const double step = (search.p_hi - search.p_lo) / (kScanPoints - 1);
  std::array<double, kScanPoints> vals{};
  int best = 0;
  for (int i = 0; i < kScanPoints; ++i) {
    vals[i] = eval(search.p_lo + i * step);
    if (vals[i] < vals[best]) best = i;
  }
  if (!std::isfinite(vals[best])) {
    throw NumericalError("power objective is not finite anywhere on the bracket [" +
                             fmt(search.p_lo) + ", " + fmt(search.p_hi) + "]",
                         kInf, kInf);
  }

  double a = search.p_lo + std::max(best - 1, 0) * step;
  double b = search.p_lo + std::min(best + 1, kScanPoints - 1) * step;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > search.tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
  }
  PowerSearchResult out;
  out.p_star = fc <= fd ? c : d;
  out.objective = std::min(fc, fd);
  // The scan grid point can beat the refined cell when the objective is flat.
  const double grid_p = search.p_lo + best * step;
  if (vals[best] < out.objective) {
    out.p_star = grid_p;
    out.objective = vals[best];
  }
  if (atoms(spec).empty()) {
    try {
      out.gap = 0.5 * (1.0 + std::log(2.0 * M_PI)) + out.objective - entropy(spec, cfg);
    } catch (const Error&) {
      out.gap.reset();
    }
  }
  return out;
}

double round_power(double p, const PowerSearchConfig& search) {
  double best = p;
  double dist = kInf;
  for (double t : search.round_targets) {
    const double d = std::abs(p - t);
    if (d <= search.rounding_threshold && d < dist) {
      best = t;
      dist = d;
    }
  }
  return best;
}

TransformChain precondition(const DistributionSpec& spec,
                            const std::optional<Bounds>& bounds) {
  if (!bounds) {
    const double lo = lowest_point(spec);
    if (lo >= 0.0) return {};
    if (!std::isfinite(lo)) {
      throw ValidationError(
          "the distribution is unbounded below; supply practical bounds (a, b) or a "
          "lower bound a");
    }
    return TransformChain({Affine{1.0, -lo}});
  }
  const Bounds& bd = *bounds;
  if (!std::isfinite(bd.lo) || !(bd.hi > bd.lo)) {
    throw ValidationError("bounds need a finite lower bound below the upper bound");
  }
  const double below = cdf(spec, bd.lo) - atom_mass(spec, bd.lo);
  if (below > kBoundSlack) {
    throw DomainError("mass " + fmt(below) + " lies below the declared bound " +
                      fmt(bd.lo));
  }
  if (std::isfinite(bd.hi)) {
    const double above = 1.0 - cdf(spec, bd.hi) + atom_mass(spec, bd.hi);
    if (above > kBoundSlack) {
      throw DomainError("mass " + fmt(above) + " lies at or above the declared bound " +
                        fmt(bd.hi));
    }
    return TransformChain({ScaledOdds{bd.lo, bd.hi}});
  }
  if (bd.lo == 0.0) return {};
  return TransformChain({Affine{1.0, -bd.lo}});
}

}  // namespace mogfit
