#include "mogfit/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "analytic.hpp"
#include "mogfit/error.hpp"

namespace mogfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
/// Continuous mass a pushforward may drop outside its chain's domain.
constexpr double kDomainSlack = 1e-9;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double extra_mass(const DistributionSpec& spec) {
  double m = 0.0;
  for (const Atom& a : spec.extra_atoms()) m += a.mass;
  return m;
}

/// Weight carried by the variant once the extra atoms are taken out.
double variant_scale(const DistributionSpec& spec) {
  return std::max(0.0, 1.0 - extra_mass(spec));
}

// -- Per-variant primitives. Each describes the variant as a distribution of
//    total mass one; DistributionSpec-level functions rescale.

double v_density(const DistributionSpec::Variant& v, double x);
double v_log_density(const DistributionSpec::Variant& v, double x);
double v_cdf(const DistributionSpec::Variant& v, double x);
std::vector<Atom> v_atoms(const DistributionSpec::Variant& v);
Support v_support(const DistributionSpec::Variant& v);
double v_continuous_quantile(const DistributionSpec::Variant& v, double q);
std::vector<double> v_knots(const DistributionSpec::Variant& v);

double mixture_continuous_quantile(const GaussianMixture& gm, double q) {
  double w = 0.0;
  double lo = kInf;
  double hi = -kInf;
  for (const Component& c : gm.components()) {
    if (c.is_atom() || c.weight == 0.0) continue;
    w += c.weight;
    const double x = normal_quantile(q, c.mean, c.var);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (w == 0.0) throw UnsupportedError("mixture has no continuous part");
  if (lo == hi) return lo;
  auto F = [&](double x) {
    double s = 0.0;
    for (const Component& c : gm.components()) {
      if (c.is_atom() || c.weight == 0.0) continue;
      s += c.weight * normal_cdf(x, c.mean, c.var);
    }
    return s / w;
  };
  auto f = [&](double x) { return mixture_density(gm, x) / w; };
  return detail::invert_monotone(F, f, q, lo, hi);
}

// Change of variables: f_Y(y) = f_X(x) / |t'(x)| with x = t^{-1}(y).
double pushforward_log_density(const Pushforward& p, double y) {
  double base_x;
  try {
    base_x = p.chain.invert(y);
    if (!p.chain.in_domain(base_x)) return -kInf;
  } catch (const DomainError&) {
    return -kInf;
  }
  const double lf = log_density(*p.base, base_x);
  if (lf == -kInf) return lf;
  return lf - p.chain.log_derivative(base_x);
}

double v_density(const DistributionSpec::Variant& v, double x) {
  return std::visit(
      Overloaded{
          [&](const Analytic& a) { return detail::analytic_pdf(a, x); },
          [&](const SplineCdf& s) { return s.density(x); },
          [&](const Empirical&) { return 0.0; },
          [&](const GaussianMixture& gm) { return mixture_density(gm, x); },
          [&](const Pushforward& p) {
            const double l = pushforward_log_density(p, x);
            return l == -kInf ? 0.0 : std::exp(l);
          }},
      v);
}

double v_log_density(const DistributionSpec::Variant& v, double x) {
  return std::visit(
      Overloaded{
          [&](const Analytic& a) { return detail::analytic_log_pdf(a, x); },
          [&](const SplineCdf& s) {
            const double f = s.density(x);
            return f > 0.0 ? std::log(f) : -kInf;
          },
          [&](const Empirical&) { return -kInf; },
          [&](const GaussianMixture& gm) { return mixture_log_density(gm, x); },
          [&](const Pushforward& p) { return pushforward_log_density(p, x); }},
      v);
}

double v_cdf(const DistributionSpec::Variant& v, double x) {
  return std::visit(
      Overloaded{
          [&](const Analytic& a) { return detail::analytic_cdf(a, x); },
          [&](const SplineCdf& s) { return s.cdf(x); },
          [&](const Empirical& e) {
            double F = 0.0;
            for (std::size_t i = 0; i < e.size() && e.values()[i] <= x; ++i) {
              F += e.weights()[i];
            }
            return std::min(F, 1.0);
          },
          [&](const GaussianMixture& gm) { return mixture_cdf(gm, x); },
          [&](const Pushforward& p) {
            const Interval dom = p.chain.domain();
            const auto [lo, hi] = p.chain.image(dom.lo, dom.hi);
            if (x < lo) return 0.0;
            if (x >= hi) return 1.0;
            double base_x;
            try {
              base_x = p.chain.invert(x);
            } catch (const DomainError&) {
              return x < lo ? 0.0 : 1.0;
            }
            return cdf(*p.base, base_x);
          }},
      v);
}

std::vector<Atom> v_atoms(const DistributionSpec::Variant& v) {
  return std::visit(
      Overloaded{
          [](const Analytic&) { return std::vector<Atom>{}; },
          [](const SplineCdf&) { return std::vector<Atom>{}; },
          [](const Empirical& e) {
            std::vector<Atom> out;
            for (std::size_t i = 0; i < e.size(); ++i) {
              out.push_back({e.values()[i], e.weights()[i]});
            }
            return out;
          },
          [](const GaussianMixture& gm) {
            std::vector<Atom> out;
            for (const Component& c : gm.components()) {
              if (c.is_atom() && c.weight > 0.0) out.push_back({c.mean, c.weight});
            }
            return out;
          },
          [](const Pushforward& p) {
            std::vector<Atom> out = atoms(*p.base);
            for (Atom& a : out) a.x = p.chain.apply(a.x);
            return out;
          }},
      v);
}

Support v_support(const DistributionSpec::Variant& v) {
  return std::visit(
      Overloaded{
          [](const Analytic& a) { return detail::analytic_support(a); },
          [](const SplineCdf& s) { return Support{s.lower(), s.upper()}; },
          [](const Empirical&) { return Support{0.0, 0.0}; },
          [](const GaussianMixture& gm) {
            return gm.continuous_mass() > 0.0 ? Support{-kInf, kInf}
                                              : Support{0.0, 0.0};
          },
          [](const Pushforward& p) {
            const Support s = continuous_support(*p.base);
            const auto [lo, hi] = p.chain.image(s.lo, s.hi);
            return Support{lo, hi};
          }},
      v);
}

double v_continuous_quantile(const DistributionSpec::Variant& v, double q) {
  return std::visit(
      Overloaded{
          [&](const Analytic& a) { return detail::analytic_quantile(a, q); },
          [&](const SplineCdf& s) { return s.quantile(q); },
          [&](const Empirical&) -> double {
            throw UnsupportedError("empirical distribution has no continuous part");
          },
          [&](const GaussianMixture& gm) {
            return mixture_continuous_quantile(gm, q);
          },
          [&](const Pushforward& p) {
            const double x = continuous_quantile(*p.base, q);
            return p.chain.image(x, x).first;
          }},
      v);
}

std::vector<double> v_knots(const DistributionSpec::Variant& v) {
  return std::visit(
      Overloaded{
          [](const Analytic& a) { return detail::analytic_knots(a); },
          [](const SplineCdf& s) {
            std::vector<double> k;
            for (const CdfPoint& p : s.points()) k.push_back(p.x);
            return k;
          },
          [](const Empirical&) { return std::vector<double>{}; },
          [](const GaussianMixture&) { return std::vector<double>{}; },
          [](const Pushforward& p) {
            std::vector<double> k;
            for (double x : v_knots(p.base->variant())) {
              if (p.chain.in_domain(x)) k.push_back(p.chain.apply(x));
            }
            return k;
          }},
      v);
}

double v_continuous_mass(const DistributionSpec::Variant& v) {
  if (std::holds_alternative<Empirical>(v)) return 0.0;
  double m = 1.0;
  for (const Atom& a : v_atoms(v)) m -= a.mass;
  // Weights summing to one up to rounding leave no continuous part.
  return m <= 1e-12 ? 0.0 : m;
}

void validate_pushforward(const Pushforward& p) {
  if (!p.base) throw ValidationError("pushforward has no base distribution");
  for (const TransformStep& s : p.chain.steps()) {
    if (const auto* a = std::get_if<Affine>(&s); a && a->scale < 0.0) {
      throw DomainError("affine step with negative scale is not increasing");
    }
  }
  const Interval dom = p.chain.domain();
  for (const Atom& a : atoms(*p.base)) {
    if (!dom.contains(a.x)) {
      throw DomainError("atom at " + fmt(a.x) + " (mass " + fmt(a.mass) +
                        ") lies outside the transformation domain [" +
                        fmt(dom.lo) + ", " + fmt(dom.hi) +
                        "); shift the distribution or remove the atom");
    }
  }
  const DistributionSpec& b = *p.base;
  const double below = std::isinf(dom.lo) ? 0.0 : cdf(b, dom.lo) - atom_mass(b, dom.lo);
  const double above = std::isinf(dom.hi) ? 0.0 : 1.0 - cdf(b, dom.hi);
  if (below > kDomainSlack) {
    throw DomainError("mass " + fmt(below) + " lies below the transformation "
                      "domain, on (-inf, " + fmt(dom.lo) + ")");
  }
  if (above > kDomainSlack) {
    throw DomainError("mass " + fmt(above) + " lies above the transformation "
                      "domain, on (" + fmt(dom.hi) + ", inf)");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(Family family) {
  switch (family) {
    case Family::uniform: return "uniform";
    case Family::exponential: return "exponential";
    case Family::gaussian: return "gaussian";
    case Family::lognormal: return "lognormal";
    case Family::beta: return "beta";
    case Family::triangular: return "triangular";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  for (Family f : {Family::uniform, Family::exponential, Family::gaussian,
                   Family::lognormal, Family::beta, Family::triangular}) {
    if (name == to_string(f)) return f;
  }
  throw ValidationError("unknown distribution family '" + name + "'");
}

const char* to_string(TailPolicy policy) {
  return policy == TailPolicy::bounded ? "bounded" : "exponential_tails";
}

TailPolicy tail_policy_from_string(const std::string& name) {
  if (name == "bounded") return TailPolicy::bounded;
  if (name == "exponential_tails") return TailPolicy::exponential_tails;
  throw ValidationError("unknown tail policy '" + name + "'");
}

DistributionSpec::DistributionSpec(Variant variant, std::vector<Atom> atoms)
    : variant_(std::move(variant)), atoms_(std::move(atoms)) {
  if (const auto* a = std::get_if<Analytic>(&variant_)) {
    detail::validate_analytic(*a);
  }
  double total = 0.0;
  for (const Atom& a : atoms_) {
    if (!std::isfinite(a.x)) throw ValidationError("atom location must be finite");
    if (!(a.mass > 0.0 && a.mass <= 1.0)) {
      throw ValidationError("atom at " + fmt(a.x) + " has mass " + fmt(a.mass) +
                            " outside (0, 1]");
    }
    total += a.mass;
  }
  if (total > 1.0 + 1e-12) {
    throw ValidationError("atom masses sum to " + fmt(total) + " > 1");
  }
  std::sort(atoms_.begin(), atoms_.end(),
            [](const Atom& l, const Atom& r) { return l.x < r.x; });
  if (const auto* p = std::get_if<Pushforward>(&variant_)) {
    validate_pushforward(*p);
  }
}

DistributionSpec DistributionSpec::uniform(double a, double b) {
  return DistributionSpec(Analytic{Family::uniform, {a, b}});
}
DistributionSpec DistributionSpec::exponential(double rate) {
  return DistributionSpec(Analytic{Family::exponential, {rate}});
}
DistributionSpec DistributionSpec::gaussian(double mean, double var) {
  return DistributionSpec(Analytic{Family::gaussian, {mean, var}});
}
DistributionSpec DistributionSpec::lognormal(double log_mean, double log_var) {
  return DistributionSpec(Analytic{Family::lognormal, {log_mean, log_var}});
}
DistributionSpec DistributionSpec::beta(double alpha, double beta) {
  return DistributionSpec(Analytic{Family::beta, {alpha, beta}});
}
DistributionSpec DistributionSpec::triangular(double a, double mode, double b) {
  return DistributionSpec(Analytic{Family::triangular, {a, mode, b}});
}
DistributionSpec DistributionSpec::empirical(std::vector<double> values,
                                             std::vector<double> weights) {
  return DistributionSpec(Empirical(std::move(values), std::move(weights)));
}
DistributionSpec DistributionSpec::mixture(GaussianMixture gm) {
  return DistributionSpec(std::move(gm));
}

// ---------------------------------------------------------------------------

double density(const DistributionSpec& spec, double x) {
  if (std::isnan(x)) throw NumericalError("density evaluated at NaN");
  return variant_scale(spec) * v_density(spec.variant(), x);
}

double log_density(const DistributionSpec& spec, double x) {
  if (std::isnan(x)) throw NumericalError("density evaluated at NaN");
  const double s = variant_scale(spec);
  if (s == 0.0) return -kInf;
  return std::log(s) + v_log_density(spec.variant(), x);
}

double cdf(const DistributionSpec& spec, double x) {
  if (std::isnan(x)) throw NumericalError("cdf evaluated at NaN");
  double F = variant_scale(spec) * v_cdf(spec.variant(), x);
  for (const Atom& a : spec.extra_atoms()) {
    if (a.x <= x) F += a.mass;
  }
  return std::clamp(F, 0.0, 1.0);
}

double atom_mass(const DistributionSpec& spec, double x) {
  double m = 0.0;
  for (const Atom& a : atoms(spec)) {
    if (a.x == x) m += a.mass;
  }
  return m;
}

std::vector<Atom> atoms(const DistributionSpec& spec) {
  const double s = variant_scale(spec);
  std::vector<Atom> out;
  for (Atom a : v_atoms(spec.variant())) {
    a.mass *= s;
    if (a.mass > 0.0) out.push_back(a);
  }
  out.insert(out.end(), spec.extra_atoms().begin(), spec.extra_atoms().end());
  std::stable_sort(out.begin(), out.end(),
                   [](const Atom& l, const Atom& r) { return l.x < r.x; });
  return out;
}

double total_atom_mass(const DistributionSpec& spec) {
  double m = 0.0;
  for (const Atom& a : atoms(spec)) m += a.mass;
  return m;
}

Support continuous_support(const DistributionSpec& spec) {
  return v_support(spec.variant());
}

double continuous_quantile(const DistributionSpec& spec, double q) {
  return v_continuous_quantile(spec.variant(), q);
}

namespace {

double continuous_mass(const DistributionSpec& spec) {
  return variant_scale(spec) * v_continuous_mass(spec.variant());
}

}  // namespace

double quantile(const DistributionSpec& spec, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw ValidationError("quantile level must lie strictly inside (0, 1)");
  }
  const std::vector<Atom> as = atoms(spec);
  if (as.empty()) return continuous_quantile(spec, q);
  if (continuous_mass(spec) <= 0.0) {
    double cum = 0.0;
    for (const Atom& a : as) {
      cum += a.mass;
      if (cum >= q * (1.0 - 1e-15)) return a.x;
    }
    return as.back().x;
  }
  const double tail = 1e-15;
  double lo = std::min(as.front().x, continuous_quantile(spec, tail));
  double hi = std::max(as.back().x, continuous_quantile(spec, 1.0 - tail));
  for (const Atom& a : as) {
    // q falls inside this atom's jump.
    if (cdf(spec, a.x) >= q && cdf(spec, std::nextafter(a.x, -kInf)) < q) {
      return a.x;
    }
  }
  auto F = [&](double x) { return cdf(spec, x); };
  return detail::invert_monotone(F, nullptr, q, lo, hi);
}

std::vector<double> integration_panels(const DistributionSpec& spec,
                                       const QuadratureConfig& cfg) {
  if (continuous_mass(spec) <= 0.0) return {};
  const Support s = continuous_support(spec);
  const double cut = cfg.tail_mass_cutoff;
  const double lo = std::isfinite(s.lo) ? s.lo : continuous_quantile(spec, cut);
  const double hi = std::isfinite(s.hi) ? s.hi : continuous_quantile(spec, 1.0 - cut);
  std::vector<double> pts{lo, hi};
  static constexpr double kLadder[] = {1e-9, 1e-6, 1e-4, 1e-3, 0.01, 0.05,
                                       0.1,  0.2,  0.3,  0.4,  0.5,  0.6,
                                       0.7,  0.8,  0.9,  0.95, 0.99};
  auto add = [&](double x) {
    if (std::isfinite(x) && x > lo && x < hi) pts.push_back(x);
  };
  for (double q : kLadder) {
    if (q <= cut) continue;
    add(continuous_quantile(spec, q));
    if (q < 0.5) add(continuous_quantile(spec, 1.0 - q));
  }
  for (double k : v_knots(spec.variant())) add(k);
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double x : pts) {
    if (out.empty() || x > out.back() + 1e-14 * std::max(1.0, std::abs(x))) {
      out.push_back(x);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

/// Probability mass excluded by replacing infinite support ends with tail
/// quantiles, as (lower, upper).
std::pair<double, double> truncated_tails(const DistributionSpec& spec,
                                          const QuadratureConfig& cfg) {
  const Support s = continuous_support(spec);
  const double c = continuous_mass(spec) * cfg.tail_mass_cutoff;
  return {std::isfinite(s.lo) ? 0.0 : c, std::isfinite(s.hi) ? 0.0 : c};
}

}  // namespace

Expectation expect_detailed(const DistributionSpec& spec,
                            const std::function<double(double)>& g,
                            const QuadratureConfig& cfg) {
  cfg.validate();
  Expectation out;
  const std::vector<double> panels = integration_panels(spec, cfg);
  if (panels.size() >= 2) {
    auto integrand = [&](double x) {
      const double f = density(spec, x);
      return f == 0.0 ? 0.0 : f * g(x);
    };
    const QuadratureResult r = integrate(integrand, panels, cfg);
    if (!std::isfinite(r.value)) {
      throw DivergenceError("expectation is infinite over the continuous part");
    }
    const auto [lo_mass, hi_mass] = truncated_tails(spec, cfg);
    double tail_err = 0.0;
    if (lo_mass > 0.0) tail_err += lo_mass * std::abs(g(panels.front()));
    if (hi_mass > 0.0) tail_err += hi_mass * std::abs(g(panels.back()));
    if (!r.converged) {
      throw NumericalError("expectation quadrature did not converge (estimate " +
                               fmt(r.value) + ", error bound " + fmt(r.error) + ")",
                           r.value, r.error + tail_err);
    }
    out.value += r.value;
    out.error += r.error + (std::isfinite(tail_err) ? tail_err : 0.0);
  }
  for (const Atom& a : atoms(spec)) {
    const double gv = g(a.x);
    if (!std::isfinite(gv)) {
      throw DivergenceError("integrand is infinite at the atom x = " + fmt(a.x));
    }
    out.value += a.mass * gv;
  }
  return out;
}

double expect(const DistributionSpec& spec,
              const std::function<double(double)>& g,
              const QuadratureConfig& cfg) {
  return expect_detailed(spec, g, cfg).value;
}

std::vector<double> expect_vector(const DistributionSpec& spec, std::size_t dim,
                                  const VectorIntegrand& g,
                                  std::span<const double> extra_breakpoints,
                                  const QuadratureConfig& cfg) {
  cfg.validate();
  std::vector<double> out(dim, 0.0);
  std::vector<double> panels = integration_panels(spec, cfg);
  if (panels.size() >= 2) {
    const double lo = panels.front();
    const double hi = panels.back();
    for (double b : extra_breakpoints) {
      if (std::isfinite(b) && b > lo && b < hi) panels.push_back(b);
    }
    std::sort(panels.begin(), panels.end());
    panels.erase(std::unique(panels.begin(), panels.end()), panels.end());
    auto integrand = [&](double x, std::span<double> v) {
      const double f = density(spec, x);
      if (f == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        return;
      }
      g(x, v);
      for (double& e : v) e *= f;
    };
    const VectorQuadratureResult r = integrate_vector(dim, integrand, panels, cfg);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!std::isfinite(r.value[k])) {
        throw DivergenceError("expectation is infinite over the continuous part");
      }
    }
    if (!r.converged) {
      double worst = 0.0;
      std::size_t at = 0;
      for (std::size_t k = 0; k < dim; ++k) {
        if (r.error[k] > worst) {
          worst = r.error[k];
          at = k;
        }
      }
      throw NumericalError("vector expectation quadrature did not converge (component " +
                               std::to_string(at) + " estimate " + fmt(r.value[at]) +
                               ", error bound " + fmt(worst) + ")",
                           r.value[at], worst);
    }
    out = r.value;
  }
  std::vector<double> v(dim);
  for (const Atom& a : atoms(spec)) {
    g(a.x, v);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!std::isfinite(v[k])) {
        throw DivergenceError("integrand is infinite at the atom x = " + fmt(a.x));
      }
      out[k] += a.mass * v[k];
    }
  }
  return out;
}

namespace {

void require_atom_free(const DistributionSpec& spec, const char* what) {
  const std::vector<Atom> as = atoms(spec);
  if (!as.empty()) {
    throw UnsupportedError(std::string(what) +
                           " is undefined for distributions with atoms (atom at x = " +
                           fmt(as.front().x) + ", mass " + fmt(as.front().mass) + ")");
  }
}

QuadratureResult integrate_or_throw(const std::function<double(double)>& f,
                                    const std::vector<double>& panels,
                                    const QuadratureConfig& cfg,
                                    const char* what) {
  const QuadratureResult r = integrate(f, panels, cfg);
  if (std::isfinite(r.value) && !r.converged) {
    throw NumericalError(std::string(what) + " quadrature did not converge (estimate " +
                             fmt(r.value) + ", error bound " + fmt(r.error) + ")",
                         r.value, r.error);
  }
  return r;
}

}  // namespace

double entropy(const DistributionSpec& spec, const QuadratureConfig& cfg) {
  cfg.validate();
  require_atom_free(spec, "entropy");
  const std::vector<double> panels = integration_panels(spec, cfg);
  auto integrand = [&](double x) {
    const double lf = log_density(spec, x);
    if (lf == -kInf) return 0.0;
    return -std::exp(lf) * lf;
  };
  return integrate_or_throw(integrand, panels, cfg, "entropy").value;
}

double cross_term(const DistributionSpec& x, const DistributionSpec& y,
                  const QuadratureConfig& cfg) {
  cfg.validate();
  if (!atoms(y).empty()) {
    throw UnsupportedError(
        "cross term needs a second distribution without atoms (density mismatch)");
  }
  double total = 0.0;
  const std::vector<double> panels = integration_panels(x, cfg);
  if (panels.size() >= 2) {
    auto integrand = [&](double t) {
      const double fx = density(x, t);
      if (fx == 0.0) return 0.0;
      return -fx * log_density(y, t);
    };
    const QuadratureResult r = integrate_or_throw(integrand, panels, cfg, "cross term");
    if (!std::isfinite(r.value)) return kInf;
    total += r.value;
  }
  for (const Atom& a : atoms(x)) {
    const double l = log_density(y, a.x);
    if (l == -kInf) return kInf;
    total -= a.mass * l;
  }
  return total;
}

double relative_entropy(const DistributionSpec& x, const DistributionSpec& y,
                        const QuadratureConfig& cfg) {
  cfg.validate();
  require_atom_free(x, "relative entropy");
  if (!atoms(y).empty()) {
    throw UnsupportedError(
        "relative entropy needs a second distribution without atoms");
  }
  const std::vector<double> panels = integration_panels(x, cfg);
  auto integrand = [&](double t) {
    const double lx = log_density(x, t);
    if (lx == -kInf) return 0.0;
    return std::exp(lx) * (lx - log_density(y, t));
  };
  const QuadratureResult r =
      integrate_or_throw(integrand, panels, cfg, "relative entropy");
  if (!std::isfinite(r.value)) return kInf;
  return r.value;
}

// ---------------------------------------------------------------------------

namespace {

/// Share of a moment integral allowed in the far tails before the moment is
/// declared divergent.
constexpr double kTailShareLimit = 1e-3;
constexpr double kTailPersistence = 0.4;

std::optional<double> closed_form_about(const DistributionSpec::Variant& v,
                                        double c, int r) {
  return std::visit(
      Overloaded{
          [&](const Analytic& a) { return detail::analytic_moment_about(a, c, r); },
          [&](const SplineCdf&) -> std::optional<double> { return std::nullopt; },
          [&](const Empirical& e) -> std::optional<double> {
            double s = 0.0;
            for (std::size_t i = 0; i < e.size(); ++i) {
              s += e.weights()[i] * std::pow(e.values()[i] - c, r);
            }
            return s;
          },
          [&](const GaussianMixture& gm) -> std::optional<double> {
            double s = 0.0;
            for (const Component& k : gm.components()) {
              s += k.weight * normal_raw_moment(r, k.mean - c, k.var);
            }
            return s;
          },
          [&](const Pushforward&) -> std::optional<double> { return std::nullopt; }},
      v);
}

/// E[g(X)] for a moment-like g, throwing DivergenceError when the integral of
/// |g| does not settle. A finite moment's far tail shrinks as the cut moves
/// outward; a divergent one keeps (or grows) its share. Each side compares the
/// mass beyond the 1e-9 quantile with that beyond 1e-6.
double guarded_expectation(const DistributionSpec& spec,
                           const std::function<double(double)>& g, int r,
                           const QuadratureConfig& cfg) {
  const std::vector<double> panels = integration_panels(spec, cfg);
  if (panels.size() >= 2) {
    auto abs_integrand = [&](double x) {
      const double f = density(spec, x);
      return f == 0.0 ? 0.0 : f * std::abs(g(x));
    };
    const QuadratureResult whole = integrate(abs_integrand, panels, cfg);
    if (!std::isfinite(whole.value)) {
      throw DivergenceError("moment of order " + std::to_string(r) + " diverges");
    }
    auto piece = [&](double a, double b) {
      if (!(a < b)) return 0.0;
      const std::vector<double> p{a, b};
      return integrate(abs_integrand, p, cfg).value;
    };
    auto side = [&](bool lower) {
      const double e6 = continuous_quantile(spec, lower ? 1e-6 : 1.0 - 1e-6);
      const double e9 = continuous_quantile(spec, lower ? 1e-9 : 1.0 - 1e-9);
      const double t9 = lower ? piece(panels.front(), e9) : piece(e9, panels.back());
      const double t6 = t9 + (lower ? piece(e9, e6) : piece(e6, e9));
      if (t9 > kTailShareLimit * whole.value && t9 > kTailPersistence * t6) {
        throw DivergenceError("moment of order " + std::to_string(r) +
                              " diverges (far " + (lower ? "lower" : "upper") +
                              " tail carries " + fmt(t9 / whole.value) +
                              " of the integral and is not decaying)");
      }
    };
    if (whole.value > 0.0) {
      side(true);
      side(false);
    }
  }
  try {
    return expect(spec, g, cfg);
  } catch (const DivergenceError&) {
    throw DivergenceError("moment of order " + std::to_string(r) + " diverges");
  }
}

double moment_about(const DistributionSpec& spec, double c, int r,
                    const QuadratureConfig& cfg) {
  if (auto closed = closed_form_about(spec.variant(), c, r)) {
    double s = variant_scale(spec) * *closed;
    for (const Atom& a : spec.extra_atoms()) s += a.mass * std::pow(a.x - c, r);
    return s;
  }
  // Moments of a transformed variable are taken over the base, where a
  // heavy transformed tail is usually an integrable endpoint singularity.
  if (const auto* p = spec.get_if<Pushforward>(); p && spec.extra_atoms().empty()) {
    const TransformChain& chain = p->chain;
    return guarded_expectation(
        *p->base,
        [&](double x) {
          // Rounding can put a node on an open domain end, a null set.
          if (!chain.in_domain(x)) return 0.0;
          return std::pow(chain.apply(x) - c, r);
        },
        r, cfg);
  }
  return guarded_expectation(
      spec, [c, r](double x) { return std::pow(x - c, r); }, r, cfg);
}

}  // namespace

Moments moments(const DistributionSpec& spec, int max_order,
                const QuadratureConfig& cfg) {
  cfg.validate();
  if (max_order < 1) throw ValidationError("max_order must be at least 1");
  Moments out;
  out.raw.resize(max_order);
  out.central.resize(max_order);
  const double mean = moment_about(spec, 0.0, 1, cfg);
  out.raw[0] = mean;
  out.central[0] = 0.0;
  for (int r = 2; r <= max_order; ++r) {
    out.raw[r - 1] = moment_about(spec, 0.0, r, cfg);
    out.central[r - 1] = moment_about(spec, mean, r, cfg);
  }
  return out;
}

std::pair<double, double> mean_variance(const DistributionSpec& spec,
                                        const QuadratureConfig& cfg) {
  const Moments m = moments(spec, 2, cfg);
  return {m.mean(), m.variance()};
}

GaussianMixture moment_match_gaussian(const DistributionSpec& spec,
                                      const QuadratureConfig& cfg) {
  const auto [m, v] = mean_variance(spec, cfg);
  if (!std::isfinite(v)) throw DivergenceError("variance is infinite");
  if (!(v > 0.0)) throw DegenerateError("variance is zero; the distribution is a point mass");
  return GaussianMixture::single(m, v);
}

}  // namespace mogfit
