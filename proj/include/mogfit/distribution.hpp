#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mogfit/mixture.hpp"
#include "mogfit/quadrature.hpp"
#include "mogfit/transform_chain.hpp"

namespace mogfit {

enum class Family { uniform, exponential, gaussian, lognormal, beta, triangular };

const char* to_string(Family family);
Family family_from_string(const std::string& name);

/// Closed-form family. Parameters by family:
///   uniform (a, b), exponential (rate), gaussian (mean, variance),
///   lognormal (log-mean, log-variance), beta (alpha, beta),
///   triangular (a, mode, b).
struct Analytic {
  Family family = Family::gaussian;
  std::vector<double> params;
};

enum class TailPolicy { bounded, exponential_tails };

const char* to_string(TailPolicy policy);
TailPolicy tail_policy_from_string(const std::string& name);

struct CdfPoint {
  double x = 0.0;
  double F = 0.0;
};

/// Shape-preserving (monotone) cubic Hermite interpolant through assessed
/// CDF points, with tails attached beyond the outermost points.
///
/// Interior knot slopes are weighted harmonic means of the neighbouring
/// secants; the end slopes equal the end secants. That keeps every slope
/// strictly positive and within three secants, which is sufficient for a
/// monotone cubic on each interval.
class SplineCdf {
 public:
  SplineCdf(std::vector<CdfPoint> points, TailPolicy tail_policy,
            int n_equiv);

  const std::vector<CdfPoint>& points() const { return points_; }
  TailPolicy tail_policy() const { return tail_policy_; }
  int n_equiv() const { return n_equiv_; }
  /// Hermite slope at each knot.
  const std::vector<double>& slopes() const { return slopes_; }

  double cdf(double x) const;
  double density(double x) const;
  double quantile(double q) const;
  /// Support of the density; infinite for exponential tails.
  double lower() const;
  double upper() const;

 private:
  std::vector<CdfPoint> points_;
  TailPolicy tail_policy_;
  int n_equiv_;
  std::vector<double> slopes_;
};

/// Weighted point masses. Values are sorted, duplicates merged and weights
/// normalised at construction.
class Empirical {
 public:
  explicit Empirical(std::vector<double> values,
                     std::vector<double> weights = {});

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
};

class DistributionSpec;

/// Distribution of chain(X) for a base X.
struct Pushforward {
  std::shared_ptr<const DistributionSpec> base;
  TransformChain chain;
};

/// A point mass.
struct Atom {
  double x = 0.0;
  double mass = 0.0;
};

/// Immutable description of a univariate distribution: one of the variants
/// below, optionally mixed with extra point masses. With extra atoms of total
/// mass A the variant carries the remaining 1 - A.
class DistributionSpec {
 public:
  using Variant =
      std::variant<Analytic, SplineCdf, Empirical, GaussianMixture, Pushforward>;

  explicit DistributionSpec(Variant variant, std::vector<Atom> atoms = {});

  static DistributionSpec uniform(double a, double b);
  static DistributionSpec exponential(double rate);
  static DistributionSpec gaussian(double mean, double var);
  static DistributionSpec lognormal(double log_mean, double log_var);
  static DistributionSpec beta(double alpha, double beta);
  static DistributionSpec triangular(double a, double mode, double b);
  static DistributionSpec empirical(std::vector<double> values,
                                    std::vector<double> weights = {});
  static DistributionSpec mixture(GaussianMixture gm);

  const Variant& variant() const { return variant_; }
  /// Atoms attached on top of the variant (not those inside it).
  const std::vector<Atom>& extra_atoms() const { return atoms_; }

  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&variant_);
  }

 private:
  Variant variant_;
  std::vector<Atom> atoms_;
};

/// Support of the continuous part; endpoints may be infinite.
struct Support {
  double lo;
  double hi;
};

// ---------------------------------------------------------------------------
// Pointwise queries

/// Density of the continuous part (atoms excluded).
double density(const DistributionSpec& spec, double x);
double log_density(const DistributionSpec& spec, double x);
/// CDF including atoms at locations <= x.
double cdf(const DistributionSpec& spec, double x);
/// Mass located exactly at x.
double atom_mass(const DistributionSpec& spec, double x);
/// Every point mass of the distribution, sorted by location.
std::vector<Atom> atoms(const DistributionSpec& spec);
double total_atom_mass(const DistributionSpec& spec);
Support continuous_support(const DistributionSpec& spec);
/// Quantile of the normalised continuous part.
double continuous_quantile(const DistributionSpec& spec, double q);
/// inf { x : cdf(x) >= q }.
double quantile(const DistributionSpec& spec, double q);

/// Panel boundaries covering the continuous part: support ends (or tail
/// quantiles where infinite), a ladder of interior quantiles and any knots.
std::vector<double> integration_panels(const DistributionSpec& spec,
                                       const QuadratureConfig& cfg);

// ---------------------------------------------------------------------------
// Expectations

struct Expectation {
  double value = 0.0;
  /// Quadrature error plus an estimate for the truncated tail mass.
  double error = 0.0;
};

/// E[g(X)]: adaptive quadrature over the continuous part plus the weighted
/// sum over atoms. Throws NumericalError if the quadrature does not converge
/// and DivergenceError if g is infinite on a set of positive mass.
Expectation expect_detailed(const DistributionSpec& spec,
                            const std::function<double(double)>& g,
                            const QuadratureConfig& cfg = {});
double expect(const DistributionSpec& spec,
              const std::function<double(double)>& g,
              const QuadratureConfig& cfg = {});

/// E[g_k(X)] for the `dim` components of g, sharing one quadrature.
/// `extra_breakpoints` inside the continuous support refine the initial
/// panels (e.g. where g has features of its own).
std::vector<double> expect_vector(const DistributionSpec& spec, std::size_t dim,
                                  const VectorIntegrand& g,
                                  std::span<const double> extra_breakpoints,
                                  const QuadratureConfig& cfg = {});

/// Differential entropy -E[ln f(X)]. Atom-free specs only.
double entropy(const DistributionSpec& spec, const QuadratureConfig& cfg = {});

/// D0(X, Y) = -E[ln f_Y(X)]. X may have atoms (an empirical X reduces to
/// the mean negative log-density). Returns +inf when Y has zero density
/// where X has mass. Y must be atom-free.
double cross_term(const DistributionSpec& x, const DistributionSpec& y,
                  const QuadratureConfig& cfg = {});

/// D(X, Y) = D0(X, Y) - H(X). X must be atom-free.
double relative_entropy(const DistributionSpec& x, const DistributionSpec& y,
                        const QuadratureConfig& cfg = {});

struct Moments {
  std::vector<double> raw;      // E[X^r], r = 1..max_order
  std::vector<double> central;  // E[(X - EX)^r], r = 1..max_order
  double mean() const { return raw.at(0); }
  double variance() const { return central.at(1); }
};

Moments moments(const DistributionSpec& spec, int max_order,
                const QuadratureConfig& cfg = {});

/// Mean and variance only.
std::pair<double, double> mean_variance(const DistributionSpec& spec,
                                        const QuadratureConfig& cfg = {});

/// Single Gaussian with the mean and variance of X.
GaussianMixture moment_match_gaussian(const DistributionSpec& spec,
                                      const QuadratureConfig& cfg = {});

/// Spline CDF through assessed points. `n_equiv` defaults to the number of
/// points.
DistributionSpec spline_from_points(std::vector<CdfPoint> points,
                                    std::optional<int> n_equiv = std::nullopt,
                                    TailPolicy tail_policy = TailPolicy::bounded);

}  // namespace mogfit
