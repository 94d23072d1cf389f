#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "mogfit/distribution.hpp"
#include "mogfit/quadrature.hpp"
#include "mogfit/transform_chain.hpp"

namespace mogfit {

struct PowerSearchConfig {
  double p_lo = -2.0;
  double p_hi = 3.0;
  double tolerance = 1e-4;
  double rounding_threshold = 0.05;
  std::vector<double> round_targets{0.0, 1.0 / 3.0, 0.5, 1.0, 2.0, 3.0, -1.0};

  void validate() const;
};

/// Distribution of chain(X). Atoms move to their transformed locations.
/// Throws DomainError when X puts mass outside the chain's domain.
DistributionSpec pushforward(const DistributionSpec& spec,
                             const TransformChain& chain);

/// Relative entropy between chain(X) and its moment-matching Gaussian,
/// computed in x-space from the variance of chain(X), H(X) and the mean log
/// Jacobian. X must be atom-free.
double transform_gap(const DistributionSpec& spec, const TransformChain& chain,
                     const QuadratureConfig& cfg = {});

/// 1/2 ln Var[t_p(X)] - (p - 1) E[ln X]: the part of the Box-Cox gap that
/// depends on p. +inf where the variance diverges.
double power_objective(const DistributionSpec& spec, double p,
                       const QuadratureConfig& cfg = {});

struct PowerSearchResult {
  double p_star = 0.0;
  /// power_objective at p_star.
  double objective = 0.0;
  /// Full gap D[t_p*(X), Gaussian]; absent when H(X) is unavailable.
  std::optional<double> gap;
};

/// Minimises power_objective over the bracket: a 31-point scan picks the
/// best cell, golden-section search refines it.
PowerSearchResult optimal_power(const DistributionSpec& spec,
                                const PowerSearchConfig& search = {},
                                const QuadratureConfig& cfg = {});

/// Snaps p to the nearest round target within the threshold.
double round_power(double p, const PowerSearchConfig& search = {});

/// Practical bounds on X; hi = +inf for a lower bound only.
struct Bounds {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

/// Chain taking the support of X onto [0, inf): scaled odds for two-sided
/// bounds, a shift for a lower bound, identity when X is already
/// nonnegative.
TransformChain precondition(const DistributionSpec& spec,
                            const std::optional<Bounds>& bounds = std::nullopt);

}  // namespace mogfit
