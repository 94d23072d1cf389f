#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mogfit/distribution.hpp"
#include "mogfit/mixture.hpp"
#include "mogfit/quadrature.hpp"

namespace mogfit {

struct InitStrategy {
  enum class Kind { quantile, random, user };
  Kind kind = Kind::quantile;
  /// Seed for `random`, and for the restart after a component dies.
  std::uint64_t seed = 0;
  /// Starting mixture for `user`.
  std::optional<GaussianMixture> mixture;

  static InitStrategy quantile() { return {}; }
  static InitStrategy random(std::uint64_t seed) { return {Kind::random, seed, {}}; }
  static InitStrategy user(GaussianMixture gm) { return {Kind::user, 0, std::move(gm)}; }
};

const char* to_string(InitStrategy::Kind kind);
InitStrategy::Kind init_kind_from_string(const std::string& name);

struct EmConfig {
  int max_iterations = 500;
  /// Stop once an iteration lowers D0 by less than this...
  double convergence_tol = 1e-9;
  /// ...and one more EM step moves no parameter by more than this
  /// (relative; see FitReport::fixed_point_residual).
  double residual_tol = 1e-6;
  InitStrategy init;
  /// Variance floor as a fraction of Var(X).
  double var_floor_rel = 1e-6;
  bool aitken = true;
  int aitken_window = 3;
  QuadratureConfig quadrature;

  void validate() const;
};

struct FitReport {
  GaussianMixture mixture;
  /// D0[X, Y] of every accepted iterate, starting with the initial mixture.
  std::vector<double> d0_trace;
  /// D0 - H(X) when the entropy of X is available.
  std::optional<double> relative_entropy;
  int iterations = 0;
  bool converged = false;
  /// Largest relative change one further EM step would make: |dp|/p,
  /// |dmu|/max(|mu|, sigma) and |dvar|/var over the components.
  double fixed_point_residual = 0.0;
  /// Notes such as "variance_clamped", "aitken_accepted", "init_fallback",
  /// "component_death_restart".
  std::vector<std::string> flags;
  /// Set when fitting stopped on an error (second component death).
  std::optional<std::string> error;

  double d0() const { return d0_trace.back(); }
  bool has_flag(const std::string& f) const;
};

/// Starting mixture of size m. Means sit at the (i - 1/2)/m quantiles of X
/// (jittered for the random strategy), weights are equal and variances are
/// Var(X)/m^2. When the quantiles are unusable (inversion failure, repeated
/// values) the means fall back to an even grid over mean +- sqrt(3) sd and
/// "init_fallback" is appended to `flags`.
GaussianMixture init_mixture(const DistributionSpec& spec, int m,
                             const InitStrategy& strategy,
                             const QuadratureConfig& cfg = {},
                             std::vector<std::string>* flags = nullptr);

/// One EM update. All responsibilities use the current mixture; weights,
/// means and variances are then updated together, each variance about its
/// new mean. Variances are held at `var_floor` (flag in `clamped`).
/// Throws ComponentDeathError when a weight falls below 1e-12.
GaussianMixture em_step(const DistributionSpec& spec, const GaussianMixture& gm,
                        double var_floor, const QuadratureConfig& cfg = {},
                        bool* clamped = nullptr);

/// D0 of the mixture as the model for X, via the same quadrature as em_step.
double mixture_cross_term(const DistributionSpec& spec, const GaussianMixture& gm,
                          const QuadratureConfig& cfg = {});

/// Largest relative parameter change one EM step from `gm` would make, as
/// in FitReport::fixed_point_residual.
double fixed_point_residual(const DistributionSpec& spec, const GaussianMixture& gm,
                            double var_floor, const QuadratureConfig& cfg = {});

FitReport em_fit(const DistributionSpec& spec, int m, const EmConfig& cfg = {});

struct FastFitResult {
  GaussianMixture mixture;
  /// No moment solution was found; `em` holds the EM fit used instead.
  bool fallback = false;
  /// Largest mismatch of standardised raw moments 1..5.
  double moment_residual = 0.0;
  std::optional<FitReport> em;
};

/// Two-component fit matching the first five raw moments of X, by damped
/// least squares from several starts. Among several solutions the one
/// closest in sixth moment wins.
FastFitResult fast_fit_two(const DistributionSpec& spec, const EmConfig& cfg = {});

}  // namespace mogfit
