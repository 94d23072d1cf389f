#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mogfit {

struct QuadratureConfig {
  double abs_tol = 1e-9;
  double rel_tol = 1e-8;
  /// Probability mass left out of each infinite (or heavy) tail.
  double tail_mass_cutoff = 1e-12;
  int max_subdivisions = 4000;

  /// Throws ValidationError unless every field is in range.
  void validate() const;

  /// Defaults, with `MOGFIT_QUADRATURE_TOL` (if set) overriding the
  /// relative tolerance and a tenth of it the absolute tolerance.
  static QuadratureConfig from_environment();
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = true;
};

struct VectorQuadratureResult {
  std::vector<double> value;
  std::vector<double> error;
  int evaluations = 0;
  bool converged = true;
};

using ScalarIntegrand = std::function<double(double)>;
/// Writes `out.size()` integrand values at x.
using VectorIntegrand = std::function<void(double x, std::span<double> out)>;

/// Globally adaptive 21-point Gauss-Kronrod quadrature. `breakpoints` must be
/// finite and sorted; consecutive pairs form the initial panels, so
/// discontinuities of the integrand (spline knots, support ends) belong
/// there. Non-finite integrand values propagate into `value` and stop
/// refinement.
QuadratureResult integrate(const ScalarIntegrand& f,
                           std::span<const double> breakpoints,
                           const QuadratureConfig& cfg);

/// Same engine for several integrands sharing panels. A panel is refined
/// while any component misses max(abs_tol, rel_tol * |I_k|).
VectorQuadratureResult integrate_vector(std::size_t dim,
                                        const VectorIntegrand& f,
                                        std::span<const double> breakpoints,
                                        const QuadratureConfig& cfg);

}  // namespace mogfit
