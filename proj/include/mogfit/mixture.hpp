#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace mogfit {

/// One Gaussian component. A variance of exactly zero makes it an atom.
struct Component {
  double weight = 1.0;
  double mean = 0.0;
  double var = 1.0;

  bool is_atom() const { return var == 0.0; }
};

/// Finite mixture of Gaussians on the real line.
///
/// Weights lie on the simplex (to 1e-12), every variance is either zero or
/// at least `var_floor()`, and there is at least one component. When no floor
/// is given it defaults to 1e-10 times the mixture's overall variance.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<Component> components,
                           std::optional<double> var_floor = std::nullopt);

  static GaussianMixture single(double mean, double var);

  const std::vector<Component>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  const Component& operator[](std::size_t i) const { return components_[i]; }
  double var_floor() const { return var_floor_; }

  double mean() const;
  double variance() const;
  /// Total weight of zero-variance components.
  double atom_mass() const;
  /// Total weight of components with positive variance.
  double continuous_mass() const { return 1.0 - atom_mass(); }

 private:
  std::vector<Component> components_;
  double var_floor_ = 0.0;
};

/// Density of the continuous part; zero-variance components are excluded.
double mixture_density(const GaussianMixture& gm, double x);
double mixture_log_density(const GaussianMixture& gm, double x);
/// CDF including zero-variance components as steps at their means.
double mixture_cdf(const GaussianMixture& gm, double x);

/// p_i f_i(x) / f(x) over the continuous components (atoms get 0).
/// Throws DegenerateError when f(x) underflows to zero.
std::vector<double> responsibilities(const GaussianMixture& gm, double x);

/// Raw moments E[Y^r], r = 1..max_order, in closed form.
std::vector<double> mixture_raw_moments(const GaussianMixture& gm,
                                        int max_order);

/// Draws the selector, then the component. Deterministic in `seed`.
std::vector<double> sample(const GaussianMixture& gm, std::size_t count,
                           std::uint64_t seed);
/// As `sample`, also reporting which component produced each draw.
std::vector<double> sample(const GaussianMixture& gm, std::size_t count,
                           std::uint64_t seed,
                           std::vector<std::size_t>* selectors);

// Standard normal helpers shared across the library.
double normal_pdf(double x, double mean, double var);
double normal_log_pdf(double x, double mean, double var);
double normal_cdf(double x, double mean, double var);
double normal_quantile(double q, double mean, double var);
/// E[Z^r] for Z ~ N(mean, var).
double normal_raw_moment(int r, double mean, double var);

}  // namespace mogfit
