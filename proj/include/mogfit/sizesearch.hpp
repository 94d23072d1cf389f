#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mogfit/distribution.hpp"
#include "mogfit/emfit.hpp"

namespace mogfit {

/// Size-selection settings. The cost exponent k and equivalent sample size
/// n have no defaults; only their ratio enters the stopping rule.
struct SizeSearchConfig {
  SizeSearchConfig(double k, double n) : k(k), n(n) {}
  /// k / n given directly (n = 1).
  static SizeSearchConfig from_ratio(double kn) { return {kn, 1.0}; }

  double k;
  double n;
  int max_m = 10;
  int lookahead = 1;
  /// r of a geometric prior P(m) proportional to r^(m-1). Experimental.
  std::optional<double> geometric_prior_ratio;

  double kn() const { return k / n; }
  void validate() const;
};

/// Whether growing from m to m+1 components is not worth it:
/// d_m - d_m1 <= (k/n) ln((m+1)/m) [+ ln(1/r)/n with a prior]. Exact ties
/// stop. With k = 0 and no prior it never stops.
bool stop_predicate(double d_m, double d_m1, int m, const SizeSearchConfig& cfg);

struct Accuracy {
  /// exp(-n d0), or 0 / inf when that does not fit in a double.
  double value = 0.0;
  double log_value = 0.0;
  /// Set when only log_value is meaningful.
  bool log_space = false;
};

/// Likelihood-like accuracy exp(-n d0) of a fit with cross term d0.
Accuracy accuracy_measure(double d0, double n);

struct SizeSearchResult {
  int chosen_m = 1;
  std::map<int, FitReport> reports;
  /// "hit_max_m", "fit_failed_m=<m>", "nested_fallback_m=<m>".
  std::vector<std::string> flags;

  const FitReport& chosen() const { return reports.at(chosen_m); }
  bool has_flag(const std::string& f) const;
};

/// Fits m = 1, 2, ... and stops at the first m whose next lookahead+1
/// increments all satisfy the stopping rule, or at max_m. Sizes above one
/// keep the better of a quantile start and a split of the previous fit's
/// widest component, so D0 never grows with m.
SizeSearchResult select_size(const DistributionSpec& spec, const EmConfig& em,
                             const SizeSearchConfig& cfg);

}  // namespace mogfit
