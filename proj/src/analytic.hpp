#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mogfit/distribution.hpp"

namespace mogfit::detail {

void validate_analytic(const Analytic& a);

double analytic_pdf(const Analytic& a, double x);
double analytic_log_pdf(const Analytic& a, double x);
double analytic_cdf(const Analytic& a, double x);
double analytic_quantile(const Analytic& a, double q);
Support analytic_support(const Analytic& a);
std::vector<double> analytic_knots(const Analytic& a);
/// E[(X - c)^r] when a closed form is available.
std::optional<double> analytic_moment_about(const Analytic& a, double c, int r);

/// Smallest x in [lo, hi] with F(x) >= q for nondecreasing F, by
/// safeguarded Newton (when a density is supplied) and bisection.
double invert_monotone(const std::function<double(double)>& F,
                       const std::function<double(double)>& density, double q,
                       double lo, double hi);

double binomial(int n, int k);

}  // namespace mogfit::detail
