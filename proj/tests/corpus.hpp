#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mogfit/distribution.hpp"

namespace mogfit::testing {

struct Named {
  std::string name;
  DistributionSpec spec;
};

/// Atom-free continuous specs used by the property suites.
inline std::vector<Named> continuous_corpus() {
  std::vector<Named> c{
      {"uniform", DistributionSpec::uniform(0, 1)},
      {"exponential", DistributionSpec::exponential(1)},
      {"lognormal", DistributionSpec::lognormal(0, 1)},
      {"triangular", DistributionSpec::triangular(0, 0.3, 1)},
      {"beta", DistributionSpec::beta(2, 5)},
      {"gaussian", DistributionSpec::gaussian(1, 4)},
      {"mixture", DistributionSpec::mixture(
                      GaussianMixture({{0.3, -2, 1}, {0.7, 3, 0.25}}))},
      {"spline", spline_from_points({{-1.0, 0.1}, {0.0, 0.35}, {0.5, 0.6},
                                     {1.5, 0.85}, {3.0, 0.95}})},
      {"spline_exp_tails",
       spline_from_points({{-1.0, 0.1}, {0.0, 0.35}, {0.5, 0.6}, {1.5, 0.85},
                           {3.0, 0.95}},
                          std::nullopt, TailPolicy::exponential_tails)},
  };
  return c;
}

}  // namespace mogfit::testing
