#include "mogfit/sizesearch.hpp"

#include <algorithm>
#include <cmath>

#include "mogfit/error.hpp"

namespace mogfit {

namespace {

/// Widest component split into two halves at mean +- sd/2, keeping that
/// component's mean and variance.
GaussianMixture split_widest(const GaussianMixture& gm) {
  std::size_t w = 0;
  for (std::size_t i = 1; i < gm.size(); ++i) {
    if (gm[i].var > gm[w].var) w = i;
  }
  std::vector<Component> out;
  for (std::size_t i = 0; i < gm.size(); ++i) {
    const Component& c = gm[i];
    if (i != w) {
      out.push_back(c);
      continue;
    }
    const double half_sd = 0.5 * std::sqrt(c.var);
    out.push_back({0.5 * c.weight, c.mean - half_sd, 0.75 * c.var});
    out.push_back({0.5 * c.weight, c.mean + half_sd, 0.75 * c.var});
  }
  return GaussianMixture(std::move(out), gm.var_floor());
}

/// The same density with the widest component duplicated at half weight.
GaussianMixture duplicate_widest(const GaussianMixture& gm) {
  std::size_t w = 0;
  for (std::size_t i = 1; i < gm.size(); ++i) {
    if (gm[i].var > gm[w].var) w = i;
  }
  std::vector<Component> out;
  for (std::size_t i = 0; i < gm.size(); ++i) {
    Component c = gm[i];
    if (i == w) {
      c.weight *= 0.5;
      out.push_back(c);
    }
    out.push_back(c);
  }
  return GaussianMixture(std::move(out), gm.var_floor());
}

}  // namespace

void SizeSearchConfig::validate() const {
  if (!(k >= 0.0) || !std::isfinite(k)) throw ValidationError("k must be a nonnegative number");
  if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("n must be a positive number");
  if (max_m < 1) throw ValidationError("max_m must be at least 1");
  if (lookahead < 0) throw ValidationError("lookahead must be nonnegative");
  if (geometric_prior_ratio &&
      !(*geometric_prior_ratio > 0.0 && *geometric_prior_ratio < 1.0)) {
    throw ValidationError("geometric_prior_ratio must lie in (0, 1)");
  }
}

bool stop_predicate(double d_m, double d_m1, int m, const SizeSearchConfig& cfg) {
  if (m < 1) throw ValidationError("mixture size must be at least 1");
  double threshold = cfg.kn() * std::log((m + 1.0) / m);
  if (cfg.geometric_prior_ratio) threshold += std::log(1.0 / *cfg.geometric_prior_ratio) / cfg.n;
  if (threshold == 0.0) return false;
  return d_m - d_m1 <= threshold;
}

Accuracy accuracy_measure(double d0, double n) {
  if (!std::isfinite(d0)) throw ValidationError("accuracy needs a finite cross term");
  if (!(n > 0.0)) throw ValidationError("n must be positive");
  Accuracy a;
  a.log_value = -n * d0;
  a.value = std::exp(a.log_value);
  a.log_space = a.value == 0.0 || !std::isfinite(a.value) ||
                (a.value < std::numeric_limits<double>::min() && a.log_value != 0.0);
  return a;
}

bool SizeSearchResult::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

SizeSearchResult select_size(const DistributionSpec& spec, const EmConfig& em,
                             const SizeSearchConfig& cfg) {
  cfg.validate();
  em.validate();
  SizeSearchResult out;
  std::map<int, double> d;  // D0 per size; failed sizes inherit the previous one
  std::optional<GaussianMixture> last;

  auto fit = [&](int m) {
    if (d.count(m)) return;
    if (m == 1) {
      FitReport r = em_fit(spec, 1, em);
      d[1] = r.d0();
      last = r.mixture;
      out.reports.emplace(1, std::move(r));
      return;
    }
    std::optional<FitReport> best;
    auto consider = [&](const EmConfig& c) {
      try {
        FitReport r = em_fit(spec, m, c);
        if (r.error) return;
        if (!best || r.d0() < best->d0()) best = std::move(r);
      } catch (const Error&) {
      }
    };
    consider(em);
    if (last) {
      EmConfig split = em;
      split.init = InitStrategy::user(split_widest(*last));
      consider(split);
    }
    if (!best) {
      out.flags.push_back("fit_failed_m=" + std::to_string(m));
      d[m] = d.at(m - 1);
      return;
    }
    if (last && best->d0() > d.at(m - 1)) {
      // Neither start reached the smaller fit's level; the smaller fit with
      // a duplicated component is an exact size-m mixture at that level.
      EmConfig dup = em;
      dup.init = InitStrategy::user(duplicate_widest(*last));
      dup.max_iterations = 1;
      FitReport r = em_fit(spec, m, dup);
      if (r.d0() < best->d0()) {
        best = std::move(r);
        out.flags.push_back("nested_fallback_m=" + std::to_string(m));
      }
    }
    d[m] = best->d0();
    last = best->mixture;
    out.reports.emplace(m, std::move(*best));
  };

  fit(1);
  for (int m = 1; m <= cfg.max_m; ++m) {
    if (m == cfg.max_m) {
      out.chosen_m = m;
      out.flags.push_back("hit_max_m");
      break;
    }
    const int top = std::min(m + cfg.lookahead + 1, cfg.max_m);
    bool stop = true;
    for (int j = m; j < top && stop; ++j) {
      fit(j + 1);
      stop = stop_predicate(d.at(j), d.at(j + 1), j, cfg);
    }
    if (stop) {
      out.chosen_m = m;
      break;
    }
  }
  // A skipped size cannot be chosen; fall back to the largest fitted one below.
  while (!out.reports.count(out.chosen_m)) --out.chosen_m;
  return out;
}

}  // namespace mogfit
