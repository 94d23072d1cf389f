#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "corpus.hpp"
#include "mogfit/emfit.hpp"
#include "mogfit/error.hpp"
#include "mogfit/transform.hpp"

using namespace mogfit;

namespace {

struct Params {
  std::vector<double> p, mu, var;
};

double phi(double x, double m, double v) {
  return std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2 * M_PI * v);
}

// Textbook EM on a sample with weights 1/n.
Params sample_em_step(const std::vector<double>& xs, const Params& th) {
  const std::size_t m = th.p.size();
  std::vector<double> sr(m, 0.0), sx(m, 0.0);
  std::vector<std::vector<double>> r(xs.size(), std::vector<double>(m));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double tot = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      r[i][j] = th.p[j] * phi(xs[i], th.mu[j], th.var[j]);
      tot += r[i][j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      r[i][j] /= tot;
      sr[j] += r[i][j];
      sx[j] += r[i][j] * xs[i];
    }
  }
  Params out{std::vector<double>(m), std::vector<double>(m), std::vector<double>(m)};
  for (std::size_t j = 0; j < m; ++j) {
    out.p[j] = sr[j] / xs.size();
    out.mu[j] = sx[j] / sr[j];
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ss += r[i][j] * (xs[i] - out.mu[j]) * (xs[i] - out.mu[j]);
    }
    out.var[j] = ss / sr[j];
  }
  return out;
}

double sample_d0(const std::vector<double>& xs, const Params& th) {
  double s = 0.0;
  for (double x : xs) {
    double f = 0.0;
    for (std::size_t j = 0; j < th.p.size(); ++j) f += th.p[j] * phi(x, th.mu[j], th.var[j]);
    s -= std::log(f);
  }
  return s / xs.size();
}

Params params_of(const GaussianMixture& gm) {
  Params out;
  for (const Component& c : gm.components()) {
    out.p.push_back(c.weight);
    out.mu.push_back(c.mean);
    out.var.push_back(c.var);
  }
  return out;
}

GaussianMixture sorted(const GaussianMixture& gm) {
  auto c = gm.components();
  std::sort(c.begin(), c.end(),
            [](const Component& a, const Component& b) { return a.mean < b.mean; });
  return GaussianMixture(c, gm.var_floor());
}

const GaussianMixture kTruth({{0.3, -2, 1}, {0.7, 3, 0.25}});

EmConfig fixed_iterations(int n) {
  EmConfig c;
  c.max_iterations = n;
  c.aitken = false;
  c.convergence_tol = 1e-300;
  c.residual_tol = 1e-300;
  return c;
}

}  // namespace

TEST_CASE("init examples") {
  const auto n = init_mixture(DistributionSpec::gaussian(0, 1), 1, InitStrategy::quantile());
  CHECK(n[0].weight == 1.0);
  CHECK(std::abs(n[0].mean) < 1e-12);
  CHECK(n[0].var == doctest::Approx(1.0));

  const auto u = init_mixture(DistributionSpec::uniform(0, 1), 2, InitStrategy::quantile());
  CHECK(u[0].mean == doctest::Approx(0.25));
  CHECK(u[1].mean == doctest::Approx(0.75));
  CHECK(u[0].weight == 0.5);
  CHECK(u[1].var == doctest::Approx(1.0 / 48.0));

  const auto e = init_mixture(DistributionSpec::exponential(1), 3, InitStrategy::quantile());
  CHECK(e[0].mean == doctest::Approx(-std::log(5.0 / 6.0)).epsilon(1e-12));
  CHECK(e[1].mean == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(e[2].mean == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("random init is deterministic and jittered") {
  const auto spec = DistributionSpec::exponential(1);
  const auto a = init_mixture(spec, 3, InitStrategy::random(7));
  const auto b = init_mixture(spec, 3, InitStrategy::random(7));
  const auto c = init_mixture(spec, 3, InitStrategy::random(8));
  const auto q = init_mixture(spec, 3, InitStrategy::quantile());
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].mean == b[i].mean);
  CHECK(a[1].mean != c[1].mean);
  CHECK(a[1].mean != q[1].mean);
}

TEST_CASE("init falls back when quantiles repeat") {
  std::vector<std::string> flags;
  const auto spec = DistributionSpec::empirical({0.0, 0.0, 0.0, 0.0, 1.0});
  const auto gm = init_mixture(spec, 3, InitStrategy::quantile(), {}, &flags);
  CHECK(std::find(flags.begin(), flags.end(), "init_fallback") != flags.end());
  CHECK(gm[0].mean < gm[1].mean);
  CHECK(gm[1].mean < gm[2].mean);
}

TEST_CASE("em step examples") {
  // A mixture is a fixed point of its own EM map.
  const auto self = em_step(DistributionSpec::mixture(kTruth), kTruth, 1e-12);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(self[i].weight - kTruth[i].weight) <= 1e-8);
    CHECK(std::abs(self[i].mean - kTruth[i].mean) <= 1e-8);
    CHECK(std::abs(self[i].var - kTruth[i].var) <= 1e-8);
  }

  // m = 1: responsibilities are 1, the variance is taken about the new mean.
  const auto one = em_step(DistributionSpec::gaussian(0, 1), GaussianMixture({{1, 5, 2}}), 1e-12);
  CHECK(std::abs(one[0].mean) <= 1e-9);
  CHECK(std::abs(one[0].var - 1.0) <= 1e-8);

  // Six points against direct summation.
  const std::vector<double> xs{-1.2, -0.4, 0.3, 1.1, 2.5, 3.0};
  const GaussianMixture start({{0.4, -1, 1}, {0.6, 2, 0.5}});
  const auto got = em_step(DistributionSpec::empirical(xs), start, 1e-12);
  const Params want = sample_em_step(xs, params_of(start));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::abs(got[j].weight - want.p[j]) <= 1e-13);
    CHECK(std::abs(got[j].mean - want.mu[j]) <= 1e-13);
    CHECK(std::abs(got[j].var - want.var[j]) <= 1e-13);
  }
}

TEST_CASE("empirical trajectory matches sample EM") {
  std::mt19937_64 rng(42);
  const auto xs = sample(kTruth, 200, 42);
  const auto spec = DistributionSpec::empirical(xs);
  const GaussianMixture start({{0.5, -1, 2}, {0.5, 1, 2}});
  Params th = params_of(start);
  GaussianMixture gm = start;
  for (int it = 0; it < 20; ++it) {
    CAPTURE(it);
    gm = em_step(spec, gm, 1e-12);
    th = sample_em_step(xs, th);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::abs(gm[j].weight - th.p[j]) <= 1e-12);
      CHECK(std::abs(gm[j].mean - th.mu[j]) <= 1e-12);
      CHECK(std::abs(gm[j].var - th.var[j]) <= 1e-12);
    }
  }
  // The fit's D0 trace is the sample negative mean log-likelihood.
  EmConfig c = fixed_iterations(20);
  c.init = InitStrategy::user(start);
  const FitReport rep = em_fit(spec, 2, c);
  // It may stop early once the iterates are an exact floating-point fixed point.
  REQUIRE(rep.d0_trace.size() >= 10);
  Params o = params_of(start);
  for (std::size_t it = 0; it < rep.d0_trace.size(); ++it) {
    CHECK(std::abs(rep.d0_trace[it] - sample_d0(xs, o)) <= 1e-12);
    o = sample_em_step(xs, o);
  }
}

TEST_CASE("em fit examples") {
  const FitReport n = em_fit(DistributionSpec::gaussian(0, 1), 1);
  CHECK(n.converged);
  CHECK(std::abs(n.mixture[0].mean) <= 1e-8);
  CHECK(std::abs(n.mixture[0].var - 1.0) <= 1e-8);
  REQUIRE(n.relative_entropy.has_value());
  CHECK(*n.relative_entropy <= 1e-6);

  const FitReport two = em_fit(DistributionSpec::mixture(kTruth), 2);
  const auto s = sorted(two.mixture);
  CHECK(std::abs(s[0].weight - 0.3) <= 0.01);
  CHECK(std::abs(s[1].weight - 0.7) <= 0.01);
  CHECK(std::abs(s[0].mean + 2) <= 0.02);
  CHECK(std::abs(s[1].mean - 3) <= 0.02);
  CHECK(std::abs(s[0].var / 1.0 - 1) <= 0.05);
  CHECK(std::abs(s[1].var / 0.25 - 1) <= 0.05);

  const auto e = DistributionSpec::exponential(1);
  const FitReport e1 = em_fit(e, 1);
  const FitReport e3 = em_fit(e, 3);
  CHECK(*e3.relative_entropy < *e1.relative_entropy);
}

TEST_CASE("m = 1 is moment matching in one step") {
  for (const auto& [name, spec] : testing::continuous_corpus()) {
    CAPTURE(name);
    const GaussianMixture mm = moment_match_gaussian(spec);
    EmConfig c;
    c.init = InitStrategy::user(GaussianMixture({{1.0, mm[0].mean + 3.0, mm[0].var * 5.0}}));
    const FitReport r = em_fit(spec, 1, fixed_iterations(1));
    const FitReport r2 = em_fit(spec, 1, c);
    CHECK(r2.converged);
    CHECK(r2.iterations <= 2);
    for (const FitReport* f : {&r, &r2}) {
      CHECK(f->mixture[0].mean == doctest::Approx(mm[0].mean).epsilon(1e-8).scale(1));
      // Heavy tails (lognormal) leave the truncated quadrature ~1e-7 short.
      CHECK(f->mixture[0].var == doctest::Approx(mm[0].var).epsilon(1e-6));
    }
  }
}

TEST_CASE("monotone traces and fixed points over the corpus") {
  const double tol = 10 * QuadratureConfig{}.rel_tol;
  for (const auto& [name, spec] : testing::continuous_corpus()) {
    for (int m = 1; m <= 3; ++m) {
      CAPTURE(name);
      CAPTURE(m);
      const FitReport r = em_fit(spec, m);
      for (std::size_t i = 1; i < r.d0_trace.size(); ++i) {
        CHECK(r.d0_trace[i] <= r.d0_trace[i - 1] + tol * std::max(1.0, std::abs(r.d0_trace[i - 1])));
      }
      if (r.converged) {
        // Independent residual: one more EM step from the reported mixture.
        const auto next = em_step(spec, r.mixture, r.mixture.var_floor());
        for (std::size_t i = 0; i < r.mixture.size(); ++i) {
          const Component& a = r.mixture[i];
          const Component& b = next[i];
          CHECK(std::abs(b.weight - a.weight) / a.weight <= 1e-6);
          CHECK(std::abs(b.mean - a.mean) / std::max(std::abs(a.mean), std::sqrt(a.var)) <= 1e-6);
          CHECK(std::abs(b.var - a.var) / a.var <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("permutation invariance") {
  const auto spec = DistributionSpec::exponential(1);
  const GaussianMixture a({{0.2, 0.2, 0.1}, {0.5, 1.0, 0.5}, {0.3, 2.5, 1.0}});
  const GaussianMixture b({{0.3, 2.5, 1.0}, {0.2, 0.2, 0.1}, {0.5, 1.0, 0.5}});
  EmConfig ca;
  ca.init = InitStrategy::user(a);
  EmConfig cb;
  cb.init = InitStrategy::user(b);
  const FitReport ra = em_fit(spec, 3, ca);
  const FitReport rb = em_fit(spec, 3, cb);
  CHECK(ra.mixture[0].mean == doctest::Approx(rb.mixture[1].mean).epsilon(1e-9));
  for (double x = -1.0; x <= 8.0; x += 0.25) {
    CHECK(std::abs(mixture_density(ra.mixture, x) - mixture_density(rb.mixture, x)) <= 1e-12);
  }
}

TEST_CASE("affine equivariance") {
  const auto spec = DistributionSpec::exponential(1);
  const double a = 2.5, b = -3.0;
  const auto moved = pushforward(spec, TransformChain({Affine{a, b}}));
  const GaussianMixture g0({{0.5, 0.5, 0.3}, {0.5, 2.0, 1.0}});
  std::vector<Component> moved_init;
  for (const Component& c : g0.components()) moved_init.push_back({c.weight, a * c.mean + b, a * a * c.var});
  EmConfig c1 = fixed_iterations(40);
  c1.init = InitStrategy::user(g0);
  EmConfig c2 = fixed_iterations(40);
  c2.init = InitStrategy::user(GaussianMixture(moved_init));
  const FitReport r1 = em_fit(spec, 2, c1);
  const FitReport r2 = em_fit(moved, 2, c2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(r2.mixture[i].weight - r1.mixture[i].weight) <= 1e-6);
    CHECK(std::abs(r2.mixture[i].mean - (a * r1.mixture[i].mean + b)) <= 1e-6);
    CHECK(std::abs(r2.mixture[i].var - a * a * r1.mixture[i].var) <= 1e-6);
  }
}

TEST_CASE("component death restarts once") {
  const auto spec = DistributionSpec::gaussian(0, 1);
  const GaussianMixture far({{0.5, 0, 1}, {0.5, 1000, 1}});
  CHECK_THROWS_AS(em_step(spec, far, 1e-6), ComponentDeathError);
  EmConfig c;
  c.init = InitStrategy::user(far);
  const FitReport r = em_fit(spec, 2, c);
  CHECK(r.has_flag("component_death_restart"));
  CHECK(!r.error.has_value());
}

TEST_CASE("variance floor clamps collapsing components") {
  const auto spec = DistributionSpec::empirical({0.0, 1.0});
  const FitReport r = em_fit(spec, 2);
  CHECK(r.has_flag("variance_clamped"));
  const double floor = 1e-6 * 0.25;
  for (const Component& c : r.mixture.components()) CHECK(c.var >= floor);
}

TEST_CASE("config validation") {
  EmConfig c;
  c.max_iterations = 0;
  CHECK_THROWS_AS(em_fit(DistributionSpec::gaussian(0, 1), 1, c), ValidationError);
  CHECK_THROWS_AS(em_fit(DistributionSpec::gaussian(0, 1), 0), ValidationError);
  EmConfig u;
  u.init = InitStrategy::user(kTruth);
  CHECK_THROWS_AS(em_fit(DistributionSpec::gaussian(0, 1), 3, u), ValidationError);
}

TEST_CASE("fast fit two") {
  const FastFitResult t = fast_fit_two(DistributionSpec::mixture(kTruth));
  CHECK(!t.fallback);
  const auto s = sorted(t.mixture);
  CHECK(std::abs(s[0].weight - 0.3) <= 1e-4);
  CHECK(std::abs(s[0].mean + 2) <= 1e-4);
  CHECK(std::abs(s[0].var - 1) <= 1e-4);
  CHECK(std::abs(s[1].mean - 3) <= 1e-4);
  CHECK(std::abs(s[1].var - 0.25) <= 1e-4);

  const FastFitResult g = fast_fit_two(DistributionSpec::gaussian(0, 1));
  for (int i = 0; i < 20; ++i) {
    const double x = -3.0 + 0.3 * i;
    CHECK(std::abs(mixture_density(g.mixture, x) - phi(x, 0, 1)) <= 1e-6);
  }

  const FastFitResult u = fast_fit_two(DistributionSpec::uniform(0, 1));
  if (!u.fallback) {
    const auto raw = mixture_raw_moments(u.mixture, 5);
    for (int r = 1; r <= 5; ++r) {
      CHECK(raw[r - 1] == doctest::Approx(1.0 / (r + 1)).epsilon(1e-6));
    }
  } else {
    CHECK(u.em.has_value());
    CHECK(u.em->has_flag("fast_fit_fallback"));
  }
  CHECK(!u.fallback);  // a symmetric real solution exists (kurtosis 1.8)

  const auto heavy = pushforward(DistributionSpec::uniform(0, 1), TransformChain({ScaledOdds{0, 1}}));
  CHECK_THROWS_AS(fast_fit_two(heavy), DivergenceError);
}
