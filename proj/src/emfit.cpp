#include "mogfit/emfit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "mogfit/error.hpp"

namespace mogfit {

namespace {

constexpr double kDeathWeight = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void add_flag(std::vector<std::string>& flags, const std::string& f) {
  if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
}

/// Expectations needed for one EM update, all under the current mixture:
/// a[i] = E[r_i], b[i] = E[r_i (X - mu_i)], c[i] = E[r_i (X - mu_i)^2], and
/// the cross term D0 = -E[ln f_Y(X)].
struct StepStats {
  std::vector<double> a, b, c;
  double d0 = 0.0;
};

StepStats step_stats(const DistributionSpec& spec, const GaussianMixture& gm,
                     const QuadratureConfig& cfg) {
  const std::size_t m = gm.size();
  std::vector<double> logw(m), sd(m);
  std::vector<double> breaks;
  for (std::size_t i = 0; i < m; ++i) {
    const Component& k = gm[i];
    if (k.is_atom()) {
      throw ValidationError("EM needs components with positive variance");
    }
    logw[i] = std::log(k.weight);
    sd[i] = std::sqrt(k.var);
    for (double z : {-5.0, -2.0, 0.0, 2.0, 5.0}) breaks.push_back(k.mean + z * sd[i]);
  }
  std::sort(breaks.begin(), breaks.end());

  auto g = [&](double x, std::span<double> out) {
    double lse = -kInf;
    std::vector<double> l(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double z = (x - gm[i].mean) / sd[i];
      l[i] = logw[i] - std::log(sd[i]) - 0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
      lse = std::max(lse, l[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += std::exp(l[i] - lse);
    lse += std::log(s);
    for (std::size_t i = 0; i < m; ++i) {
      const double r = std::exp(l[i] - lse);
      const double d = x - gm[i].mean;
      out[3 * i] = r;
      out[3 * i + 1] = r * d;
      out[3 * i + 2] = r * d * d;
    }
    out[3 * m] = -lse;
  };
  const std::vector<double> e = expect_vector(spec, 3 * m + 1, g, breaks, cfg);
  StepStats st;
  st.a.resize(m);
  st.b.resize(m);
  st.c.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    st.a[i] = e[3 * i];
    st.b[i] = e[3 * i + 1];
    st.c[i] = e[3 * i + 2];
  }
  st.d0 = e[3 * m];
  return st;
}

GaussianMixture update_from(const GaussianMixture& gm, const StepStats& st,
                            double var_floor, bool* clamped) {
  const std::size_t m = gm.size();
  double total = 0.0;
  for (double a : st.a) total += a;
  std::vector<Component> next(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double w = st.a[i] / total;
    if (!(w >= kDeathWeight)) throw ComponentDeathError(i, w);
    const double shift = st.b[i] / st.a[i];
    double var = st.c[i] / st.a[i] - shift * shift;
    if (!(var >= var_floor)) {
      var = var_floor;
      if (clamped) *clamped = true;
    }
    next[i] = {w, gm[i].mean + shift, var};
  }
  return GaussianMixture(std::move(next), var_floor);
}

double residual(const GaussianMixture& a, const GaussianMixture& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Component& x = a[i];
    const Component& y = b[i];
    const double sd = std::sqrt(x.var);
    r = std::max({r, std::abs(y.weight - x.weight) / x.weight,
                  std::abs(y.mean - x.mean) / std::max(std::abs(x.mean), sd),
                  std::abs(y.var - x.var) / x.var});
  }
  return r;
}

/// Componentwise Aitken extrapolation of three successive iterates.
std::optional<GaussianMixture> aitken(const GaussianMixture& g0, const GaussianMixture& g1,
                                      const GaussianMixture& g2, double var_floor) {
  auto extrap = [](double x0, double x1, double x2) {
    const double d1 = x1 - x0;
    const double d2 = x2 - x1;
    const double den = d2 - d1;
    if (den == 0.0 || !std::isfinite(den)) return x2;
    const double v = x2 - d2 * d2 / den;
    return std::isfinite(v) ? v : x2;
  };
  const std::size_t m = g0.size();
  std::vector<Component> out(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    out[i].weight = extrap(g0[i].weight, g1[i].weight, g2[i].weight);
    out[i].mean = extrap(g0[i].mean, g1[i].mean, g2[i].mean);
    out[i].var = std::max(var_floor, extrap(g0[i].var, g1[i].var, g2[i].var));
    if (!(out[i].weight > kDeathWeight)) return std::nullopt;
    total += out[i].weight;
  }
  for (Component& c : out) c.weight /= total;
  try {
    return GaussianMixture(std::move(out), var_floor);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

struct RunState {
  std::optional<GaussianMixture> current;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  double residual = kInf;
};

void run_em(const DistributionSpec& spec, GaussianMixture gm, double floor,
            const EmConfig& cfg, RunState& state, std::vector<std::string>& flags) {
  const QuadratureConfig& q = cfg.quadrature;
  state.current = gm;
  state.trace.clear();
  state.iterations = 0;
  state.converged = false;
  StepStats st = step_stats(spec, gm, q);
  state.trace.push_back(st.d0);
  std::deque<GaussianMixture> history{gm};
  bool clamped = false;

  while (state.iterations < cfg.max_iterations) {
    GaussianMixture next = update_from(gm, st, floor, &clamped);
    StepStats next_st = step_stats(spec, next, q);
    ++state.iterations;
    // One more update from `next` gives the fixed-point residual for free.
    bool probe_clamped = false;
    const GaussianMixture probe = update_from(next, next_st, floor, &probe_clamped);
    state.residual = residual(next, probe);
    const double decrease = state.trace.back() - next_st.d0;
    gm = next;
    st = std::move(next_st);
    state.trace.push_back(st.d0);
    state.current = gm;
    if (decrease < cfg.convergence_tol && state.residual <= cfg.residual_tol) {
      state.converged = true;
      break;
    }

    history.push_back(gm);
    if (history.size() > static_cast<std::size_t>(cfg.aitken_window)) history.pop_front();
    if (cfg.aitken && history.size() == static_cast<std::size_t>(cfg.aitken_window)) {
      if (auto acc = aitken(history[history.size() - 3], history[history.size() - 2],
                            history.back(), floor)) {
        try {
          StepStats acc_st = step_stats(spec, *acc, q);
          if (acc_st.d0 < st.d0) {
            gm = *acc;
            st = std::move(acc_st);
            state.trace.push_back(st.d0);
            state.current = gm;
            add_flag(flags, "aitken_accepted");
            history.clear();
            history.push_back(gm);
          }
        } catch (const Error&) {
          // An unusable extrapolation is simply discarded.
        }
      }
    }
  }
  if (clamped) add_flag(flags, "variance_clamped");
}

double spec_variance(const DistributionSpec& spec, const QuadratureConfig& cfg) {
  const double v = mean_variance(spec, cfg).second;
  if (!std::isfinite(v)) throw DivergenceError("variance of the input is infinite");
  if (!(v > 0.0)) throw DegenerateError("the input distribution has zero variance");
  return v;
}

}  // namespace

const char* to_string(InitStrategy::Kind kind) {
  switch (kind) {
    case InitStrategy::Kind::quantile: return "quantile";
    case InitStrategy::Kind::random: return "random";
    case InitStrategy::Kind::user: return "user";
  }
  return "unknown";
}

InitStrategy::Kind init_kind_from_string(const std::string& name) {
  for (auto k : {InitStrategy::Kind::quantile, InitStrategy::Kind::random,
                 InitStrategy::Kind::user}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown init strategy '" + name +
                        "' (expected quantile, random or user)");
}

void EmConfig::validate() const {
  if (max_iterations < 1) throw ValidationError("max_iterations must be at least 1");
  if (!(convergence_tol > 0.0)) throw ValidationError("convergence_tol must be positive");
  if (!(residual_tol > 0.0)) throw ValidationError("residual_tol must be positive");
  if (!(var_floor_rel > 0.0)) throw ValidationError("var_floor_rel must be positive");
  if (aitken_window != 3) throw ValidationError("aitken_window must be 3");
  quadrature.validate();
}

bool FitReport::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

GaussianMixture init_mixture(const DistributionSpec& spec, int m,
                             const InitStrategy& strategy, const QuadratureConfig& cfg,
                             std::vector<std::string>* flags) {
  if (m < 1) throw ValidationError("mixture size must be at least 1");
  if (strategy.kind == InitStrategy::Kind::user) {
    if (!strategy.mixture) throw ValidationError("user init needs a mixture");
    if (static_cast<int>(strategy.mixture->size()) != m) {
      throw ValidationError("user init mixture has " +
                            std::to_string(strategy.mixture->size()) +
                            " components, expected " + std::to_string(m));
    }
    return *strategy.mixture;
  }
  const auto [mean, var] = mean_variance(spec, cfg);
  if (!std::isfinite(var)) throw DivergenceError("variance of the input is infinite");
  if (!(var > 0.0)) throw DegenerateError("the input distribution has zero variance");

  std::vector<double> levels(m);
  std::mt19937_64 rng(strategy.seed);
  std::uniform_real_distribution<double> jitter(-0.4, 0.4);
  for (int i = 0; i < m; ++i) {
    const double shift = strategy.kind == InitStrategy::Kind::random ? jitter(rng) : 0.0;
    levels[i] = (i + 0.5 + shift) / m;
  }
  std::sort(levels.begin(), levels.end());

  std::vector<double> means(m);
  bool usable = true;
  try {
    for (int i = 0; i < m; ++i) means[i] = quantile(spec, levels[i]);
    for (int i = 0; i < m; ++i) {
      if (!std::isfinite(means[i]) || (i > 0 && !(means[i] > means[i - 1]))) usable = false;
    }
  } catch (const Error&) {
    usable = false;
  }
  if (!usable) {
    const double half = std::sqrt(3.0 * var);
    for (int i = 0; i < m; ++i) means[i] = mean + half * (2.0 * levels[i] - 1.0);
    if (flags) add_flag(*flags, "init_fallback");
  }
  std::vector<Component> comps;
  for (int i = 0; i < m; ++i) comps.push_back({1.0 / m, means[i], var / (m * m)});
  return GaussianMixture(std::move(comps));
}

GaussianMixture em_step(const DistributionSpec& spec, const GaussianMixture& gm,
                        double var_floor, const QuadratureConfig& cfg, bool* clamped) {
  return update_from(gm, step_stats(spec, gm, cfg), var_floor, clamped);
}

double mixture_cross_term(const DistributionSpec& spec, const GaussianMixture& gm,
                          const QuadratureConfig& cfg) {
  return step_stats(spec, gm, cfg).d0;
}

double fixed_point_residual(const DistributionSpec& spec, const GaussianMixture& gm,
                            double var_floor, const QuadratureConfig& cfg) {
  return residual(gm, em_step(spec, gm, var_floor, cfg));
}

FitReport em_fit(const DistributionSpec& spec, int m, const EmConfig& cfg) {
  cfg.validate();
  if (m < 1) throw ValidationError("mixture size must be at least 1");
  const double floor = cfg.var_floor_rel * spec_variance(spec, cfg.quadrature);

  std::vector<std::string> flags;
  RunState state;
  std::optional<std::string> error;
  GaussianMixture start = init_mixture(spec, m, cfg.init, cfg.quadrature, &flags);
  try {
    run_em(spec, start, floor, cfg, state, flags);
  } catch (const ComponentDeathError& first) {
    add_flag(flags, "component_death_restart");
    InitStrategy restart = InitStrategy::random(cfg.init.seed + 1);
    try {
      run_em(spec, init_mixture(spec, m, restart, cfg.quadrature, &flags), floor, cfg,
             state, flags);
    } catch (const ComponentDeathError& second) {
      error = second.what();
      state.converged = false;
    }
  }

  FitReport rep{*state.current, state.trace, std::nullopt, 0, false, 0.0, {}, std::nullopt};
  rep.iterations = state.iterations;
  rep.converged = state.converged;
  rep.fixed_point_residual = std::isfinite(state.residual) ? state.residual : 0.0;
  rep.flags = std::move(flags);
  rep.error = std::move(error);
  if (rep.d0_trace.empty()) {
    rep.d0_trace.push_back(mixture_cross_term(spec, rep.mixture, cfg.quadrature));
  }
  if (atoms(spec).empty()) {
    try {
      rep.relative_entropy = rep.d0() - entropy(spec, cfg.quadrature);
    } catch (const Error&) {
      rep.relative_entropy.reset();
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Method of moments for two components.

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

struct TwoParams {
  double p, mu1, v1, mu2, v2;
};

/// Unconstrained coordinates: logit weight, means, log variances.
TwoParams decode(const Vec5& u) {
  return {1.0 / (1.0 + std::exp(-u(0))), u(1), std::exp(u(2)), u(3), std::exp(u(4))};
}

void moments_and_jacobian(const Vec5& u, const Vec5& target, Vec5& r, Mat5& J) {
  const TwoParams t = decode(u);
  // Raw moments of each component, orders 0..5.
  std::array<double, 6> a{}, b{};
  for (int j = 0; j <= 5; ++j) {
    a[j] = normal_raw_moment(j, t.mu1, t.v1);
    b[j] = normal_raw_moment(j, t.mu2, t.v2);
  }
  a[0] = b[0] = 1.0;
  for (int j = 1; j <= 5; ++j) {
    const int row = j - 1;
    r(row) = t.p * a[j] + (1.0 - t.p) * b[j] - target(row);
    J(row, 0) = (a[j] - b[j]) * t.p * (1.0 - t.p);
    J(row, 1) = t.p * j * a[j - 1];
    J(row, 2) = t.p * 0.5 * j * (j - 1) * (j >= 2 ? a[j - 2] : 0.0) * t.v1;
    J(row, 3) = (1.0 - t.p) * j * b[j - 1];
    J(row, 4) = (1.0 - t.p) * 0.5 * j * (j - 1) * (j >= 2 ? b[j - 2] : 0.0) * t.v2;
  }
}

/// Levenberg-Marquardt on the five moment equations.
std::optional<Vec5> solve_moments(Vec5 u, const Vec5& target) {
  Vec5 r;
  Mat5 J;
  moments_and_jacobian(u, target, r, J);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int iter = 0; iter < 500 && cost > 1e-30; ++iter) {
    const Mat5 JtJ = J.transpose() * J;
    const Vec5 g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Mat5 A = JtJ;
      A.diagonal() += lambda * (JtJ.diagonal().array() + 1e-12).matrix();
      const Vec5 step = A.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Vec5 trial = u + step;
      Vec5 rt;
      Mat5 Jt;
      moments_and_jacobian(trial, target, rt, Jt);
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct < cost) {
        u = trial;
        r = rt;
        J = Jt;
        cost = ct;
        lambda = std::max(lambda / 3.0, 1e-15);
        improved = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!improved) break;
  }
  if (!u.allFinite()) return std::nullopt;
  return u;
}

}  // namespace

FastFitResult fast_fit_two(const DistributionSpec& spec, const EmConfig& cfg) {
  cfg.validate();
  const Moments mo = moments(spec, 5, cfg.quadrature);
  const double mean = mo.mean();
  const double var = mo.variance();
  if (!(var > 0.0)) throw DegenerateError("the input distribution has zero variance");
  const double sd = std::sqrt(var);
  // Standardised raw moments are the standardised central moments.
  Vec5 target;
  target(0) = 0.0;
  target(1) = 1.0;
  for (int j = 3; j <= 5; ++j) target(j - 1) = mo.central[j - 1] / std::pow(sd, j);

  std::optional<double> m6;
  try {
    const Moments m = moments(spec, 6, cfg.quadrature);
    m6 = m.central[5] / std::pow(sd, 6);
  } catch (const Error&) {
    m6.reset();
  }

  const double floor_std = cfg.var_floor_rel;
  struct Candidate {
    TwoParams t;
    double resid;
    double score;
  };
  std::vector<Candidate> found;
  for (double p : {0.5, 0.3, 0.7, 0.15, 0.85}) {
    for (double delta : {0.3, 0.8, 1.3}) {
      const double mu1 = -delta * std::sqrt((1.0 - p) / p);
      const double mu2 = delta * std::sqrt(p / (1.0 - p));
      const double v = std::max(1.0 - delta * delta, 0.1);
      Vec5 u;
      u << std::log(p / (1.0 - p)), mu1, std::log(v), mu2, std::log(v);
      const auto sol = solve_moments(u, target);
      if (!sol) continue;
      Vec5 r;
      Mat5 J;
      moments_and_jacobian(*sol, target, r, J);
      double resid = 0.0;
      for (int j = 0; j < 5; ++j) {
        resid = std::max(resid, std::abs(r(j)) / std::max(1.0, std::abs(target(j))));
      }
      const TwoParams t = decode(*sol);
      if (!(resid <= 1e-8) || !(t.v1 >= floor_std) || !(t.v2 >= floor_std) ||
          !(t.p > 1e-9 && t.p < 1.0 - 1e-9)) {
        continue;
      }
      double score = 0.0;
      if (m6) {
        const double six = t.p * normal_raw_moment(6, t.mu1, t.v1) +
                           (1.0 - t.p) * normal_raw_moment(6, t.mu2, t.v2);
        score = std::abs(six - *m6);
      }
      found.push_back({t, resid, score});
    }
  }
  if (found.empty()) {
    FitReport em = em_fit(spec, 2, cfg);
    add_flag(em.flags, "fast_fit_fallback");
    FastFitResult out{em.mixture, true, kInf, std::move(em)};
    return out;
  }
  const Candidate& best = *std::min_element(
      found.begin(), found.end(), [](const Candidate& x, const Candidate& y) {
        return x.score < y.score || (x.score == y.score && x.resid < y.resid);
      });
  const TwoParams& t = best.t;
  std::vector<Component> comps{{t.p, mean + sd * t.mu1, var * t.v1},
                               {1.0 - t.p, mean + sd * t.mu2, var * t.v2}};
  if (comps[0].mean > comps[1].mean) std::swap(comps[0], comps[1]);
  return FastFitResult{GaussianMixture(std::move(comps), cfg.var_floor_rel * var), false,
                       best.resid, std::nullopt};
}

}  // namespace mogfit
