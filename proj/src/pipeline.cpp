#include "mogfit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mogfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxGrid = 100000;
constexpr int kDefaultGrid = 201;

void add_flag(std::vector<std::string>& flags, const std::string& f) {
  if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
}

template <class F>
std::optional<double> maybe(F&& f) {
  try {
    const double v = f();
    if (std::isfinite(v)) return v;
  } catch (const Error&) {
  }
  return std::nullopt;
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

const Json* find(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

int positive_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 1 ||
      v.get<long long>() > std::numeric_limits<int>::max()) {
    throw ValidationError(where + ": expected a positive integer");
  }
  return v.get<int>();
}

double real(const Json& v, const std::string& where) {
  if (!v.is_number()) throw ValidationError(where + ": expected a number");
  return v.get<double>();
}

FitReport fast_fit_report(const DistributionSpec& y, const EmConfig& cfg, double* moment_residual) {
  FastFitResult fast = fast_fit_two(y, cfg);
  *moment_residual = fast.moment_residual;
  if (fast.fallback) {
    FitReport rep = std::move(*fast.em);
    add_flag(rep.flags, "fast_fit");
    return rep;
  }
  const double d0 = mixture_cross_term(y, fast.mixture, cfg.quadrature);
  FitReport rep{fast.mixture, {d0}, std::nullopt, 0, true, 0.0, {"fast_fit"}, std::nullopt};
  rep.fixed_point_residual =
      fixed_point_residual(y, fast.mixture, fast.mixture.var_floor(), cfg.quadrature);
  if (atoms(y).empty()) rep.relative_entropy = maybe([&] { return d0 - entropy(y, cfg.quadrature); });
  return rep;
}

}  // namespace

void PipelineRequest::validate() const {
  em_cfg.validate();
  power.validate();
  if (fit == FitMode::em && m < 1) throw ValidationError("mixture size must be at least 1");
  if (fit == FitMode::size_search) {
    if (!search) {
      throw ValidationError("size search needs k and n, or kn_ratio");
    }
    search->validate();
  }
  if (bounds && (!std::isfinite(bounds->lo) || !(bounds->hi > bounds->lo))) {
    throw ValidationError("bounds need a finite lower bound below the upper bound");
  }
}

PipelineRequest request_from_json(const Json& j, const QuadratureConfig& quadrature) {
  return in_stage("request", [&] {
    if (!j.is_object()) throw ValidationError("request: expected an object");
    const Json* spec = find(j, "spec");
    if (!spec) throw ValidationError("request: missing field \"spec\"");
    PipelineRequest req(spec_from_json(*spec));

    if (const Json* b = find(j, "bounds")) req.bounds = bounds_from_json(*b);

    if (const Json* t = find(j, "transform")) {
      if (t->is_string()) {
        const std::string mode = t->get<std::string>();
        if (mode == "none") {
          req.transform = TransformMode::none;
        } else if (mode == "auto") {
          req.transform = TransformMode::automatic;
        } else {
          throw ValidationError("transform: expected \"none\", \"auto\" or a chain, got \"" +
                                mode + "\"");
        }
      } else if (t->is_object()) {
        const Json* c = find(*t, "chain");
        req.transform = TransformMode::explicit_chain;
        req.chain = chain_from_json(c ? *c : *t);
      } else {
        throw ValidationError("transform: expected \"none\", \"auto\" or a chain");
      }
    }

    EmConfig em;
    em.quadrature = quadrature;
    if (const Json* e = find(j, "em_cfg")) em = em_config_from_json(*e, em);
    if (const Json* s = find(j, "seed")) {
      if (!s->is_number_integer() || s->get<long long>() < 0) {
        throw ValidationError("seed: expected a nonnegative integer");
      }
      em.init.seed = s->get<std::uint64_t>();
    }
    req.em_cfg = em;

    if (const Json* p = find(j, "power_search")) req.power = power_search_from_json(*p, req.power);
    if (const Json* r = find(j, "round_power")) {
      if (!r->is_boolean()) throw ValidationError("round_power: expected true or false");
      req.round_power = r->get<bool>();
    }

    const Json* fit = find(j, "fit");
    if (!fit || !fit->is_object()) throw ValidationError("request: missing object \"fit\"");
    const Json* mode = find(*fit, "mode");
    if (!mode || !mode->is_string()) throw ValidationError("fit: missing string \"mode\"");
    const std::string name = mode->get<std::string>();
    if (name == "em") {
      req.fit = FitMode::em;
      const Json* m = find(*fit, "m");
      if (!m) throw ValidationError("fit: em needs \"m\"");
      req.m = positive_int(*m, "fit.m");
    } else if (name == "fast_two") {
      req.fit = FitMode::fast_two;
    } else if (name == "size_search") {
      req.fit = FitMode::size_search;
      const Json* k = find(*fit, "k");
      const Json* n = find(*fit, "n");
      const Json* kn = find(*fit, "kn_ratio");
      if (kn && (k || n)) throw ValidationError("fit: give either k and n or kn_ratio, not both");
      if (kn) {
        req.search = SizeSearchConfig::from_ratio(real(*kn, "fit.kn_ratio"));
      } else if (k && n) {
        req.search = SizeSearchConfig(real(*k, "fit.k"), real(*n, "fit.n"));
      } else {
        throw ValidationError("fit: size search needs k and n, or kn_ratio");
      }
      if (const Json* v = find(*fit, "max_m")) req.search->max_m = positive_int(*v, "fit.max_m");
      if (const Json* v = find(*fit, "lookahead")) {
        if (!v->is_number_integer() || v->get<long long>() < 0 || v->get<long long>() > 100) {
          throw ValidationError("fit.lookahead: expected a nonnegative integer");
        }
        req.search->lookahead = v->get<int>();
      }
      if (const Json* v = find(*fit, "geometric_prior_ratio")) {
        req.search->geometric_prior_ratio = real(*v, "fit.geometric_prior_ratio");
      }
    } else {
      throw ValidationError("fit: unknown mode \"" + name +
                            "\" (expected em, fast_two or size_search)");
    }
    req.validate();
    return req;
  });
}

std::optional<double> PipelineResult::diagnostic(const std::string& name) const {
  for (const Diagnostic& d : diagnostics) {
    if (d.name == name) return d.value;
  }
  return std::nullopt;
}

Json to_json(const PipelineResult& r) {
  Json reports = Json::object();
  for (const auto& [m, rep] : r.fit_reports) reports[std::to_string(m)] = to_json(rep);
  Json diags = Json::array();
  for (const Diagnostic& d : r.diagnostics) {
    diags.push_back({{"name", d.name}, {"value", optional_number(d.value)}});
  }
  return {{"chain_used", to_json(r.chain_used)},
          {"p_star", optional_number(r.p_star)},
          {"p_searched", optional_number(r.p_searched)},
          {"fit_reports", reports},
          {"chosen_m", r.chosen_m ? Json(*r.chosen_m) : Json(nullptr)},
          {"diagnostics", diags},
          {"flags", r.flags}};
}

AutoTransform auto_transform(const DistributionSpec& spec, const std::optional<Bounds>& bounds,
                             bool round, const PowerSearchConfig& power,
                             const QuadratureConfig& cfg) {
  AutoTransform out;
  out.precondition = in_stage("precondition", [&] { return precondition(spec, bounds); });
  const DistributionSpec x0 = in_stage("pushforward", [&] { return pushforward(spec, out.precondition); });
  out.search = in_stage("optimal_power", [&] { return optimal_power(x0, power, cfg); });
  out.p = round ? round_power(out.search.p_star, power) : out.search.p_star;
  out.chain = out.precondition.then(BoxCox{out.p, out.p != out.search.p_star});
  return out;
}

PipelineResult run_pipeline(const PipelineRequest& req) {
  in_stage("request", [&] {
    req.validate();
    return 0;
  });
  const QuadratureConfig& q = req.em_cfg.quadrature;
  PipelineResult res;

  if (req.transform == TransformMode::automatic) {
    const AutoTransform at = auto_transform(req.spec, req.bounds, req.round_power, req.power, q);
    res.chain_used = at.chain;
    res.p_star = at.p;
    res.p_searched = at.search.p_star;
  } else if (req.transform == TransformMode::explicit_chain) {
    res.chain_used = req.chain;
  }

  const DistributionSpec y =
      in_stage("pushforward", [&] { return pushforward(req.spec, res.chain_used); });

  // Diagnostics are informative only: undefined values become null.
  const bool atom_free = atoms(req.spec).empty();
  res.diagnostics.push_back(
      {"entropy", atom_free ? maybe([&] { return entropy(req.spec, q); }) : std::nullopt});
  res.diagnostics.push_back({"gap_before", atom_free ? maybe([&] {
                                             return transform_gap(req.spec, {}, q);
                                           })
                                                     : std::nullopt});
  res.diagnostics.push_back({"gap_after", atom_free ? maybe([&] {
                                            return transform_gap(req.spec, res.chain_used, q);
                                          })
                                                    : std::nullopt});

  in_stage("fit", [&] {
    switch (req.fit) {
      case FitMode::em:
        res.fit_reports.emplace(req.m, em_fit(y, req.m, req.em_cfg));
        res.chosen_m = req.m;
        break;
      case FitMode::fast_two: {
        double resid = 0.0;
        res.fit_reports.emplace(2, fast_fit_report(y, req.em_cfg, &resid));
        res.chosen_m = 2;
        res.diagnostics.push_back(
            {"moment_residual", std::isfinite(resid) ? std::optional(resid) : std::nullopt});
        break;
      }
      case FitMode::size_search: {
        SizeSearchResult s = select_size(y, req.em_cfg, *req.search);
        res.fit_reports = std::move(s.reports);
        res.chosen_m = s.chosen_m;
        res.flags = std::move(s.flags);
        break;
      }
    }
    return 0;
  });
  return res;
}

Json transform_summary(const DistributionSpec& spec, const std::optional<Bounds>& bounds,
                       bool round, const PowerSearchConfig& power, const QuadratureConfig& cfg) {
  const AutoTransform at = auto_transform(spec, bounds, round, power, cfg);
  const bool atom_free = atoms(spec).empty();
  auto gap = [&](const TransformChain& c) {
    return atom_free ? maybe([&] { return transform_gap(spec, c, cfg); }) : std::nullopt;
  };
  return {{"precondition", to_json(at.precondition)},
          {"chain", to_json(at.chain)},
          {"p_star", at.search.p_star},
          {"p_used", at.p},
          {"objective", at.search.objective},
          {"entropy", optional_number(atom_free ? maybe([&] { return entropy(spec, cfg); })
                                                : std::nullopt)},
          {"gap_before", optional_number(gap({}))},
          {"gap_after", optional_number(gap(at.chain))}};
}

Json analyze(const DistributionSpec& spec, int max_order, const QuadratureConfig& cfg) {
  if (max_order < 2) throw ValidationError("max_order must be at least 2");
  Json notes = Json::array();
  auto note = [&](const std::string& what, const Error& e) {
    notes.push_back(what + ": " + e.what());
  };
  Json out = {{"atom_mass", total_atom_mass(spec)}};

  std::optional<Moments> mo;
  for (int r = max_order; r >= 1 && !mo; --r) {
    try {
      mo = moments(spec, r, cfg);
    } catch (const Error& e) {
      note("moments up to order " + std::to_string(r), e);
    }
  }
  out["moments"] = mo ? Json{{"raw", mo->raw}, {"central", mo->central}} : Json(nullptr);
  out["mean"] = mo ? Json(mo->mean()) : Json(nullptr);
  out["variance"] = mo && mo->central.size() >= 2 ? Json(mo->variance()) : Json(nullptr);

  out["entropy"] = nullptr;
  out["gap_to_gaussian"] = nullptr;
  if (atoms(spec).empty()) {
    try {
      out["entropy"] = entropy(spec, cfg);
    } catch (const Error& e) {
      note("entropy", e);
    }
    try {
      out["gap_to_gaussian"] = transform_gap(spec, {}, cfg);
    } catch (const Error& e) {
      note("gap_to_gaussian", e);
    }
  } else {
    notes.push_back("entropy: undefined for a distribution with atoms");
  }
  try {
    out["gaussian"] = to_json(moment_match_gaussian(spec, cfg));
  } catch (const Error& e) {
    out["gaussian"] = nullptr;
    note("gaussian", e);
  }

  Json qs = Json::object();
  for (double level : {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99}) {
    std::ostringstream key;
    key << level;
    qs[key.str()] = quantile(spec, level);
  }
  out["quantiles"] = qs;
  const std::vector<Atom> all = atoms(spec);
  double lo = kInf;
  double hi = -kInf;
  if (total_atom_mass(spec) < 1.0 - 1e-12) {
    const Support s = continuous_support(spec);
    lo = s.lo;
    hi = s.hi;
  }
  for (const Atom& a : all) {
    lo = std::min(lo, a.x);
    hi = std::max(hi, a.x);
  }
  // Infinite ends serialise as null.
  out["support"] = {lo, hi};
  out["notes"] = notes;
  return out;
}

Json assess_spline(const Json& body) {
  return in_stage("spline", [&] {
    if (!body.is_object()) throw ValidationError("spline: expected an object");
    Json spec = body;
    spec["type"] = "spline_cdf";
    return to_json(spec_from_json(spec));
  });
}

Json evaluate(const Json& body, const QuadratureConfig& cfg) {
  struct Parsed {
    DistributionSpec spec;
    std::vector<double> grid;
    TransformChain chain;
    std::optional<GaussianMixture> mixture;
  };
  const Parsed in = in_stage("request", [&] {
    if (!body.is_object()) throw ValidationError("evaluate: expected an object");
    const Json* s = find(body, "spec");
    if (!s) throw ValidationError("evaluate: missing field \"spec\"");
    Parsed p{spec_from_json(*s), {}, {}, std::nullopt};
    if (const Json* c = find(body, "chain")) p.chain = chain_from_json(*c);
    if (const Json* m = find(body, "mixture")) p.mixture = mixture_from_json(*m);

    const Json* g = find(body, "grid");
    if (g && g->is_array()) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        p.grid.push_back(real((*g)[i], "grid[" + std::to_string(i) + "]"));
      }
    } else {
      if (g && !g->is_object()) throw ValidationError("grid: expected an array or {lo, hi, n}");
      int n = kDefaultGrid;
      double lo = 0.0;
      double hi = 0.0;
      const Json* glo = g ? find(*g, "lo") : nullptr;
      const Json* ghi = g ? find(*g, "hi") : nullptr;
      if (g) {
        if (const Json* v = find(*g, "n")) n = positive_int(*v, "grid.n");
      }
      if (glo && ghi) {
        lo = real(*glo, "grid.lo");
        hi = real(*ghi, "grid.hi");
      } else {
        lo = quantile(p.spec, 1e-3);
        hi = quantile(p.spec, 1.0 - 1e-3);
        if (total_atom_mass(p.spec) < 1.0 - 1e-12) {
          const Support sup = continuous_support(p.spec);
          if (std::isfinite(sup.lo)) lo = std::min(lo, sup.lo);
          if (std::isfinite(sup.hi)) hi = std::max(hi, sup.hi);
        }
        for (const Atom& a : atoms(p.spec)) {
          lo = std::min(lo, a.x);
          hi = std::max(hi, a.x);
        }
        if (!(hi > lo)) {
          lo -= 1.0;
          hi += 1.0;
        }
      }
      if (static_cast<std::size_t>(n) > kMaxGrid) throw ValidationError("grid: too many points");
      if (n == 1) {
        p.grid.push_back(lo);
      } else {
        for (int i = 0; i < n; ++i) p.grid.push_back(lo + (hi - lo) * i / (n - 1));
      }
    }
    if (p.grid.empty()) throw ValidationError("grid: no points");
    if (p.grid.size() > kMaxGrid) throw ValidationError("grid: too many points");
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
      if (!std::isfinite(p.grid[i])) throw ValidationError("grid: points must be finite");
      if (i > 0 && p.grid[i] < p.grid[i - 1]) {
        throw ValidationError("grid: points must be nondecreasing");
      }
    }
    return p;
  });

  return in_stage("evaluate", [&] {
    const std::vector<double>& xs = in.grid;
    std::vector<double> F;
    std::vector<double> f;
    for (double x : xs) {
      F.push_back(std::clamp(cdf(in.spec, x), 0.0, 1.0));
      f.push_back(std::max(0.0, density(in.spec, x)));
    }
    Json out = {{"x", xs}, {"cdf", F}, {"density", f}};

    auto overlay = [&](const GaussianMixture& gm, const TransformChain& chain) {
      const Interval dom = chain.domain();
      std::vector<double> G;
      std::vector<double> g;
      for (double x : xs) {
        if (!chain.in_domain(x)) {
          G.push_back(x <= dom.lo ? 0.0 : 1.0);
          g.push_back(0.0);
          continue;
        }
        const double y = chain.apply(x);
        G.push_back(std::clamp(mixture_cdf(gm, y), 0.0, 1.0));
        const double dens = mixture_density(gm, y) * chain.derivative(x);
        g.push_back(std::isfinite(dens) ? std::max(0.0, dens) : 0.0);
      }
      // Guard against rounding making the mapped CDF dip.
      for (std::size_t i = 1; i < G.size(); ++i) G[i] = std::max(G[i], G[i - 1]);
      return Json{{"cdf", G}, {"density", g}, {"mixture", to_json(gm)}};
    };

    try {
      out["gaussian"] = overlay(moment_match_gaussian(in.spec, cfg), {});
    } catch (const DivergenceError&) {
      out["gaussian"] = nullptr;
    } catch (const DegenerateError&) {
      out["gaussian"] = nullptr;
    }
    out["mixture"] = in.mixture ? overlay(*in.mixture, in.chain) : Json(nullptr);
    return out;
  });
}

}  // namespace mogfit
