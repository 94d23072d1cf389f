#include "mogfit/json_io.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mogfit/error.hpp"

namespace mogfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) bad(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) bad(where, std::string("missing field \"") + key + "\"");
  return *it;
}

const Json* optional_field(const Json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

double as_number(const Json& v, const std::string& where) {
  if (!v.is_number()) bad(where, "expected a number");
  return v.get<double>();
}

double number(const Json& j, const char* key, const std::string& where) {
  return as_number(field(j, key, where), where + "." + key);
}

long long as_integer(const Json& v, const std::string& where) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) {
      return static_cast<long long>(d);
    }
  }
  bad(where, "expected an integer");
}

std::string as_string(const Json& v, const std::string& where) {
  if (!v.is_string()) bad(where, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const Json& v, const std::string& where) {
  if (!v.is_boolean()) bad(where, "expected true or false");
  return v.get<bool>();
}

const Json& as_array(const Json& v, const std::string& where) {
  if (!v.is_array()) bad(where, "expected an array");
  return v;
}

std::vector<double> number_list(const Json& v, const std::string& where) {
  std::vector<double> out;
  for (std::size_t i = 0; i < as_array(v, where).size(); ++i) {
    out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// Library errors raised while building a value are validation problems of
// the document; prefix them with the location.
template <class F>
auto located(const std::string& where, F&& build) {
  try {
    return build();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind(where, 0) == 0) throw;
    throw ValidationError(where + ": " + msg);
  }
}

Json step_to_json(const TransformStep& step) {
  return std::visit(
      [](const auto& s) -> Json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Affine>) {
          return {{"kind", "affine"}, {"scale", s.scale}, {"shift", s.shift}};
        } else if constexpr (std::is_same_v<T, ScaledOdds>) {
          return {{"kind", "scaled_odds"}, {"a", s.a}, {"b", s.b}};
        } else {
          return {{"kind", "box_cox"}, {"p", s.p}, {"rounded", s.rounded}};
        }
      },
      step);
}

TransformStep step_from_json(const Json& j, const std::string& where) {
  const std::string kind = as_string(field(j, "kind", where), where + ".kind");
  TransformStep step;
  if (kind == "affine") {
    step = Affine{number(j, "scale", where), number(j, "shift", where)};
  } else if (kind == "scaled_odds") {
    step = ScaledOdds{number(j, "a", where), number(j, "b", where)};
  } else if (kind == "box_cox") {
    BoxCox b{number(j, "p", where), false};
    if (const Json* r = optional_field(j, "rounded")) b.rounded = as_bool(*r, where + ".rounded");
    step = b;
  } else {
    bad(where + ".kind", "unknown step kind \"" + kind + "\"");
  }
  located(where, [&] {
    validate_step(step);
    return 0;
  });
  return step;
}

Json atoms_to_json(const std::vector<Atom>& atoms) {
  Json out = Json::array();
  for (const Atom& a : atoms) out.push_back({{"x", a.x}, {"mass", a.mass}});
  return out;
}

DistributionSpec spec_from_json_at(const Json& j, const std::string& where);

DistributionSpec::Variant variant_from_json(const Json& j, const std::string& type,
                                            const std::string& where) {
  if (type == "analytic") {
    const std::string fam = as_string(field(j, "family", where), where + ".family");
    std::vector<double> params = number_list(field(j, "params", where), where + ".params");
    return located(where, [&] {
      return DistributionSpec::Variant(Analytic{family_from_string(fam), std::move(params)});
    });
  }
  if (type == "spline_cdf") {
    const Json& pts = as_array(field(j, "points", where), where + ".points");
    std::vector<CdfPoint> points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string at = where + ".points[" + std::to_string(i) + "]";
      const Json& p = pts[i];
      if (p.is_array()) {
        if (p.size() != 2) bad(at, "expected [x, F]");
        points.push_back({as_number(p[0], at), as_number(p[1], at)});
      } else {
        points.push_back({number(p, "x", at), number(p, "F", at)});
      }
    }
    TailPolicy policy = TailPolicy::bounded;
    if (const Json* t = optional_field(j, "tail_policy")) {
      const std::string name = as_string(*t, where + ".tail_policy");
      policy = located(where, [&] { return tail_policy_from_string(name); });
    }
    int n_equiv = static_cast<int>(points.size());
    if (const Json* n = optional_field(j, "n_equiv")) {
      const long long v = as_integer(*n, where + ".n_equiv");
      if (v < 1 || v > std::numeric_limits<int>::max()) {
        bad(where + ".n_equiv", "must be a positive integer");
      }
      n_equiv = static_cast<int>(v);
    }
    return located(where, [&] {
      return DistributionSpec::Variant(SplineCdf(std::move(points), policy, n_equiv));
    });
  }
  if (type == "empirical") {
    std::vector<double> values = number_list(field(j, "values", where), where + ".values");
    std::vector<double> weights;
    if (const Json* w = optional_field(j, "weights")) weights = number_list(*w, where + ".weights");
    return located(where, [&] {
      return DistributionSpec::Variant(Empirical(std::move(values), std::move(weights)));
    });
  }
  if (type == "mixture") {
    // Either nested {"mixture": {"components": ...}} or inline components.
    const Json* m = optional_field(j, "mixture");
    return mixture_from_json(m ? *m : j);
  }
  if (type == "pushforward") {
    auto base = std::make_shared<const DistributionSpec>(
        spec_from_json_at(field(j, "base", where), where + ".base"));
    TransformChain chain = chain_from_json(field(j, "chain", where));
    return Pushforward{std::move(base), std::move(chain)};
  }
  bad(where + ".type", "unknown distribution type \"" + type + "\"");
}

DistributionSpec spec_from_json_at(const Json& j, const std::string& where) {
  const std::string type = as_string(field(j, "type", where), where + ".type");
  DistributionSpec::Variant v = variant_from_json(j, type, where);
  std::vector<Atom> atoms;
  if (const Json* a = optional_field(j, "atoms")) {
    for (std::size_t i = 0; i < as_array(*a, where + ".atoms").size(); ++i) {
      const std::string at = where + ".atoms[" + std::to_string(i) + "]";
      atoms.push_back({number((*a)[i], "x", at), number((*a)[i], "mass", at)});
    }
  }
  return located(where, [&] { return DistributionSpec(std::move(v), std::move(atoms)); });
}

}  // namespace

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    // Drop the library's "[json.exception.parse_error.101] parse error at ...:" prefix.
    const auto colon = what.find(": ");
    if (colon != std::string::npos) what = what.substr(colon + 2);
    std::ostringstream os;
    os << "malformed JSON at line " << line << ", column " << column << ": " << what;
    throw ValidationError(os.str());
  }
}

std::string dump_canonical(const Json& j) { return j.dump() + "\n"; }

Json to_json(const DistributionSpec& spec) {
  Json out = std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Analytic>) {
          return {{"type", "analytic"}, {"family", to_string(v.family)}, {"params", v.params}};
        } else if constexpr (std::is_same_v<T, SplineCdf>) {
          Json pts = Json::array();
          for (const CdfPoint& p : v.points()) pts.push_back({{"x", p.x}, {"F", p.F}});
          return {{"type", "spline_cdf"},
                  {"points", pts},
                  {"tail_policy", to_string(v.tail_policy())},
                  {"n_equiv", v.n_equiv()}};
        } else if constexpr (std::is_same_v<T, Empirical>) {
          return {{"type", "empirical"}, {"values", v.values()}, {"weights", v.weights()}};
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          return {{"type", "mixture"}, {"mixture", to_json(v)}};
        } else {
          return {{"type", "pushforward"}, {"base", to_json(*v.base)}, {"chain", to_json(v.chain)}};
        }
      },
      spec.variant());
  out["atoms"] = atoms_to_json(spec.extra_atoms());
  return out;
}

DistributionSpec spec_from_json(const Json& j) { return spec_from_json_at(j, "spec"); }

Json to_json(const GaussianMixture& gm) {
  Json comps = Json::array();
  for (const Component& c : gm.components()) {
    comps.push_back({{"p", c.weight}, {"mu", c.mean}, {"var", c.var}});
  }
  return {{"components", comps}, {"var_floor", gm.var_floor()}};
}

GaussianMixture mixture_from_json(const Json& j) {
  const std::string where = "mixture";
  const Json& comps = as_array(field(j, "components", where), where + ".components");
  std::vector<Component> out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string at = where + ".components[" + std::to_string(i) + "]";
    out.push_back({number(comps[i], "p", at), number(comps[i], "mu", at),
                   number(comps[i], "var", at)});
  }
  std::optional<double> floor;
  if (const Json* f = optional_field(j, "var_floor")) floor = as_number(*f, where + ".var_floor");
  return located(where, [&] { return GaussianMixture(std::move(out), floor); });
}

Json to_json(const TransformChain& chain) {
  Json steps = Json::array();
  for (const TransformStep& s : chain.steps()) steps.push_back(step_to_json(s));
  return {{"steps", steps}};
}

TransformChain chain_from_json(const Json& j) {
  const Json& steps = as_array(field(j, "steps", "chain"), "chain.steps");
  std::vector<TransformStep> out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out.push_back(step_from_json(steps[i], "chain.steps[" + std::to_string(i) + "]"));
  }
  return TransformChain(std::move(out));
}

Json to_json(const FitReport& r) {
  Json out = {{"mixture", to_json(r.mixture)},
              {"d0_trace", r.d0_trace},
              {"relative_entropy", nullptr},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"fixed_point_residual", r.fixed_point_residual},
              {"flags", r.flags}};
  if (r.relative_entropy) out["relative_entropy"] = *r.relative_entropy;
  if (r.error) out["error"] = *r.error;
  return out;
}

FitReport report_from_json(const Json& j) {
  const std::string where = "report";
  FitReport r{mixture_from_json(field(j, "mixture", where)), {}, std::nullopt, 0, false, 0.0,
              {}, std::nullopt};
  r.d0_trace = number_list(field(j, "d0_trace", where), where + ".d0_trace");
  if (const Json* e = optional_field(j, "relative_entropy")) {
    r.relative_entropy = as_number(*e, where + ".relative_entropy");
  }
  r.iterations = static_cast<int>(as_integer(field(j, "iterations", where), where + ".iterations"));
  r.converged = as_bool(field(j, "converged", where), where + ".converged");
  r.fixed_point_residual = number(j, "fixed_point_residual", where);
  for (const Json& f : as_array(field(j, "flags", where), where + ".flags")) {
    r.flags.push_back(as_string(f, where + ".flags"));
  }
  if (const Json* e = optional_field(j, "error")) r.error = as_string(*e, where + ".error");
  return r;
}

Json to_json(const QuadratureConfig& cfg) {
  return {{"abs_tol", cfg.abs_tol},
          {"rel_tol", cfg.rel_tol},
          {"tail_mass_cutoff", cfg.tail_mass_cutoff},
          {"max_subdivisions", cfg.max_subdivisions}};
}

QuadratureConfig quadrature_from_json(const Json& j, QuadratureConfig base) {
  const std::string where = "quadrature";
  if (!j.is_object()) bad(where, "expected an object");
  if (const Json* v = optional_field(j, "abs_tol")) base.abs_tol = as_number(*v, where + ".abs_tol");
  if (const Json* v = optional_field(j, "rel_tol")) base.rel_tol = as_number(*v, where + ".rel_tol");
  if (const Json* v = optional_field(j, "tail_mass_cutoff")) {
    base.tail_mass_cutoff = as_number(*v, where + ".tail_mass_cutoff");
  }
  if (const Json* v = optional_field(j, "max_subdivisions")) {
    base.max_subdivisions = static_cast<int>(as_integer(*v, where + ".max_subdivisions"));
  }
  located(where, [&] {
    base.validate();
    return 0;
  });
  return base;
}

Json to_json(const EmConfig& cfg) {
  Json init = {{"strategy", to_string(cfg.init.kind)}, {"seed", cfg.init.seed}};
  if (cfg.init.mixture) init["mixture"] = to_json(*cfg.init.mixture);
  return {{"max_iterations", cfg.max_iterations},
          {"convergence_tol", cfg.convergence_tol},
          {"residual_tol", cfg.residual_tol},
          {"init", init},
          {"var_floor_rel", cfg.var_floor_rel},
          {"aitken", cfg.aitken},
          {"aitken_window", cfg.aitken_window},
          {"quadrature", to_json(cfg.quadrature)}};
}

EmConfig em_config_from_json(const Json& j, EmConfig base) {
  const std::string where = "em_cfg";
  if (!j.is_object()) bad(where, "expected an object");
  if (const Json* v = optional_field(j, "max_iterations")) {
    base.max_iterations = static_cast<int>(as_integer(*v, where + ".max_iterations"));
  }
  if (const Json* v = optional_field(j, "convergence_tol")) {
    base.convergence_tol = as_number(*v, where + ".convergence_tol");
  }
  if (const Json* v = optional_field(j, "residual_tol")) {
    base.residual_tol = as_number(*v, where + ".residual_tol");
  }
  if (const Json* v = optional_field(j, "var_floor_rel")) {
    base.var_floor_rel = as_number(*v, where + ".var_floor_rel");
  }
  if (const Json* v = optional_field(j, "aitken")) base.aitken = as_bool(*v, where + ".aitken");
  if (const Json* v = optional_field(j, "aitken_window")) {
    base.aitken_window = static_cast<int>(as_integer(*v, where + ".aitken_window"));
  }
  if (const Json* q = optional_field(j, "quadrature")) {
    base.quadrature = quadrature_from_json(*q, base.quadrature);
  }
  if (const Json* init = optional_field(j, "init")) {
    const std::string at = where + ".init";
    if (const Json* s = optional_field(*init, "strategy")) {
      const std::string name = as_string(*s, at + ".strategy");
      base.init.kind = located(at, [&] { return init_kind_from_string(name); });
    }
    if (const Json* s = optional_field(*init, "seed")) {
      const long long seed = as_integer(*s, at + ".seed");
      if (seed < 0) bad(at + ".seed", "must be nonnegative");
      base.init.seed = static_cast<std::uint64_t>(seed);
    }
    if (const Json* m = optional_field(*init, "mixture")) base.init.mixture = mixture_from_json(*m);
    if (base.init.kind == InitStrategy::Kind::user && !base.init.mixture) {
      bad(at, "the user strategy needs a mixture");
    }
  }
  located(where, [&] {
    base.validate();
    return 0;
  });
  return base;
}

PowerSearchConfig power_search_from_json(const Json& j, PowerSearchConfig base) {
  const std::string where = "power_search";
  if (!j.is_object()) bad(where, "expected an object");
  if (const Json* v = optional_field(j, "p_lo")) base.p_lo = as_number(*v, where + ".p_lo");
  if (const Json* v = optional_field(j, "p_hi")) base.p_hi = as_number(*v, where + ".p_hi");
  if (const Json* v = optional_field(j, "tolerance")) {
    base.tolerance = as_number(*v, where + ".tolerance");
  }
  if (const Json* v = optional_field(j, "rounding_threshold")) {
    base.rounding_threshold = as_number(*v, where + ".rounding_threshold");
  }
  if (const Json* v = optional_field(j, "round_targets")) {
    base.round_targets = number_list(*v, where + ".round_targets");
  }
  located(where, [&] {
    base.validate();
    return 0;
  });
  return base;
}

Bounds bounds_from_json(const Json& j) {
  const std::string where = "bounds";
  if (!j.is_array() || j.size() != 2) bad(where, "expected [lo, hi]");
  auto end = [&](const Json& v, double infinite, const std::string& at) {
    if (v.is_null()) return infinite;
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "+inf") return kInf;
      if (s == "-inf") return -kInf;
      bad(at, "expected a number, null or \"inf\"");
    }
    return as_number(v, at);
  };
  Bounds b{end(j[0], -kInf, where + "[0]"), end(j[1], kInf, where + "[1]")};
  if (!std::isfinite(b.lo)) bad(where, "the lower bound must be finite");
  if (!(b.lo < b.hi)) bad(where, "needs lo < hi");
  if (std::isinf(b.hi) && b.hi < 0) bad(where, "needs lo < hi");
  return b;
}

}  // namespace mogfit
