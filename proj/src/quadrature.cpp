#include "mogfit/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <queue>
#include <string>

#include "mogfit/error.hpp"

namespace mogfit {

void QuadratureConfig::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || !(tail_mass_cutoff > 0.0) ||
      tail_mass_cutoff >= 0.5) {
    throw ValidationError("quadrature tolerances must be strictly positive");
  }
  if (max_subdivisions < 1) {
    throw ValidationError("max_subdivisions must be at least 1");
  }
}

QuadratureConfig QuadratureConfig::from_environment() {
  QuadratureConfig cfg;
  if (const char* env = std::getenv("MOGFIT_QUADRATURE_TOL")) {
    char* end = nullptr;
    double tol = std::strtod(env, &end);
    if (end == env || !(tol > 0.0) || !std::isfinite(tol)) {
      throw ValidationError(std::string("MOGFIT_QUADRATURE_TOL is not a "
                                        "positive number: ") + env);
    }
    cfg.rel_tol = tol;
    cfg.abs_tol = tol / 10.0;
  }
  return cfg;
}

namespace {

constexpr std::size_t kKronrodPoints = 21;

struct Rule {
  // Non-negative Kronrod abscissae; index 0 is the centre.
  std::array<double, kKronrodPoints / 2 + 1> nodes{};
  std::array<double, kKronrodPoints / 2 + 1> kronrod{};
  std::array<double, kKronrodPoints / 2 + 1> gauss{};
};

const Rule& rule() {
  static const Rule r = [] {
    using boost::math::quadrature::gauss;
    using boost::math::quadrature::gauss_kronrod;
    Rule out;
    const auto& xk = gauss_kronrod<double, kKronrodPoints>::abscissa();
    const auto& wk = gauss_kronrod<double, kKronrodPoints>::weights();
    const auto& xg = gauss<double, kKronrodPoints / 2>::abscissa();
    const auto& wg = gauss<double, kKronrodPoints / 2>::weights();
    for (std::size_t i = 0; i < xk.size(); ++i) {
      out.nodes[i] = xk[i];
      out.kronrod[i] = wk[i];
      for (std::size_t j = 0; j < xg.size(); ++j) {
        if (std::abs(xg[j] - xk[i]) < 1e-14) out.gauss[i] = wg[j];
      }
    }
    return out;
  }();
  return r;
}

struct Panel {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> value;
  std::vector<double> error;
  double priority = 0.0;
};

struct PanelOrder {
  bool operator()(const Panel& l, const Panel& r) const {
    return l.priority < r.priority;
  }
};

class Engine {
 public:
  Engine(std::size_t dim, const VectorIntegrand& f) : dim_(dim), f_(f) {
    buffer_.resize(dim);
    k_.resize(dim);
    g_.resize(dim);
  }

  Panel evaluate(double a, double b) {
    const Rule& r = rule();
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    std::fill(k_.begin(), k_.end(), 0.0);
    std::fill(g_.begin(), g_.end(), 0.0);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
      const int sides = (i == 0) ? 1 : 2;
      for (int s = 0; s < sides; ++s) {
        const double x = (s == 0) ? centre + half * r.nodes[i]
                                  : centre - half * r.nodes[i];
        std::fill(buffer_.begin(), buffer_.end(), 0.0);
        f_(x, buffer_);
        ++evaluations_;
        for (std::size_t d = 0; d < dim_; ++d) {
          k_[d] += r.kronrod[i] * buffer_[d];
          g_[d] += r.gauss[i] * buffer_[d];
        }
      }
    }
    Panel p;
    p.a = a;
    p.b = b;
    p.value.resize(dim_);
    p.error.resize(dim_);
    for (std::size_t d = 0; d < dim_; ++d) {
      p.value[d] = k_[d] * half;
      p.error[d] = std::abs((k_[d] - g_[d]) * half);
      if (!std::isfinite(p.value[d])) p.error[d] = 0.0;
    }
    return p;
  }

  int evaluations() const { return evaluations_; }

 private:
  std::size_t dim_;
  const VectorIntegrand& f_;
  std::vector<double> buffer_;
  std::vector<double> k_;
  std::vector<double> g_;
  int evaluations_ = 0;
};

bool splittable(const Panel& p) {
  const double mid = 0.5 * (p.a + p.b);
  return mid > p.a && mid < p.b &&
         (p.b - p.a) > 1e-14 * std::max(std::abs(p.a), std::abs(p.b));
}

}  // namespace

VectorQuadratureResult integrate_vector(std::size_t dim,
                                        const VectorIntegrand& f,
                                        std::span<const double> breakpoints,
                                        const QuadratureConfig& cfg) {
  VectorQuadratureResult out;
  out.value.assign(dim, 0.0);
  out.error.assign(dim, 0.0);
  if (dim == 0 || breakpoints.size() < 2) return out;
  for (double x : breakpoints) {
    if (!std::isfinite(x)) {
      throw ValidationError("quadrature breakpoints must be finite");
    }
  }

  Engine engine(dim, f);
  std::vector<double> total(dim, 0.0);
  std::vector<double> total_err(dim, 0.0);
  std::vector<Panel> frozen;
  std::priority_queue<Panel, std::vector<Panel>, PanelOrder> queue;

  auto tolerance = [&](std::size_t d) {
    return std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total[d]));
  };
  auto score = [&](Panel& p) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      s = std::max(s, p.error[d] / tolerance(d));
    }
    p.priority = s;
  };
  auto finite_total = [&] {
    return std::all_of(total.begin(), total.end(),
                       [](double v) { return std::isfinite(v); });
  };

  std::vector<Panel> initial;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double a = breakpoints[i];
    const double b = breakpoints[i + 1];
    if (!(b > a)) continue;
    Panel p = engine.evaluate(a, b);
    for (std::size_t d = 0; d < dim; ++d) {
      total[d] += p.value[d];
      total_err[d] += p.error[d];
    }
    initial.push_back(std::move(p));
  }
  for (Panel& p : initial) {
    score(p);
    queue.push(std::move(p));
  }

  auto done = [&] {
    for (std::size_t d = 0; d < dim; ++d) {
      if (total_err[d] > tolerance(d)) return false;
    }
    return true;
  };

  int subdivisions = 0;
  while (!queue.empty() && finite_total() && !done()) {
    if (subdivisions >= cfg.max_subdivisions) {
      out.converged = false;
      break;
    }
    Panel worst = queue.top();
    queue.pop();
    if (!splittable(worst)) {
      // Still counted in the totals; the loop ends unconverged if these
      // alone break the tolerance.
      frozen.push_back(std::move(worst));
      continue;
    }
    const double mid = 0.5 * (worst.a + worst.b);
    Panel left = engine.evaluate(worst.a, mid);
    Panel right = engine.evaluate(mid, worst.b);
    for (std::size_t d = 0; d < dim; ++d) {
      total[d] += left.value[d] + right.value[d] - worst.value[d];
      total_err[d] += left.error[d] + right.error[d] - worst.error[d];
    }
    ++subdivisions;
    score(left);
    score(right);
    queue.push(std::move(left));
    queue.push(std::move(right));
    // Rescore periodically: tolerances move as totals settle.
    if (subdivisions % 64 == 0) {
      std::vector<Panel> all;
      all.reserve(queue.size());
      while (!queue.empty()) {
        all.push_back(queue.top());
        queue.pop();
      }
      for (Panel& p : all) {
        score(p);
        queue.push(std::move(p));
      }
    }
  }
  if (queue.empty() && !done()) out.converged = false;

  // Recompute the sum from the panels to limit drift from the running
  // updates above.
  std::fill(total.begin(), total.end(), 0.0);
  std::fill(total_err.begin(), total_err.end(), 0.0);
  std::vector<Panel> remaining = std::move(frozen);
  while (!queue.empty()) {
    remaining.push_back(queue.top());
    queue.pop();
  }
  std::sort(remaining.begin(), remaining.end(),
            [](const Panel& l, const Panel& r) { return l.a < r.a; });
  for (const Panel& p : remaining) {
    for (std::size_t d = 0; d < dim; ++d) {
      total[d] += p.value[d];
      total_err[d] += p.error[d];
    }
  }
  out.value = total;
  out.error = total_err;
  out.evaluations = engine.evaluations();
  return out;
}

QuadratureResult integrate(const ScalarIntegrand& f,
                           std::span<const double> breakpoints,
                           const QuadratureConfig& cfg) {
  VectorIntegrand vf = [&f](double x, std::span<double> out) {
    out[0] = f(x);
  };
  VectorQuadratureResult r = integrate_vector(1, vf, breakpoints, cfg);
  return {r.value[0], r.error[0], r.evaluations, r.converged};
}

}  // namespace mogfit
