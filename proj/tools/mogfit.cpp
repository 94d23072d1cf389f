// mogfit: fit Gaussian mixtures to distributions from the command line.

#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <pthread.h>

#include "mogfit/json_io.hpp"
#include "mogfit/pipeline.hpp"
#include "mogfit/service.hpp"

using namespace mogfit;

namespace {

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open \"" + path + "\"");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json read_json(const std::string& path) { return parse_json(read_input(path)); }

// "0,inf", "0,1", "-3,".
Json parse_bounds(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ValidationError("--bounds expects lo,hi");
  auto end = [](std::string s) -> Json {
    if (s.empty() || s == "inf" || s == "+inf") return nullptr;
    if (s == "-inf") return "-inf";
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size()) throw ValidationError("--bounds: cannot read \"" + s + "\"");
    return v;
  };
  return Json::array({end(text.substr(0, comma)), end(text.substr(comma + 1))});
}

struct FitOptions {
  std::string spec = "-";
  std::string request;
  std::string bounds;
  std::string transform = "none";
  std::string chain;
  int m = 0;
  bool fast_two = false;
  bool size_search = false;
  double k = -1.0;
  double n = -1.0;
  double kn = -1.0;
  int max_m = 10;
  int lookahead = 1;
  double prior = 0.0;
  bool round = false;
  long long seed = 0;
  std::string init = "quantile";
  int max_iterations = 500;
};

Json build_request(const FitOptions& o) {
  if (!o.request.empty()) return read_json(o.request);
  Json req = {{"spec", read_json(o.spec)}, {"round_power", o.round}, {"seed", o.seed}};
  if (!o.bounds.empty()) req["bounds"] = parse_bounds(o.bounds);
  if (!o.chain.empty()) {
    req["transform"] = read_json(o.chain);
  } else {
    req["transform"] = o.transform;
  }
  req["em_cfg"] = {{"max_iterations", o.max_iterations}, {"init", {{"strategy", o.init}}}};

  const bool search = o.size_search || o.k >= 0 || o.n >= 0 || o.kn >= 0;
  const int modes = (o.m > 0) + o.fast_two + search;
  if (modes != 1) {
    throw ValidationError("choose exactly one of --m, --fast-two or --size-search");
  }
  if (o.m > 0) {
    req["fit"] = {{"mode", "em"}, {"m", o.m}};
  } else if (o.fast_two) {
    req["fit"] = {{"mode", "fast_two"}};
  } else {
    Json fit = {{"mode", "size_search"}, {"max_m", o.max_m}, {"lookahead", o.lookahead}};
    if (o.kn >= 0) {
      if (o.k >= 0 || o.n >= 0) throw ValidationError("give either --k and --n or --kn");
      fit["kn_ratio"] = o.kn;
    } else if (o.k >= 0 && o.n >= 0) {
      fit["k"] = o.k;
      fit["n"] = o.n;
    } else {
      throw ValidationError("size search needs --k and --n, or --kn");
    }
    if (o.prior > 0.0) fit["geometric_prior_ratio"] = o.prior;
    req["fit"] = fit;
  }
  return req;
}

int serve(const std::string& bind, int port, const QuadratureConfig& cfg) {
  // Block the shutdown signals in every thread; one thread waits for them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Server server(cfg);
  const int bound = server.bind(bind, port);
  std::cerr << "mogfit: listening on http://" << bind << ":" << bound << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.wait_until_ready();
    server.stop();
  });
  server.listen();
  // listen() only returns after a stop, so the waiter has already run.
  waiter.join();
  std::cerr << "mogfit: stopped" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit Gaussian mixtures to univariate distributions"};
  app.require_subcommand(1);

  FitOptions fo;
  auto* fit = app.add_subcommand("fit", "Transform (optionally) and fit a mixture");
  fit->add_option("--spec", fo.spec, "Distribution spec JSON file, - for stdin");
  fit->add_option("--request", fo.request, "Full pipeline request JSON (overrides other options)");
  fit->add_option("--bounds", fo.bounds, "Practical bounds lo,hi (hi may be inf)");
  fit->add_option("--transform", fo.transform, "none or auto")
      ->check(CLI::IsMember({"none", "auto"}));
  fit->add_option("--chain", fo.chain, "Explicit transformation chain JSON file");
  fit->add_option("--m", fo.m, "Fit this many components by EM")->check(CLI::PositiveNumber);
  fit->add_flag("--fast-two", fo.fast_two, "Two-component moment fit");
  fit->add_flag("--size-search", fo.size_search, "Choose the number of components");
  fit->add_option("--k", fo.k, "Cost exponent k of the size search");
  fit->add_option("--n", fo.n, "Equivalent sample size n of the size search");
  fit->add_option("--kn", fo.kn, "Ratio k/n of the size search");
  fit->add_option("--max-m", fo.max_m, "Largest size tried")->check(CLI::PositiveNumber);
  fit->add_option("--lookahead", fo.lookahead, "Extra sizes that must also fail to help")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--prior-ratio", fo.prior, "Geometric prior ratio r (experimental)");
  fit->add_flag("--round", fo.round, "Round the searched power to a nearby simple value");
  fit->add_option("--seed", fo.seed, "Seed for random initialisation")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--init", fo.init, "quantile or random")
      ->check(CLI::IsMember({"quantile", "random"}));
  fit->add_option("--max-iterations", fo.max_iterations, "EM iteration limit")
      ->check(CLI::PositiveNumber);

  std::string t_spec = "-";
  std::string t_bounds;
  bool t_round = false;
  PowerSearchConfig power;
  auto* transform = app.add_subcommand("transform", "Find the best power transformation");
  transform->add_option("--spec", t_spec, "Distribution spec JSON file, - for stdin");
  transform->add_option("--bounds", t_bounds, "Practical bounds lo,hi (hi may be inf)");
  transform->add_flag("--round", t_round, "Round the power to a nearby simple value");
  transform->add_option("--p-lo", power.p_lo, "Lower end of the power bracket");
  transform->add_option("--p-hi", power.p_hi, "Upper end of the power bracket");
  transform->add_option("--tolerance", power.tolerance, "Tolerance on the power");

  std::string a_spec = "-";
  int max_order = 4;
  auto* an = app.add_subcommand("analyze", "Entropy, moments and quantiles of a spec");
  an->add_option("--spec", a_spec, "Distribution spec JSON file, - for stdin");
  an->add_option("--max-order", max_order, "Highest moment")->check(CLI::Range(2, 12));

  std::string s_points = "-";
  std::vector<std::string> s_point;
  std::string s_tail;
  int s_n = 0;
  auto* sp = app.add_subcommand("assess-spline", "Build a spline CDF from assessed points");
  sp->add_option("--points", s_points, "JSON {\"points\": [...]} file, - for stdin");
  sp->add_option("--point", s_point, "Assessed point x,F (repeatable; replaces --points)");
  sp->add_option("--tail-policy", s_tail, "bounded or exponential_tails")
      ->check(CLI::IsMember({"bounded", "exponential_tails"}));
  sp->add_option("--n-equiv", s_n, "Equivalent sample size")->check(CLI::PositiveNumber);

  std::string bind = "127.0.0.1";
  int port = 8377;
  auto* sv = app.add_subcommand("serve", "Run the HTTP service");
  sv->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  sv->add_option("--bind", bind, "Address to bind");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const QuadratureConfig q = QuadratureConfig::from_environment();
    Json out;
    if (*fit) {
      const Json req = in_stage("request", [&] { return build_request(fo); });
      out = to_json(run_pipeline(request_from_json(req, q)));
    } else if (*transform) {
      std::optional<Bounds> b;
      const DistributionSpec spec = in_stage("request", [&] {
        if (!t_bounds.empty()) b = bounds_from_json(parse_bounds(t_bounds));
        power.validate();
        return spec_from_json(read_json(t_spec));
      });
      out = transform_summary(spec, b, t_round, power, q);
    } else if (*an) {
      const DistributionSpec spec =
          in_stage("request", [&] { return spec_from_json(read_json(a_spec)); });
      out = in_stage("analyze", [&] { return analyze(spec, max_order, q); });
    } else if (*sp) {
      Json body = in_stage("request", [&] {
        Json b;
        if (!s_point.empty()) {
          b = {{"points", Json::array()}};
          for (const std::string& p : s_point) {
            const Json xy = parse_bounds(p);
            if (!xy[0].is_number() || !xy[1].is_number()) {
              throw ValidationError("--point expects x,F");
            }
            b["points"].push_back(xy);
          }
        } else {
          b = read_json(s_points);
          if (b.is_array()) b = {{"points", b}};
        }
        if (!s_tail.empty()) b["tail_policy"] = s_tail;
        if (s_n > 0) b["n_equiv"] = s_n;
        return b;
      });
      out = assess_spline(body);
    } else {
      return serve(bind, port, q);
    }
    std::cout << dump_canonical(out);
    return 0;
  } catch (const StageError& e) {
    std::cerr << "mogfit: " << e.stage() << " (" << to_string(e.kind()) << "): " << e.what()
              << "\n";
    return exit_code(e.kind());
  } catch (const Error& e) {
    std::cerr << "mogfit: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  }
}
