#include <doctest.h>

#include <sys/wait.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mogfit/json_io.hpp"
#include "mogfit/pipeline.hpp"
#include "mogfit/service.hpp"

using namespace mogfit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + MOGFIT_CLI + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("mogfit_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const fs::path f = path / name;
    std::ofstream(f) << text;
    return f.string();
  }
};

}  // namespace

TEST_CASE("cli fit, transform, analyze and assess-spline") {
  TempDir dir;
  const std::string u01 = dir.write("u01.json", R"({"type": "analytic", "family": "uniform", "params": [0, 1]})");
  const std::string exp = dir.write("exp.json", R"({"type": "analytic", "family": "exponential", "params": [1]})");

  const Run fit = run("fit --spec " + u01 + " --m 2");
  REQUIRE(fit.code == 0);
  const Json f = parse_json(fit.out);
  CHECK(f["chosen_m"] == 2);
  CHECK(f["fit_reports"]["2"]["mixture"]["components"].size() == 2);

  const Run tr = run("transform --spec " + exp + " --bounds 0,inf");
  REQUIRE(tr.code == 0);
  CHECK(parse_json(tr.out)["p_star"].get<double>() == doctest::Approx(0.2654).epsilon(1e-3));

  const Run an = run("analyze < " + exp);
  REQUIRE(an.code == 0);
  CHECK(parse_json(an.out)["entropy"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  const Run sp = run("assess-spline --point=-1,0.1 --point 0,0.35 --point 0.5,0.6 --point 1.5,0.85 --point 3,0.95");
  REQUIRE(sp.code == 0);
  CHECK(parse_json(sp.out)["n_equiv"] == 5);
}

TEST_CASE("cli exit codes") {
  TempDir dir;
  const std::string u01 = dir.write("u01.json", R"({"type": "analytic", "family": "uniform", "params": [0, 1]})");
  const std::string broken = dir.write("broken.json", "{\"type\": \"analytic\",\n \"family\": }");
  const std::string odds = dir.write("odds.json", R"({"steps": [{"kind": "scaled_odds", "a": 0, "b": 1}]})");

  CHECK(run("analyze --spec " + broken).code == 2);
  CHECK(run("fit --spec " + u01 + " --size-search").code == 2);
  CHECK(run("fit --spec " + u01 + " --k 1").code == 2);
  CHECK(run("fit --spec " + u01).code == 2);
  CHECK(run("fit --spec " + u01 + " --m 2 --fast-two").code == 2);
  CHECK(run("fit --spec " + u01 + " --m 0").code == 2);
  CHECK(run("fit --spec /nonexistent/spec.json --m 1").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("fit --spec " + u01 + " --fast-two --chain " + odds).code == 3);
  CHECK(run("analyze --spec " + u01, "MOGFIT_QUADRATURE_TOL=banana").code == 2);
  CHECK(run("fit --spec " + u01 + " --kn 0.1").code == 0);
}

TEST_CASE("cli and service give byte-identical results") {
  TempDir dir;
  const Json req = {{"spec", {{"type", "analytic"}, {"family", "exponential"}, {"params", {1.0}}}},
                    {"transform", "auto"},
                    {"fit", {{"mode", "size_search"}, {"kn_ratio", 0.1}}},
                    {"em_cfg", {{"init", {{"strategy", "random"}}}}},
                    {"seed", 11}};
  const std::string path = dir.write("req.json", req.dump(2));
  const Run a = run("fit --request " + path);
  const Run b = run("fit --request " + path);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const HttpReply svc = handle_request("POST", "/v1/pipeline", req.dump(), QuadratureConfig::from_environment());
  CHECK(svc.status == 200);
  CHECK(svc.body == a.out);

  // The option form builds the same request.
  const std::string spec = dir.write("exp.json", req["spec"].dump());
  const Run c = run("fit --spec " + spec + " --transform auto --kn 0.1 --init random --seed 11");
  CHECK(c.out == a.out);
}

TEST_CASE("cli honours MOGFIT_QUADRATURE_TOL") {
  TempDir dir;
  const std::string spec = dir.write("s.json", R"({"type": "analytic", "family": "triangular", "params": [0, 0.3, 1]})");
  const Run loose = run("analyze --spec " + spec, "MOGFIT_QUADRATURE_TOL=1e-3");
  const Run tight = run("analyze --spec " + spec);
  REQUIRE(loose.code == 0);
  REQUIRE(tight.code == 0);
  // Entropy of triangular(0, c, 1) is 1/2 - ln 2.
  const double exact = 0.5 - std::log(2.0);
  CHECK(parse_json(tight.out)["entropy"].get<double>() == doctest::Approx(exact).epsilon(1e-8));
  CHECK(parse_json(loose.out)["entropy"].get<double>() == doctest::Approx(exact).epsilon(1e-3));
  CHECK(run("analyze --spec " + spec, "MOGFIT_QUADRATURE_TOL=0").code == 2);
  CHECK(run("analyze --spec " + spec, "MOGFIT_QUADRATURE_TOL=-1e-3").code == 2);
}
