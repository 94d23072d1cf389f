// Thin binding: JSON text in, JSON text out. The Python package turns it
// into dictionaries.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mogfit/json_io.hpp"
#include "mogfit/pipeline.hpp"
#include "mogfit/service.hpp"

namespace py = pybind11;
using namespace mogfit;

namespace {

QuadratureConfig quadrature() { return QuadratureConfig::from_environment(); }

std::string run_pipeline_json(const std::string& request) {
  const Json j = in_stage("request", [&] { return parse_json(request); });
  return dump_canonical(to_json(run_pipeline(request_from_json(j, quadrature()))));
}

std::string evaluate_json(const std::string& body) {
  const Json j = in_stage("request", [&] { return parse_json(body); });
  return dump_canonical(evaluate(j, quadrature()));
}

std::string spline_json(const std::string& body) {
  const Json j = in_stage("request", [&] { return parse_json(body); });
  return dump_canonical(assess_spline(j));
}

std::string analyze_json(const std::string& spec, int max_order) {
  const DistributionSpec s = in_stage("request", [&] { return spec_from_json(parse_json(spec)); });
  return dump_canonical(in_stage("analyze", [&] { return analyze(s, max_order, quadrature()); }));
}

std::string transform_json(const std::string& spec, const std::optional<std::string>& bounds,
                           bool round) {
  std::optional<Bounds> b;
  const DistributionSpec s = in_stage("request", [&] {
    if (bounds) b = bounds_from_json(parse_json(*bounds));
    return spec_from_json(parse_json(spec));
  });
  return dump_canonical(transform_summary(s, b, round, {}, quadrature()));
}

}  // namespace

PYBIND11_MODULE(_mogfit, m) {
  m.doc() = "Gaussian mixture fitting by relative entropy";

  static py::object error = py::module_::import("mogfit._errors").attr("MogfitError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const StageError& e) {
      py::object exc = error(e.what(), to_string(e.kind()), e.stage());
      PyErr_SetObject(error.ptr(), exc.ptr());
    } catch (const Error& e) {
      py::object exc = error(e.what(), to_string(e.kind()), py::none());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::call_guard<py::gil_scoped_release> nogil;
  m.def("run_pipeline", &run_pipeline_json, py::arg("request"), nogil);
  m.def("evaluate", &evaluate_json, py::arg("body"), nogil);
  m.def("assess_spline", &spline_json, py::arg("body"), nogil);
  m.def("analyze", &analyze_json, py::arg("spec"), py::arg("max_order") = 4, nogil);
  m.def("transform", &transform_json, py::arg("spec"), py::arg("bounds") = py::none(),
        py::arg("round") = false, nogil);
  m.def(
      "handle_request",
      [](const std::string& method, const std::string& path, const std::string& body) {
        const HttpReply r = handle_request(method, path, body, quadrature());
        return std::make_pair(r.status, r.body);
      },
      py::arg("method"), py::arg("path"), py::arg("body") = "", nogil);
}
