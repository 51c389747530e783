#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "pdnf/checker.hpp"

namespace py = pybind11;
using namespace pdnf;

namespace {

CheckOptions options(const py::kwargs& kw) {
  CheckOptions o;
  for (auto [k, v] : kw) {
    std::string key = py::str(k);
    if (key == "k_call") o.k_call = v.cast<int>();
    else if (key == "k_ret") o.k_ret = v.cast<int>();
    else if (key == "k_int") o.k_int = v.cast<long>();
    else if (key == "gc") o.gc = v.cast<bool>();
    else if (key == "normalize") o.normalize = v.cast<bool>();
    else if (key == "beta") o.beta = v.cast<bool>();
    else if (key == "name_reuse") o.name_reuse = v.cast<bool>();
    else if (key == "separation") o.separation = v.cast<bool>();
    else if (key == "memo") o.memo = v.cast<bool>();
    else if (key == "widen") o.widen = v.cast<bool>();
    else if (key == "solver") o.solver = v.cast<std::string>();
    else if (key == "timeout") o.timeout_s = v.cast<double>();
    else if (key == "check_wf") o.check_wf = v.cast<bool>();
    else throw py::key_error("unknown option '" + key + "'");
  }
  if (o.k_call < 0 || o.k_ret < 0 || o.k_int < 0) throw py::value_error("bounds must be non-negative");
  return o;
}

py::object to_py(const std::string& json) { return py::module_::import("json").attr("loads")(json); }

py::object run(bool stacked, const std::string& left, const std::string& right, const py::kwargs& kw) {
  CheckOptions o = options(kw);
  E m = parse_program(left), n = parse_program(right);
  CheckResult r;
  {
    py::gil_scoped_release nogil;
    r = stacked ? check_stacked(m, n, o) : check_equivalence(m, n, o);
  }
  py::dict d = to_py(result_json(r));
  d["dot"] = export_dot(r.sigma);
  if (r.cex) d["trace"] = trace_str(r.cex->trace);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Contextual equivalence checking for a higher-order language with local state";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<TypeError>(m, "TypeError", PyExc_TypeError);

  m.def(
      "check", [](const std::string& l, const std::string& r, const py::kwargs& kw) { return run(false, l, r, kw); },
      py::arg("left"), py::arg("right"),
      "Check two programs; options: k_call, k_ret, k_int, gc, normalize, beta, name_reuse, separation, memo, "
      "widen, solver, timeout, check_wf.");
  m.def(
      "check_stacked",
      [](const std::string& l, const std::string& r, const py::kwargs& kw) { return run(true, l, r, kw); },
      py::arg("left"), py::arg("right"), "Bounded game on the stacked LTS.");
  m.def(
      "typecheck", [](const std::string& p) { return type_str(typecheck(parse_program(p))); }, py::arg("program"));
  m.def(
      "pretty", [](const std::string& p) { return pretty(parse_program(p)); }, py::arg("program"));
  m.def(
      "split_pair",
      [](const std::string& text) {
        auto [a, b] = split_pair(text);
        return py::make_tuple(a, b);
      },
      py::arg("text"));
  m.def(
      "replay",
      [](const std::string& trace, const std::string& program, const std::string& engine) {
        if (engine != "stackless" && engine != "stacked") throw py::value_error("engine is 'stackless' or 'stacked'");
        auto r = replay(parse_trace(trace), parse_program(program),
                        engine == "stacked" ? Engine::Stacked : Engine::Stackless);
        py::dict d;
        d["accepted"] = r.accepted;
        d["terminated"] = r.terminated;
        d["reject_step"] = r.reject_step;
        d["reason"] = r.reason;
        return d;
      },
      py::arg("trace"), py::arg("program"), py::arg("engine") = "stackless");
}
