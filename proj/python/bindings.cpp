#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hybridsens/scenario.hpp"

namespace py = pybind11;
using namespace hybridsens;

namespace {

Scenario scenario_from(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(std::string("scenario is not valid JSON: ") + e.what());
    }
    return parse_scenario(j);
}

py::dict propagate(const std::string& text) {
    Scenario s = scenario_from(text);
    ModelDefinition model = build_model(s);
    TrajectoryArchive arc;
    {
        py::gil_scoped_release nogil;
        arc = propagate_hybrid(model, s.formulation, s.integrator, model.nominal_rho, s.t0, s.tf);
    }
    std::vector<double> t;
    std::vector<int> regime;
    std::vector<Vector> rows;
    for (const auto& seg : arc.segments)
        for (size_t i = 0; i < seg.t.size(); ++i) {
            t.push_back(seg.t[i]);
            regime.push_back(seg.regime);
            rows.push_back(seg.x[i]);
        }
    Matrix x(rows.size(), model.dims.canonical_size());
    for (size_t i = 0; i < rows.size(); ++i) x.row(i) = rows[i].transpose();

    py::list events;
    for (const auto& e : arc.events) {
        py::dict d;
        d["t_eve"] = e.t_eve;
        d["event_index"] = e.event_index;
        d["kind"] = to_string(e.kind);
        d["dtdrho"] = Vector(e.dtdrho.transpose());
        d["v_pre"] = e.state_pre.v;
        d["v_post"] = e.state_post.v;
        d["V_pre"] = e.sens_pre.V;
        d["V_post"] = e.sens_post.V;
        d["Q_pre"] = e.sens_pre.Q;
        d["Q_post"] = e.sens_post.Q;
        events.append(d);
    }
    py::dict out;
    out["n"] = model.dims.n;
    out["p"] = model.dims.p;
    out["parameter_names"] = model.parameter_names;
    out["rho"] = model.nominal_rho;
    out["t"] = t;
    out["regime"] = regime;
    out["x"] = x;
    out["events"] = events;
    out["psi"] = arc.psi;
    out["dpsi_drho"] = Vector(arc.dpsi_drho.transpose());
    return out;
}

template <int (*Cmd)(const Scenario&, std::ostream&)> std::pair<int, std::string> command(const std::string& text) {
    Scenario s = scenario_from(text);
    std::ostringstream os;
    int rc;
    {
        py::gil_scoped_release nogil;
        rc = Cmd(s, os);
    }
    return {rc, os.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hybrid multibody sensitivity core";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigurationError>(m, "ConfigurationError", base.ptr());
    py::register_exception<GrazingError>(m, "GrazingError", base.ptr());
    py::register_exception<StiffnessError>(m, "StiffnessError", base.ptr());
    py::register_exception<ZenoSuspectedError>(m, "ZenoSuspectedError", base.ptr());
    py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", base.ptr());
    py::register_exception<SingularMassError>(m, "SingularMassError", base.ptr());

    m.def("default_scenario", [](const std::string& model) { return default_scenario(model).dump(); },
          py::arg("model_type"), "Default scenario for a built-in model, as JSON text.");
    m.def("normalize_scenario", [](const std::string& text) { return scenario_to_json(scenario_from(text)).dump(); },
          py::arg("scenario_json"), "Parse, validate and re-serialize a scenario.");
    m.def("propagate", &propagate, py::arg("scenario_json"),
          "Integrate states and sensitivities; samples are rows of the canonical vector.");
    m.def("run", &command<run_command>, py::arg("scenario_json"), "CLI run: writes CSV files, returns (code, text).");
    m.def("compare", &command<compare_command>, py::arg("scenario_json"), "CLI compare, returns (code, text).");
    m.def("validate", &command<validate_command>, py::arg("scenario_json"), "CLI validate, returns (code, text).");
}
