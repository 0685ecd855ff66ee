#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridsens/scenario.hpp"

using namespace hybridsens;

namespace {

struct Common {
    std::string scenario;
    std::string formulation;
    double rtol = 0.0, atol = 0.0, event_tol = 0.0, tf = 0.0;
    std::string output_dir;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("scenario", c.scenario, "scenario JSON file")->required();
    sub->add_option("--formulation", c.formulation, "ode | dae1 | penalty");
    sub->add_option("--rtol", c.rtol, "relative tolerance");
    sub->add_option("--atol", c.atol, "absolute tolerance");
    sub->add_option("--event-tol", c.event_tol, "event time tolerance");
    sub->add_option("--tf", c.tf, "final time");
    sub->add_option("--output-dir", c.output_dir, "directory for CSV output");
    sub->add_option("--param-override", c.overrides, "key=value, repeatable");
}

Scenario resolve(const Common& c) {
    Scenario s = load_scenario(c.scenario);
    if (!c.formulation.empty()) apply_override(s, "formulation.type=\"" + c.formulation + "\"");
    if (c.atol > 0) s.integrator.abs_tol = c.atol;
    if (c.rtol > 0) s.integrator.rel_tol = c.rtol;
    if (c.event_tol > 0) s.integrator.event_tol = c.event_tol;
    if (c.tf > 0) {
        if (!(c.tf > s.t0)) throw ConfigurationError("--tf must exceed t0");
        s.tf = c.tf;
    }
    if (!c.output_dir.empty()) s.outputs.dir = c.output_dir;
    for (const auto& o : c.overrides) apply_override(s, o);
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parametric sensitivities of hybrid multibody trajectories"};
    app.require_subcommand(0, 1);
    std::string dump_model;
    app.add_option("--dump-defaults", dump_model, "print the default scenario for bouncing_ball | five_bar | pendulum");

    Common run_opts, cmp_opts, val_opts;
    auto* run = app.add_subcommand("run", "integrate states and sensitivities, write CSV output");
    add_common(run, run_opts);
    auto* cmp = app.add_subcommand("compare", "check sensitivities against finite differences or complex step");
    add_common(cmp, cmp_opts);
    std::string method;
    double eps = 0.0, threshold = 0.0;
    cmp->add_option("--method", method, "fd | complex");
    cmp->add_option("--eps", eps, "perturbation size");
    cmp->add_option("--threshold", threshold, "pass threshold on the max relative error");
    auto* val = app.add_subcommand("validate", "check model derivatives against finite differences");
    add_common(val, val_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (!dump_model.empty()) {
            std::cout << default_scenario(dump_model).dump(2) << '\n';
            return kExitOk;
        }
        if (*run) return run_command(resolve(run_opts), std::cout);
        if (*cmp) {
            Scenario s = resolve(cmp_opts);
            if (!method.empty()) {
                apply_override(s, "compare.method=\"" + method + "\"");
                if (!(threshold > 0)) s.compare.threshold = method == "complex" ? 1e-10 : 1e-3;
            }
            if (eps > 0) s.compare.eps = eps;
            if (threshold > 0) s.compare.threshold = threshold;
            return compare_command(s, std::cout);
        }
        if (*val) return validate_command(resolve(val_opts), std::cout);
        std::cerr << app.help();
        return kExitConfig;
    } catch (const ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << e.name() << ": " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
