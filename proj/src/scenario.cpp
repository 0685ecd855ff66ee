#include "hybridsens/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace hybridsens {

using json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigurationError("section '" + where + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigurationError("unknown key '" + it.key() + "' in " + where);
}

template <class T> T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(std::string("bad value for '") + key + "': " + e.what());
    }
}

template <size_t N> std::array<double, N> get_array(const json& j, const char* key, std::array<double, N> fallback) {
    if (!j.contains(key)) return fallback;
    auto v = get_or<std::vector<double>>(j, key, {});
    if (v.size() != N) throw ConfigurationError(std::string("'") + key + "' needs " + std::to_string(N) + " entries");
    std::array<double, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

const std::set<std::string> kBallKeys = {"h0", "gravity", "restitution", "mass", "running_cost", "terminal_position"};
const std::set<std::string> kFiveBarKeys = {"bar_mass", "k1", "k2", "L01", "L02", "LA1", "L21", "L32", "LB3", "qA",
                                            "qB", "q0", "v0", "ground", "gravity", "restitution", "running_cost"};
const std::set<std::string> kPendulumKeys = {"mass",        "gravity",   "length",      "theta0",      "omega0",
                                             "wall_x",      "restitution", "peg_depth", "running_cost"};

const std::set<std::string>& model_keys(const std::string& type) {
    if (type == "bouncing_ball") return kBallKeys;
    if (type == "five_bar") return kFiveBarKeys;
    if (type == "pendulum") return kPendulumKeys;
    throw ConfigurationError("unknown model type '" + type + "'");
}

json to_json(const BallConfig& c) {
    const char* cost[] = {"none", "velocity", "acceleration", "position"};
    return json{{"h0", c.h0},
                {"gravity", c.gravity},
                {"restitution", c.restitution},
                {"mass", c.mass},
                {"running_cost", cost[static_cast<int>(c.running_cost)]},
                {"terminal_position", c.terminal_position}};
}

json to_json(const PendulumConfig& c) {
    const char* cost[] = {"none", "height", "multiplier"};
    json j{{"mass", c.mass}, {"gravity", c.gravity}, {"length", c.length}, {"theta0", c.theta0}, {"omega0", c.omega0}};
    j["wall_x"] = c.wall_x ? json(*c.wall_x) : json(nullptr);
    j["restitution"] = c.restitution;
    j["peg_depth"] = c.peg_depth ? json(*c.peg_depth) : json(nullptr);
    j["running_cost"] = cost[static_cast<int>(c.running_cost)];
    return j;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

BallConfig ball_config_from_json(const json& j) {
    reject_unknown(j, kBallKeys, "model.params");
    BallConfig c;
    c.h0 = get_or(j, "h0", c.h0);
    c.gravity = get_or(j, "gravity", c.gravity);
    c.restitution = get_or(j, "restitution", c.restitution);
    c.mass = get_or(j, "mass", c.mass);
    std::string cost = get_or<std::string>(j, "running_cost", "none");
    if (cost == "none") c.running_cost = BallCost::None;
    else if (cost == "velocity") c.running_cost = BallCost::Velocity;
    else if (cost == "acceleration") c.running_cost = BallCost::Acceleration;
    else if (cost == "position") c.running_cost = BallCost::Position;
    else throw ConfigurationError("unknown ball running_cost '" + cost + "'");
    c.terminal_position = get_or(j, "terminal_position", c.terminal_position);
    if (!(c.mass > 0.0)) throw ConfigurationError("ball mass must be positive");
    return c;
}

FiveBarConfig five_bar_config_from_json(const json& j) {
    reject_unknown(j, kFiveBarKeys, "model.params");
    FiveBarConfig c;
    c.bar_mass = get_array<4>(j, "bar_mass", c.bar_mass);
    c.k1 = get_or(j, "k1", c.k1);
    c.k2 = get_or(j, "k2", c.k2);
    c.L01 = get_or(j, "L01", c.L01);
    c.L02 = get_or(j, "L02", c.L02);
    c.LA1 = get_or(j, "LA1", c.LA1);
    c.L21 = get_or(j, "L21", c.L21);
    c.L32 = get_or(j, "L32", c.L32);
    c.LB3 = get_or(j, "LB3", c.LB3);
    c.qA = get_array<2>(j, "qA", c.qA);
    c.qB = get_array<2>(j, "qB", c.qB);
    c.q0 = get_array<6>(j, "q0", c.q0);
    c.v0 = get_array<6>(j, "v0", c.v0);
    c.ground = get_or(j, "ground", c.ground);
    c.gravity = get_or(j, "gravity", c.gravity);
    c.restitution = get_or(j, "restitution", c.restitution);
    std::string cost = get_or<std::string>(j, "running_cost", "y2_velocity");
    if (cost == "none") c.running_cost = FiveBarCost::None;
    else if (cost == "y2_velocity") c.running_cost = FiveBarCost::Y2Velocity;
    else if (cost == "y2_acceleration") c.running_cost = FiveBarCost::Y2Acceleration;
    else throw ConfigurationError("unknown five_bar running_cost '" + cost + "'");
    return c;
}

json to_json(const FiveBarConfig& c) {
    const char* cost[] = {"none", "y2_velocity", "y2_acceleration"};
    return json{{"bar_mass", c.bar_mass}, {"k1", c.k1},   {"k2", c.k2},
                {"L01", c.L01},           {"L02", c.L02}, {"LA1", c.LA1},
                {"L21", c.L21},           {"L32", c.L32}, {"LB3", c.LB3},
                {"qA", c.qA},             {"qB", c.qB},   {"q0", c.q0},
                {"v0", c.v0},             {"ground", c.ground}, {"gravity", c.gravity},
                {"restitution", c.restitution}, {"running_cost", cost[static_cast<int>(c.running_cost)]}};
}

PendulumConfig pendulum_config_from_json(const json& j) {
    reject_unknown(j, kPendulumKeys, "model.params");
    PendulumConfig c;
    c.mass = get_or(j, "mass", c.mass);
    c.gravity = get_or(j, "gravity", c.gravity);
    c.length = get_or(j, "length", c.length);
    c.theta0 = get_or(j, "theta0", c.theta0);
    c.omega0 = get_or(j, "omega0", c.omega0);
    if (j.contains("wall_x") && !j.at("wall_x").is_null()) c.wall_x = get_or(j, "wall_x", 0.0);
    c.restitution = get_or(j, "restitution", c.restitution);
    if (j.contains("peg_depth") && !j.at("peg_depth").is_null()) c.peg_depth = get_or(j, "peg_depth", 0.0);
    std::string cost = get_or<std::string>(j, "running_cost", "none");
    if (cost == "none") c.running_cost = PendulumCost::None;
    else if (cost == "height") c.running_cost = PendulumCost::Height;
    else if (cost == "multiplier") c.running_cost = PendulumCost::Multiplier;
    else throw ConfigurationError("unknown pendulum running_cost '" + cost + "'");
    return c;
}

Scenario parse_scenario(const json& j) {
    reject_unknown(j, {"model", "formulation", "integrator", "outputs", "compare"}, "scenario");
    if (!j.contains("model")) throw ConfigurationError("scenario lacks a model section");
    Scenario s;
    const json& jm = j.at("model");
    reject_unknown(jm, {"type", "params"}, "model");
    s.model_type = get_or<std::string>(jm, "type", "");
    const auto& keys = model_keys(s.model_type);
    s.model_params = jm.contains("params") ? jm.at("params") : json::object();
    reject_unknown(s.model_params, keys, "model.params");

    const char* default_form = s.model_type == "five_bar" ? "penalty" : s.model_type == "pendulum" ? "dae1" : "ode";
    json jf = j.contains("formulation") ? j.at("formulation") : json::object();
    reject_unknown(jf, {"type", "alpha", "xi", "omega"}, "formulation");
    s.formulation.kind = formulation_from_string(get_or<std::string>(jf, "type", default_form));
    s.formulation.penalty.alpha = get_or(jf, "alpha", s.formulation.penalty.alpha);
    s.formulation.penalty.xi = get_or(jf, "xi", s.formulation.penalty.xi);
    s.formulation.penalty.omega = get_or(jf, "omega", s.formulation.penalty.omega);

    json ji = j.contains("integrator") ? j.at("integrator") : json::object();
    reject_unknown(ji,
                   {"rtol", "atol", "event_tol", "max_step", "initial_step", "dense_sample_dt", "max_events", "t0",
                    "tf"},
                   "integrator");
    IntegratorConfig& ic = s.integrator;
    ic.rel_tol = get_or(ji, "rtol", ic.rel_tol);
    ic.abs_tol = get_or(ji, "atol", ic.abs_tol);
    ic.event_tol = get_or(ji, "event_tol", ic.event_tol);
    ic.max_step = get_or(ji, "max_step", ic.max_step);
    ic.initial_step = get_or(ji, "initial_step", ic.initial_step);
    ic.dense_sample_dt = get_or(ji, "dense_sample_dt", ic.dense_sample_dt);
    ic.max_events = get_or(ji, "max_events", ic.max_events);
    s.t0 = get_or(ji, "t0", s.t0);
    s.tf = get_or(ji, "tf", s.model_type == "five_bar" ? 5.0 : 1.0);
    if (!(ic.rel_tol > 0.0) || !(ic.abs_tol > 0.0) || !(ic.event_tol > 0.0) || !(ic.dense_sample_dt > 0.0))
        throw ConfigurationError("tolerances and sample spacing must be positive");
    if (!(s.tf > s.t0)) throw ConfigurationError("tf must exceed t0");

    json jo = j.contains("outputs") ? j.at("outputs") : json::object();
    reject_unknown(jo, {"dir", "prefix", "multipliers"}, "outputs");
    s.outputs.dir = get_or(jo, "dir", s.outputs.dir);
    s.outputs.prefix = get_or(jo, "prefix", s.model_type);
    s.outputs.multipliers = get_or(jo, "multipliers", s.outputs.multipliers);

    json jc = j.contains("compare") ? j.at("compare") : json::object();
    reject_unknown(jc, {"method", "eps", "threshold", "t_end", "exclusion_factor"}, "compare");
    s.compare.method = get_or(jc, "method", s.compare.method);
    if (s.compare.method != "fd" && s.compare.method != "complex")
        throw ConfigurationError("compare.method must be fd or complex");
    s.compare.eps = get_or(jc, "eps", s.compare.eps);
    s.compare.threshold = get_or(jc, "threshold", s.compare.method == "complex" ? 1e-10 : 1e-3);
    s.compare.t_end = get_or(jc, "t_end", s.compare.t_end);
    s.compare.exclusion_factor = get_or(jc, "exclusion_factor", s.compare.exclusion_factor);

    build_model(s);  // surfaces parameter errors at parse time
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open scenario file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError("scenario '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scenario(j);
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["model"] = {{"type", s.model_type}, {"params", s.model_params}};
    j["formulation"] = {{"type", to_string(s.formulation.kind)},
                        {"alpha", s.formulation.penalty.alpha},
                        {"xi", s.formulation.penalty.xi},
                        {"omega", s.formulation.penalty.omega}};
    const IntegratorConfig& ic = s.integrator;
    j["integrator"] = {{"rtol", ic.rel_tol},
                       {"atol", ic.abs_tol},
                       {"event_tol", ic.event_tol},
                       {"max_step", finite_or_null(ic.max_step)},
                       {"initial_step", ic.initial_step},
                       {"dense_sample_dt", ic.dense_sample_dt},
                       {"max_events", ic.max_events},
                       {"t0", s.t0},
                       {"tf", s.tf}};
    j["outputs"] = {{"dir", s.outputs.dir}, {"prefix", s.outputs.prefix}, {"multipliers", s.outputs.multipliers}};
    j["compare"] = {{"method", s.compare.method},
                    {"eps", s.compare.eps},
                    {"threshold", s.compare.threshold},
                    {"t_end", s.compare.t_end},
                    {"exclusion_factor", s.compare.exclusion_factor}};
    return j;
}

json default_scenario(const std::string& type) {
    json params;
    if (type == "bouncing_ball") params = to_json(BallConfig{});
    else if (type == "five_bar") params = to_json(FiveBarConfig{});
    else if (type == "pendulum") params = to_json(PendulumConfig{});
    else throw ConfigurationError("unknown model type '" + type + "'");
    json j{{"model", {{"type", type}, {"params", params}}}};
    return scenario_to_json(parse_scenario(j));
}

void apply_override(Scenario& s, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigurationError("override must look like key=value");
    std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const nlohmann::json::exception&) {
        value = text;
    }
    json j = scenario_to_json(s);
    auto dot = key.find('.');
    if (dot == std::string::npos) {
        j["model"]["params"][key] = value;
    } else {
        std::string section = key.substr(0, dot), field = key.substr(dot + 1);
        if (section == "model") j["model"]["params"][field] = value;
        else if (j.contains(section)) j[section][field] = value;
        else throw ConfigurationError("unknown section '" + section + "' in override");
    }
    s = parse_scenario(j);
}

ModelDefinition build_model(const Scenario& s) {
    if (s.model_type == "bouncing_ball") return build_bouncing_ball(ball_config_from_json(s.model_params));
    if (s.model_type == "five_bar") return build_five_bar(five_bar_config_from_json(s.model_params));
    if (s.model_type == "pendulum") return build_pendulum(pendulum_config_from_json(s.model_params));
    throw ConfigurationError("unknown model type '" + s.model_type + "'");
}

void write_trajectory_csv(std::ostream& os, const TrajectoryArchive& arc, int m_cols) {
    const int n = arc.dims.n, p = arc.dims.p;
    os << "t,regime";
    for (int i = 0; i < n; ++i) os << ",q" << i;
    for (int i = 0; i < n; ++i) os << ",v" << i;
    os << ",z";
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) os << ",Q" << i << '_' << j;
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) os << ",V" << i << '_' << j;
    for (int j = 0; j < p; ++j) os << ",Z" << j;
    for (int k = 0; k < m_cols; ++k) os << ",lambda" << k;
    os << '\n' << std::setprecision(17);
    for (const auto& seg : arc.segments) {
        for (size_t i = 0; i < seg.t.size(); ++i) {
            os << seg.t[i] << ',' << seg.regime;
            for (Eigen::Index k = 0; k < seg.x[i].size(); ++k) os << ',' << seg.x[i](k);
            for (int k = 0; k < m_cols; ++k) {
                os << ',';
                if (k < seg.lambda[i].size()) os << seg.lambda[i](k);
                else os << "nan";
            }
            os << '\n';
        }
    }
}

void write_events_csv(std::ostream& os, const TrajectoryArchive& arc) {
    const int n = arc.dims.n, p = arc.dims.p;
    os << "t_eve,event_index";
    for (int j = 0; j < p; ++j) os << ",dtdrho" << j;
    for (int i = 0; i < n; ++i) os << ",v_pre" << i;
    for (int i = 0; i < n; ++i) os << ",v_post" << i;
    os << '\n' << std::setprecision(17);
    for (const auto& e : arc.events) {
        os << e.t_eve << ',' << e.event_index;
        for (int j = 0; j < p; ++j) os << ',' << e.dtdrho(j);
        for (int i = 0; i < n; ++i) os << ',' << e.state_pre.v(i);
        for (int i = 0; i < n; ++i) os << ',' << e.state_post.v(i);
        os << '\n';
    }
}

namespace {

std::filesystem::path output_path(const Scenario& s, const std::string& suffix) {
    std::filesystem::create_directories(s.outputs.dir);
    return std::filesystem::path(s.outputs.dir) / (s.outputs.prefix + suffix);
}

void print_row(std::ostream& out, const char* label, const RowVector& r) {
    out << label;
    for (Eigen::Index i = 0; i < r.size(); ++i) out << (i ? ", " : " [") << r(i);
    out << "]\n";
}

}  // namespace

int run_command(const Scenario& s, std::ostream& out) {
    ModelDefinition model = build_model(s);
    IntegratorConfig cfg = s.integrator;
    cfg.record_multipliers = s.outputs.multipliers;
    TrajectoryArchive arc = propagate_hybrid(model, s.formulation, cfg, model.nominal_rho, s.t0, s.tf);

    int m_cols = (s.outputs.multipliers && s.formulation.kind != FormulationKind::Ode) ? model.dims.m : 0;
    auto traj = output_path(s, "_trajectory.csv");
    auto evts = output_path(s, "_events.csv");
    {
        std::ofstream f(traj);
        write_trajectory_csv(f, arc, m_cols);
    }
    {
        std::ofstream f(evts);
        write_events_csv(f, arc);
    }

    out << std::setprecision(10);
    out << "model " << model.name << ", formulation " << to_string(s.formulation.kind) << ", t in [" << s.t0 << ", "
        << s.tf << "]\n";
    out << "steps accepted " << arc.steps_accepted << ", rejected " << arc.steps_rejected << ", samples "
        << arc.sample_count() << '\n';
    out << "events " << arc.events.size() << '\n';
    for (const auto& e : arc.events) {
        out << "  t_eve=" << e.t_eve << " event=" << e.event_index << " kind=" << to_string(e.kind);
        print_row(out, " dtdrho", e.dtdrho);
    }
    if (model.dims.m > 0) {
        double pos = 0.0, vel = 0.0;
        HybridState st;
        SensitivityBundle sb;
        for (const auto& seg : arc.segments)
            for (size_t i = 0; i < seg.t.size(); ++i) {
                if (model.m_in(seg.regime) == 0) continue;
                unpack_canonical(seg.x[i], model.dims, st, sb);
                ConstraintEval c = model.constraints(seg.t[i], st.q, model.nominal_rho, seg.regime);
                pos = std::max(pos, c.phi.cwiseAbs().maxCoeff());
                vel = std::max(vel, (c.phi_q * st.v + c.phi_t).cwiseAbs().maxCoeff());
            }
        out << "max |Phi| " << pos << ", max |Phi'| " << vel << '\n';
    }
    out << "psi " << arc.psi << '\n';
    print_row(out, "dpsi/drho", arc.dpsi_drho);
    out << "wrote " << traj.string() << " and " << evts.string() << '\n';
    return kExitOk;
}

int compare_command(const Scenario& s, std::ostream& out) {
    ModelDefinition model = build_model(s);
    const Vector rho = model.nominal_rho;
    IntegratorConfig cfg = s.integrator;
    cfg.record_multipliers = s.formulation.kind != FormulationKind::Ode;
    CompareReport total;
    total.threshold = s.compare.threshold;
    total.pass = true;
    std::ostringstream body;

    if (s.compare.method == "fd") {
        TrajectoryArchive arc = propagate_hybrid(model, s.formulation, cfg, rho, s.t0, s.tf);
        for (int i = 0; i < model.dims.p; ++i) {
            double eps = s.compare.eps > 0.0 ? s.compare.eps : default_fd_step(rho(i));
            FdResult fd = central_fd_sensitivity(model, s.formulation, cfg, rho, eps, i, s.t0, s.tf);
            auto windows = fd_exclusion_windows(arc, i, eps, s.compare.exclusion_factor);
            CompareReport r = compare_report(analytic_series(arc, i), fd.series, windows, s.compare.threshold,
                                             model.parameter_names[i]);
            body << "parameter " << model.parameter_names[i] << " (eps " << eps << ", " << windows.size()
                 << " exclusion windows)\n";
            total.merge(r);
        }
    } else {
        double t_end = s.compare.t_end;
        if (!(t_end > 0.0)) {
            TrajectoryArchive probe = propagate_hybrid(model, s.formulation, cfg, rho, s.t0, s.tf);
            double t1 = probe.events.empty() ? s.tf : probe.events.front().t_eve;
            t_end = probe.events.empty() ? s.tf : s.t0 + 0.99 * (t1 - s.t0);
        }
        TrajectoryArchive arc = propagate_hybrid(model, s.formulation, cfg, rho, s.t0, t_end);
        if (!arc.events.empty()) throw ConfigurationError("complex-step span must end before the first event");
        double eps = s.compare.eps > 0.0 ? s.compare.eps : 1e-20;
        for (int i = 0; i < model.dims.p; ++i) {
            SensitivitySeries cs = complex_step_sensitivity(model, s.formulation, cfg, rho, eps, i, s.t0, t_end);
            CompareReport r = compare_report(analytic_series(arc, i), cs, {}, s.compare.threshold,
                                             model.parameter_names[i]);
            body << "parameter " << model.parameter_names[i] << " (complex step " << eps << ", span [" << s.t0 << ", "
                 << t_end << "])\n";
            total.merge(r);
        }
    }
    std::ostringstream report;
    report << "compare " << s.compare.method << " for " << model.name << " (" << to_string(s.formulation.kind)
           << ")\n"
           << body.str() << total.text();
    {
        std::ofstream f(output_path(s, "_compare.txt"));
        f << report.str();
    }
    out << report.str();
    return total.pass ? kExitOk : kExitCompareFailed;
}

int validate_command(const Scenario& s, std::ostream& out) {
    ModelDefinition model = build_model(s);
    const Vector rho = model.nominal_rho;
    InitialConditions ic = model.initial_conditions(rho);
    HybridState probe{s.t0, ic.q0, ic.v0, 0.0, 0};
    bool ok = true;
    out << std::scientific << std::setprecision(3);
    if (model.m_in(0) > 0) {
        ConstraintEval c = model.constraints(s.t0, ic.q0, rho, 0);
        double pos = c.phi.cwiseAbs().maxCoeff();
        double vel = (c.phi_q * ic.v0 + c.phi_t).cwiseAbs().maxCoeff();
        bool cons = pos <= 1e-8 * (1.0 + ic.q0.cwiseAbs().maxCoeff()) && vel <= 1e-8 * (1.0 + ic.v0.cwiseAbs().maxCoeff());
        out << (cons ? "  ok    " : "  FAIL  ") << "initial consistency |Phi|=" << pos << " |Phi'|=" << vel << '\n';
        ok = ok && cons;
    }
    if (probe.v.cwiseAbs().maxCoeff() == 0.0) {
        // a resting start hides every velocity term, probe with a tangent velocity instead
        Vector v = Vector::LinSpaced(model.dims.n, 0.3, 1.1);
        if (model.m_in(0) > 0) {
            ConstraintEval c = model.constraints(s.t0, ic.q0, rho, 0);
            Eigen::CompleteOrthogonalDecomposition<Matrix> cod(c.phi_q);
            v -= cod.solve(c.phi_q * v + c.phi_t);
        }
        probe.v = v;
    }
    ValidationReport rep = validate_model(model, probe, rho);
    out << rep.summary();
    ok = ok && rep.pass;
    return ok ? kExitOk : kExitConfig;
}

}  // namespace hybridsens
