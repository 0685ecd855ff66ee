#include "support.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace testsupport {

namespace {

Vector v2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

Matrix m2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

}  // namespace

ModelDefinition build_particle(ParticleEvent kind) {
    ModelDefinition m;
    m.name = kind == ParticleEvent::Impact ? "particle_impact" : "particle_switch";
    m.dims = {2, 0, 2, 1};
    m.parameter_names = {"a", "b"};
    m.nominal_rho = v2(2.0, 1.0);
    m.mass = [](double, const Vector& q, const Vector& rho) {
        return m2(1.0 + 0.2 * q(0) * q(0) + 0.1 * rho(0), 0.0, 0.0, 1.0 + 0.1 * q(1) * q(1));
    };
    m.mass_jvp = [](double, const Vector& q, const Vector&, const Vector& u) {
        return Contraction{m2(0.4 * q(0) * u(0), 0.0, 0.0, 0.2 * q(1) * u(1)), m2(0.1 * u(0), 0.0, 0.0, 0.0)};
    };
    m.force = [](double t, const Vector& q, const Vector& v, const Vector& rho, int regime) {
        ForceEval f;
        f.F = v2(-rho(0) * q(0) - 0.1 * v(0), -9.81 + 0.5 * rho(1) * std::sin(t) + 0.4 * rho(0) * q(0));
        f.F_q = m2(-rho(0), 0.0, 0.4 * rho(0), 0.0);
        f.F_v = m2(-0.1, 0.0, 0.0, 0.0);
        f.F_rho = m2(-q(0), 0.0, 0.4 * q(0), 0.5 * std::sin(t));
        if (regime == 1) {
            f.F += v2(2.0 * rho(1), -3.0 * rho(0));
            f.F_rho += m2(0.0, 2.0, -3.0, 0.0);
        }
        return f;
    };
    m.running_cost = [](double, const Vector& q, const Vector& v, const Vector& vdot, const Vector&,
                        const Vector& rho) {
        RunningCostEval r;
        r.g = v(0) * v(0) + q(1) * v(1) + 0.1 * vdot(1) + 0.05 * rho(0) * q(0);
        r.g_q = RowVector(2);
        r.g_q << 0.05 * rho(0), v(1);
        r.g_v = RowVector(2);
        r.g_v << 2.0 * v(0), q(1);
        r.g_vdot = RowVector(2);
        r.g_vdot << 0.0, 0.1;
        r.g_lambda = RowVector(0);
        r.g_rho = RowVector(2);
        r.g_rho << 0.05 * q(0), 0.0;
        return r;
    };
    m.initial_conditions = [](const Vector& rho) {
        InitialConditions ic;
        ic.q0 = v2(0.5, 1.0 + rho(1));
        ic.v0 = v2(0.3 * rho(0), 0.0);
        ic.dq0 = m2(0.0, 0.0, 0.0, 1.0);
        ic.dv0 = m2(0.3, 0.0, 0.0, 0.0);
        return ic;
    };
    EventFunction ev;
    ev.direction = Crossing::Falling;
    if (kind == ParticleEvent::Impact) {
        ev.name = "floor";
        ev.r = [](const Vector& q) { return EventValue{q(1), RowVector::Unit(2, 1)}; };
        ev.kind = JumpKind::VelocityJump;
        ev.jump = [](double t, const Vector& q, const Vector& v, const Vector& rho) {
            JumpEval h;
            double e = 0.5 + 0.2 * rho(0);
            h.v_plus = v2(v(0) + 0.3 * v(1) + 0.1 * rho(1) * q(0) + 0.05 * t, -e * v(1));
            h.h_t = v2(0.05, 0.0);
            h.h_q = m2(0.1 * rho(1), 0.0, 0.0, 0.0);
            h.h_v = m2(1.0, 0.3, 0.0, -e);
            h.h_rho = m2(0.0, 0.1 * q(0), -0.2 * v(1), 0.0);
            return h;
        };
    } else {
        ev.name = "switch";
        ev.r = [](const Vector& q) { return EventValue{q(1) - 0.5, RowVector::Unit(2, 1)}; };
        ev.kind = JumpKind::AccelChange;
        ev.post_regime = 1;
        ev.active_regimes = {0};
    }
    m.events.push_back(ev);
    finalize_model(m);
    return m;
}

double BallClosedForm::t_eve(double h0) const { return std::sqrt(2.0 * h0 / g); }

double BallClosedForm::q(double t, double h0) const {
    double te = t_eve(h0);
    if (t < te) return h0 - 0.5 * g * t * t;
    double tau = t - te;
    return g * te * tau - 0.5 * g * tau * tau;
}

double BallClosedForm::v(double t, double h0) const {
    double te = t_eve(h0);
    if (t < te) return -g * t;
    return g * te - g * (t - te);
}

TwinEstimate twin_estimate(const ModelDefinition& model, const Formulation& form, const IntegratorConfig& cfg,
                           const Vector& rho, int param, double d, double t0, double t_search) {
    Vector ra = rho, rb = rho;
    ra(param) -= 0.5 * d;
    rb(param) += 0.5 * d;
    TrajectoryArchive A = propagate_hybrid(model, form, cfg, ra, t0, t_search);
    TrajectoryArchive B = propagate_hybrid(model, form, cfg, rb, t0, t_search);
    if (A.events.empty() || B.events.empty()) throw std::runtime_error("twin run without an event");
    bool a_first = A.events[0].t_eve <= B.events[0].t_eve;
    const Vector& r_early = a_first ? ra : rb;
    const Vector& r_late = a_first ? rb : ra;
    const EventRecord& e_early = (a_first ? A : B).events[0];
    const EventRecord& e_late = (a_first ? B : A).events[0];
    const double s = r_late(param) - r_early(param);
    const double te = e_early.t_eve, tl = e_late.t_eve;

    // each twin sampled at the other's event time: early is past its event at tl,
    // late has not reached its event at te
    auto sample_at = [&](const Vector& r, double ts) {
        IntegratorConfig c = cfg;
        c.sample_times = {ts};
        StateSeries ss = state_series(propagate_hybrid(model, form, c, r, t0, t_search));
        for (size_t k = 0; k < ss.t.size(); ++k)
            if (ss.t[k] == ts) return HybridState{ts, ss.q[k], ss.v[k], ss.z[k], 0};
        throw std::runtime_error("twin sample missing");
    };
    const HybridState x_early_tl = sample_at(r_early, tl);
    const HybridState x_late_te = sample_at(r_late, te);

    TwinEstimate out;
    out.dtdrho = (tl - te) / s;
    out.Q_minus = (x_late_te.q - e_early.state_pre.q) / s;
    out.Q_plus = (e_late.state_post.q - x_early_tl.q) / s;
    out.V_plus = (e_late.state_post.v - x_early_tl.v) / s;
    out.Z_plus = (e_late.state_post.z - x_early_tl.z) / s;
    return out;
}

double observed_order(const std::vector<double>& steps, const std::vector<double>& errs) {
    const double n = static_cast<double>(steps.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < steps.size(); ++i) {
        double x = std::log(steps[i]), y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h) {
    Vector f0 = f(x);
    Matrix J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        double step = h * (1.0 + std::abs(x(j)));
        Vector xp = x, xm = x;
        xp(j) += step;
        xm(j) -= step;
        J.col(j) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return J;
}

double rel_err(const Matrix& a, const Matrix& b, double floor) {
    if (a.size() == 0 && b.size() == 0) return 0.0;
    double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

IntegratorConfig tight_config() {
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 1e-14;
    cfg.event_tol = 1e-14;
    return cfg;
}

HybridState feasible_state(const ModelDefinition& model, const Vector& rho, unsigned seed, double spread) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    InitialConditions ic = model.initial_conditions(rho);
    HybridState s{0.0, ic.q0, ic.v0, 0.0, 0};
    const int n = model.dims.n;
    if (model.m_in(0) == 0) {
        for (int i = 0; i < n; ++i) {
            s.q(i) += spread * U(gen);
            s.v(i) = U(gen);
        }
        return s;
    }
    ConstraintEval c = model.constraints(0.0, s.q, rho, 0);
    auto hint = model.hint_for(0);
    CoordinatePartition part = partition_coordinates(c.phi_q, 1e-8, hint);
    for (int j : part.dof) s.q(j) += spread * U(gen);
    s.q = project_positions(model, 0.0, s.q, rho, 0, part);
    c = model.constraints(0.0, s.q, rho, 0);
    part = partition_coordinates(c.phi_q, 1e-8, hint);
    Vector v_dof(part.f());
    for (int j = 0; j < part.f(); ++j) v_dof(j) = U(gen);
    s.v = part.assemble(resolve_dependent_velocity(part, c.phi_t, v_dof), v_dof);
    return s;
}

}  // namespace testsupport
