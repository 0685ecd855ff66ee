#include "hybridsens/model.hpp"

#include <algorithm>
#include <iostream>
#include <random>
#include <sstream>

#include "hybridsens/partition.hpp"

namespace hybridsens {

namespace {

std::function<void(std::string_view)>& sink() {
    static std::function<void(std::string_view)> s = [](std::string_view msg) { std::clog << msg << '\n'; };
    return s;
}

}  // namespace

void set_log_sink(std::function<void(std::string_view)> s) { sink() = std::move(s); }

void log_message(std::string_view msg) {
    if (sink()) sink()(msg);
}

void Dimensions::validate() const {
    if (n < 1) throw DimensionError("model needs at least one coordinate");
    if (m < 0 || m >= n) throw DimensionError("constraint count must lie in [0, n)");
    if (p < 1) throw DimensionError("model needs at least one parameter");
    if (e < 0) throw DimensionError("negative event count");
}

const char* to_string(JumpKind k) {
    switch (k) {
    case JumpKind::VelocityJump: return "velocity_jump";
    case JumpKind::AccelChange: return "accel_change";
    case JumpKind::ConstraintChange: return "constraint_change";
    case JumpKind::DaeImpulse: return "dae_impulse";
    case JumpKind::EomTransition: return "eom_transition";
    }
    return "unknown";
}

bool EventFunction::active_in(int regime) const {
    return active_regimes.empty() ||
           std::find(active_regimes.begin(), active_regimes.end(), regime) != active_regimes.end();
}

Contraction ModelDefinition::phi_vjp(double t, const Vector& q, const Vector& rho, int regime, const Vector& y) const {
    if (constraint_vjp) return constraint_vjp(t, q, rho, regime, y);
    const int n = dims.n, p = static_cast<int>(rho.size());
    Contraction out{Matrix::Zero(n, n), Matrix::Zero(n, p)};
    for (int j = 0; j < n; ++j) {
        Contraction c = constraint_jvp(t, q, rho, regime, Vector::Unit(n, j));
        out.wrt_q.row(j) = y.transpose() * c.wrt_q;
        out.wrt_rho.row(j) = y.transpose() * c.wrt_rho;
    }
    return out;
}

void finalize_model(ModelDefinition& model) {
    model.dims.e = static_cast<int>(model.events.size());
    model.dims.validate();
    if (!model.mass || !model.force || !model.initial_conditions)
        throw ConfigurationError("model '" + model.name + "' lacks mass, force or initial conditions");
    const int n = model.dims.n;
    if (!model.mass_jvp) {
        model.mass_jvp = [n](double, const Vector&, const Vector& rho, const Vector&) {
            return Contraction{Matrix::Zero(n, n), Matrix::Zero(n, rho.size())};
        };
    }
    bool constrained = model.dims.m > 0;
    if (model.constraint_count) {
        for (int r = 0; r < 8 && !constrained; ++r) constrained = model.constraint_count(r) > 0;
    }
    if (constrained && (!model.constraints || !model.constraint_jvp || !model.convective))
        throw ConfigurationError("constrained model '" + model.name + "' lacks constraint callbacks");
    if (model.nominal_rho.size() != model.dims.p) throw DimensionError("nominal parameter vector has wrong length");
    if (model.parameter_names.empty())
        for (int i = 0; i < model.dims.p; ++i) model.parameter_names.push_back("rho" + std::to_string(i));
}

void EventRecord::check() const {
    if (state_pre.q.size() != state_post.q.size() || state_pre.q != state_post.q)
        throw EvaluationError("event record changes the position across the event");
    if (state_pre.t != state_post.t) throw EvaluationError("event record has distinct pre/post times");
}

Vector pack_canonical(const HybridState& s, const SensitivityBundle& sens) {
    const auto n = s.q.size();
    const auto p = sens.Q.cols();
    if (s.v.size() != n || sens.Q.rows() != n || sens.V.rows() != n || sens.V.cols() != p || sens.Z.size() != p)
        throw DimensionError("inconsistent state/sensitivity sizes");
    Vector x((2 * n + 1) * (p + 1));
    x.head(n) = s.q;
    x.segment(n, n) = s.v;
    x(2 * n) = s.z;
    Eigen::Index o = 2 * n + 1;
    x.segment(o, n * p) = Eigen::Map<const Vector>(sens.Q.data(), n * p);
    o += n * p;
    x.segment(o, n * p) = Eigen::Map<const Vector>(sens.V.data(), n * p);
    o += n * p;
    x.segment(o, p) = sens.Z.transpose();
    return x;
}

void unpack_canonical(const Vector& x, const Dimensions& d, HybridState& s, SensitivityBundle& sens) {
    const int n = d.n, p = d.p;
    if (x.size() != d.canonical_size()) throw DimensionError("canonical vector has wrong length");
    s.q = x.head(n);
    s.v = x.segment(n, n);
    s.z = x(2 * n);
    Eigen::Index o = 2 * n + 1;
    sens.Q = Eigen::Map<const Matrix>(x.data() + o, n, p);
    o += n * p;
    sens.V = Eigen::Map<const Matrix>(x.data() + o, n, p);
    o += n * p;
    sens.Z = x.segment(o, p).transpose();
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    os.precision(3);
    for (const auto& e : entries)
        os << (e.pass ? "  ok    " : "  FAIL  ") << e.partial << "  max_rel_err=" << std::scientific << e.max_rel_error
           << '\n';
    os << (pass ? "model partials consistent" : "model partials inconsistent") << " (tol " << tolerance << ")\n";
    return os.str();
}

namespace {

// Central-difference Jacobian of f at x.
template <class F> Matrix fd_jacobian(F&& f, const Vector& x, double eps) {
    Vector f0 = f(x);
    Matrix jac(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double h = eps * (1.0 + std::abs(x(i)));
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        jac.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return jac;
}

template <class F> Vector fd_scalar(F&& f, double x, double eps) {
    double h = eps * (1.0 + std::abs(x));
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

class Checker {
public:
    explicit Checker(ValidationReport& r) : report_(r) {}

    void add(const std::string& name, const Matrix& analytic, const Matrix& fd, double value_scale) {
        ValidationEntry e;
        e.partial = name;
        if (analytic.rows() != fd.rows() || analytic.cols() != fd.cols()) {
            e.max_rel_error = std::numeric_limits<double>::infinity();
        } else if (analytic.size() > 0) {
            double denom = std::max({max_abs(fd), max_abs(analytic), 1e-3 * (1.0 + value_scale)});
            e.max_rel_error = max_abs(analytic - fd) / denom;
        }
        e.pass = e.max_rel_error <= report_.tolerance;
        report_.pass = report_.pass && e.pass;
        report_.entries.push_back(e);
    }

private:
    ValidationReport& report_;
};

Vector random_vector(std::mt19937& gen, Eigen::Index size) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x(size);
    for (Eigen::Index i = 0; i < size; ++i) x(i) = u(gen);
    return x;
}

Vector as_vec(double x) { return Vector::Constant(1, x); }

}  // namespace

ValidationReport validate_model(const ModelDefinition& model, const HybridState& probe, const Vector& rho,
                                double eps, double tolerance) {
    ValidationReport report;
    report.tolerance = tolerance;
    Checker check(report);
    const int n = model.dims.n;
    const double t = probe.t;
    const Vector& q = probe.q;
    const Vector& v = probe.v;
    const int regime = probe.regime;
    if (q.size() != n || v.size() != n || rho.size() != model.dims.p)
        throw DimensionError("probe state does not match model dimensions");
    std::mt19937 gen(7);

    Matrix M = model.mass(t, q, rho);
    if (M.rows() != n || M.cols() != n) throw DimensionError("mass matrix has wrong shape");
    double asym = max_abs(M - M.transpose()) / std::max(1.0, max_abs(M));
    Eigen::LLT<Matrix> llt(M);
    ValidationEntry spd{"M symmetric positive definite", asym, asym <= tolerance && llt.info() == Eigen::Success};
    report.pass = report.pass && spd.pass;
    report.entries.push_back(spd);

    Vector u = random_vector(gen, n);
    Contraction mj = model.mass_jvp(t, q, rho, u);
    auto mu_q = [&](const Vector& x) -> Vector { return model.mass(t, x, rho) * u; };
    auto mu_r = [&](const Vector& x) -> Vector { return model.mass(t, q, x) * u; };
    double ms = max_abs(M * u);
    check.add("M_q u", mj.wrt_q, fd_jacobian(mu_q, q, eps), ms);
    check.add("M_rho u", mj.wrt_rho, fd_jacobian(mu_r, rho, eps), ms);

    ForceEval fe = model.force(t, q, v, rho, regime);
    if (fe.F.size() != n) throw DimensionError("force vector has wrong length");
    double fs = max_abs(fe.F);
    check.add("F_q", fe.F_q, fd_jacobian([&](const Vector& x) { return model.force(t, x, v, rho, regime).F; }, q, eps), fs);
    check.add("F_v", fe.F_v, fd_jacobian([&](const Vector& x) { return model.force(t, q, x, rho, regime).F; }, v, eps), fs);
    check.add("F_rho", fe.F_rho, fd_jacobian([&](const Vector& x) { return model.force(t, q, v, x, regime).F; }, rho, eps),
              fs);

    const int m = model.m_in(regime);
    Vector lambda = Vector::Zero(m);
    if (m > 0) {
        ConstraintEval c = model.constraints(t, q, rho, regime);
        if (c.phi.size() != m || c.phi_q.rows() != m || c.phi_q.cols() != n)
            throw DimensionError("constraint evaluation has wrong shape");
        double cs = max_abs(c.phi_q);
        auto phi_of = [&](double tt, const Vector& x, const Vector& r) { return model.constraints(tt, x, r, regime); };
        check.add("Phi_q", c.phi_q, fd_jacobian([&](const Vector& x) { return phi_of(t, x, rho).phi; }, q, eps), cs);
        check.add("Phi_rho", c.phi_rho, fd_jacobian([&](const Vector& x) { return phi_of(t, q, x).phi; }, rho, eps),
                  cs);
        check.add("Phi_t", c.phi_t, fd_scalar([&](double x) { return phi_of(x, q, rho).phi; }, t, eps), cs);
        check.add("Phi_tq", c.phi_tq, fd_jacobian([&](const Vector& x) { return phi_of(t, x, rho).phi_t; }, q, eps),
                  cs);
        check.add("Phi_tt", c.phi_tt, fd_scalar([&](double x) { return phi_of(x, q, rho).phi_t; }, t, eps), cs);
        check.add("Phi_trho", c.phi_trho,
                  fd_jacobian([&](const Vector& x) { return phi_of(t, q, x).phi_t; }, rho, eps), cs);

        Contraction cj = model.constraint_jvp(t, q, rho, regime, u);
        check.add("Phi_qq u", cj.wrt_q,
                  fd_jacobian([&](const Vector& x) -> Vector { return phi_of(t, x, rho).phi_q * u; }, q, eps), cs);
        check.add("Phi_qrho u", cj.wrt_rho,
                  fd_jacobian([&](const Vector& x) -> Vector { return phi_of(t, q, x).phi_q * u; }, rho, eps), cs);
        Vector y = random_vector(gen, m);
        Contraction cv = model.phi_vjp(t, q, rho, regime, y);
        check.add("Phi_qq^T y", cv.wrt_q,
                  fd_jacobian([&](const Vector& x) -> Vector { return phi_of(t, x, rho).phi_q.transpose() * y; }, q,
                              eps),
                  cs);
        check.add("Phi_qrho^T y", cv.wrt_rho,
                  fd_jacobian([&](const Vector& x) -> Vector { return phi_of(t, q, x).phi_q.transpose() * y; }, rho,
                              eps),
                  cs);

        ConvectiveEval ce = model.convective(t, q, v, rho, regime);
        Contraction vj = model.constraint_jvp(t, q, rho, regime, v);
        Vector gamma_ref = vj.wrt_q * v + 2.0 * c.phi_tq * v + c.phi_tt;
        double gs = max_abs(ce.gamma) + cs;
        check.add("gamma", ce.gamma, gamma_ref, gs);
        auto gam = [&](double tt, const Vector& x, const Vector& w, const Vector& r) {
            return model.convective(tt, x, w, r, regime).gamma;
        };
        check.add("gamma_q", ce.gamma_q, fd_jacobian([&](const Vector& x) { return gam(t, x, v, rho); }, q, eps), gs);
        check.add("gamma_v", ce.gamma_v, fd_jacobian([&](const Vector& x) { return gam(t, q, x, rho); }, v, eps), gs);
        check.add("gamma_rho", ce.gamma_rho, fd_jacobian([&](const Vector& x) { return gam(t, q, v, x); }, rho, eps),
                  gs);
        lambda = random_vector(gen, m);
    }

    if (model.running_cost) {
        Vector vdot = random_vector(gen, n);
        RunningCostEval g = model.running_cost(t, q, v, vdot, lambda, rho);
        auto gv = [&](const Vector& a, const Vector& b, const Vector& c, const Vector& l, const Vector& r) {
            return as_vec(model.running_cost(t, a, b, c, l, r).g);
        };
        double s = std::abs(g.g);
        check.add("g_q", g.g_q, fd_jacobian([&](const Vector& x) { return gv(x, v, vdot, lambda, rho); }, q, eps), s);
        check.add("g_v", g.g_v, fd_jacobian([&](const Vector& x) { return gv(q, x, vdot, lambda, rho); }, v, eps), s);
        check.add("g_vdot", g.g_vdot, fd_jacobian([&](const Vector& x) { return gv(q, v, x, lambda, rho); }, vdot, eps),
                  s);
        if (m > 0)
            check.add("g_lambda", g.g_lambda,
                      fd_jacobian([&](const Vector& x) { return gv(q, v, vdot, x, rho); }, lambda, eps), s);
        check.add("g_rho", g.g_rho, fd_jacobian([&](const Vector& x) { return gv(q, v, vdot, lambda, x); }, rho, eps),
                  s);
    }
    if (model.terminal_cost) {
        TerminalCostEval w = model.terminal_cost(t, q, v, rho);
        auto wv = [&](const Vector& a, const Vector& b, const Vector& r) {
            return as_vec(model.terminal_cost(t, a, b, r).w);
        };
        double s = std::abs(w.w);
        check.add("w_q", w.w_q, fd_jacobian([&](const Vector& x) { return wv(x, v, rho); }, q, eps), s);
        check.add("w_v", w.w_v, fd_jacobian([&](const Vector& x) { return wv(q, x, rho); }, v, eps), s);
        check.add("w_rho", w.w_rho, fd_jacobian([&](const Vector& x) { return wv(q, v, x); }, rho, eps), s);
    }

    for (size_t k = 0; k < model.events.size(); ++k) {
        const EventFunction& ev = model.events[k];
        std::string tag = "event[" + std::to_string(k) + "] ";
        EventValue rv = ev.r(q);
        check.add(tag + "r_q", rv.r_q,
                  fd_jacobian([&](const Vector& x) { return as_vec(ev.r(x).r); }, q, eps), std::abs(rv.r));
        if (!ev.jump || !ev.active_in(regime)) continue;
        CoordinatePartition part = trivial_partition(n);
        if (m > 0) {
            auto hint = model.hint_for(regime);
            part = partition_coordinates(model.constraints(t, q, rho, regime).phi_q, 1e-8, hint);
        }
        Vector vd = part.rows_dof(v);
        JumpEval h = ev.jump(t, q, vd, rho);
        double s = max_abs(h.v_plus);
        auto hv = [&](double tt, const Vector& a, const Vector& b, const Vector& r) {
            return ev.jump(tt, a, b, r).v_plus;
        };
        check.add(tag + "h_t", h.h_t, fd_scalar([&](double x) { return hv(x, q, vd, rho); }, t, eps), s);
        check.add(tag + "h_q", h.h_q, fd_jacobian([&](const Vector& x) { return hv(t, x, vd, rho); }, q, eps), s);
        check.add(tag + "h_v", h.h_v, fd_jacobian([&](const Vector& x) { return hv(t, q, x, rho); }, vd, eps), s);
        check.add(tag + "h_rho", h.h_rho, fd_jacobian([&](const Vector& x) { return hv(t, q, vd, x); }, rho, eps), s);
    }

    InitialConditions ic = model.initial_conditions(rho);
    check.add("dq0/drho", ic.dq0,
              fd_jacobian([&](const Vector& x) { return model.initial_conditions(x).q0; }, rho, eps),
              max_abs(ic.q0));
    check.add("dv0/drho", ic.dv0,
              fd_jacobian([&](const Vector& x) { return model.initial_conditions(x).v0; }, rho, eps),
              max_abs(ic.v0));
    return report;
}

}  // namespace hybridsens
