#include "hybridsens/models.hpp"
#include "hybridsens/partition.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace hybridsens {

namespace {

void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigurationError(std::string(what) + " must be positive and finite");
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

}  // namespace

// ---------------------------------------------------------------- ball

ModelDefinition build_bouncing_ball(const BallConfig& c) {
    require_positive(c.h0, "h0");
    require_positive(c.gravity, "gravity");
    require_positive(c.mass, "mass");
    if (!(c.restitution >= 0.0 && c.restitution <= 1.0)) throw ConfigurationError("restitution must lie in [0, 1]");
    ModelDefinition m;
    m.name = "bouncing_ball";
    m.dims = {1, 0, 1, 1};
    m.parameter_names = {"h0"};
    m.nominal_rho = Vector::Constant(1, c.h0);
    m.mass = [c](double, const Vector&, const Vector&) { return Matrix::Constant(1, 1, c.mass); };
    m.force = [c](double, const Vector&, const Vector&, const Vector&, int) {
        return ForceEval{Vector::Constant(1, -c.mass * c.gravity), Matrix::Zero(1, 1), Matrix::Zero(1, 1),
                         Matrix::Zero(1, 1)};
    };
    m.initial_conditions = [](const Vector& rho) {
        return InitialConditions{Vector::Constant(1, rho(0)), Vector::Zero(1), Matrix::Ones(1, 1), Matrix::Zero(1, 1)};
    };

    EventFunction ground;
    ground.name = "ground";
    ground.r = [](const Vector& q) { return EventValue{q(0), RowVector::Ones(1)}; };
    ground.direction = Crossing::Falling;
    ground.kind = JumpKind::VelocityJump;
    const double e = c.restitution;
    ground.jump = [e](double, const Vector&, const Vector& v, const Vector&) {
        return JumpEval{Vector::Constant(1, -e * v(0)), Vector::Zero(1), Matrix::Zero(1, 1),
                        Matrix::Constant(1, 1, -e), Matrix::Zero(1, 1)};
    };
    m.events.push_back(ground);

    const BallCost cost = c.running_cost;
    if (cost != BallCost::None) {
        m.running_cost = [cost](double, const Vector& q, const Vector& v, const Vector& a, const Vector& lam,
                                const Vector&) {
            RunningCostEval g{0.0, RowVector::Zero(1), RowVector::Zero(1), RowVector::Zero(1),
                              RowVector::Zero(lam.size()), RowVector::Zero(1)};
            switch (cost) {
            case BallCost::Velocity: g.g = v(0); g.g_v(0) = 1.0; break;
            case BallCost::Acceleration: g.g = a(0); g.g_vdot(0) = 1.0; break;
            case BallCost::Position: g.g = q(0); g.g_q(0) = 1.0; break;
            case BallCost::None: break;
            }
            return g;
        };
    }
    if (c.terminal_position) {
        m.terminal_cost = [](double, const Vector& q, const Vector&, const Vector&) {
            return TerminalCostEval{q(0), RowVector::Ones(1), RowVector::Zero(1), RowVector::Zero(1)};
        };
    }

    ComplexDynamics cd;
    cd.mass = [c](double, const CVector&, const CVector&) { return CMatrix::Constant(1, 1, c.mass); };
    cd.force = [c](double, const CVector&, const CVector&, const CVector&, int) {
        return CVector::Constant(1, -c.mass * c.gravity);
    };
    cd.initial_conditions = [](const CVector& rho) {
        return std::make_pair(CVector::Constant(1, rho(0)), CVector::Zero(1));
    };
    cd.running_cost = [cost](double, const CVector& q, const CVector& v, const CVector& a, const CVector&,
                             const CVector&) -> cplx {
        switch (cost) {
        case BallCost::Velocity: return v(0);
        case BallCost::Acceleration: return a(0);
        case BallCost::Position: return q(0);
        case BallCost::None: break;
        }
        return 0.0;
    };
    m.complex = cd;
    finalize_model(m);
    return m;
}

// ---------------------------------------------------------------- five-bar

namespace {

// Point ids: -1 anchor A, -2 anchor B, 0..2 moving points 1..3.
struct Bar {
    int a, b;
    double L;
};

struct Spring {
    int anchor, point;
    double k;
    int param;
};

struct FiveBarGeometry {
    FiveBarConfig cfg;
    std::array<double, 3> mass{};
    std::array<Bar, 4> bars{};
    std::array<Spring, 2> springs{};

    explicit FiveBarGeometry(const FiveBarConfig& c) : cfg(c) {
        mass = {0.5 * (c.bar_mass[0] + c.bar_mass[1]), 0.5 * (c.bar_mass[1] + c.bar_mass[2]),
                0.5 * (c.bar_mass[2] + c.bar_mass[3])};
        bars = {Bar{-1, 0, c.LA1}, Bar{0, 1, c.L21}, Bar{1, 2, c.L32}, Bar{2, -2, c.LB3}};
        springs = {Spring{-1, 2, c.k1, 0}, Spring{-2, 1, c.k2, 1}};
    }

    template <class S> std::array<S, 2> pos(const VecT<S>& q, int id) const {
        if (id == -1) return {S(cfg.qA[0]), S(cfg.qA[1])};
        if (id == -2) return {S(cfg.qB[0]), S(cfg.qB[1])};
        return {q(2 * id), q(2 * id + 1)};
    }

    template <class S> std::array<S, 2> vel(const VecT<S>& v, int id) const {
        if (id < 0) return {S(0.0), S(0.0)};
        return {v(2 * id), v(2 * id + 1)};
    }

    template <class S> VecT<S> force(const VecT<S>& q, const VecT<S>& rho) const {
        VecT<S> F = VecT<S>::Zero(6);
        for (int i = 0; i < 3; ++i) F(2 * i + 1) -= mass[i] * cfg.gravity;
        for (const auto& s : springs) {
            auto a = pos(q, s.anchor);
            auto b = pos(q, s.point);
            S dx = b[0] - a[0], dy = b[1] - a[1];
            using std::sqrt;
            S l = sqrt(dx * dx + dy * dy);
            S f = -s.k * (l - rho(s.param)) / l;
            F(2 * s.point) += f * dx;
            F(2 * s.point + 1) += f * dy;
        }
        return F;
    }

    template <class S> ConstraintValuesT<S> values(const VecT<S>& q, const VecT<S>& v) const {
        ConstraintValuesT<S> c;
        c.phi = VecT<S>::Zero(4);
        c.phi_q = MatT<S>::Zero(4, 6);
        c.phi_t = VecT<S>::Zero(4);
        c.gamma = VecT<S>::Zero(4);
        for (int i = 0; i < 4; ++i) {
            const Bar& bar = bars[i];
            auto pa = pos(q, bar.a), pb = pos(q, bar.b);
            auto va = vel(v, bar.a), vb = vel(v, bar.b);
            S dx = pa[0] - pb[0], dy = pa[1] - pb[1];
            S ux = va[0] - vb[0], uy = va[1] - vb[1];
            c.phi(i) = dx * dx + dy * dy - bar.L * bar.L;
            if (bar.a >= 0) {
                c.phi_q(i, 2 * bar.a) += 2.0 * dx;
                c.phi_q(i, 2 * bar.a + 1) += 2.0 * dy;
            }
            if (bar.b >= 0) {
                c.phi_q(i, 2 * bar.b) -= 2.0 * dx;
                c.phi_q(i, 2 * bar.b + 1) -= 2.0 * dy;
            }
            c.gamma(i) = 2.0 * (ux * ux + uy * uy);
        }
        return c;
    }

    // Places +s*w on the columns of a and -s*w on those of b in row i.
    void scatter(Matrix& out, int i, const Bar& bar, double wx, double wy) const {
        if (bar.a >= 0) {
            out(i, 2 * bar.a) += wx;
            out(i, 2 * bar.a + 1) += wy;
        }
        if (bar.b >= 0) {
            out(i, 2 * bar.b) -= wx;
            out(i, 2 * bar.b + 1) -= wy;
        }
    }

    // d(Phi_q u)/dq
    Matrix jvp(const Vector& u) const {
        Matrix out = Matrix::Zero(4, 6);
        for (int i = 0; i < 4; ++i) {
            auto ua = vel(u, bars[i].a), ub = vel(u, bars[i].b);
            scatter(out, i, bars[i], 2.0 * (ua[0] - ub[0]), 2.0 * (ua[1] - ub[1]));
        }
        return out;
    }

    // d(Phi_q^T y)/dq
    Matrix vjp(const Vector& y) const {
        Matrix out = Matrix::Zero(6, 6);
        for (int i = 0; i < 4; ++i) {
            const Bar& bar = bars[i];
            for (int ax = 0; ax < 2; ++ax) {
                int ca = bar.a >= 0 ? 2 * bar.a + ax : -1;
                int cb = bar.b >= 0 ? 2 * bar.b + ax : -1;
                if (ca >= 0) out(ca, ca) += 2.0 * y(i);
                if (cb >= 0) out(cb, cb) += 2.0 * y(i);
                if (ca >= 0 && cb >= 0) {
                    out(ca, cb) -= 2.0 * y(i);
                    out(cb, ca) -= 2.0 * y(i);
                }
            }
        }
        return out;
    }
};

}  // namespace

ModelDefinition build_five_bar(const FiveBarConfig& c) {
    for (double L : {c.LA1, c.L21, c.L32, c.LB3, c.L01, c.L02}) require_positive(L, "five-bar lengths");
    for (double mb : c.bar_mass) require_positive(mb, "bar masses");
    if (!(c.k1 >= 0.0 && c.k2 >= 0.0)) throw ConfigurationError("spring stiffness must be non-negative");
    if (!(c.restitution >= 0.0 && c.restitution <= 1.0)) throw ConfigurationError("restitution must lie in [0, 1]");
    auto geo = std::make_shared<FiveBarGeometry>(c);
    ModelDefinition m;
    m.name = "five_bar";
    m.dims = {6, 4, 2, 1};
    m.parameter_names = {"L01", "L02"};
    m.nominal_rho = Vector(2);
    m.nominal_rho << c.L01, c.L02;

    Vector diag(6);
    diag << geo->mass[0], geo->mass[0], geo->mass[1], geo->mass[1], geo->mass[2], geo->mass[2];
    Matrix M = diag.asDiagonal();
    m.mass = [M](double, const Vector&, const Vector&) { return M; };

    m.force = [geo](double, const Vector& q, const Vector& v, const Vector& rho, int) {
        ForceEval fe;
        fe.F = geo->force<double>(q, rho);
        fe.F_q = Matrix::Zero(6, 6);
        fe.F_v = Matrix::Zero(6, v.size());
        fe.F_rho = Matrix::Zero(6, 2);
        for (const auto& s : geo->springs) {
            auto a = geo->pos<double>(q, s.anchor);
            auto b = geo->pos<double>(q, s.point);
            Eigen::Vector2d d(b[0] - a[0], b[1] - a[1]);
            double l = d.norm(), L0 = rho(s.param);
            Eigen::Matrix2d K = -s.k * ((1.0 - L0 / l) * Eigen::Matrix2d::Identity() + (L0 / (l * l * l)) * d * d.transpose());
            fe.F_q.block<2, 2>(2 * s.point, 2 * s.point) += K;
            fe.F_rho.block<2, 1>(2 * s.point, s.param) += s.k * d / l;
        }
        return fe;
    };

    m.constraints = [geo](double, const Vector& q, const Vector& rho, int) {
        auto cv = geo->values<double>(q, Vector::Zero(6));
        ConstraintEval ce;
        ce.phi = cv.phi;
        ce.phi_q = cv.phi_q;
        ce.phi_t = Vector::Zero(4);
        ce.phi_rho = Matrix::Zero(4, rho.size());
        ce.phi_tq = Matrix::Zero(4, 6);
        ce.phi_tt = Vector::Zero(4);
        ce.phi_trho = Matrix::Zero(4, rho.size());
        return ce;
    };
    m.constraint_jvp = [geo](double, const Vector&, const Vector& rho, int, const Vector& u) {
        return Contraction{geo->jvp(u), Matrix::Zero(4, rho.size())};
    };
    m.constraint_vjp = [geo](double, const Vector&, const Vector& rho, int, const Vector& y) {
        return Contraction{geo->vjp(y), Matrix::Zero(6, rho.size())};
    };
    m.convective = [geo](double, const Vector& q, const Vector& v, const Vector& rho, int) {
        ConvectiveEval ce;
        ce.gamma = geo->values<double>(q, v).gamma;
        ce.gamma_q = Matrix::Zero(4, 6);
        ce.gamma_v = 2.0 * geo->jvp(v);
        ce.gamma_rho = Matrix::Zero(4, rho.size());
        return ce;
    };

    Vector q0 = Eigen::Map<const Vector>(c.q0.data(), 6);
    Vector v0 = Eigen::Map<const Vector>(c.v0.data(), 6);
    {
        // phi rows are squared-length residuals; compare as lengths
        const double Lmin = std::min({c.LA1, c.L21, c.L32, c.LB3});
        auto ce = m.constraints(0.0, q0, m.nominal_rho, 0);
        const double off = ce.phi.cwiseAbs().maxCoeff() / (2.0 * Lmin);
        if (!(off <= 1e-3))
            throw ConfigurationError("five-bar q0 misses the bar lengths by " + std::to_string(off));
        if (off > 1e-12) {
            // small mismatch, e.g. lengths given to four digits: snap onto the manifold, point 2 fixed
            const std::vector<int> pref{2, 3};
            auto part = partition_coordinates(ce.phi_q, 1e-8, pref);
            q0 = project_positions(m, 0.0, q0, m.nominal_rho, 0, part);
        }
    }
    m.initial_conditions = [q0, v0](const Vector& rho) {
        return InitialConditions{q0, v0, Matrix::Zero(6, rho.size()), Matrix::Zero(6, rho.size())};
    };
    m.dof_hint = [](int) { return std::vector<int>{2, 3}; };

    EventFunction ground;
    ground.name = "point2_ground";
    const double yg = c.ground;
    ground.r = [yg](const Vector& q) {
        RowVector g = RowVector::Zero(6);
        g(3) = 1.0;
        return EventValue{q(3) - yg, g};
    };
    ground.direction = Crossing::Falling;
    ground.kind = JumpKind::VelocityJump;
    const double e = c.restitution;
    ground.jump = [e](double, const Vector&, const Vector& vd, const Vector& rho) {
        JumpEval h;
        h.v_plus = Vector(2);
        h.v_plus << vd(0), -e * vd(1);
        h.h_t = Vector::Zero(2);
        h.h_q = Matrix::Zero(2, 6);
        h.h_v = Matrix::Zero(2, 2);
        h.h_v(0, 0) = 1.0;
        h.h_v(1, 1) = -e;
        h.h_rho = Matrix::Zero(2, rho.size());
        return h;
    };
    m.events.push_back(ground);

    const FiveBarCost cost = c.running_cost;
    if (cost != FiveBarCost::None) {
        m.running_cost = [cost](double, const Vector&, const Vector& v, const Vector& a, const Vector& lam,
                                const Vector& rho) {
            RunningCostEval g{0.0, RowVector::Zero(6), RowVector::Zero(6), RowVector::Zero(6),
                              RowVector::Zero(lam.size()), RowVector::Zero(rho.size())};
            if (cost == FiveBarCost::Y2Velocity) {
                g.g = v(3);
                g.g_v(3) = 1.0;
            } else {
                g.g = a(3);
                g.g_vdot(3) = 1.0;
            }
            return g;
        };
    }

    ComplexDynamics cd;
    CMatrix cM = M.cast<cplx>();
    cd.mass = [cM](double, const CVector&, const CVector&) { return cM; };
    cd.force = [geo](double, const CVector& q, const CVector&, const CVector& rho, int) { return geo->force<cplx>(q, rho); };
    cd.constraints = [geo](double, const CVector& q, const CVector& v, const CVector&, int) {
        return geo->values<cplx>(q, v);
    };
    cd.running_cost = [cost](double, const CVector&, const CVector& v, const CVector& a, const CVector&,
                             const CVector&) -> cplx {
        if (cost == FiveBarCost::Y2Velocity) return v(3);
        if (cost == FiveBarCost::Y2Acceleration) return a(3);
        return 0.0;
    };
    cd.initial_conditions = [q0, v0](const CVector&) {
        return std::make_pair(CVector(q0.cast<cplx>()), CVector(v0.cast<cplx>()));
    };
    m.complex = cd;
    finalize_model(m);
    return m;
}

// ---------------------------------------------------------------- pendulum

namespace {

// Pivot and string length of a regime: the peg regime swings about (0, -d)
// with length L - d.
template <class S> std::pair<S, S> pivot_and_length(const VecT<S>& rho, int regime) {
    if (regime == 1) return {-rho(1), rho(0) - rho(1)};
    return {S(0.0), rho(0)};
}

template <class S> ConstraintValuesT<S> pendulum_values(const VecT<S>& q, const VecT<S>& v, const VecT<S>& rho,
                                                        int regime) {
    auto [py, L] = pivot_and_length<S>(rho, regime);
    ConstraintValuesT<S> c;
    S dy = q(1) - py;
    c.phi = VecT<S>::Constant(1, q(0) * q(0) + dy * dy - L * L);
    c.phi_q = MatT<S>(1, 2);
    c.phi_q << 2.0 * q(0), 2.0 * dy;
    c.phi_t = VecT<S>::Zero(1);
    c.gamma = VecT<S>::Constant(1, 2.0 * (v(0) * v(0) + v(1) * v(1)));
    return c;
}

}  // namespace

ModelDefinition build_pendulum(const PendulumConfig& c) {
    require_positive(c.mass, "mass");
    require_positive(c.length, "length");
    if (!(c.gravity >= 0.0)) throw ConfigurationError("gravity must be non-negative");
    if (!(c.restitution >= 0.0 && c.restitution <= 1.0)) throw ConfigurationError("restitution must lie in [0, 1]");
    if (c.peg_depth && !(*c.peg_depth > 0.0 && *c.peg_depth < c.length))
        throw ConfigurationError("peg_depth must lie strictly between 0 and the length");
    if (c.wall_x && !(std::abs(*c.wall_x) < c.length))
        throw ConfigurationError("wall_x must lie inside the reach of the pendulum");
    const bool peg = c.peg_depth.has_value();
    const int p = peg ? 2 : 1;
    ModelDefinition m;
    m.name = "pendulum";
    m.dims = {2, 1, p, 0};
    m.parameter_names = {"L"};
    m.nominal_rho = Vector(p);
    m.nominal_rho(0) = c.length;
    if (peg) {
        m.parameter_names.push_back("d");
        m.nominal_rho(1) = *c.peg_depth;
    }
    const double mass = c.mass, g = c.gravity;
    m.mass = [mass](double, const Vector&, const Vector&) { return Matrix(mass * Matrix::Identity(2, 2)); };
    m.force = [mass, g, p](double, const Vector&, const Vector&, const Vector&, int) {
        return ForceEval{vec2(0.0, -mass * g), Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, p)};
    };
    m.constraints = [p](double, const Vector& q, const Vector& rho, int regime) {
        auto cv = pendulum_values<double>(q, Vector::Zero(2), rho, regime);
        ConstraintEval ce;
        ce.phi = cv.phi;
        ce.phi_q = cv.phi_q;
        ce.phi_t = Vector::Zero(1);
        ce.phi_rho = Matrix::Zero(1, p);
        if (regime == 1) {
            double d = rho(1), L = rho(0);
            ce.phi_rho(0, 0) = -2.0 * (L - d);
            ce.phi_rho(0, 1) = 2.0 * (q(1) + d) + 2.0 * (L - d);
        } else {
            ce.phi_rho(0, 0) = -2.0 * rho(0);
        }
        ce.phi_tq = Matrix::Zero(1, 2);
        ce.phi_tt = Vector::Zero(1);
        ce.phi_trho = Matrix::Zero(1, p);
        return ce;
    };
    m.constraint_jvp = [p](double, const Vector&, const Vector&, int regime, const Vector& u) {
        Contraction out{Matrix(1, 2), Matrix::Zero(1, p)};
        out.wrt_q << 2.0 * u(0), 2.0 * u(1);
        if (regime == 1) out.wrt_rho(0, 1) = 2.0 * u(1);
        return out;
    };
    m.constraint_vjp = [p](double, const Vector&, const Vector&, int regime, const Vector& y) {
        Contraction out{2.0 * y(0) * Matrix::Identity(2, 2), Matrix::Zero(2, p)};
        if (regime == 1) out.wrt_rho(1, 1) = 2.0 * y(0);
        return out;
    };
    m.convective = [p](double, const Vector&, const Vector& v, const Vector&, int) {
        ConvectiveEval ce;
        ce.gamma = Vector::Constant(1, 2.0 * v.squaredNorm());
        ce.gamma_q = Matrix::Zero(1, 2);
        ce.gamma_v = 4.0 * v.transpose();
        ce.gamma_rho = Matrix::Zero(1, p);
        return ce;
    };

    const double th = c.theta0, om = c.omega0;
    m.initial_conditions = [th, om, p](const Vector& rho) {
        double L = rho(0);
        InitialConditions ic;
        ic.q0 = vec2(L * std::sin(th), -L * std::cos(th));
        ic.v0 = vec2(L * om * std::cos(th), L * om * std::sin(th));
        ic.dq0 = Matrix::Zero(2, p);
        ic.dv0 = Matrix::Zero(2, p);
        ic.dq0.col(0) << std::sin(th), -std::cos(th);
        ic.dv0.col(0) << om * std::cos(th), om * std::sin(th);
        return ic;
    };
    m.dof_hint = [](int) { return std::vector<int>{0}; };

    auto x_event = [](double offset) {
        return [offset](const Vector& q) { return EventValue{q(0) - offset, RowVector::Unit(2, 0)}; };
    };
    if (c.wall_x) {
        EventFunction wall;
        wall.name = "wall";
        wall.r = x_event(*c.wall_x);
        wall.direction = Crossing::Rising;
        wall.kind = JumpKind::VelocityJump;
        const double e = c.restitution;
        wall.jump = [e, p](double, const Vector&, const Vector& vd, const Vector&) {
            return JumpEval{Vector::Constant(1, -e * vd(0)), Vector::Zero(1), Matrix::Zero(1, 2),
                            Matrix::Constant(1, 1, -e), Matrix::Zero(1, p)};
        };
        m.events.push_back(wall);
    }
    if (peg) {
        EventFunction on;
        on.name = "peg_engage";
        on.r = x_event(0.0);
        on.direction = Crossing::Rising;
        on.active_regimes = {0};
        on.kind = JumpKind::ConstraintChange;
        on.post_regime = 1;
        EventFunction off = on;
        off.name = "peg_release";
        off.direction = Crossing::Falling;
        off.active_regimes = {1};
        off.post_regime = 0;
        m.events.push_back(on);
        m.events.push_back(off);
    }

    const PendulumCost cost = c.running_cost;
    if (cost != PendulumCost::None) {
        m.running_cost = [cost, p](double, const Vector& q, const Vector&, const Vector&, const Vector& lam,
                                   const Vector&) {
            RunningCostEval r{0.0, RowVector::Zero(2), RowVector::Zero(2), RowVector::Zero(2),
                              RowVector::Zero(lam.size()), RowVector::Zero(p)};
            if (cost == PendulumCost::Height) {
                r.g = q(1);
                r.g_q(1) = 1.0;
            } else if (lam.size() > 0) {
                r.g = lam(0);
                r.g_lambda(0) = 1.0;
            }
            return r;
        };
    }

    ComplexDynamics cd;
    cd.mass = [mass](double, const CVector&, const CVector&) { return CMatrix(mass * CMatrix::Identity(2, 2)); };
    cd.force = [mass, g](double, const CVector&, const CVector&, const CVector&, int) {
        CVector F(2);
        F << 0.0, -mass * g;
        return F;
    };
    cd.constraints = [](double, const CVector& q, const CVector& v, const CVector& rho, int regime) {
        return pendulum_values<cplx>(q, v, rho, regime);
    };
    cd.running_cost = [cost](double, const CVector& q, const CVector&, const CVector&, const CVector& lam,
                             const CVector&) -> cplx {
        if (cost == PendulumCost::Height) return q(1);
        if (cost == PendulumCost::Multiplier && lam.size() > 0) return lam(0);
        return 0.0;
    };
    cd.initial_conditions = [th, om](const CVector& rho) {
        cplx L = rho(0);
        CVector q(2), v(2);
        q << L * std::sin(th), -L * std::cos(th);
        v << L * om * std::cos(th), L * om * std::sin(th);
        return std::make_pair(q, v);
    };
    m.complex = cd;
    finalize_model(m);
    return m;
}

}  // namespace hybridsens
