#include <cmath>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace testsupport;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// kinetic + gravity + spring energy of the default five-bar, from its configuration
double five_bar_energy(const Vector& q, const Vector& v, const Vector& rho) {
    const double g = 9.81, k1 = 100.0, k2 = 100.0;
    const double mass[3] = {1.25, 1.5, 1.25};  // half of each adjacent bar
    double E = 0.0;
    for (int i = 0; i < 3; ++i) E += 0.5 * mass[i] * (v(2 * i) * v(2 * i) + v(2 * i + 1) * v(2 * i + 1)) + mass[i] * g * q(2 * i + 1);
    const double l1 = std::hypot(q(4) + 0.5, q(5)), l2 = std::hypot(q(2) - 0.5, q(3));
    E += 0.5 * k1 * (l1 - rho(0)) * (l1 - rho(0)) + 0.5 * k2 * (l2 - rho(1)) * (l2 - rho(1));
    return E;
}

}  // namespace

TEST_CASE("exponential decay", "[integrator]") {
    IntegratorConfig cfg;
    std::vector<SegmentEvent> none;
    SegmentResult r = integrate_segment([](double, const Vector& y) { return Vector(-y); }, 0.0, Vector::Ones(1), 1.0,
                                        none, {0.5, 1.0}, cfg);
    CHECK(r.triggered == -1);
    CHECK(r.t_stop == 1.0);
    CHECK_THAT(r.y_stop(0), WithinAbs(std::exp(-1.0), 1e-9));
    REQUIRE(r.ts.size() == 2);
    CHECK_THAT(r.ys[0](0), WithinAbs(std::exp(-0.5), 1e-9));
}

TEST_CASE("only the crossing event triggers", "[integrator]") {
    IntegratorConfig cfg;
    auto rhs = [](double, const Vector& y) {
        Vector d(2);
        d << y(1), -9.81;
        return d;
    };
    Vector y0(2);
    y0 << 1.0, 0.0;
    std::vector<SegmentEvent> ev(2);
    ev[0].value = [](double, const Vector& y) { return y(0) + 5.0; };  // never reached
    ev[1].value = [](double, const Vector& y) { return y(0); };
    ev[1].direction = Crossing::Falling;
    SegmentResult r = integrate_segment(rhs, 0.0, y0, 1.0, ev, {}, cfg);
    CHECK(r.triggered == 1);
    CHECK_THAT(r.t_stop, WithinAbs(std::sqrt(2.0 / 9.81), 1e-9));
    CHECK_THAT(r.t_stop, WithinAbs(0.451523, 1e-6));
}

TEST_CASE("step underflow is reported as stiffness", "[integrator]") {
    IntegratorConfig cfg;
    cfg.max_steps = 100000;
    std::vector<SegmentEvent> none;
    CHECK_THROWS_AS(integrate_segment([](double, const Vector& y) { return Vector(-1e40 * y); }, 0.0, Vector::Ones(1),
                                      1.0, none, {}, cfg),
                    StiffnessError);
}

TEST_CASE("ball propagated through one bounce", "[integrator]") {
    ModelDefinition m = build_bouncing_ball();
    TrajectoryArchive arc =
        propagate_hybrid(m, Formulation{FormulationKind::Ode, {}}, IntegratorConfig{}, m.nominal_rho, 0.0, 1.0);
    REQUIRE(arc.events.size() == 1);
    CHECK_THAT(arc.events[0].t_eve, WithinAbs(std::sqrt(2.0 / 9.81), 1e-9));
    CHECK(arc.segments.size() == 2);
    BallClosedForm cf;
    const double dq = (cf.q(1.0, 1.0 + 1e-6) - cf.q(1.0, 1.0 - 1e-6)) / 2e-6;
    CHECK_THAT(arc.final_sens.Q(0, 0), WithinAbs(dq, 1e-7));
    CHECK_THAT(arc.final_sens.Q(0, 0), WithinAbs(1.42945, 1e-5));
    CHECK_THAT(arc.final_state.q(0), WithinAbs(cf.q(1.0, 1.0), 1e-9));
}

TEST_CASE("archive structure", "[integrator]") {
    ModelDefinition m = build_five_bar();
    TrajectoryArchive arc =
        propagate_hybrid(m, Formulation{FormulationKind::Penalty, {}}, IntegratorConfig{}, m.nominal_rho, 0.0, 5.0);
    REQUIRE(arc.events.size() >= 1);
    CHECK(arc.segments.size() == arc.events.size() + 1);
    double last = -1.0;
    for (size_t k = 0; k < arc.segments.size(); ++k) {
        const auto& seg = arc.segments[k];
        REQUIRE_FALSE(seg.t.empty());
        if (k > 0) CHECK(seg.t.front() == arc.events[k - 1].t_eve);
        if (k + 1 < arc.segments.size()) CHECK(seg.t.back() == arc.events[k].t_eve);
        for (size_t i = 1; i < seg.t.size(); ++i) CHECK(seg.t[i] > seg.t[i - 1]);
        CHECK(seg.t.front() >= last);
        last = seg.t.back();
    }
    StateSeries ss = state_series(arc);
    for (size_t i = 1; i < ss.t.size(); ++i) CHECK(ss.t[i] > ss.t[i - 1]);
}

TEST_CASE("event-free run is a plain integration", "[integrator]") {
    ModelDefinition m = build_particle(ParticleEvent::Impact);
    Formulation ode{FormulationKind::Ode, {}};
    IntegratorConfig cfg;
    TrajectoryArchive arc = propagate_hybrid(m, ode, cfg, m.nominal_rho, 0.0, 0.2);
    REQUIRE(arc.events.empty());
    CHECK(arc.segments.size() == 1);
    InitialConditions ic = m.initial_conditions(m.nominal_rho);
    HybridState s0{0.0, ic.q0, ic.v0, 0.0, 0};
    SensitivityBundle b0{ic.dq0, ic.dv0, RowVector::Zero(2), {}};
    std::vector<SegmentEvent> none;
    SegmentResult r = integrate_segment(
        [&](double t, const Vector& x) { return canonical_rhs(m, ode, t, x, m.nominal_rho, 0); }, 0.0,
        pack_canonical(s0, b0), 0.2, none, {}, cfg);
    CHECK((r.y_stop - pack_canonical(arc.final_state, arc.final_sens)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("tighter tolerances converge", "[integrator]") {
    ModelDefinition m = build_particle(ParticleEvent::Impact);
    Formulation ode{FormulationKind::Ode, {}};
    auto terminal = [&](double rtol) {
        IntegratorConfig cfg;
        cfg.rel_tol = rtol;
        cfg.abs_tol = rtol * 1e-2;
        TrajectoryArchive arc = propagate_hybrid(m, ode, cfg, m.nominal_rho, 0.0, 1.5);
        REQUIRE_FALSE(arc.events.empty());
        return pack_canonical(arc.final_state, arc.final_sens);
    };
    Vector a = terminal(1e-6), b = terminal(5e-7), ref = terminal(1e-12);
    double err_a = (a - ref).cwiseAbs().maxCoeff(), err_b = (b - ref).cwiseAbs().maxCoeff();
    CHECK((a - b).cwiseAbs().maxCoeff() <= err_a);
    CHECK(err_b < err_a);
}

TEST_CASE("event times converge with the localization tolerance", "[integrator]") {
    ModelDefinition m = build_particle(ParticleEvent::Impact);
    Formulation ode{FormulationKind::Ode, {}};
    auto t_eve = [&](double tol) {
        IntegratorConfig cfg;
        cfg.event_tol = tol;
        return propagate_hybrid(m, ode, cfg, m.nominal_rho, 0.0, 1.5).events.at(0).t_eve;
    };
    for (double tol : {1e-4, 1e-6, 1e-8}) CHECK(std::abs(t_eve(tol) - t_eve(tol / 10)) <= 10 * tol);
}

TEST_CASE("five-bar energy is conserved between bounces", "[integrator]") {
    ModelDefinition m = build_five_bar();
    IntegratorConfig cfg;
    TrajectoryArchive arc =
        propagate_hybrid(m, Formulation{FormulationKind::Index1, {}}, cfg, m.nominal_rho, 0.0, 5.0);
    REQUIRE(arc.events.size() >= 2);
    HybridState s;
    SensitivityBundle b;
    for (const auto& seg : arc.segments) {
        unpack_canonical(seg.x.front(), arc.dims, s, b);
        const double E0 = five_bar_energy(s.q, s.v, arc.rho);
        double drift = 0.0;
        for (const auto& x : seg.x) {
            unpack_canonical(x, arc.dims, s, b);
            drift = std::max(drift, std::abs(five_bar_energy(s.q, s.v, arc.rho) - E0));
        }
        CHECK(drift <= 1e-6 * std::abs(E0));
    }
    // elastic bounce keeps the kinetic energy of point 2
    for (const auto& e : arc.events) {
        double pre = e.state_pre.v.segment(2, 2).squaredNorm(), post = e.state_post.v.segment(2, 2).squaredNorm();
        CHECK_THAT(post, WithinRel(pre, 1e-14));
    }
}

TEST_CASE("five-bar penalty keeps the constraints", "[integrator]") {
    ModelDefinition m = build_five_bar();
    TrajectoryArchive arc =
        propagate_hybrid(m, Formulation{FormulationKind::Penalty, {}}, IntegratorConfig{}, m.nominal_rho, 0.0, 5.0);
    CHECK(arc.events.size() >= 1);
    HybridState s;
    SensitivityBundle b;
    for (const auto& seg : arc.segments)
        for (const auto& x : seg.x) {
            unpack_canonical(x, arc.dims, s, b);
            ConstraintEval c = m.constraints(s.t, s.q, arc.rho, 0);
            CHECK(c.phi.cwiseAbs().maxCoeff() <= 1e-6);
            CHECK((c.phi_q * s.v).cwiseAbs().maxCoeff() <= 1e-5);
        }
}

TEST_CASE("chattering ball is flagged", "[integrator]") {
    BallConfig bc;
    bc.restitution = 0.5;
    ModelDefinition m = build_bouncing_ball(bc);
    IntegratorConfig cfg;
    // bounce k+1 follows bounce k after 2 e^k t1
    TrajectoryArchive arc = propagate_hybrid(m, Formulation{FormulationKind::Ode, {}}, cfg, m.nominal_rho, 0.0, 1.35);
    const double t1 = std::sqrt(2.0 / 9.81);
    double expect = t1;
    REQUIRE(arc.events.size() >= 8);
    for (size_t k = 0; k < arc.events.size(); ++k) {
        CHECK_THAT(arc.events[k].t_eve, WithinAbs(expect, 1e-8));
        expect += 2.0 * std::pow(0.5, static_cast<double>(k + 1)) * t1;
    }
    cfg.max_events = 20;
    CHECK_THROWS_AS(propagate_hybrid(m, Formulation{FormulationKind::Ode, {}}, cfg, m.nominal_rho, 0.0, 10.0),
                    ZenoSuspectedError);
}

TEST_CASE("sample grid", "[integrator]") {
    IntegratorConfig cfg;
    cfg.dense_sample_dt = 0.25;
    CHECK(sample_grid(0.0, 1.0, cfg) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    cfg.sample_times = {0.7, 0.1, 0.7, 3.0};
    CHECK(sample_grid(0.0, 1.0, cfg) == std::vector<double>{0.1, 0.7});
    cfg.sample_times.clear();
    cfg.dense_sample_dt = 0.0;
    CHECK_THROWS_AS(sample_grid(0.0, 1.0, cfg), ConfigurationError);
}
