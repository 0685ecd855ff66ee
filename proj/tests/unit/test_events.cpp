#include <cmath>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace testsupport;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const double kG = 9.81;
const double kVimpact = std::sqrt(2.0 * kG);  // drop from h0 = 1

ModelDefinition ball_with_event_kind(JumpKind kind, BallCost cost = BallCost::None) {
    BallConfig bc;
    bc.running_cost = cost;
    ModelDefinition m = build_bouncing_ball(bc);
    m.events[0].kind = kind;
    m.events[0].post_regime = 1;
    m.events[0].jump = nullptr;
    return m;
}

PendulumConfig wall_pendulum() {
    PendulumConfig pc;
    pc.theta0 = -0.6;
    pc.wall_x = 0.2;
    pc.restitution = 0.8;
    return pc;
}

PendulumConfig peg_pendulum() {
    PendulumConfig pc;
    pc.theta0 = -0.6;
    pc.peg_depth = 0.5;
    return pc;
}

}  // namespace

TEST_CASE("event time sensitivity", "[events]") {
    RowVector rq = RowVector::Ones(1);
    Vector vm = Vector::Constant(1, -kVimpact);
    CHECK(event_time_sensitivity(rq, Matrix::Zero(1, 1), vm).isZero(0));
    RowVector dt = event_time_sensitivity(rq, Matrix::Ones(1, 1), vm);
    CHECK_THAT(dt(0), WithinRel(1.0 / kVimpact, 1e-15));
    CHECK_THROWS_AS(event_time_sensitivity(rq, Matrix::Ones(1, 1), Vector::Zero(1)), GrazingError);
    RowVector r2(2);
    r2 << 1.0, -1.0;
    CHECK_THROWS_AS(event_time_sensitivity(r2, Matrix::Ones(2, 1), Vector::Ones(2)), GrazingError);
}

TEST_CASE("ball bounce state and sensitivity jumps", "[events]") {
    BallConfig bc;
    bc.running_cost = BallCost::Velocity;
    ModelDefinition m = build_bouncing_ball(bc);
    Formulation ode{FormulationKind::Ode, {}};
    HybridState pre{std::sqrt(2.0 / kG), Vector::Zero(1), Vector::Constant(1, -kVimpact), 0.3, 0};
    SensitivityBundle sens{Matrix::Ones(1, 1), Matrix::Zero(1, 1), RowVector::Constant(1, 0.7), {}};

    HybridState post = jump_state(m, ode, 0, pre, m.nominal_rho);
    CHECK_THAT(post.v(0), WithinAbs(4.42945, 5e-6));
    CHECK(post.q == pre.q);
    CHECK(post.z == pre.z);

    EventRecord e = apply_event(m, ode, 0, pre, sens, m.nominal_rho);
    CHECK(e.kind == JumpKind::VelocityJump);
    CHECK_THAT(e.dtdrho(0), WithinRel(1.0 / kVimpact, 1e-14));
    CHECK_THAT(e.sens_post.Q(0, 0), WithinAbs(-1.0, 1e-14));
    CHECK_THAT(e.sens_post.V(0, 0), WithinRel(2.0 * kG / kVimpact, 1e-14));
    CHECK_THAT(e.sens_post.V(0, 0), WithinAbs(4.42945, 5e-6));
    // g = v jumps by 2 sqrt(2 g h0)
    CHECK_THAT(e.sens_post.Z(0), WithinAbs(0.7 - 2.0, 1e-14));
}

TEST_CASE("jump formulas in isolation", "[events]") {
    Vector v = Vector::Constant(2, 0.4);
    Matrix Q = Matrix::Random(2, 3);
    RowVector dt = RowVector::Random(3);
    CHECK(jump_Q(v, v, Q, dt) == Q);
    Vector vm = Vector::Constant(1, -kVimpact), vp = Vector::Constant(1, kVimpact);
    CHECK_THAT(jump_Q(vp, vm, Matrix::Ones(1, 1), RowVector::Constant(1, 1.0 / kVimpact))(0, 0),
               WithinAbs(-1.0, 1e-15));
    RowVector Z = RowVector::Random(3);
    CHECK(jump_Z(1.5, 1.5, Z, dt) == Z);
    CHECK_THAT(jump_Z(kVimpact, -kVimpact, Z, RowVector::Constant(3, 1.0 / kVimpact))(1),
               WithinAbs(Z(1) - 2.0, 1e-14));
}

TEST_CASE("accel change with unchanged dynamics is the identity", "[events]") {
    for (auto kind : {JumpKind::AccelChange, JumpKind::EomTransition}) {
        ModelDefinition m = ball_with_event_kind(kind, BallCost::Acceleration);
        HybridState pre{0.45, Vector::Zero(1), Vector::Constant(1, -4.4), 0.2, 0};
        SensitivityBundle sens{Matrix::Constant(1, 1, 0.9), Matrix::Constant(1, 1, -0.3), RowVector::Constant(1, 0.1),
                               {}};
        for (auto f : {FormulationKind::Ode, FormulationKind::Penalty}) {
            EventRecord e = apply_event(m, Formulation{f, {}}, 0, pre, sens, m.nominal_rho);
            INFO(to_string(kind) << " " << to_string(f));
            CHECK(e.kind == JumpKind::AccelChange);
            CHECK(e.state_post.regime == 1);
            CHECK(e.state_post.v == pre.v);
            CHECK(e.sens_post.Q == sens.Q);
            CHECK(e.sens_post.V == sens.V);
            CHECK(e.sens_post.Z == sens.Z);
        }
    }
}

TEST_CASE("jump kinds follow the formulation", "[events]") {
    ModelDefinition peg = build_pendulum(peg_pendulum());
    IntegratorConfig cfg;
    TrajectoryArchive pen =
        propagate_hybrid(peg, Formulation{FormulationKind::Penalty, {}}, cfg, peg.nominal_rho, 0.0, 1.0);
    TrajectoryArchive dae =
        propagate_hybrid(peg, Formulation{FormulationKind::Index1, {}}, cfg, peg.nominal_rho, 0.0, 1.0);
    REQUIRE_FALSE(pen.events.empty());
    REQUIRE_FALSE(dae.events.empty());
    CHECK(pen.events[0].kind == JumpKind::EomTransition);
    CHECK(dae.events[0].kind == JumpKind::DaeImpulse);
    CHECK(pen.events[0].state_post.regime == 1);
    CHECK(pen.events[0].state_post.v == pen.events[0].state_pre.v);
    // impulse leaves a velocity consistent with the post constraint
    const EventRecord& e = dae.events[0];
    ConstraintEval c = peg.constraints(e.t_eve, e.state_post.q, peg.nominal_rho, e.state_post.regime);
    CHECK((c.phi_q * e.state_post.v + c.phi_t).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("five-bar bounce flips the vertical velocity of point 2", "[events]") {
    ModelDefinition m = build_five_bar();
    for (auto kind : {FormulationKind::Penalty, FormulationKind::Index1}) {
        TrajectoryArchive arc = propagate_hybrid(m, Formulation{kind, {}}, IntegratorConfig{}, m.nominal_rho, 0.0, 1.0);
        REQUIRE_FALSE(arc.events.empty());
        for (const auto& e : arc.events) {
            INFO(to_string(kind) << " t=" << e.t_eve);
            CHECK(e.kind == JumpKind::VelocityJump);
            CHECK(e.state_post.v(2) == e.state_pre.v(2));
            CHECK(e.state_post.v(3) == -e.state_pre.v(3));
            ConstraintEval c = m.constraints(e.t_eve, e.state_post.q, m.nominal_rho, e.state_post.regime);
            CHECK((c.phi_q * e.state_post.v + c.phi_t).cwiseAbs().maxCoeff() <= 1e-8);
        }
    }
}

TEST_CASE("post-event constrained sensitivities satisfy the constraint derivatives", "[events]") {
    struct Case {
        ModelDefinition model;
        FormulationKind kind;
    };
    std::vector<Case> cases = {{build_five_bar(), FormulationKind::Index1},
                               {build_pendulum(wall_pendulum()), FormulationKind::Index1},
                               {build_pendulum(peg_pendulum()), FormulationKind::Index1}};
    for (auto& c : cases) {
        const ModelDefinition& m = c.model;
        TrajectoryArchive arc = propagate_hybrid(m, Formulation{c.kind, {}}, IntegratorConfig{}, m.nominal_rho, 0.0, 2.0);
        REQUIRE_FALSE(arc.events.empty());
        for (const auto& e : arc.events) {
            const HybridState& s = e.state_post;
            const Matrix& Q = e.sens_post.Q;
            const Matrix& V = e.sens_post.V;
            ConstraintEval ce = m.constraints(s.t, s.q, arc.rho, s.regime);
            Contraction cj = m.constraint_jvp(s.t, s.q, arc.rho, s.regime, s.v);
            Matrix dvel = ce.phi_q * V + cj.wrt_q * Q + cj.wrt_rho + ce.phi_tq * Q + ce.phi_trho;
            INFO(m.name << " event at " << e.t_eve << " kind " << to_string(e.kind));
            CHECK(ce.phi.cwiseAbs().maxCoeff() <= 1e-8);
            CHECK((ce.phi_q * s.v + ce.phi_t).cwiseAbs().maxCoeff() <= 1e-8);
            CHECK((ce.phi_q * Q + ce.phi_rho).cwiseAbs().maxCoeff() <= 1e-8);
            CHECK(dvel.cwiseAbs().maxCoeff() <= 1e-8);
        }
    }
}

TEST_CASE("position and quadrature are continuous across every event", "[events]") {
    std::vector<std::pair<ModelDefinition, FormulationKind>> runs = {
        {build_bouncing_ball(), FormulationKind::Ode},
        {build_particle(ParticleEvent::Impact), FormulationKind::Ode},
        {build_particle(ParticleEvent::Switch), FormulationKind::Ode},
        {build_five_bar(), FormulationKind::Penalty},
        {build_pendulum(wall_pendulum()), FormulationKind::Index1},
        {build_pendulum(peg_pendulum()), FormulationKind::Penalty},
        {build_pendulum(peg_pendulum()), FormulationKind::Index1}};
    for (auto& [m, kind] : runs) {
        TrajectoryArchive arc = propagate_hybrid(m, Formulation{kind, {}}, IntegratorConfig{}, m.nominal_rho, 0.0, 2.0);
        CHECK_FALSE(arc.events.empty());
        for (const auto& e : arc.events) {
            CHECK(e.state_post.q == e.state_pre.q);
            CHECK(e.state_post.z == e.state_pre.z);
            CHECK(e.state_post.t == e.state_pre.t);
        }
    }
}

TEST_CASE("multiplier sensitivities across events", "[events]") {
    // penalty: the stored post-event Lambda* agrees with the multiplier formula
    ModelDefinition fb = build_five_bar();
    PenaltyConfig pc;
    Formulation pen{FormulationKind::Penalty, pc};
    TrajectoryArchive arc = propagate_hybrid(fb, pen, IntegratorConfig{}, fb.nominal_rho, 0.0, 1.0);
    REQUIRE_FALSE(arc.events.empty());
    for (const auto& e : arc.events) {
        REQUIRE(e.sens_post.Lambda.allFinite());
        DynamicsPoint dyn = evaluate_dynamics(fb, pen, e.t_eve, e.state_post.q, e.state_post.v, fb.nominal_rho, 0);
        TlmResult tl = tlm_rhs(fb, pen, e.state_post, e.sens_post, fb.nominal_rho, dyn);
        Matrix ref = multiplier_estimate_sens(fb, pc, e.state_post, e.sens_post, tl.Vdot, fb.nominal_rho, dyn.vdot);
        CHECK(rel_err(e.sens_post.Lambda, ref) <= 1e-6);
    }

    // index-1 wall impacts: Lambda against twin differences away from the events
    ModelDefinition m = build_pendulum(wall_pendulum());
    Formulation dae{FormulationKind::Index1, {}};
    IntegratorConfig cfg;
    const double eps = default_fd_step(m.nominal_rho(0));
    TrajectoryArchive an = propagate_hybrid(m, dae, cfg, m.nominal_rho, 0.0, 2.0);
    REQUIRE(an.events.size() >= 2);
    FdResult fd = central_fd_sensitivity(m, dae, cfg, m.nominal_rho, eps, 0, 0.0, 2.0);
    CompareReport r = compare_report(analytic_series(an, 0), fd.series, fd_exclusion_windows(an, 0, eps), 1e-3);
    INFO(r.text());
    CHECK(r.pass);
    bool has_lambda = false;
    for (const auto& q : r.quantities) has_lambda = has_lambda || q.name.find("Lambda") != std::string::npos;
    CHECK(has_lambda);
}
