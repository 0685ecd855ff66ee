#include "hybridsens/events.hpp"

#include "hybridsens/tlm.hpp"

namespace hybridsens {

ConstraintSnapshot snapshot_constraints(const ModelDefinition& model, double t, const Vector& q, const Vector& rho,
                                        int regime, std::span<const int> preferred_dof) {
    ConstraintSnapshot snap;
    snap.regime = regime;
    snap.m = model.m_in(regime);
    if (snap.m == 0) {
        snap.part = trivial_partition(model.dims.n);
        return snap;
    }
    snap.eval = model.constraints(t, q, rho, regime);
    snap.part = partition_coordinates(snap.eval.phi_q, 1e-8, preferred_dof);
    return snap;
}

RowVector event_time_sensitivity(const RowVector& r_q, const Matrix& Q_minus, const Vector& v_minus) {
    if (r_q.size() != Q_minus.rows() || v_minus.size() != Q_minus.rows())
        throw DimensionError("event gradient does not match the sensitivity matrix");
    double rate = r_q.dot(v_minus);
    if (std::abs(rate) <= 1e-8 * (1.0 + v_minus.norm()))
        throw GrazingError("event surface crossed tangentially (r_q v = " + std::to_string(rate) + ")");
    return -(r_q * Q_minus) / rate;
}

namespace {

JumpKind resolve_kind(JumpKind k, const EventFunction& ev, FormulationKind f, int m_pre, int m_post) {
    if (k == JumpKind::ConstraintChange) {
        if (ev.jump) return JumpKind::VelocityJump;
        if (f == FormulationKind::Penalty) k = JumpKind::EomTransition;
        else k = JumpKind::DaeImpulse;
    }
    if (k == JumpKind::DaeImpulse && f == FormulationKind::Penalty) k = JumpKind::EomTransition;
    if (k == JumpKind::EomTransition && f == FormulationKind::Index1) k = JumpKind::DaeImpulse;
    if ((k == JumpKind::DaeImpulse || k == JumpKind::EomTransition) && m_pre == 0 && m_post == 0)
        k = JumpKind::AccelChange;
    if (k == JumpKind::DaeImpulse && m_post == 0) k = JumpKind::AccelChange;
    return k;
}

ImpulseJump impulse_maps(const ModelDefinition& model, double t, const Vector& q, const Vector& v_minus,
                         const Vector& rho, const ConstraintSnapshot& post, Vector& v_plus) {
    const int n = model.dims.n, m = post.m;
    const auto p = rho.size();
    const ConstraintEval& c = post.eval;
    Matrix M = model.mass(t, q, rho);
    Matrix K = Matrix::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = M;
    K.topRightCorner(n, m) = c.phi_q.transpose();
    K.bottomLeftCorner(m, n) = c.phi_q;
    Eigen::PartialPivLU<Matrix> lu(K);
    if (!well_conditioned(lu)) throw SingularMassError("impulse saddle matrix is singular");

    Vector rhs(n + m);
    rhs << M * v_minus, -c.phi_t;
    Vector x = lu.solve(rhs);
    v_plus = x.head(n);
    ImpulseJump out;
    out.delta_lambda = x.tail(m);

    Contraction mj = model.mass_jvp(t, q, rho, v_minus - v_plus);
    Contraction lj = model.phi_vjp(t, q, rho, post.regime, out.delta_lambda);
    Contraction vj = model.constraint_jvp(t, q, rho, post.regime, v_plus);

    Matrix bq(n + m, n), bv(n + m, n), br(n + m, p);
    bq << mj.wrt_q - lj.wrt_q, -vj.wrt_q - c.phi_tq;
    bv << M, Matrix::Zero(m, n);
    br << mj.wrt_rho - lj.wrt_rho, -vj.wrt_rho - c.phi_trho;
    Vector bt(n + m);
    bt << -c.phi_tq.transpose() * out.delta_lambda, -c.phi_tq * v_plus - c.phi_tt;

    Matrix xq = lu.solve(bq), xv = lu.solve(bv), xr = lu.solve(br);
    Vector xt = lu.solve(bt);
    out.Hv_q = xq.topRows(n);
    out.Hl_q = xq.bottomRows(m);
    out.Hv_v = xv.topRows(n);
    out.Hl_v = xv.bottomRows(m);
    out.Hv_rho = xr.topRows(n);
    out.Hl_rho = xr.bottomRows(m);
    out.Hv_t = xt.head(n);
    out.Hl_t = xt.tail(m);
    return out;
}

// Keeps the dof rows of a full sensitivity and re-solves the dependent rows of V.
Matrix project_V(const EventContext& ctx, const Matrix& V_full, const Matrix& Q_plus) {
    if (ctx.post_c.m == 0) return V_full;
    const auto& part = ctx.post_c.part;
    Matrix V_dof = part.rows_dof(V_full);
    Matrix V_dep = resolve_dependent_V(*ctx.model, part, ctx.post.t, ctx.post.q, ctx.post.v, ctx.rho, ctx.post.regime,
                                       Q_plus, V_dof);
    return part.assemble(V_dep, V_dof);
}

}  // namespace

EventContext prepare_event(const ModelDefinition& model, const Formulation& form, int event_index,
                           const HybridState& s, const Vector& rho) {
    if (event_index < 0 || event_index >= static_cast<int>(model.events.size()))
        throw DimensionError("event index out of range");
    const EventFunction& ev = model.events[event_index];
    EventContext ctx;
    ctx.model = &model;
    ctx.form = form;
    ctx.rho = rho;
    ctx.pre = s;
    const int reg_pre = s.regime;
    const int reg_post = ev.post_regime < 0 ? reg_pre : ev.post_regime;
    const int m_pre = model.m_in(reg_pre), m_post = model.m_in(reg_post);
    ctx.spec = {resolve_kind(ev.kind, ev, form.kind, m_pre, m_post), event_index, reg_post};

    auto hint_pre = model.hint_for(reg_pre);
    ctx.pre_c = snapshot_constraints(model, s.t, s.q, rho, reg_pre, hint_pre);
    std::vector<int> hint_post = model.hint_for(reg_post);
    if (m_post == m_pre && m_pre > 0) hint_post = ctx.pre_c.part.dof;
    ctx.post_c = snapshot_constraints(model, s.t, s.q, rho, reg_post, hint_post);

    ctx.post = s;
    ctx.post.regime = reg_post;
    switch (ctx.spec.kind) {
    case JumpKind::VelocityJump: {
        if (!ev.jump) throw ConfigurationError("velocity jump event '" + ev.name + "' has no jump map");
        Vector v_dof = ctx.pre_c.part.rows_dof(s.v);
        ctx.jump = ev.jump(s.t, s.q, v_dof, rho);
        const auto& part = ctx.post_c.part;
        if (ctx.jump->v_plus.size() != part.f())
            throw DimensionError("jump map returns " + std::to_string(ctx.jump->v_plus.size()) + " velocities, expected " +
                                 std::to_string(part.f()));
        if (m_post > 0) {
            if (part.dof != ctx.pre_c.part.dof)
                throw RankDeficiencyError("post-event constraints do not admit the pre-event dof set", part.m());
            Vector v_dep = resolve_dependent_velocity(part, ctx.post_c.eval.phi_t, ctx.jump->v_plus);
            ctx.post.v = part.assemble(v_dep, ctx.jump->v_plus);
        } else {
            ctx.post.v = ctx.jump->v_plus;
        }
        break;
    }
    case JumpKind::AccelChange:
    case JumpKind::EomTransition: break;
    case JumpKind::DaeImpulse: {
        Vector v_plus;
        ctx.impulse = impulse_maps(model, s.t, s.q, s.v, rho, ctx.post_c, v_plus);
        ctx.post.v = v_plus;
        break;
    }
    case JumpKind::ConstraintChange: throw ConfigurationError("unresolved constraint change");
    }

    ctx.dyn_pre = evaluate_dynamics(model, form, s.t, s.q, s.v, rho, reg_pre);
    ctx.dyn_post = evaluate_dynamics(model, form, s.t, ctx.post.q, ctx.post.v, rho, reg_post);
    return ctx;
}

HybridState jump_state(const ModelDefinition& model, const Formulation& form, int event_index,
                       const HybridState& state_minus, const Vector& rho) {
    return prepare_event(model, form, event_index, state_minus, rho).post;
}

Matrix jump_Q(const Vector& v_plus, const Vector& v_minus, const Matrix& Q_minus, const RowVector& dtdrho,
              const ConstraintSnapshot* post) {
    if (v_plus.size() != Q_minus.rows() || dtdrho.size() != Q_minus.cols())
        throw DimensionError("jump_Q operand sizes differ");
    Matrix Q = Q_minus - (v_plus - v_minus) * dtdrho;
    if (!post || post->m == 0) return Q;
    Matrix Q_dof = post->part.rows_dof(Q);
    Matrix Q_dep = resolve_dependent_Q(post->part, post->eval.phi_rho, Q_dof);
    return post->part.assemble(Q_dep, Q_dof);
}

Matrix jump_V(const EventContext& ctx, const SensitivityBundle& sm, const RowVector& dt, const Matrix& Q_plus) {
    const Vector& vm = ctx.pre.v;
    const Vector& am = ctx.dyn_pre.vdot;
    const Vector& ap = ctx.dyn_post.vdot;
    switch (ctx.spec.kind) {
    case JumpKind::VelocityJump: {
        const JumpEval& h = *ctx.jump;
        const auto& pre = ctx.pre_c.part;
        const auto& post = ctx.post_c.part;
        Matrix V_dof_m = pre.rows_dof(sm.V);
        Vector a_dof_m = pre.rows_dof(am);
        Vector a_dof_p = post.rows_dof(ap);
        Vector rate = h.h_q * vm - a_dof_p + h.h_v * a_dof_m + h.h_t;
        Matrix V_dof = h.h_q * sm.Q + h.h_v * V_dof_m + rate * dt + h.h_rho;
        if (ctx.post_c.m == 0) return V_dof;
        Matrix V_dep = resolve_dependent_V(*ctx.model, post, ctx.post.t, ctx.post.q, ctx.post.v, ctx.rho,
                                           ctx.post.regime, Q_plus, V_dof);
        return post.assemble(V_dep, V_dof);
    }
    case JumpKind::AccelChange:
    case JumpKind::EomTransition: return project_V(ctx, sm.V - (ap - am) * dt, Q_plus);
    case JumpKind::DaeImpulse: {
        const ImpulseJump& H = *ctx.impulse;
        Vector rate = H.Hv_q * vm - ap + H.Hv_v * am + H.Hv_t;
        Matrix V = H.Hv_q * sm.Q + H.Hv_v * sm.V + rate * dt + H.Hv_rho;
        return project_V(ctx, V, Q_plus);
    }
    case JumpKind::ConstraintChange: break;
    }
    throw ConfigurationError("unresolved jump kind");
}

Matrix impulse_multiplier_sens(const EventContext& ctx, const SensitivityBundle& sm, const RowVector& dt) {
    if (!ctx.impulse) return Matrix(0, sm.Q.cols());
    const ImpulseJump& H = *ctx.impulse;
    Vector rate = H.Hl_q * ctx.pre.v + H.Hl_v * ctx.dyn_pre.vdot + H.Hl_t;
    return H.Hl_q * sm.Q + H.Hl_v * sm.V + rate * dt + H.Hl_rho;
}

RowVector jump_Z(double g_plus, double g_minus, const RowVector& Z_minus, const RowVector& dtdrho) {
    return Z_minus - (g_plus - g_minus) * dtdrho;
}

Matrix jump_multiplier_sens(const ModelDefinition& model, const Formulation& form, const HybridState& sp,
                            const Matrix& Q_plus, const Matrix& V_plus, const Vector& rho) {
    if (model.m_in(sp.regime) == 0) return Matrix(0, Q_plus.cols());
    SensitivityBundle sens{Q_plus, V_plus, RowVector::Zero(Q_plus.cols()), Matrix()};
    DynamicsPoint dyn = evaluate_dynamics(model, form, sp.t, sp.q, sp.v, rho, sp.regime);
    return tlm_rhs(model, form, sp, sens, rho, dyn).Lambda;
}

EventRecord apply_event(const ModelDefinition& model, const Formulation& form, int event_index,
                        const HybridState& sm, const SensitivityBundle& sens_m, const Vector& rho) {
    EventContext ctx = prepare_event(model, form, event_index, sm, rho);
    EventRecord rec;
    rec.t_eve = sm.t;
    rec.event_index = event_index;
    rec.kind = ctx.spec.kind;
    rec.state_pre = sm;
    rec.state_post = ctx.post;
    rec.sens_pre = sens_m;
    rec.sens_pre.Lambda = jump_multiplier_sens(model, form, sm, sens_m.Q, sens_m.V, rho);

    RowVector r_q = model.events[event_index].r(sm.q).r_q;
    rec.dtdrho = event_time_sensitivity(r_q, sens_m.Q, sm.v);

    SensitivityBundle& sp = rec.sens_post;
    sp.Q = jump_Q(ctx.post.v, sm.v, sens_m.Q, rec.dtdrho, &ctx.post_c);
    sp.V = jump_V(ctx, sens_m, rec.dtdrho, sp.Q);
    double g_m = running_cost_value(model, sm, ctx.dyn_pre, rho);
    double g_p = running_cost_value(model, ctx.post, ctx.dyn_post, rho);
    sp.Z = jump_Z(g_p, g_m, sens_m.Z, rec.dtdrho);
    sp.Lambda = jump_multiplier_sens(model, form, ctx.post, sp.Q, sp.V, rho);
    rec.impulse_sens = impulse_multiplier_sens(ctx, sens_m, rec.dtdrho);
    rec.check();
    return rec;
}

}  // namespace hybridsens
