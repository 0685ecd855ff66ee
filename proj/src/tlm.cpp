#include "hybridsens/tlm.hpp"

namespace hybridsens {

TlmResult tlm_rhs_ode(const ModelDefinition& model, const HybridState& s, const SensitivityBundle& sens,
                      const Vector& rho, const Vector& vdot) {
    EomPartials f = eom_partials(model, s.t, s.q, s.v, rho, vdot, s.regime);
    TlmResult r;
    r.Qdot = sens.V;
    r.Vdot = f.f_q * sens.Q + f.f_v * sens.V + f.f_rho;
    r.Lambda = Matrix(0, sens.Q.cols());
    return r;
}

TlmResult tlm_rhs_dae_index1(const ModelDefinition& model, const HybridState& s, const SensitivityBundle& sens,
                             const Vector& rho, const DynamicsPoint& dyn) {
    const int n = model.dims.n;
    const int m = model.m_in(s.regime);
    if (m == 0) return tlm_rhs_ode(model, s, sens, rho, dyn.vdot);
    const double t = s.t;
    const Matrix& Q = sens.Q;
    const Matrix& V = sens.V;
    Matrix M = model.mass(t, s.q, rho);
    ForceEval fe = model.force(t, s.q, s.v, rho, s.regime);
    ConstraintEval c = model.constraints(t, s.q, rho, s.regime);
    ConvectiveEval ce = model.convective(t, s.q, s.v, rho, s.regime);
    Contraction mj = model.mass_jvp(t, s.q, rho, dyn.vdot);
    Contraction lj = model.phi_vjp(t, s.q, rho, s.regime, dyn.lambda);
    Contraction aj = model.constraint_jvp(t, s.q, rho, s.regime, dyn.vdot);

    // C = -gamma, so C_zeta = -gamma_zeta.
    Matrix top = fe.F_v * V - (mj.wrt_q + lj.wrt_q - fe.F_q) * Q + fe.F_rho - mj.wrt_rho - lj.wrt_rho;
    Matrix bottom = -ce.gamma_v * V - (aj.wrt_q + ce.gamma_q) * Q - ce.gamma_rho - aj.wrt_rho;

    Matrix K = Matrix::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = M;
    K.topRightCorner(n, m) = c.phi_q.transpose();
    K.bottomLeftCorner(m, n) = c.phi_q;
    Matrix rhs(n + m, Q.cols());
    rhs << top, bottom;
    Eigen::PartialPivLU<Matrix> lu(K);
    if (!well_conditioned(lu)) throw SingularMassError("saddle-point matrix is singular");
    Matrix x = lu.solve(rhs);
    return {V, x.topRows(n), x.bottomRows(m)};
}

TlmResult tlm_rhs_penalty(const ModelDefinition& model, const PenaltyConfig& cfg, const HybridState& s,
                          const SensitivityBundle& sens, const Vector& rho, const Vector& vdot, const Vector& lambda) {
    if (model.m_in(s.regime) == 0) return tlm_rhs_ode(model, s, sens, rho, vdot);
    const int regime = s.regime;
    const double c1 = 2.0 * cfg.xi * cfg.omega, c0 = cfg.omega * cfg.omega;
    const double t = s.t;
    const Vector& q = s.q;
    const Vector& v = s.v;
    Matrix M = model.mass(t, q, rho);
    ForceEval fe = model.force(t, q, v, rho, regime);
    ConstraintEval c = model.constraints(t, q, rho, regime);
    ConvectiveEval ce = model.convective(t, q, v, rho, regime);
    Contraction jv = model.constraint_jvp(t, q, rho, regime, v);
    Contraction ja = model.constraint_jvp(t, q, rho, regime, vdot);
    Contraction mj = model.mass_jvp(t, q, rho, vdot);
    // alpha-weighted terms of the Phi_qq^T contraction combine into lambda*, which is O(1)
    Contraction tl = model.phi_vjp(t, q, rho, regime, lambda);

    Matrix B = (fe.F_q - mj.wrt_q - tl.wrt_q) * sens.Q + fe.F_v * sens.V;
    B += fe.F_rho - mj.wrt_rho - tl.wrt_rho;
    Matrix W = (ja.wrt_q + ce.gamma_q + c1 * (jv.wrt_q + c.phi_tq) + c0 * c.phi_q) * sens.Q +
               (ce.gamma_v + c1 * c.phi_q) * sens.V + ja.wrt_rho + ce.gamma_rho +
               c1 * (jv.wrt_rho + c.phi_trho) + c0 * c.phi_rho;
    auto [x, y] = kernels::penalty_bordered<double>(M, c.phi_q, B, W, cfg.alpha_for(c.phi.size()));
    TlmResult r;
    r.Qdot = sens.V;
    r.Vdot = x;
    r.Lambda = y;
    return r;
}

Matrix multiplier_estimate_sens(const ModelDefinition& model, const PenaltyConfig& cfg, const HybridState& s,
                                const SensitivityBundle& sens, const Matrix& Vdot, const Vector& rho,
                                const Vector& vdot) {
    if (model.m_in(s.regime) == 0) return Matrix(0, sens.Q.cols());
    MultiplierPartials mp = multiplier_partials(model, cfg, s.t, s.q, s.v, vdot, rho, s.regime);
    return mp.lam_q * sens.Q + mp.lam_v * sens.V + mp.lam_vdot * Vdot + mp.lam_rho;
}

TlmResult tlm_rhs(const ModelDefinition& model, const Formulation& form, const HybridState& s,
                  const SensitivityBundle& sens, const Vector& rho, const DynamicsPoint& dyn) {
    if (model.m_in(s.regime) == 0) return tlm_rhs_ode(model, s, sens, rho, dyn.vdot);
    switch (form.kind) {
    case FormulationKind::Ode: return tlm_rhs_ode(model, s, sens, rho, dyn.vdot);
    case FormulationKind::Index1: return tlm_rhs_dae_index1(model, s, sens, rho, dyn);
    case FormulationKind::Penalty: return tlm_rhs_penalty(model, form.penalty, s, sens, rho, dyn.vdot, dyn.lambda);
    }
    throw ConfigurationError("unknown formulation");
}

RowVector quadrature_sens_rhs(const ModelDefinition& model, const HybridState& s, const SensitivityBundle& sens,
                              const TlmResult& tlm, const DynamicsPoint& dyn, const Vector& rho) {
    const auto p = sens.Q.cols();
    if (!model.running_cost) return RowVector::Zero(p);
    RunningCostEval g = model.running_cost(s.t, s.q, s.v, dyn.vdot, dyn.lambda, rho);
    RowVector out = g.g_q * sens.Q + g.g_v * sens.V + g.g_vdot * tlm.Vdot + g.g_rho;
    if (dyn.lambda.size() > 0 && g.g_lambda.size() == dyn.lambda.size()) out += g.g_lambda * tlm.Lambda;
    return out;
}

double running_cost_value(const ModelDefinition& model, const HybridState& s, const DynamicsPoint& dyn,
                          const Vector& rho) {
    if (!model.running_cost) return 0.0;
    return model.running_cost(s.t, s.q, s.v, dyn.vdot, dyn.lambda, rho).g;
}

RowVector cost_gradient(const ModelDefinition& model, const HybridState& fs, const SensitivityBundle& sens,
                        const Vector& rho) {
    RowVector out = sens.Z;
    if (model.terminal_cost) {
        TerminalCostEval w = model.terminal_cost(fs.t, fs.q, fs.v, rho);
        out += w.w_q * sens.Q + w.w_v * sens.V + w.w_rho;
    }
    return out;
}

double cost_value(const ModelDefinition& model, const HybridState& fs, const Vector& rho) {
    double psi = fs.z;
    if (model.terminal_cost) psi += model.terminal_cost(fs.t, fs.q, fs.v, rho).w;
    return psi;
}

Vector canonical_rhs(const ModelDefinition& model, const Formulation& form, double t, const Vector& x,
                     const Vector& rho, int regime) {
    HybridState s;
    SensitivityBundle sens;
    unpack_canonical(x, model.dims, s, sens);
    s.t = t;
    s.regime = regime;
    DynamicsPoint dyn = evaluate_dynamics(model, form, t, s.q, s.v, rho, regime);
    TlmResult tlm = tlm_rhs(model, form, s, sens, rho, dyn);
    HybridState ds;
    ds.q = s.v;
    ds.v = dyn.vdot;
    ds.z = running_cost_value(model, s, dyn, rho);
    SensitivityBundle dsens;
    dsens.Q = tlm.Qdot;
    dsens.V = tlm.Vdot;
    dsens.Z = quadrature_sens_rhs(model, s, sens, tlm, dyn, rho);
    return pack_canonical(ds, dsens);
}

}  // namespace hybridsens
