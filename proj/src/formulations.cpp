#include "hybridsens/formulations.hpp"

namespace hybridsens {

const char* to_string(FormulationKind k) {
    switch (k) {
    case FormulationKind::Ode: return "ode";
    case FormulationKind::Index1: return "dae1";
    case FormulationKind::Penalty: return "penalty";
    }
    return "unknown";
}

FormulationKind formulation_from_string(const std::string& s) {
    if (s == "ode") return FormulationKind::Ode;
    if (s == "dae1" || s == "index1") return FormulationKind::Index1;
    if (s == "penalty") return FormulationKind::Penalty;
    throw ConfigurationError("unknown formulation '" + s + "'");
}

Matrix PenaltyConfig::alpha_for(int m) const {
    if (alpha_matrix && alpha_matrix->rows() == m && alpha_matrix->cols() == m) return *alpha_matrix;
    return alpha * Matrix::Identity(m, m);
}

namespace {

void check_finite(const Vector& x, const char* what) {
    if (!x.allFinite()) throw EvaluationError(std::string(what) + " is not finite");
}

int phi_rank(const Matrix& phi_q) {
    Eigen::ColPivHouseholderQR<Matrix> qr(phi_q);
    qr.setThreshold(1e-10);
    return static_cast<int>(qr.rank());
}

}  // namespace

Vector ode_accel(const ModelDefinition& model, double t, const Vector& q, const Vector& v, const Vector& rho,
                 int regime) {
    Matrix M = model.mass(t, q, rho);
    ForceEval fe = model.force(t, q, v, rho, regime);
    check_finite(fe.F, "force");
    Vector a = kernels::solve_mass<double>(M, fe.F);
    check_finite(a, "acceleration");
    return a;
}

EomPartials eom_partials(const ModelDefinition& model, double t, const Vector& q, const Vector& v, const Vector& rho,
                         const Vector& vdot, int regime) {
    Matrix M = model.mass(t, q, rho);
    ForceEval fe = model.force(t, q, v, rho, regime);
    Contraction mj = model.mass_jvp(t, q, rho, vdot);
    Eigen::PartialPivLU<Matrix> lu(M);
    if (!well_conditioned(lu)) throw SingularMassError("mass matrix is singular or ill-conditioned");
    return {lu.solve(fe.F_q - mj.wrt_q), lu.solve(fe.F_v), lu.solve(fe.F_rho - mj.wrt_rho)};
}

DynamicsPoint dae_index1_solve(const ModelDefinition& model, double t, const Vector& q, const Vector& v,
                               const Vector& rho, int regime) {
    if (model.m_in(regime) == 0) return {ode_accel(model, t, q, v, rho, regime), Vector(0)};
    Matrix M = model.mass(t, q, rho);
    ForceEval fe = model.force(t, q, v, rho, regime);
    ConstraintEval c = model.constraints(t, q, rho, regime);
    ConvectiveEval ce = model.convective(t, q, v, rho, regime);
    try {
        auto [a, lam] = kernels::solve_saddle<double>(M, c.phi_q, fe.F, -ce.gamma);
        check_finite(a, "acceleration");
        return {a, lam};
    } catch (const SingularMassError&) {
        int rank = phi_rank(c.phi_q);
        if (rank < c.phi_q.rows()) throw RankDeficiencyError("constraint Jacobian is rank deficient", rank);
        throw;
    }
}

Vector penalty_accel(const ModelDefinition& model, const PenaltyConfig& cfg, double t, const Vector& q,
                     const Vector& v, const Vector& rho, int regime, Vector* lambda) {
    const int m = model.m_in(regime);
    if (m == 0) {
        if (lambda) lambda->resize(0);
        return ode_accel(model, t, q, v, rho, regime);
    }
    Matrix M = model.mass(t, q, rho);
    ForceEval fe = model.force(t, q, v, rho, regime);
    ConstraintEval c = model.constraints(t, q, rho, regime);
    ConvectiveEval ce = model.convective(t, q, v, rho, regime);
    Vector phidot = c.phi_q * v + c.phi_t;
    auto [a, lam] = kernels::penalty_solve<double>(M, c.phi_q, fe.F, c.phi, phidot, ce.gamma, cfg.alpha_for(m),
                                                   cfg.xi, cfg.omega);
    check_finite(a, "acceleration");
    if (lambda) *lambda = lam;
    return a;
}

Vector estimate_multipliers(const ModelDefinition& model, const PenaltyConfig& cfg, double t, const Vector& q,
                            const Vector& v, const Vector& vdot, const Vector& rho, int regime) {
    const int m = model.m_in(regime);
    if (m == 0) return Vector(0);
    ConstraintEval c = model.constraints(t, q, rho, regime);
    ConvectiveEval ce = model.convective(t, q, v, rho, regime);
    Vector phidot = c.phi_q * v + c.phi_t;
    Vector phiddot = c.phi_q * vdot + ce.gamma;
    return cfg.alpha_for(m) * (phiddot + 2.0 * cfg.xi * cfg.omega * phidot + cfg.omega * cfg.omega * c.phi);
}

DynamicsPoint evaluate_dynamics(const ModelDefinition& model, const Formulation& form, double t, const Vector& q,
                                const Vector& v, const Vector& rho, int regime) {
    if (model.m_in(regime) == 0) return {ode_accel(model, t, q, v, rho, regime), Vector(0)};
    switch (form.kind) {
    case FormulationKind::Ode:
        throw ConfigurationError("ode formulation cannot integrate a constrained regime");
    case FormulationKind::Index1: return dae_index1_solve(model, t, q, v, rho, regime);
    case FormulationKind::Penalty: {
        DynamicsPoint d;
        d.vdot = penalty_accel(model, form.penalty, t, q, v, rho, regime, &d.lambda);
        return d;
    }
    }
    throw ConfigurationError("unknown formulation");
}

PenaltyBlocks penalty_blocks(const ModelDefinition& model, const PenaltyConfig& cfg, double t, const Vector& q,
                             const Vector& v, const Vector& vdot, const Vector& rho, int regime) {
    const int m = model.m_in(regime);
    const Matrix alpha = cfg.alpha_for(m);
    const double c1 = 2.0 * cfg.xi * cfg.omega, c0 = cfg.omega * cfg.omega;
    Matrix M = model.mass(t, q, rho);
    ForceEval fe = model.force(t, q, v, rho, regime);
    ConstraintEval c = model.constraints(t, q, rho, regime);
    ConvectiveEval ce = model.convective(t, q, v, rho, regime);
    Contraction jv = model.constraint_jvp(t, q, rho, regime, v);
    Contraction ja = model.constraint_jvp(t, q, rho, regime, vdot);
    Contraction mj = model.mass_jvp(t, q, rho, vdot);

    Vector phidot = c.phi_q * v + c.phi_t;
    Vector s = ce.gamma + c1 * phidot + c0 * c.phi;
    Vector ys = alpha * s;
    Contraction ts = model.phi_vjp(t, q, rho, regime, ys);
    Vector ya = alpha * (c.phi_q * vdot);
    Contraction ta = model.phi_vjp(t, q, rho, regime, ya);
    Matrix GtA = c.phi_q.transpose() * alpha;

    PenaltyBlocks b;
    b.Mbar = M + GtA * c.phi_q;
    b.Fbar = fe.F - c.phi_q.transpose() * ys;
    b.Fbar_q = fe.F_q - ts.wrt_q - GtA * (ce.gamma_q + c1 * (jv.wrt_q + c.phi_tq) + c0 * c.phi_q);
    b.Fbar_v = fe.F_v - GtA * (ce.gamma_v + c1 * c.phi_q);
    b.Fbar_rho = fe.F_rho - ts.wrt_rho - GtA * (ce.gamma_rho + c1 * (jv.wrt_rho + c.phi_trho) + c0 * c.phi_rho);
    b.Mbar_q_vdot = mj.wrt_q + ta.wrt_q + GtA * ja.wrt_q;
    b.Mbar_rho_vdot = mj.wrt_rho + ta.wrt_rho + GtA * ja.wrt_rho;
    return b;
}

MultiplierPartials multiplier_partials(const ModelDefinition& model, const PenaltyConfig& cfg, double t,
                                       const Vector& q, const Vector& v, const Vector& vdot, const Vector& rho,
                                       int regime) {
    const int m = model.m_in(regime);
    const Matrix alpha = cfg.alpha_for(m);
    const double c1 = 2.0 * cfg.xi * cfg.omega, c0 = cfg.omega * cfg.omega;
    ConstraintEval c = model.constraints(t, q, rho, regime);
    ConvectiveEval ce = model.convective(t, q, v, rho, regime);
    Contraction jv = model.constraint_jvp(t, q, rho, regime, v);
    Contraction ja = model.constraint_jvp(t, q, rho, regime, vdot);
    MultiplierPartials out;
    out.lam_vdot = alpha * c.phi_q;
    out.lam_v = alpha * (ce.gamma_v + c1 * c.phi_q);
    out.lam_q = alpha * (ja.wrt_q + ce.gamma_q + c1 * (jv.wrt_q + c.phi_tq) + c0 * c.phi_q);
    out.lam_rho = alpha * (ja.wrt_rho + ce.gamma_rho + c1 * (jv.wrt_rho + c.phi_trho) + c0 * c.phi_rho);
    return out;
}

CVector complex_accel(const ComplexDynamics& cd, const Formulation& form, int m, double t, const CVector& q,
                      const CVector& v, const CVector& rho, int regime, CVector* lambda) {
    CMatrix M = cd.mass(t, q, rho);
    CVector F = cd.force(t, q, v, rho, regime);
    if (m == 0) {
        if (lambda) lambda->resize(0);
        return kernels::solve_mass<cplx>(M, F);
    }
    if (!cd.constraints) throw UnsupportedModelError("model has no complex constraint callback");
    ConstraintValuesT<cplx> c = cd.constraints(t, q, v, rho, regime);
    switch (form.kind) {
    case FormulationKind::Ode:
        throw ConfigurationError("ode formulation cannot integrate a constrained regime");
    case FormulationKind::Index1: {
        auto [a, lam] = kernels::solve_saddle<cplx>(M, c.phi_q, F, -c.gamma);
        if (lambda) *lambda = lam;
        return a;
    }
    case FormulationKind::Penalty: {
        const auto& pc = form.penalty;
        Matrix alpha = pc.alpha_for(m);
        CVector phidot = c.phi_q * v + c.phi_t;
        auto [a, lam] = kernels::penalty_solve<cplx>(M, c.phi_q, F, c.phi, phidot, c.gamma, alpha, pc.xi, pc.omega);
        if (lambda) *lambda = lam;
        return a;
    }
    }
    throw ConfigurationError("unknown formulation");
}

}  // namespace hybridsens
