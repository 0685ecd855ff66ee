#pragma once

#include <optional>

#include "hybridsens/model.hpp"

namespace hybridsens {

enum class FormulationKind { Ode, Index1, Penalty };

const char* to_string(FormulationKind k);
FormulationKind formulation_from_string(const std::string& s);

struct PenaltyConfig {
    double alpha = 1e7;
    std::optional<Matrix> alpha_matrix;  // overrides alpha*I when sized m x m
    double xi = 1.0;
    double omega = 10.0;

    Matrix alpha_for(int m) const;
};

struct Formulation {
    FormulationKind kind = FormulationKind::Ode;
    PenaltyConfig penalty;
};

/// Accelerations and multipliers (lambda for the DAE, lambda* for the penalty).
struct DynamicsPoint {
    Vector vdot;
    Vector lambda;
};

struct EomPartials {
    Matrix f_q, f_v, f_rho;
};

/// Guard used for every mass-like factorization.
constexpr double kMaxCondition = 1e12;

/// The rcond estimate misses exactly zero pivots, which Eigen's LU skips.
template <class LU> bool well_conditioned(const LU& lu) {
    const auto d = lu.matrixLU().diagonal().cwiseAbs();
    if (d.size() > 0 && !(d.minCoeff() > 1e-15 * d.maxCoeff())) return false;
    return lu.rcond() * kMaxCondition >= 1.0;
}

namespace kernels {

template <class S> VecT<S> solve_mass(const MatT<S>& M, const VecT<S>& b) {
    Eigen::PartialPivLU<MatT<S>> lu(M);
    if (!well_conditioned(lu)) throw SingularMassError("mass matrix is singular or ill-conditioned");
    return lu.solve(b);
}

/// [M G^T; G 0][a; lambda] = [f; c]
template <class S>
std::pair<VecT<S>, VecT<S>> solve_saddle(const MatT<S>& M, const MatT<S>& G, const VecT<S>& f, const VecT<S>& c) {
    const auto n = M.rows(), m = G.rows();
    MatT<S> K = MatT<S>::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = M;
    K.topRightCorner(n, m) = G.transpose();
    K.bottomLeftCorner(m, n) = G;
    VecT<S> rhs(n + m);
    rhs << f, c;
    Eigen::PartialPivLU<MatT<S>> lu(K);
    if (!well_conditioned(lu)) throw SingularMassError("saddle-point matrix is singular");
    VecT<S> x = lu.solve(rhs);
    return {x.head(n), x.tail(m)};
}

/// Penalty systems (M + G^T alpha G) x = B - G^T alpha W, solved in the
/// equivalent bordered form [M G^T; G -alpha^-1][x; y] = [B; -W] which stays
/// well conditioned for large alpha. y = alpha (G x + W).
template <class S>
std::pair<MatT<S>, MatT<S>> penalty_bordered(const MatT<S>& M, const MatT<S>& G, const MatT<S>& B, const MatT<S>& W,
                                             const Matrix& alpha) {
    const auto n = M.rows(), m = G.rows();
    MatT<S> K(n + m, n + m);
    K.topLeftCorner(n, n) = M;
    K.topRightCorner(n, m) = G.transpose();
    K.bottomLeftCorner(m, n) = G;
    K.bottomRightCorner(m, m) = -alpha.inverse().cast<S>();
    MatT<S> rhs(n + m, B.cols());
    rhs << B, -W;
    Eigen::PartialPivLU<MatT<S>> lu(K);
    if (!well_conditioned(lu)) throw SingularMassError("penalty system is ill-conditioned");
    MatT<S> x = lu.solve(rhs);
    return {x.topRows(n), x.bottomRows(m)};
}

/// Penalty acceleration and lambda* from
/// M v' + Phi_q^T alpha (Phi'' + 2 xi omega Phi' + omega^2 Phi) = F.
template <class S>
std::pair<VecT<S>, VecT<S>> penalty_solve(const MatT<S>& M, const MatT<S>& phi_q, const VecT<S>& F,
                                          const VecT<S>& phi, const VecT<S>& phidot, const VecT<S>& gamma,
                                          const Matrix& alpha, double xi, double omega) {
    VecT<S> s = gamma + (2.0 * xi * omega) * phidot + (omega * omega) * phi;
    auto [x, y] = penalty_bordered<S>(M, phi_q, F, s, alpha);
    return {x.col(0), y.col(0)};
}

}  // namespace kernels

/// v' = M^{-1} F.
Vector ode_accel(const ModelDefinition& model, double t, const Vector& q, const Vector& v, const Vector& rho,
                 int regime = 0);

/// f_zeta = M^{-1}(F_zeta - M_zeta v').
EomPartials eom_partials(const ModelDefinition& model, double t, const Vector& q, const Vector& v, const Vector& rho,
                         const Vector& vdot, int regime = 0);

/// Acceleration-level DAE with the sign convention M v' + Phi_q^T lambda = F.
DynamicsPoint dae_index1_solve(const ModelDefinition& model, double t, const Vector& q, const Vector& v,
                               const Vector& rho, int regime = 0);

Vector penalty_accel(const ModelDefinition& model, const PenaltyConfig& cfg, double t, const Vector& q,
                     const Vector& v, const Vector& rho, int regime = 0, Vector* lambda = nullptr);

/// lambda* = alpha (Phi'' + 2 xi omega Phi' + omega^2 Phi).
Vector estimate_multipliers(const ModelDefinition& model, const PenaltyConfig& cfg, double t, const Vector& q,
                            const Vector& v, const Vector& vdot, const Vector& rho, int regime = 0);

/// Dispatches on the formulation; constraint-free regimes fall back to the ODE.
DynamicsPoint evaluate_dynamics(const ModelDefinition& model, const Formulation& form, double t, const Vector& q,
                                const Vector& v, const Vector& rho, int regime);

/// Blocks of the penalty sensitivity system, evaluated at fixed v'.
struct PenaltyBlocks {
    Matrix Mbar;
    Vector Fbar;
    Matrix Fbar_q, Fbar_v, Fbar_rho;
    Matrix Mbar_q_vdot, Mbar_rho_vdot;
};

PenaltyBlocks penalty_blocks(const ModelDefinition& model, const PenaltyConfig& cfg, double t, const Vector& q,
                             const Vector& v, const Vector& vdot, const Vector& rho, int regime);

/// Partials of lambda* with v' held fixed.
struct MultiplierPartials {
    Matrix lam_q, lam_v, lam_vdot, lam_rho;
};

MultiplierPartials multiplier_partials(const ModelDefinition& model, const PenaltyConfig& cfg, double t,
                                       const Vector& q, const Vector& v, const Vector& vdot, const Vector& rho,
                                       int regime);

/// Complex-promoted state equations used by the complex-step oracle.
CVector complex_accel(const ComplexDynamics& cd, const Formulation& form, int m, double t, const CVector& q,
                      const CVector& v, const CVector& rho, int regime, CVector* lambda = nullptr);

}  // namespace hybridsens
