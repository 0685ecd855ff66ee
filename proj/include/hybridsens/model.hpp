#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hybridsens/common.hpp"

namespace hybridsens {

/// n coordinates, m constraints (regime 0), p parameters, e event functions.
struct Dimensions {
    int n = 0;
    int m = 0;
    int p = 0;
    int e = 0;

    int dof() const { return n - m; }
    int canonical_size() const { return (2 * n + 1) * (p + 1); }
    void validate() const;
};

struct HybridState {
    double t = 0.0;
    Vector q;
    Vector v;
    double z = 0.0;
    int regime = 0;
};

/// Q, V are n x p, Z is 1 x p, Lambda is m x p (empty when unconstrained).
struct SensitivityBundle {
    Matrix Q;
    Matrix V;
    RowVector Z;
    Matrix Lambda;
};

struct ForceEval {
    Vector F;
    Matrix F_q, F_v, F_rho;
};

struct ConstraintEval {
    Vector phi;
    Matrix phi_q;
    Vector phi_t;
    Matrix phi_rho;
    Matrix phi_tq;
    Vector phi_tt;
    Matrix phi_trho;
};

/// gamma = Phi_qq(v,v) + 2 Phi_tq v + Phi_tt, i.e. the part of the second time
/// derivative of Phi that does not involve the acceleration.
struct ConvectiveEval {
    Vector gamma;
    Matrix gamma_q, gamma_v, gamma_rho;
};

/// Derivatives of a contracted quantity (M u, Phi_q u or Phi_q^T y) with the
/// contraction vector held fixed.
struct Contraction {
    Matrix wrt_q;
    Matrix wrt_rho;
};

struct RunningCostEval {
    double g = 0.0;
    RowVector g_q, g_v, g_vdot, g_lambda, g_rho;
};

struct TerminalCostEval {
    double w = 0.0;
    RowVector w_q, w_v, w_rho;
};

/// Post-event dof velocity and partials of the jump map.
/// h_v is taken with respect to the pre-event dof velocities.
struct JumpEval {
    Vector v_plus;
    Vector h_t;
    Matrix h_q, h_v, h_rho;
};

struct InitialConditions {
    Vector q0, v0;
    Matrix dq0, dv0;
};

struct EventValue {
    double r = 0.0;
    RowVector r_q;
};

enum class JumpKind { VelocityJump, AccelChange, ConstraintChange, DaeImpulse, EomTransition };
enum class Crossing { Rising, Falling, Either };

const char* to_string(JumpKind k);

struct EventFunction {
    std::string name;
    std::function<EventValue(const Vector& q)> r;
    Crossing direction = Crossing::Either;
    std::vector<int> active_regimes;  // empty: active everywhere
    JumpKind kind = JumpKind::VelocityJump;
    int post_regime = -1;             // -1: unchanged
    std::function<JumpEval(double t, const Vector& q, const Vector& v_dof, const Vector& rho)> jump;

    bool active_in(int regime) const;
};

struct JumpSpec {
    JumpKind kind = JumpKind::VelocityJump;
    int event_index = 0;
    int post_regime = 0;
};

template <class S> struct ConstraintValuesT {
    VecT<S> phi;
    MatT<S> phi_q;
    VecT<S> phi_t;
    VecT<S> gamma;
};

/// Complex-promoted callbacks for the state equations. Only the parameter
/// vector is perturbed, so time stays real.
struct ComplexDynamics {
    std::function<CMatrix(double t, const CVector& q, const CVector& rho)> mass;
    std::function<CVector(double t, const CVector& q, const CVector& v, const CVector& rho, int regime)> force;
    std::function<ConstraintValuesT<cplx>(double t, const CVector& q, const CVector& v,
                                          const CVector& rho, int regime)>
        constraints;
    std::function<cplx(double t, const CVector& q, const CVector& v, const CVector& vdot,
                       const CVector& lambda, const CVector& rho)>
        running_cost;
    std::function<std::pair<CVector, CVector>(const CVector& rho)> initial_conditions;
};

struct ModelDefinition {
    std::string name;
    Dimensions dims;
    std::vector<std::string> parameter_names;
    Vector nominal_rho;

    std::function<int(int regime)> constraint_count;  // defaults to dims.m

    std::function<Matrix(double t, const Vector& q, const Vector& rho)> mass;
    /// d(M u)/dq and d(M u)/drho.
    std::function<Contraction(double t, const Vector& q, const Vector& rho, const Vector& u)> mass_jvp;
    std::function<ForceEval(double t, const Vector& q, const Vector& v, const Vector& rho, int regime)> force;

    std::function<ConstraintEval(double t, const Vector& q, const Vector& rho, int regime)> constraints;
    /// d(Phi_q u)/dq = Phi_qq(u, .) and d(Phi_q u)/drho.
    std::function<Contraction(double t, const Vector& q, const Vector& rho, int regime, const Vector& u)>
        constraint_jvp;
    /// d(Phi_q^T y)/dq and d(Phi_q^T y)/drho. Derived from constraint_jvp when unset.
    std::function<Contraction(double t, const Vector& q, const Vector& rho, int regime, const Vector& y)>
        constraint_vjp;
    std::function<ConvectiveEval(double t, const Vector& q, const Vector& v, const Vector& rho, int regime)>
        convective;

    std::function<RunningCostEval(double t, const Vector& q, const Vector& v, const Vector& vdot,
                                  const Vector& lambda, const Vector& rho)>
        running_cost;
    std::function<TerminalCostEval(double t, const Vector& q, const Vector& v, const Vector& rho)>
        terminal_cost;

    std::vector<EventFunction> events;
    std::function<InitialConditions(const Vector& rho)> initial_conditions;
    std::function<std::vector<int>(int regime)> dof_hint;

    std::optional<ComplexDynamics> complex;

    int m_in(int regime) const { return constraint_count ? constraint_count(regime) : dims.m; }
    std::vector<int> hint_for(int regime) const { return dof_hint ? dof_hint(regime) : std::vector<int>{}; }
    Contraction phi_vjp(double t, const Vector& q, const Vector& rho, int regime, const Vector& y) const;
};

/// Fills derived callbacks and checks that required ones exist.
void finalize_model(ModelDefinition& model);

struct EventRecord {
    double t_eve = 0.0;
    int event_index = 0;
    JumpKind kind = JumpKind::VelocityJump;
    RowVector dtdrho;
    HybridState state_pre, state_post;
    SensitivityBundle sens_pre, sens_post;
    Matrix impulse_sens;  // d(delta lambda)/drho for impulsive constraint changes

    /// Rejects records whose position changes across the event.
    void check() const;
};

Vector pack_canonical(const HybridState& state, const SensitivityBundle& sens);
void unpack_canonical(const Vector& x, const Dimensions& dims, HybridState& state, SensitivityBundle& sens);

struct ValidationEntry {
    std::string partial;
    double max_rel_error = 0.0;
    bool pass = true;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    double tolerance = 1e-5;
    bool pass = true;
    std::string summary() const;
};

/// Compares every supplied partial against central differences at the probe.
ValidationReport validate_model(const ModelDefinition& model, const HybridState& probe, const Vector& rho,
                                double fd_eps = 1e-6, double tolerance = 1e-5);

}  // namespace hybridsens
