#pragma once

#include <optional>

#include "hybridsens/formulations.hpp"
#include "hybridsens/partition.hpp"

namespace hybridsens {

struct ConstraintSnapshot {
    int regime = 0;
    int m = 0;
    ConstraintEval eval;
    CoordinatePartition part;
};

ConstraintSnapshot snapshot_constraints(const ModelDefinition& model, double t, const Vector& q, const Vector& rho,
                                        int regime, std::span<const int> preferred_dof);

/// dt_eve/drho = -(r_q Q) / (r_q v). Raises GrazingError for tangential crossings.
RowVector event_time_sensitivity(const RowVector& r_q, const Matrix& Q_minus, const Vector& v_minus);

/// Partial maps of an impulsive constraint change, v+ = H(t, q, v-, rho).
struct ImpulseJump {
    Vector delta_lambda;
    Matrix Hv_q, Hv_v, Hv_rho, Hl_q, Hl_v, Hl_rho;
    Vector Hv_t, Hl_t;
};

/// Everything fixed at the moment of an event, shared by the jump rules.
struct EventContext {
    const ModelDefinition* model = nullptr;
    Formulation form;
    Vector rho;
    JumpSpec spec;
    HybridState pre, post;
    ConstraintSnapshot pre_c, post_c;
    DynamicsPoint dyn_pre, dyn_post;
    std::optional<JumpEval> jump;
    std::optional<ImpulseJump> impulse;
};

/// Resolves the jump kind for the formulation and computes the post-event state.
EventContext prepare_event(const ModelDefinition& model, const Formulation& form, int event_index,
                           const HybridState& state_minus, const Vector& rho);

HybridState jump_state(const ModelDefinition& model, const Formulation& form, int event_index,
                       const HybridState& state_minus, const Vector& rho);

/// Q+ = Q- - (v+ - v-) dt/drho; with a constrained post regime only the dof
/// rows are kept and the dependent rows are re-solved.
Matrix jump_Q(const Vector& v_plus, const Vector& v_minus, const Matrix& Q_minus, const RowVector& dtdrho,
              const ConstraintSnapshot* post = nullptr);

Matrix jump_V(const EventContext& ctx, const SensitivityBundle& sens_minus, const RowVector& dtdrho,
              const Matrix& Q_plus);

RowVector jump_Z(double g_plus, double g_minus, const RowVector& Z_minus, const RowVector& dtdrho);

/// Multiplier sensitivity recomputed algebraically in the post-event regime.
Matrix jump_multiplier_sens(const ModelDefinition& model, const Formulation& form, const HybridState& state_plus,
                            const Matrix& Q_plus, const Matrix& V_plus, const Vector& rho);

/// Sensitivity of the impulse multiplier, d(delta lambda)/drho.
Matrix impulse_multiplier_sens(const EventContext& ctx, const SensitivityBundle& sens_minus, const RowVector& dtdrho);

EventRecord apply_event(const ModelDefinition& model, const Formulation& form, int event_index,
                        const HybridState& state_minus, const SensitivityBundle& sens_minus, const Vector& rho);

}  // namespace hybridsens
