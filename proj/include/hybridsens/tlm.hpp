#pragma once

#include "hybridsens/formulations.hpp"

namespace hybridsens {

/// Right-hand side of the tangent linear model. Lambda is the multiplier
/// sensitivity (m x p), empty for unconstrained regimes.
struct TlmResult {
    Matrix Qdot;
    Matrix Vdot;
    Matrix Lambda;
};

TlmResult tlm_rhs_ode(const ModelDefinition& model, const HybridState& s, const SensitivityBundle& sens,
                      const Vector& rho, const Vector& vdot);

/// Solves the saddle system for [V'; Lambda] column by column.
TlmResult tlm_rhs_dae_index1(const ModelDefinition& model, const HybridState& s, const SensitivityBundle& sens,
                             const Vector& rho, const DynamicsPoint& dyn);

TlmResult tlm_rhs_penalty(const ModelDefinition& model, const PenaltyConfig& cfg, const HybridState& s,
                          const SensitivityBundle& sens, const Vector& rho, const Vector& vdot, const Vector& lambda);

/// Lambda* as the total derivative of lambda* along the penalty solution.
Matrix multiplier_estimate_sens(const ModelDefinition& model, const PenaltyConfig& cfg, const HybridState& s,
                                const SensitivityBundle& sens, const Matrix& Vdot, const Vector& rho,
                                const Vector& vdot);

TlmResult tlm_rhs(const ModelDefinition& model, const Formulation& form, const HybridState& s,
                  const SensitivityBundle& sens, const Vector& rho, const DynamicsPoint& dyn);

/// Z' = g_q Q + g_v V + g_vdot V' + g_lambda Lambda + g_rho.
RowVector quadrature_sens_rhs(const ModelDefinition& model, const HybridState& s, const SensitivityBundle& sens,
                              const TlmResult& tlm, const DynamicsPoint& dyn, const Vector& rho);

double running_cost_value(const ModelDefinition& model, const HybridState& s, const DynamicsPoint& dyn,
                          const Vector& rho);

/// dpsi/drho = Z + w_q Q + w_v V + w_rho at the final time.
RowVector cost_gradient(const ModelDefinition& model, const HybridState& final_state, const SensitivityBundle& sens,
                        const Vector& rho);

double cost_value(const ModelDefinition& model, const HybridState& final_state, const Vector& rho);

/// Time derivative of the packed canonical vector.
Vector canonical_rhs(const ModelDefinition& model, const Formulation& form, double t, const Vector& x,
                     const Vector& rho, int regime);

}  // namespace hybridsens
