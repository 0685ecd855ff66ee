#pragma once

#include <span>
#include <vector>

#include "hybridsens/model.hpp"

namespace hybridsens {

/// Split of the coordinates into dependent and independent (dof) sets for a
/// constraint Jacobian. Index lists are ascending.
struct CoordinatePartition {
    int n = 0;
    std::vector<int> dep;
    std::vector<int> dof;
    Matrix R;                       // -Phi_qdep^{-1} Phi_qdof
    Eigen::PartialPivLU<Matrix> lu; // factorization of Phi_qdep
    bool hint_overridden = false;

    int m() const { return static_cast<int>(dep.size()); }
    int f() const { return static_cast<int>(dof.size()); }

    /// Phi_qdep^{-1} b for a vector or a block of columns.
    Matrix solve_dep(const Matrix& b) const;
    Matrix rows_dof(const Matrix& x) const;
    Matrix rows_dep(const Matrix& x) const;
    Matrix assemble(const Matrix& dep_rows, const Matrix& dof_rows) const;
};

/// Trivial partition for an unconstrained regime: every coordinate is a dof.
CoordinatePartition trivial_partition(int n);

CoordinatePartition partition_coordinates(const Matrix& phi_q, double pivot_tol = 1e-8,
                                          std::span<const int> preferred_dof = {});

/// v_dep from Phi_q v = -Phi_t.
Vector resolve_dependent_velocity(const CoordinatePartition& part, const Vector& phi_t, const Vector& v_dof);

/// Q_dep from Phi_q Q + Phi_rho = 0.
Matrix resolve_dependent_Q(const CoordinatePartition& part, const Matrix& phi_rho, const Matrix& Q_dof);

/// V_dep from the derivative of the velocity constraint with respect to rho.
Matrix resolve_dependent_V(const ModelDefinition& model, const CoordinatePartition& part, double t,
                           const Vector& q, const Vector& v, const Vector& rho, int regime, const Matrix& Q,
                           const Matrix& V_dof);

/// Newton projection of q onto Phi = 0, holding the dof coordinates fixed.
Vector project_positions(const ModelDefinition& model, double t, const Vector& q, const Vector& rho, int regime,
                         const CoordinatePartition& part, double tol = 1e-13, int max_iter = 50);

}  // namespace hybridsens
