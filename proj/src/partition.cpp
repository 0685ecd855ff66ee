#include "hybridsens/partition.hpp"

#include <algorithm>
#include <sstream>

namespace hybridsens {

namespace {

Matrix select_columns(const Matrix& a, const std::vector<int>& cols) {
    Matrix out(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) out.col(j) = a.col(cols[j]);
    return out;
}

Matrix select_rows(const Matrix& a, const std::vector<int>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(i) = a.row(rows[i]);
    return out;
}

// Ratio of smallest to largest |R_ii| of a column-pivoted QR, plus the count
// of pivots above the threshold.
std::pair<double, int> pivot_quality(const Eigen::ColPivHouseholderQR<Matrix>& qr, int k, double pivot_tol) {
    const Matrix& r = qr.matrixQR();
    double big = 0.0;
    for (int i = 0; i < k; ++i) big = std::max(big, std::abs(r(i, i)));
    if (big == 0.0) return {0.0, 0};
    double small = big;
    int rank = 0;
    for (int i = 0; i < k; ++i) {
        double d = std::abs(r(i, i));
        small = std::min(small, d);
        if (d >= pivot_tol * big) ++rank;
    }
    return {small / big, rank};
}

CoordinatePartition finish(const Matrix& phi_q, std::vector<int> dep, std::vector<int> dof, bool overridden) {
    CoordinatePartition part;
    part.n = static_cast<int>(phi_q.cols());
    std::sort(dep.begin(), dep.end());
    std::sort(dof.begin(), dof.end());
    part.dep = std::move(dep);
    part.dof = std::move(dof);
    part.hint_overridden = overridden;
    part.lu.compute(select_columns(phi_q, part.dep));
    part.R = -part.lu.solve(select_columns(phi_q, part.dof));
    return part;
}

}  // namespace

Matrix CoordinatePartition::solve_dep(const Matrix& b) const { return lu.solve(b); }

Matrix CoordinatePartition::rows_dof(const Matrix& x) const { return select_rows(x, dof); }

Matrix CoordinatePartition::rows_dep(const Matrix& x) const { return select_rows(x, dep); }

Matrix CoordinatePartition::assemble(const Matrix& dep_rows, const Matrix& dof_rows) const {
    Eigen::Index cols = dep.empty() ? dof_rows.cols() : dep_rows.cols();
    Matrix out(n, cols);
    for (size_t i = 0; i < dep.size(); ++i) out.row(dep[i]) = dep_rows.row(i);
    for (size_t i = 0; i < dof.size(); ++i) out.row(dof[i]) = dof_rows.row(i);
    return out;
}

CoordinatePartition trivial_partition(int n) {
    CoordinatePartition part;
    part.n = n;
    for (int i = 0; i < n; ++i) part.dof.push_back(i);
    part.R = Matrix(0, n);
    return part;
}

CoordinatePartition partition_coordinates(const Matrix& phi_q, double pivot_tol, std::span<const int> preferred_dof) {
    const int m = static_cast<int>(phi_q.rows());
    const int n = static_cast<int>(phi_q.cols());
    if (m == 0) return trivial_partition(n);
    if (m > n) throw DimensionError("more constraints than coordinates");

    Matrix scaled = phi_q;
    for (int i = 0; i < m; ++i) {
        double s = scaled.row(i).cwiseAbs().maxCoeff();
        if (s == 0.0) throw RankDeficiencyError("constraint Jacobian has a zero row", m - 1);
        scaled.row(i) /= s;
    }

    bool overridden = false;
    if (!preferred_dof.empty()) {
        std::vector<int> dof(preferred_dof.begin(), preferred_dof.end());
        std::vector<int> dep;
        for (int j = 0; j < n; ++j)
            if (std::find(dof.begin(), dof.end(), j) == dof.end()) dep.push_back(j);
        if (static_cast<int>(dep.size()) == m) {
            Eigen::ColPivHouseholderQR<Matrix> qr(select_columns(scaled, dep));
            if (pivot_quality(qr, m, pivot_tol).first >= pivot_tol) return finish(phi_q, dep, dof, false);
        }
        overridden = true;
        std::ostringstream os;
        os << "partition: preferred dof set rejected, falling back to pivoted choice";
        log_message(os.str());
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
    auto [ratio, rank] = pivot_quality(qr, m, pivot_tol);
    if (ratio < pivot_tol) throw RankDeficiencyError("constraint Jacobian is rank deficient", rank);
    std::vector<int> dep, dof;
    const auto& perm = qr.colsPermutation().indices();
    for (int j = 0; j < n; ++j) (j < m ? dep : dof).push_back(perm(j));
    return finish(phi_q, dep, dof, overridden);
}

Vector resolve_dependent_velocity(const CoordinatePartition& part, const Vector& phi_t, const Vector& v_dof) {
    if (part.m() == 0) return Vector(0);
    return part.R * v_dof - part.solve_dep(phi_t);
}

Matrix resolve_dependent_Q(const CoordinatePartition& part, const Matrix& phi_rho, const Matrix& Q_dof) {
    if (part.m() == 0) return Matrix(0, Q_dof.cols());
    return part.R * Q_dof - part.solve_dep(phi_rho);
}

Matrix resolve_dependent_V(const ModelDefinition& model, const CoordinatePartition& part, double t, const Vector& q,
                           const Vector& v, const Vector& rho, int regime, const Matrix& Q, const Matrix& V_dof) {
    if (part.m() == 0) return Matrix(0, V_dof.cols());
    ConstraintEval c = model.constraints(t, q, rho, regime);
    Contraction jv = model.constraint_jvp(t, q, rho, regime, v);
    Matrix rhs = (jv.wrt_q + c.phi_tq) * Q + jv.wrt_rho + c.phi_trho;
    return part.R * V_dof - part.solve_dep(rhs);
}

Vector project_positions(const ModelDefinition& model, double t, const Vector& q, const Vector& rho, int regime,
                         const CoordinatePartition& part, double tol, int max_iter) {
    Vector x = q;
    for (int it = 0; it < max_iter; ++it) {
        ConstraintEval c = model.constraints(t, x, rho, regime);
        if (c.phi.cwiseAbs().maxCoeff() <= tol) return x;
        Matrix jdep = Matrix(c.phi_q.rows(), part.m());
        for (int j = 0; j < part.m(); ++j) jdep.col(j) = c.phi_q.col(part.dep[j]);
        Vector dx = jdep.partialPivLu().solve(c.phi);
        for (int j = 0; j < part.m(); ++j) x(part.dep[j]) -= dx(j);
    }
    ConstraintEval c = model.constraints(t, x, rho, regime);
    if (c.phi.cwiseAbs().maxCoeff() > 1e3 * tol) throw EvaluationError("position projection did not converge");
    return x;
}

}  // namespace hybridsens
