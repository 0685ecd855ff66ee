#pragma once

#include "hybridsens/integrator.hpp"

namespace hybridsens {

/// Sensitivity history for one parameter column.
struct SensitivitySeries {
    std::vector<double> t;
    std::vector<Vector> Q, V;
    std::vector<double> Z;
    std::vector<Vector> Lambda;  // empty when not available
};

/// On-grid samples of an analytic run.
SensitivitySeries analytic_series(const TrajectoryArchive& arc, int param);

/// States of on-grid samples: (t, q, v, z).
struct StateSeries {
    std::vector<double> t;
    std::vector<Vector> q, v, lambda;
    std::vector<double> z;
};

StateSeries state_series(const TrajectoryArchive& arc);

/// FD step used by default for parameter value rho_i.
double default_fd_step(double rho_i);

struct FdResult {
    SensitivitySeries series;
    std::vector<double> events_minus, events_plus;  // event times of the two twins
};

/// Central differences of two runs at rho -/+ eps e_i, sampled on the grid.
FdResult central_fd_sensitivity(const ModelDefinition& model, const Formulation& form, const IntegratorConfig& cfg,
                                const Vector& rho, double eps, int param, double t0, double tF);

/// Complex-step derivative on an event-free span [t0, t_end].
SensitivitySeries complex_step_sensitivity(const ModelDefinition& model, const Formulation& form,
                                           const IntegratorConfig& cfg, const Vector& rho, double eps, int param,
                                           double t0, double t_end);

struct ExclusionWindow {
    double center = 0.0;
    double halfwidth = 0.0;
};

/// Windows of half-width factor*eps*|dt/drho_i| around every event of the run.
std::vector<ExclusionWindow> fd_exclusion_windows(const TrajectoryArchive& arc, int param, double eps,
                                                  double factor = 5.0);

struct QuantityError {
    std::string name;
    double max_rel_err = 0.0;
};

struct CompareReport {
    std::vector<QuantityError> quantities;
    double max_rel_err = 0.0;
    double threshold = 1e-3;
    std::size_t samples_compared = 0;
    bool pass = false;

    void merge(const CompareReport& other);
    std::string text() const;  // ends with the RESULT trailer line
};

/// Max over samples of |a - b| / max|b| for Q, V, Z (and Lambda when both have it).
CompareReport compare_report(const SensitivitySeries& analytic, const SensitivitySeries& baseline,
                             const std::vector<ExclusionWindow>& windows, double threshold,
                             const std::string& label = "");

}  // namespace hybridsens
