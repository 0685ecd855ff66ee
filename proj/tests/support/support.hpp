#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hybridsens/integrator.hpp"
#include "hybridsens/models.hpp"
#include "hybridsens/oracle.hpp"
#include "hybridsens/scenario.hpp"
#include "hybridsens/tlm.hpp"

namespace testsupport {

using namespace hybridsens;

/// Planar particle, q = [x, y], rho = [a, b], with a mass matrix that depends
/// on q and rho, and a running cost touching q, v, vdot and rho.
/// Impact: r = y falling, jump map depending on t, q, v and rho.
/// Switch: r = y - 0.5 falling, accel-only change into regime 1.
enum class ParticleEvent { Impact, Switch };
ModelDefinition build_particle(ParticleEvent kind);

/// Closed-form bouncing ball: height and its h0-derivative at time t for the
/// first two flight arcs (elastic, drop from rest).
struct BallClosedForm {
    double g = 9.81;
    double t_eve(double h0) const;
    double q(double t, double h0) const;
    double v(double t, double h0) const;
};

/// Estimates of the post-event sensitivities from two perturbed runs at
/// rho -/+ d/2 e_i, read off at the later of the two event times.
struct TwinEstimate {
    double dtdrho = 0.0;
    Vector Q_minus, Q_plus, V_plus;
    double Z_plus = 0.0;
};
TwinEstimate twin_estimate(const ModelDefinition& model, const Formulation& form, const IntegratorConfig& cfg,
                           const Vector& rho, int param, double d, double t0, double t_search);

/// Log-log least-squares slope of err against step.
double observed_order(const std::vector<double>& steps, const std::vector<double>& errs);

/// Central-difference Jacobian of f at x with step h (1 + |x_j|).
Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-6);

/// max |a - b| / max(max |b|, floor).
double rel_err(const Matrix& a, const Matrix& b, double floor = 1e-12);

/// Tight integrator settings used for reference runs.
IntegratorConfig tight_config();

/// Random feasible state of a constrained model near its initial configuration.
HybridState feasible_state(const ModelDefinition& model, const Vector& rho, unsigned seed, double spread);

}  // namespace testsupport
