#pragma once

#include <limits>
#include <vector>

#include "hybridsens/events.hpp"

namespace hybridsens {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    double initial_step = 0.0;  // 0: automatic
    double event_tol = 1e-10;
    double dense_sample_dt = 0.01;
    int max_events = 10000;
    long max_steps = 20'000'000;
    bool record_multipliers = true;
    std::vector<double> sample_times;  // overrides the regular grid when non-empty
};

/// Embedded 5(4) Dormand-Prince pair with its 4th-order continuous extension.
template <class S> class DormandPrince {
public:
    using Vec = VecT<S>;
    using Rhs = std::function<Vec(double, const Vec&)>;

    struct Step {
        double t = 0.0, h = 0.0;
        Vec y0, y1, k1, k7;
        double err = 0.0;
        Vec r1, r2, r3, r4, r5;  // dense output coefficients
    };

    DormandPrince(Rhs f, double rtol, double atol) : f_(std::move(f)), rtol_(rtol), atol_(atol) {}

    /// Attempts one step; err is the weighted RMS error estimate.
    Step attempt(double t, const Vec& y, const Vec& k1, double h) const {
        static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15,
                                a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729, a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656, a71 = 35.0 / 384, a73 = 500.0 / 1113,
                                a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
        static constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                                e6 = 22.0 / 525, e7 = -1.0 / 40;
        static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                                d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                                d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
        Step s;
        s.t = t;
        s.h = h;
        s.y0 = y;
        s.k1 = k1;
        Vec k2 = f_(t + c2 * h, y + h * (a21 * k1));
        Vec k3 = f_(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
        Vec k4 = f_(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        Vec k5 = f_(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        Vec k6 = f_(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        s.y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        s.k7 = f_(t + h, s.y1);
        Vec e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * s.k7);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            double sc = atol_ + rtol_ * std::max(std::abs(y(i)), std::abs(s.y1(i)));
            double r = std::abs(e(i)) / sc;
            acc += r * r;
        }
        s.err = y.size() ? std::sqrt(acc / static_cast<double>(y.size())) : 0.0;
        if (!std::isfinite(s.err)) s.err = std::numeric_limits<double>::infinity();
        s.r1 = y;
        s.r2 = s.y1 - y;
        s.r3 = h * k1 - s.r2;
        s.r4 = s.r2 - h * s.k7 - s.r3;
        s.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * s.k7);
        return s;
    }

    static Vec dense(const Step& s, double tau) {
        double th = (tau - s.t) / s.h, th1 = 1.0 - th;
        return s.r1 + th * (s.r2 + th1 * (s.r3 + th * (s.r4 + th1 * s.r5)));
    }

    Vec rhs(double t, const Vec& y) const { return f_(t, y); }

    double norm(const Vec& x, const Vec& y) const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double r = std::abs(x(i)) / (atol_ + rtol_ * std::abs(y(i)));
            acc += r * r;
        }
        return x.size() ? std::sqrt(acc / static_cast<double>(x.size())) : 0.0;
    }

    double initial_step(double t, const Vec& y, const Vec& f0, double hmax, double span) const {
        double d0 = norm(y, y), d1 = norm(f0, y);
        double h0 = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min({h0, hmax, span});
        Vec f1 = f_(t + h0, y + h0 * f0);
        double d2 = norm(f1 - f0, y) / h0;
        double big = std::max(d1, d2);
        double h1 = big <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / big, 0.2);
        return std::min({100 * h0, h1, hmax, span});
    }

private:
    Rhs f_;
    double rtol_, atol_;
};

/// PI step-size controller.
class StepController {
public:
    /// Returns the next step; sets accept according to err.
    double propose(double h, double err, bool& accept);

private:
    double facold_ = 1e-4;
    bool last_rejected_ = false;
};

struct SegmentEvent {
    std::function<double(double t, const Vector& y)> value;
    Crossing direction = Crossing::Either;
    bool masked = false;
    double mask_threshold = 0.0;
};

struct SegmentResult {
    double t_stop = 0.0;
    Vector y_stop;
    int triggered = -1;
    std::vector<double> ts;
    std::vector<Vector> ys;
    long accepted = 0;
    long rejected = 0;
};

/// Integrates from t0 until t_end or the first triggered event. Samples are
/// taken at the requested times in [t0, t_stop), plus t_end when reached.
SegmentResult integrate_segment(const std::function<Vector(double, const Vector&)>& rhs, double t0, const Vector& y0,
                                double t_end, std::vector<SegmentEvent>& events, const std::vector<double>& samples,
                                const IntegratorConfig& cfg);

/// Event-free integration in complex arithmetic. on_step sees each accepted
/// step end and may throw.
struct ComplexRun {
    std::vector<double> ts;
    std::vector<CVector> ys;
    CVector y_end;
};

ComplexRun integrate_complex(const std::function<CVector(double, const CVector&)>& rhs, double t0, const CVector& y0,
                             double t_end, const std::vector<double>& samples, const IntegratorConfig& cfg,
                             const std::function<void(double, const CVector&)>& on_step = {});

struct TrajectorySegment {
    int regime = 0;
    std::vector<double> t;
    std::vector<Vector> x;         // packed canonical vectors
    std::vector<Vector> lambda;    // empty entries for unconstrained regimes
    std::vector<Matrix> Lambda;
    std::vector<char> on_grid;
};

struct TrajectoryArchive {
    Dimensions dims;
    std::vector<std::string> parameter_names;
    FormulationKind formulation = FormulationKind::Ode;
    Vector rho;
    std::vector<TrajectorySegment> segments;
    std::vector<EventRecord> events;
    HybridState final_state;
    SensitivityBundle final_sens;
    double psi = 0.0;
    RowVector dpsi_drho;
    long steps_accepted = 0;
    long steps_rejected = 0;

    std::size_t sample_count() const;
};

std::vector<double> sample_grid(double t0, double tF, const IntegratorConfig& cfg);

TrajectoryArchive propagate_hybrid(const ModelDefinition& model, const Formulation& form, const IntegratorConfig& cfg,
                                   const Vector& rho, double t0, double tF);

}  // namespace hybridsens
