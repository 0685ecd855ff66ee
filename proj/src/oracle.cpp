#include "hybridsens/oracle.hpp"

#include <future>
#include <iomanip>
#include <sstream>

namespace hybridsens {

SensitivitySeries analytic_series(const TrajectoryArchive& arc, int param) {
    SensitivitySeries out;
    HybridState s;
    SensitivityBundle sens;
    for (const auto& seg : arc.segments) {
        for (size_t i = 0; i < seg.t.size(); ++i) {
            if (!seg.on_grid[i]) continue;
            unpack_canonical(seg.x[i], arc.dims, s, sens);
            out.t.push_back(seg.t[i]);
            out.Q.push_back(sens.Q.col(param));
            out.V.push_back(sens.V.col(param));
            out.Z.push_back(sens.Z(param));
            if (seg.Lambda[i].size() > 0) out.Lambda.push_back(seg.Lambda[i].col(param));
        }
    }
    if (out.Lambda.size() != out.t.size()) out.Lambda.clear();
    return out;
}

StateSeries state_series(const TrajectoryArchive& arc) {
    StateSeries out;
    HybridState s;
    SensitivityBundle sens;
    for (const auto& seg : arc.segments) {
        for (size_t i = 0; i < seg.t.size(); ++i) {
            if (!seg.on_grid[i]) continue;
            unpack_canonical(seg.x[i], arc.dims, s, sens);
            out.t.push_back(seg.t[i]);
            out.q.push_back(s.q);
            out.v.push_back(s.v);
            out.z.push_back(s.z);
            if (seg.lambda[i].size() > 0) out.lambda.push_back(seg.lambda[i]);
        }
    }
    if (out.lambda.size() != out.t.size()) out.lambda.clear();
    return out;
}

double default_fd_step(double rho_i) { return 1e-5 * (1.0 + std::abs(rho_i)); }

FdResult central_fd_sensitivity(const ModelDefinition& model, const Formulation& form, const IntegratorConfig& cfg,
                                const Vector& rho, double eps, int param, double t0, double tF) {
    if (param < 0 || param >= rho.size()) throw DimensionError("parameter index out of range");
    if (!(eps > 0.0)) throw ConfigurationError("FD step must be positive");
    Vector rp = rho, rm = rho;
    rp(param) += eps;
    rm(param) -= eps;
    auto run = [&](const Vector& r) { return propagate_hybrid(model, form, cfg, r, t0, tF); };
    auto fut = std::async(std::launch::async, run, rp);
    TrajectoryArchive am = run(rm);
    TrajectoryArchive ap = fut.get();
    if (am.events.size() != ap.events.size())
        throw TwinMismatchError("twin runs detected " + std::to_string(am.events.size()) + " and " +
                                std::to_string(ap.events.size()) + " events");
    StateSeries sm = state_series(am), sp = state_series(ap);
    if (sm.t.size() != sp.t.size()) throw TwinMismatchError("twin runs sampled different grids");
    FdResult out;
    for (const auto& e : am.events) out.events_minus.push_back(e.t_eve);
    for (const auto& e : ap.events) out.events_plus.push_back(e.t_eve);
    const double inv = 1.0 / (2.0 * eps);
    bool with_lambda = !sm.lambda.empty() && !sp.lambda.empty();
    for (size_t i = 0; i < sm.t.size(); ++i) {
        out.series.t.push_back(sm.t[i]);
        out.series.Q.push_back((sp.q[i] - sm.q[i]) * inv);
        out.series.V.push_back((sp.v[i] - sm.v[i]) * inv);
        out.series.Z.push_back((sp.z[i] - sm.z[i]) * inv);
        if (with_lambda && sp.lambda[i].size() == sm.lambda[i].size())
            out.series.Lambda.push_back((sp.lambda[i] - sm.lambda[i]) * inv);
    }
    if (out.series.Lambda.size() != out.series.t.size()) out.series.Lambda.clear();
    return out;
}

SensitivitySeries complex_step_sensitivity(const ModelDefinition& model, const Formulation& form,
                                           const IntegratorConfig& cfg, const Vector& rho, double eps, int param,
                                           double t0, double t_end) {
    if (!model.complex) throw UnsupportedModelError("model '" + model.name + "' has no complex-promoted callbacks");
    const ComplexDynamics& cd = *model.complex;
    if (!cd.initial_conditions) throw UnsupportedModelError("model lacks complex initial conditions");
    if (param < 0 || param >= rho.size()) throw DimensionError("parameter index out of range");
    const int n = model.dims.n;
    const int m = model.m_in(0);
    CVector crho = rho.cast<cplx>();
    crho(param) += cplx(0.0, eps);
    auto [q0, v0] = cd.initial_conditions(crho);
    CVector y0(2 * n + 1);
    y0 << q0, v0, cplx(0.0, 0.0);

    auto parts = [n](const CVector& y) { return std::make_tuple(y.head(n), y.segment(n, n)); };
    auto rhs = [&](double t, const CVector& y) {
        auto [q, v] = parts(y);
        CVector lam;
        CVector a = complex_accel(cd, form, m, t, q, v, crho, 0, &lam);
        CVector dy(2 * n + 1);
        dy.head(n) = v;
        dy.segment(n, n) = a;
        dy(2 * n) = cd.running_cost ? cd.running_cost(t, q, v, a, lam, crho) : cplx(0.0, 0.0);
        return dy;
    };

    std::vector<double> prev;
    const Vector q0_real = q0.real();
    for (const auto& ev : model.events) prev.push_back(ev.active_in(0) ? ev.r(q0_real).r : 0.0);
    auto guard = [&](double t, const CVector& y) {
        Vector q = y.head(n).real();
        for (size_t k = 0; k < model.events.size(); ++k) {
            if (!model.events[k].active_in(0)) continue;
            double r = model.events[k].r(q).r;
            if ((prev[k] > 0.0 && r <= 0.0) || (prev[k] < 0.0 && r >= 0.0))
                throw ConfigurationError("complex-step span crosses an event near t=" + std::to_string(t));
            prev[k] = r;
        }
    };

    IntegratorConfig c = cfg;
    std::vector<double> grid = sample_grid(t0, t_end, c);
    ComplexRun run = integrate_complex(rhs, t0, y0, t_end, grid, c, guard);
    SensitivitySeries out;
    for (size_t i = 0; i < run.ts.size(); ++i) {
        const CVector& y = run.ys[i];
        out.t.push_back(run.ts[i]);
        out.Q.push_back(y.head(n).imag() / eps);
        out.V.push_back(y.segment(n, n).imag() / eps);
        out.Z.push_back(y(2 * n).imag() / eps);
        if (m > 0) {
            CVector lam;
            complex_accel(cd, form, m, run.ts[i], y.head(n), y.segment(n, n), crho, 0, &lam);
            out.Lambda.push_back(lam.imag() / eps);
        }
    }
    return out;
}

std::vector<ExclusionWindow> fd_exclusion_windows(const TrajectoryArchive& arc, int param, double eps,
                                                  double factor) {
    std::vector<ExclusionWindow> out;
    for (const auto& e : arc.events) out.push_back({e.t_eve, factor * eps * std::abs(e.dtdrho(param))});
    return out;
}

void CompareReport::merge(const CompareReport& o) {
    quantities.insert(quantities.end(), o.quantities.begin(), o.quantities.end());
    max_rel_err = std::max(max_rel_err, o.max_rel_err);
    samples_compared += o.samples_compared;
    pass = max_rel_err <= threshold;
}

std::string CompareReport::text() const {
    std::ostringstream os;
    os << std::scientific << std::setprecision(3);
    for (const auto& q : quantities) os << "  " << std::left << std::setw(16) << q.name << " " << q.max_rel_err << '\n';
    os << "samples compared: " << samples_compared << ", threshold " << threshold << '\n';
    os << "RESULT " << (pass ? "pass" : "fail") << " max_rel_err=" << max_rel_err << '\n';
    return os.str();
}

CompareReport compare_report(const SensitivitySeries& a, const SensitivitySeries& b,
                             const std::vector<ExclusionWindow>& windows, double threshold, const std::string& label) {
    if (a.t.size() != b.t.size()) throw DimensionError("compared series have different lengths");
    auto excluded = [&](double t) {
        for (const auto& w : windows)
            if (std::abs(t - w.center) <= w.halfwidth) return true;
        return false;
    };
    struct Acc {
        double diff = 0.0, ref = 0.0;
        void add(double d, double r) {
            diff = std::max(diff, d);
            ref = std::max(ref, r);
        }
        double rel() const { return ref > 0.0 ? diff / ref : diff; }
    } aq, av, az, al;
    bool lam = !a.Lambda.empty() && a.Lambda.size() == b.Lambda.size();
    std::size_t used = 0;
    for (size_t i = 0; i < a.t.size(); ++i) {
        if (std::abs(a.t[i] - b.t[i]) > 1e-12 * (1.0 + std::abs(a.t[i])))
            throw DimensionError("compared series sampled at different times");
        if (excluded(a.t[i])) continue;
        ++used;
        aq.add((a.Q[i] - b.Q[i]).cwiseAbs().maxCoeff(), b.Q[i].cwiseAbs().maxCoeff());
        av.add((a.V[i] - b.V[i]).cwiseAbs().maxCoeff(), b.V[i].cwiseAbs().maxCoeff());
        az.add(std::abs(a.Z[i] - b.Z[i]), std::abs(b.Z[i]));
        if (lam && a.Lambda[i].size() > 0 && a.Lambda[i].size() == b.Lambda[i].size())
            al.add((a.Lambda[i] - b.Lambda[i]).cwiseAbs().maxCoeff(), b.Lambda[i].cwiseAbs().maxCoeff());
    }
    CompareReport r;
    r.threshold = threshold;
    r.samples_compared = used;
    std::string p = label.empty() ? "" : label + " ";
    r.quantities.push_back({p + "Q", aq.rel()});
    r.quantities.push_back({p + "V", av.rel()});
    r.quantities.push_back({p + "Z", az.rel()});
    if (lam) r.quantities.push_back({p + "Lambda", al.rel()});
    for (const auto& q : r.quantities) r.max_rel_err = std::max(r.max_rel_err, q.max_rel_err);
    r.pass = used > 0 && r.max_rel_err <= threshold;
    return r;
}

}  // namespace hybridsens
