#include "hybridsens/integrator.hpp"

#include <algorithm>
#include <sstream>

#include "hybridsens/tlm.hpp"

namespace hybridsens {

double StepController::propose(double h, double err, bool& accept) {
    constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9, fac1 = 0.2, fac2 = 10.0;
    if (!std::isfinite(err)) {
        accept = false;
        last_rejected_ = true;
        return 0.25 * h;
    }
    double fac11 = std::pow(err, expo1);
    if (err <= 1.0) {
        double fac = fac11 / std::pow(facold_, beta);
        fac = std::max(1.0 / fac2, std::min(1.0 / fac1, fac / safe));
        double hnew = h / fac;
        facold_ = std::max(err, 1e-4);
        if (last_rejected_) hnew = std::min(hnew, h);
        last_rejected_ = false;
        accept = true;
        return hnew;
    }
    accept = false;
    last_rejected_ = true;
    return h / std::min(1.0 / fac1, fac11 / safe);
}

namespace {

bool crosses(double g0, double g1, Crossing dir) {
    switch (dir) {
    case Crossing::Rising: return g0 < 0.0 && g1 >= 0.0;
    case Crossing::Falling: return g0 > 0.0 && g1 <= 0.0;
    case Crossing::Either: return (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0);
    }
    return false;
}

// Illinois variant of regula falsi on a bracket with G(a) and G(b) of opposite sign.
template <class G> double bracket_root(G&& g, double a, double b, double fa, double fb, double ttol) {
    if (fb == 0.0) return b;
    int side = 0;
    double c = b;
    for (int it = 0; it < 200; ++it) {
        c = (a * fb - b * fa) / (fb - fa);
        if (!(c > a && c < b)) c = 0.5 * (a + b);
        double fc = g(c);
        if (fc == 0.0) return c;
        if ((fc > 0) == (fb > 0)) {
            b = c;
            fb = fc;
            if (side == -1) fa *= 0.5;
            side = -1;
        } else {
            a = c;
            fa = fc;
            if (side == 1) fb *= 0.5;
            side = 1;
        }
        if (b - a <= ttol) break;
    }
    // Keep the point on the far side of the surface so the crossing is complete.
    return b;
}

}  // namespace

SegmentResult integrate_segment(const std::function<Vector(double, const Vector&)>& rhs, double t0, const Vector& y0,
                                double t_end, std::vector<SegmentEvent>& events, const std::vector<double>& samples,
                                const IntegratorConfig& cfg) {
    using DP = DormandPrince<double>;
    DP dp(rhs, cfg.rel_tol, cfg.abs_tol);
    SegmentResult res;
    double t = t0;
    Vector y = y0;
    auto si = static_cast<size_t>(std::lower_bound(samples.begin(), samples.end(), t0) - samples.begin());
    if (si < samples.size() && samples[si] == t0) {
        res.ts.push_back(t0);
        res.ys.push_back(y0);
        ++si;
    }
    const double span = t_end - t0;
    if (span <= 0.0) {
        res.t_stop = t0;
        res.y_stop = y0;
        return res;
    }

    Vector k1 = dp.rhs(t, y);
    std::vector<double> g(events.size()), g_next(events.size());
    for (size_t i = 0; i < events.size(); ++i) {
        g[i] = events[i].value(t, y);
        if (std::abs(g[i]) <= events[i].mask_threshold) events[i].masked = true;
    }
    const double hmax = std::min(cfg.max_step, span);
    double h = cfg.initial_step > 0.0 ? std::min(cfg.initial_step, hmax) : dp.initial_step(t, y, k1, hmax, span);
    StepController ctl;

    while (true) {
        if (res.accepted + res.rejected > cfg.max_steps) throw StiffnessError("step budget exhausted");
        bool last = false;
        if (t + 1.01 * h >= t_end) {
            h = t_end - t;
            last = true;
        }
        if (h <= 1e-14 * std::max(1.0, std::abs(t))) {
            std::ostringstream os;
            os << "step size underflow at t=" << t;
            throw StiffnessError(os.str());
        }
        DP::Step st = dp.attempt(t, y, k1, h);
        bool accept = false;
        double hnew = ctl.propose(h, st.err, accept);
        if (!accept) {
            ++res.rejected;
            h = hnew;
            continue;
        }
        ++res.accepted;
        const double t1 = last ? t_end : t + h;

        int hit = -1;
        double t_hit = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < events.size(); ++i) {
            double g1 = events[i].value(t1, st.y1);
            g_next[i] = g1;
            auto gd = [&](double tau) { return events[i].value(tau, DP::dense(st, tau)); };
            double ta = t, ga = g[i];
            if (events[i].masked) {
                const double thr = events[i].mask_threshold;
                if (std::abs(g1) <= thr) continue;
                events[i].masked = false;
                // the guard may leave the band and come back within this step
                double t_out = t1, g_out = g1;
                for (int k = 1; k < 16; ++k) {
                    double tau = t + (t1 - t) * k / 16.0, gk = gd(tau);
                    if (std::abs(gk) > thr) {
                        t_out = tau;
                        g_out = gk;
                        break;
                    }
                }
                const Crossing dir = events[i].direction;
                if ((dir == Crossing::Falling && g_out < 0.0) || (dir == Crossing::Rising && g_out > 0.0))
                    throw ZenoSuspectedError("event guard re-crossed before clearing its mask at t=" +
                                             std::to_string(t));
                if (t_out == t1 || !crosses(g_out, g1, dir)) continue;
                ta = t_out;
                ga = g_out;
            }
            if (!crosses(ga, g1, events[i].direction)) continue;
            double root = bracket_root(gd, ta, t1, ga, g1, 1e-3 * cfg.event_tol);
            if (root < t_hit) {
                t_hit = root;
                hit = static_cast<int>(i);
            }
        }

        if (hit >= 0 && t_hit < t_end - cfg.event_tol) {
            // Refine on full sub-steps from the step start, which carry the
            // fifth-order solution rather than the dense interpolant.
            auto ge = [&](double tau) { return events[hit].value(tau, dp.attempt(t, y, k1, tau - t).y1); };
            double a = t_hit, fa = ge(a);
            double b = std::max(t + 0.5 * (a - t), a - 1e-7 * h), fb = ge(b);
            double best = a, fbest = fa;
            for (int it = 0; it < 30 && fa != 0.0 && fa != fb; ++it) {
                double c = a - fa * (a - b) / (fa - fb);
                if (!(c > t && c <= t1)) break;
                double fc = ge(c);
                b = a;
                fb = fa;
                a = c;
                fa = fc;
                if (std::abs(fa) < std::abs(fbest) || (std::abs(fa) == std::abs(fbest))) {
                    best = a;
                    fbest = fa;
                }
                if (std::abs(a - b) <= 4e-16 * std::max(1.0, std::abs(a))) break;
            }
            if (std::abs(best - t_hit) <= std::max(cfg.event_tol, 1e-3 * h)) t_hit = best;
            while (si < samples.size() && samples[si] < t_hit) {
                res.ts.push_back(samples[si]);
                res.ys.push_back(DP::dense(st, samples[si]));
                ++si;
            }
            res.t_stop = t_hit;
            res.y_stop = dp.attempt(t, y, k1, t_hit - t).y1;
            res.triggered = hit;
            return res;
        }

        while (si < samples.size() && (samples[si] < t1 || (last && samples[si] <= t_end))) {
            res.ts.push_back(samples[si]);
            res.ys.push_back(samples[si] >= t1 ? st.y1 : DP::dense(st, samples[si]));
            ++si;
        }
        t = t1;
        y = st.y1;
        k1 = st.k7;
        g = g_next;
        if (last) {
            res.t_stop = t_end;
            res.y_stop = y;
            return res;
        }
        h = std::min(hnew, hmax);
    }
}

ComplexRun integrate_complex(const std::function<CVector(double, const CVector&)>& rhs, double t0, const CVector& y0,
                             double t_end, const std::vector<double>& samples, const IntegratorConfig& cfg,
                             const std::function<void(double, const CVector&)>& on_step) {
    using DP = DormandPrince<cplx>;
    DP dp(rhs, cfg.rel_tol, cfg.abs_tol);
    ComplexRun run;
    double t = t0;
    CVector y = y0;
    auto si = static_cast<size_t>(std::lower_bound(samples.begin(), samples.end(), t0) - samples.begin());
    if (si < samples.size() && samples[si] == t0) {
        run.ts.push_back(t0);
        run.ys.push_back(y0);
        ++si;
    }
    const double span = t_end - t0;
    run.y_end = y0;
    if (span <= 0.0) return run;
    CVector k1 = dp.rhs(t, y);
    const double hmax = std::min(cfg.max_step, span);
    double h = cfg.initial_step > 0.0 ? std::min(cfg.initial_step, hmax) : dp.initial_step(t, y, k1, hmax, span);
    StepController ctl;
    long steps = 0;
    while (true) {
        if (++steps > cfg.max_steps) throw StiffnessError("step budget exhausted");
        bool last = false;
        if (t + 1.01 * h >= t_end) {
            h = t_end - t;
            last = true;
        }
        if (h <= 1e-14 * std::max(1.0, std::abs(t))) throw StiffnessError("step size underflow");
        DP::Step st = dp.attempt(t, y, k1, h);
        bool accept = false;
        double hnew = ctl.propose(h, st.err, accept);
        if (!accept) {
            h = hnew;
            continue;
        }
        const double t1 = last ? t_end : t + h;
        if (on_step) on_step(t1, st.y1);
        while (si < samples.size() && (samples[si] < t1 || (last && samples[si] <= t_end))) {
            run.ts.push_back(samples[si]);
            run.ys.push_back(samples[si] >= t1 ? st.y1 : DP::dense(st, samples[si]));
            ++si;
        }
        t = t1;
        y = st.y1;
        k1 = st.k7;
        if (last) break;
        h = std::min(hnew, hmax);
    }
    run.y_end = y;
    return run;
}

std::size_t TrajectoryArchive::sample_count() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.t.size();
    return n;
}

std::vector<double> sample_grid(double t0, double tF, const IntegratorConfig& cfg) {
    std::vector<double> out;
    if (!cfg.sample_times.empty()) {
        for (double s : cfg.sample_times)
            if (s >= t0 && s <= tF) out.push_back(s);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
    const double dt = cfg.dense_sample_dt;
    if (!(dt > 0.0)) throw ConfigurationError("dense_sample_dt must be positive");
    for (long k = 0;; ++k) {
        double s = t0 + static_cast<double>(k) * dt;
        if (s > tF - 1e-9 * dt) break;
        out.push_back(s);
    }
    out.push_back(tF);
    return out;
}

namespace {

void record_sample(const ModelDefinition& model, const Formulation& form, const Vector& rho, const IntegratorConfig& cfg,
                   TrajectorySegment& seg, double t, const Vector& x, bool on_grid) {
    seg.t.push_back(t);
    seg.x.push_back(x);
    seg.on_grid.push_back(on_grid ? 1 : 0);
    if (!cfg.record_multipliers || model.m_in(seg.regime) == 0) {
        seg.lambda.emplace_back();
        seg.Lambda.emplace_back();
        return;
    }
    HybridState s;
    SensitivityBundle sens;
    unpack_canonical(x, model.dims, s, sens);
    s.t = t;
    s.regime = seg.regime;
    DynamicsPoint dyn = evaluate_dynamics(model, form, t, s.q, s.v, rho, s.regime);
    seg.lambda.push_back(dyn.lambda);
    seg.Lambda.push_back(tlm_rhs(model, form, s, sens, rho, dyn).Lambda);
}

void check_consistency(const ModelDefinition& model, const HybridState& s, const Vector& rho) {
    if (model.m_in(s.regime) == 0) return;
    ConstraintEval c = model.constraints(s.t, s.q, rho, s.regime);
    double pos = c.phi.cwiseAbs().maxCoeff();
    double vel = (c.phi_q * s.v + c.phi_t).cwiseAbs().maxCoeff();
    if (pos > 1e-8 * (1.0 + s.q.cwiseAbs().maxCoeff()) || vel > 1e-8 * (1.0 + s.v.cwiseAbs().maxCoeff())) {
        std::ostringstream os;
        os << "initial conditions violate the constraints (|Phi|=" << pos << ", |Phi'|=" << vel << ")";
        throw ConfigurationError(os.str());
    }
}

}  // namespace

TrajectoryArchive propagate_hybrid(const ModelDefinition& model, const Formulation& form, const IntegratorConfig& cfg,
                                   const Vector& rho, double t0, double tF) {
    const Dimensions& d = model.dims;
    if (rho.size() != d.p) throw DimensionError("parameter vector has wrong length");
    if (!(tF >= t0)) throw ConfigurationError("final time precedes initial time");
    if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0)) throw ConfigurationError("tolerances must be positive");

    InitialConditions ic = model.initial_conditions(rho);
    if (ic.q0.size() != d.n || ic.v0.size() != d.n || ic.dq0.rows() != d.n || ic.dq0.cols() != d.p ||
        ic.dv0.rows() != d.n || ic.dv0.cols() != d.p)
        throw DimensionError("initial conditions have wrong shape");
    HybridState s{t0, ic.q0, ic.v0, 0.0, 0};
    check_consistency(model, s, rho);
    SensitivityBundle sens{ic.dq0, ic.dv0, RowVector::Zero(d.p), Matrix()};

    TrajectoryArchive arc;
    arc.dims = d;
    arc.parameter_names = model.parameter_names;
    arc.formulation = form.kind;
    arc.rho = rho;
    const std::vector<double> grid = sample_grid(t0, tF, cfg);
    auto on_grid = [&](double t) { return std::binary_search(grid.begin(), grid.end(), t); };

    Vector y = pack_canonical(s, sens);
    double t = t0;
    while (true) {
        const int regime = s.regime;
        std::vector<SegmentEvent> seg_events;
        std::vector<int> index_map;
        const double thr = 10.0 * 1e-12 * (1.0 + s.q.cwiseAbs().maxCoeff());
        for (size_t k = 0; k < model.events.size(); ++k) {
            const EventFunction& ev = model.events[k];
            if (!ev.active_in(regime)) continue;
            SegmentEvent se;
            se.value = [&ev, n = d.n](double, const Vector& x) { return ev.r(x.head(n)).r; };
            se.direction = ev.direction;
            se.mask_threshold = thr;
            seg_events.push_back(std::move(se));
            index_map.push_back(static_cast<int>(k));
        }
        auto rhs = [&](double tt, const Vector& x) { return canonical_rhs(model, form, tt, x, rho, regime); };
        SegmentResult sr = integrate_segment(rhs, t, y, tF, seg_events, grid, cfg);
        arc.steps_accepted += sr.accepted;
        arc.steps_rejected += sr.rejected;

        TrajectorySegment seg;
        seg.regime = regime;
        if (sr.ts.empty() || sr.ts.front() != t) record_sample(model, form, rho, cfg, seg, t, y, false);
        for (size_t i = 0; i < sr.ts.size(); ++i) record_sample(model, form, rho, cfg, seg, sr.ts[i], sr.ys[i], true);
        if (seg.t.back() != sr.t_stop || sr.triggered >= 0)
            record_sample(model, form, rho, cfg, seg, sr.t_stop, sr.y_stop, sr.triggered < 0 && on_grid(sr.t_stop));
        arc.segments.push_back(std::move(seg));

        unpack_canonical(sr.y_stop, d, s, sens);
        s.t = sr.t_stop;
        s.regime = regime;
        t = sr.t_stop;
        if (sr.triggered < 0) break;

        EventRecord rec = apply_event(model, form, index_map[sr.triggered], s, sens, rho);
        s = rec.state_post;
        sens = rec.sens_post;
        arc.events.push_back(std::move(rec));
        if (static_cast<int>(arc.events.size()) > cfg.max_events)
            throw ZenoSuspectedError("event count exceeded " + std::to_string(cfg.max_events));
        y = pack_canonical(s, sens);
    }
    sens.Lambda = jump_multiplier_sens(model, form, s, sens.Q, sens.V, rho);
    arc.final_state = s;
    arc.final_sens = sens;
    arc.psi = cost_value(model, s, rho);
    arc.dpsi_drho = cost_gradient(model, s, sens, rho);
    return arc;
}

}  // namespace hybridsens
