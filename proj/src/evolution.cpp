#include "evolution.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mbnls {

const char* run_status_name(RunStatus s) {
    switch (s) {
        case RunStatus::Completed: return "completed";
        case RunStatus::ResolutionStop: return "resolution-stop";
        case RunStatus::Diverged: return "diverged";
    }
    return "unknown";
}

namespace {

// e^{-i k^2 dt} multipliers, memoized per (grid, dt): runs keep dt fixed for
// long stretches and the sincos pass over all modes dominates otherwise
struct DispersionCache {
    const Grid* grid = nullptr;
    double dt = 0.0;
    std::vector<cplx> mult;
};
thread_local DispersionCache g_disp_cache;

const std::vector<cplx>& dispersion_multipliers(const Grid& g, double dt) {
    DispersionCache& c = g_disp_cache;
    if (c.grid == &g && c.dt == dt && !c.mult.empty()) return c.mult;
    c.grid = &g;
    c.dt = dt;
    const int n = g.points;
    c.mult.resize(g.dim == 1 ? std::size_t(n) : std::size_t(n) * n);
    if (g.dim == 1) {
        for (int j = 0; j < n; ++j)
            c.mult[j] = std::polar(1.0, -g.wave[j] * g.wave[j] * dt);
    } else {
        for (int ix = 0; ix < n; ++ix) {
            double kx2 = g.wave[ix] * g.wave[ix];
            for (int iy = 0; iy < n; ++iy)
                c.mult[g.index(ix, iy)] =
                    std::polar(1.0, -(kx2 + g.wave[iy] * g.wave[iy]) * dt);
        }
    }
    return c.mult;
}

} // namespace

void apply_dispersion(Field& u, double dt) {
    const Grid& g = *u.grid;
    const std::vector<cplx>& mult = dispersion_multipliers(g, dt);
    to_spectral(u);
    for (std::size_t i = 0; i < u.size(); ++i) u.v[i] *= mult[i];
    to_physical(u);
}

namespace {

struct LocalCoeffs {
    bool active = false;
    std::vector<double> beta[2];
    std::vector<double> c_re, c_im;
};

// S u = beta.grad u + c_im u  (real skew operator)
void apply_transport(const Field& u, const LocalCoeffs& co, Field& out) {
    const Grid& g = *u.grid;
    out = Field(u.grid);
    for (int ax = 0; ax < g.dim; ++ax) {
        Field du = gradient(u, ax);
        const std::vector<double>& b = co.beta[ax];
        for (std::size_t i = 0; i < u.size(); ++i) out.v[i] += b[i] * du.v[i];
    }
    for (std::size_t i = 0; i < u.size(); ++i) out.v[i] += co.c_im[i] * u.v[i];
}

void transport_update(Field& u, double tau, const LocalCoeffs& co) {
    Field su, ssu;
    apply_transport(u, co, su);
    apply_transport(su, co, ssu);
    for (std::size_t i = 0; i < u.size(); ++i)
        u.v[i] += -tau * su.v[i] + 0.5 * tau * tau * ssu.v[i];
}

void phase_update(Field& u, double tau, const LocalCoeffs& co, int dim) {
    if (dim == 1) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            double a2 = std::norm(u.v[i]);
            double cre = co.active ? co.c_re[i] : 0.0;
            u.v[i] *= std::polar(1.0, tau * (a2 * a2 + cre));
        }
    } else {
        for (std::size_t i = 0; i < u.size(); ++i) {
            double cre = co.active ? co.c_re[i] : 0.0;
            u.v[i] *= std::polar(1.0, tau * (std::norm(u.v[i]) + cre));
        }
    }
}

LocalCoeffs coeffs_at(const NoiseModel* model, double t) {
    LocalCoeffs co;
    if (model && model->enabled()) {
        co.active = true;
        eval_coefficient_arrays(*model, t, co.beta, co.c_re, co.c_im);
    }
    return co;
}

} // namespace

Field step(const Field& u, double t, double dt, const NoiseModel* model) {
    const int dim = u.grid->dim;
    const double tau = 0.5 * dt;
    Field w = u;

    LocalCoeffs c1 = coeffs_at(model, t + 0.25 * dt);
    if (c1.active) transport_update(w, tau, c1);
    phase_update(w, tau, c1, dim);

    apply_dispersion(w, dt);

    LocalCoeffs c2 = coeffs_at(model, t + 0.75 * dt);
    phase_update(w, tau, c2, dim);
    if (c2.active) transport_update(w, tau, c2);
    return w;
}

Trajectory evolve(const Field& u0, double t0, double t1, const NoiseModel* model,
                  const StepController& ctl, const std::vector<double>& checkpoints,
                  const std::function<void(double, const Field&)>& observer) {
    if (t0 == t1) throw ValidationError("evolve: t0 and t1 must differ");
    const double sgn = t1 > t0 ? 1.0 : -1.0;
    const double h4 = 4.0 * u0.grid->spacing;

    std::vector<double> cps = checkpoints;
    std::sort(cps.begin(), cps.end());
    if (sgn < 0) std::reverse(cps.begin(), cps.end());

    Trajectory out;
    out.times.push_back(t0);
    out.fields.push_back(u0);
    if (observer) observer(t0, u0);

    std::size_t next_cp = 0;
    // skip checkpoints at/behind the start
    while (next_cp < cps.size() && sgn * (cps[next_cp] - t0) <= 1e-14) ++next_cp;

    Field u = u0;
    double t = t0;
    while (sgn * (t1 - t) > 1e-13) {
        double dt_rule = ctl.dt_base;
        if (ctl.lambda_min) {
            double lam = ctl.lambda_min(t);
            if (lam < h4) {
                out.status = RunStatus::ResolutionStop;
                break;
            }
            dt_rule = std::min(dt_rule, ctl.c_dt * lam * lam);
        }
        dt_rule = std::max(dt_rule, ctl.dt_min);
        double dt = std::min(dt_rule, std::abs(t1 - t));
        if (next_cp < cps.size())
            dt = std::min(dt, std::abs(cps[next_cp] - t));
        dt *= sgn;

        u = step(u, t, dt, model);
        t += dt;
        ++out.steps_taken;

        double peak = 0.0;
        for (const cplx& z : u.v) {
            double a = std::abs(z.real()) + std::abs(z.imag());
            if (a > peak) peak = a;
        }
        if (!(peak < ctl.linf_cap)) { // catches NaN as well
            out.status = RunStatus::Diverged;
            break;
        }
        if (observer) observer(t, u);
        if (next_cp < cps.size() && std::abs(t - cps[next_cp]) < 1e-12) {
            out.times.push_back(t);
            out.fields.push_back(u);
            ++next_cp;
        }
    }
    if (std::abs(t - out.times.back()) > 1e-12) {
        out.times.push_back(t);
        out.fields.push_back(u);
    }
    out.t_final = t;
    return out;
}

Trajectory construct_approximant(double t_n, const BubbleSet& set, double T,
                                 const NoiseModel* model, const StepController& ctl,
                                 const RadialProfile& Q, const GridPtr& g,
                                 double t_end, const std::vector<double>& checkpoints,
                                 const std::function<void(double, const Field&)>& observer) {
    if (!(t_n < T)) throw ValidationError("construct_approximant: t_n must satisfy t_n < T");
    const double h4 = 4.0 * g->spacing;
    for (const BubbleParams& a : set.anchors) {
        if (a.omega * (T - t_n) < h4) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "construct_approximant: initial bubble scale %.4g below 4h=%.4g",
                          a.omega * (T - t_n), h4);
            throw ValidationError(buf);
        }
    }
    Field u0(g);
    for (const BubbleParams& a : set.anchors) {
        Field s = pseudo_conformal_S(a.omega, a.xc, a.vartheta, T, t_n, Q, g);
        for (std::size_t i = 0; i < u0.size(); ++i) u0.v[i] += s.v[i];
    }
    StepController c = ctl;
    if (!c.lambda_min) {
        double omega_min = 1e300;
        for (const BubbleParams& a : set.anchors) omega_min = std::min(omega_min, a.omega);
        c.lambda_min = [omega_min, T](double t) { return omega_min * (T - t); };
    }
    return evolve(u0, t_n, t_end, model, c, checkpoints, observer);
}

} // namespace mbnls
