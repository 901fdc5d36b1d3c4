#include "diagnostics.hpp"

#include "errors.hpp"

#include <cmath>

namespace mbnls {

double mass(const Field& u) {
    double acc = 0.0;
    for (const cplx& z : u.v) acc += std::norm(z);
    return acc * std::pow(u.grid->spacing, u.grid->dim);
}

double energy(const Field& u) {
    const int d = u.grid->dim;
    double grad2 = norm_h1semi(u);
    double pot = 0.0;
    if (d == 1) {
        for (const cplx& z : u.v) {
            double a2 = std::norm(z);
            pot += a2 * a2 * a2;
        }
    } else {
        for (const cplx& z : u.v) {
            double a2 = std::norm(z);
            pot += a2 * a2;
        }
    }
    pot *= std::pow(u.grid->spacing, d);
    return 0.5 * grad2 * grad2 - (double(d) / (2.0 * d + 4.0)) * pot;
}

Vec2 momentum(const Field& u) {
    Vec2 out{0.0, 0.0};
    for (int ax = 0; ax < u.grid->dim; ++ax)
        out[ax] = std::imag(inner(gradient(u, ax), u));
    return out;
}

std::vector<double> localized_mass(const Field& u, const Localizers& loc) {
    if (loc.phi.empty() || loc.phi[0].size() != u.size())
        throw ValidationError("localized_mass: localizers not on the field grid");
    const double hd = std::pow(u.grid->spacing, u.grid->dim);
    std::vector<double> out(loc.phi.size(), 0.0);
    for (std::size_t j = 0; j < loc.phi.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            acc += std::norm(u.v[i]) * loc.phi[j][i];
        out[j] = acc * hd;
    }
    return out;
}

double energy_rate(const Field& u, const NoiseModel& model, double t) {
    if (!model.enabled()) return 0.0;
    const GridPtr& g = u.grid;
    const int d = g->dim;
    const double hd = std::pow(g->spacing, d);
    const std::size_t nn = u.size();

    std::vector<Field> du;
    for (int ax = 0; ax < d; ++ax) du.push_back(gradient(u, ax));

    double rate = 0.0;
    std::vector<double> A[2]; // A_j = sum_k d_j phi_k B_k
    for (int ax = 0; ax < d; ++ax) A[ax].assign(nn, 0.0);
    std::vector<double> H[3]; // hessian contractions accumulate per mode below
    (void)H;

    for (std::size_t k = 0; k < model.modes(); ++k) {
        double bk = model.paths.eval(int(k), t);
        for (int ax = 0; ax < d; ++ax) {
            const std::vector<double>& dp = model.dphi_g[ax][k];
            for (std::size_t i = 0; i < nn; ++i) A[ax][i] += bk * dp[i];
        }
        if (bk == 0.0) continue;
        double hess_term = 0.0, bilap_term = 0.0, lap_term = 0.0;
        const std::vector<double>& hxx = model.hess_g[0][k];
        const std::vector<double>& lap = model.lap_g[k];
        const std::vector<double>& bil = model.bilap_g[k];
        if (d == 1) {
            for (std::size_t i = 0; i < nn; ++i) {
                hess_term += hxx[i] * std::norm(du[0].v[i]);
                bilap_term += bil[i] * std::norm(u.v[i]);
                double a2 = std::norm(u.v[i]);
                lap_term += lap[i] * a2 * a2 * a2;
            }
        } else {
            const std::vector<double>& hxy = model.hess_g[1][k];
            const std::vector<double>& hyy = model.hess_g[2][k];
            for (std::size_t i = 0; i < nn; ++i) {
                hess_term += hxx[i] * std::norm(du[0].v[i]) +
                             hyy[i] * std::norm(du[1].v[i]) +
                             2.0 * hxy[i] *
                                 std::real(du[0].v[i] * std::conj(du[1].v[i]));
                bilap_term += bil[i] * std::norm(u.v[i]);
                double a2 = std::norm(u.v[i]);
                lap_term += lap[i] * a2 * a2;
            }
        }
        rate += bk * (-2.0 * hess_term + 0.5 * bilap_term +
                      (2.0 / (d + 2.0)) * lap_term) *
                hd;
    }

    // - sum_j Im int grad[(A_j)^2] . grad u conj(u):
    // d_i (A_j^2) = 2 A_j sum_k d_i d_j phi_k B_k
    std::vector<double> Hij[2][2];
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) Hij[i][j].assign(nn, 0.0);
    for (std::size_t k = 0; k < model.modes(); ++k) {
        double bk = model.paths.eval(int(k), t);
        if (bk == 0.0) continue;
        const std::vector<double>& hxx = model.hess_g[0][k];
        for (std::size_t i = 0; i < nn; ++i) Hij[0][0][i] += bk * hxx[i];
        if (d == 2) {
            const std::vector<double>& hxy = model.hess_g[1][k];
            const std::vector<double>& hyy = model.hess_g[2][k];
            for (std::size_t i = 0; i < nn; ++i) {
                Hij[0][1][i] += bk * hxy[i];
                Hij[1][0][i] += bk * hxy[i];
                Hij[1][1][i] += bk * hyy[i];
            }
        }
    }
    double last = 0.0;
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t idx = 0; idx < nn; ++idx) {
                double grad_aj2 = 2.0 * A[j][idx] * Hij[i][j][idx];
                acc += grad_aj2 *
                       std::imag(du[i].v[idx] * std::conj(u.v[idx]));
            }
            last += acc;
        }
    rate -= last * hd;
    return rate;
}

namespace {

// quintic on [r0, r1] matching (f, f', f'') at both ends
struct QuinticBridge {
    double r0, r1;
    double f0, d0, s0, f1, d1, s1;
    double eval(double r) const {
        double dx = r1 - r0;
        double t = (r - r0) / dx;
        double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
        double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
        double h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
        double h3 = 10 * t3 - 15 * t4 + 6 * t5;
        double h4 = -4 * t3 + 7 * t4 - 3 * t5;
        double h5 = 0.5 * (t3 - 2 * t4 + t5);
        return f0 * h0 + d0 * dx * h1 + s0 * dx * dx * h2 + f1 * h3 +
               d1 * dx * h4 + s1 * dx * dx * h5;
    }
    double eval_d(double r) const {
        double dx = r1 - r0;
        double t = (r - r0) / dx;
        double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
        double g0 = (-30 * t2 + 60 * t3 - 30 * t4) / dx;
        double g1 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
        double g2 = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4) * dx;
        double g3 = (30 * t2 - 60 * t3 + 30 * t4) / dx;
        double g4 = -12 * t2 + 28 * t3 - 15 * t4;
        double g5 = 0.5 * (3 * t2 - 8 * t3 + 5 * t4) * dx;
        return f0 * g0 + d0 * g1 + s0 * g2 + f1 * g3 + d1 * g4 + s1 * g5;
    }
    double eval_dd(double r) const {
        double dx = r1 - r0;
        double t = (r - r0) / dx;
        double t2 = t * t, t3 = t2 * t;
        double q0 = (-60 * t + 180 * t2 - 120 * t3) / (dx * dx);
        double q1 = (-36 * t + 96 * t2 - 60 * t3) / dx;
        double q2 = 0.5 * (2 - 18 * t + 36 * t2 - 20 * t3);
        double q3 = (60 * t - 180 * t2 + 120 * t3) / (dx * dx);
        double q4 = (-24 * t + 84 * t2 - 60 * t3) / dx;
        double q5 = 0.5 * (6 * t - 24 * t2 + 20 * t3);
        return f0 * q0 + d0 * q1 + s0 * q2 + f1 * q3 + d1 * q4 + s1 * q5;
    }
};

// Bridge for psi' on (1,2), written as psi' = r h(r) with
//   h(r) = 1 - (e^{-2}/2) (r-1)^p,  p = (2 e^2 - 3)/2.
// Endpoints match both branches to C2, and the Morawetz inequality
// psi'/r - psi'' = -r h' = r (e^{-2}/2) p (r-1)^{p-1} >= 0 holds exactly.
struct PsiBridge {
    double a = 0.5 * std::exp(-2.0);
    double p = 0.5 * (2.0 * std::exp(2.0) - 3.0);
    double h(double r) const { return 1.0 - a * std::pow(r - 1.0, p); }
    double hp(double r) const { return -a * p * std::pow(r - 1.0, p - 1.0); }
    double hpp(double r) const {
        return -a * p * (p - 1.0) * std::pow(r - 1.0, p - 2.0);
    }
};

const PsiBridge& psi_bridge() {
    static const PsiBridge b;
    return b;
}

const QuinticBridge& coercivity_bridge() {
    static const QuinticBridge b{1.0, 2.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.0};
    return b;
}

} // namespace

double MorawetzWeight::psi_p(double r) const {
    if (r <= 1.0) return r;
    if (r >= 2.0) return 2.0 - std::exp(-r);
    return r * psi_bridge().h(r);
}

double MorawetzWeight::psi_pp(double r) const {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return std::exp(-r);
    const PsiBridge& b = psi_bridge();
    return b.h(r) + r * b.hp(r);
}

double MorawetzWeight::psi_ppp(double r) const {
    if (r <= 1.0) return 0.0;
    if (r >= 2.0) return -std::exp(-r);
    const PsiBridge& b = psi_bridge();
    return 2.0 * b.hp(r) + r * b.hpp(r);
}

double CoercivityWeight::eval(double r) const {
    double s = r / A;
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return std::exp(-s);
    return std::exp(-coercivity_bridge().eval(s));
}

double generalized_energy(const Field& u, const Decomposition& dec,
                          const Localizers& loc, const MorawetzWeight& w) {
    const GridPtr& g = u.grid;
    const int d = g->dim;
    const int np = g->points;
    const double hd = std::pow(g->spacing, d);
    const Field& R = dec.remainder;
    require_same_grid(u, R);
    const std::size_t K = dec.params.size();
    const std::size_t nn = u.size();

    std::vector<Field> dR;
    for (int ax = 0; ax < d; ++ax) dR.push_back(gradient(R, ax));

    double grad2 = 0.0;
    for (int ax = 0; ax < d; ++ax)
        for (std::size_t i = 0; i < nn; ++i) grad2 += std::norm(dR[ax].v[i]);
    grad2 *= hd;

    double mass_terms = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        double lam2 = dec.params[j].lambda * dec.params[j].lambda;
        double acc = 0.0;
        for (std::size_t i = 0; i < nn; ++i)
            acc += std::norm(R.v[i]) * loc.phi[j][i];
        mass_terms += acc / lam2;
    }
    mass_terms *= hd;

    // -(Re) int F(u) - F(U) - f(U) conj(R)
    const double cF = double(d) / (2.0 * d + 4.0);
    double nonlin = 0.0;
    for (std::size_t i = 0; i < nn; ++i) {
        cplx U = u.v[i] - R.v[i];
        double au2 = std::norm(u.v[i]), aU2 = std::norm(U);
        double Fu, FU;
        cplx fU;
        if (d == 1) {
            Fu = cF * au2 * au2 * au2;
            FU = cF * aU2 * aU2 * aU2;
            fU = aU2 * aU2 * U;
        } else {
            Fu = cF * au2 * au2;
            FU = cF * aU2 * aU2;
            fU = aU2 * U;
        }
        nonlin += Fu - FU - std::real(fU * std::conj(R.v[i]));
    }
    nonlin *= hd;

    double morawetz = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        const BubbleParams& p = dec.params[j];
        double acc = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
            double x0, x1 = 0.0;
            if (d == 1)
                x0 = g->node[i];
            else {
                x0 = g->node[i / np];
                x1 = g->node[i % np];
            }
            double z0 = (x0 - p.alpha[0]) / p.lambda;
            double z1 = d == 2 ? (x1 - p.alpha[1]) / p.lambda : 0.0;
            double rr = std::sqrt(z0 * z0 + z1 * z1);
            if (rr < 1e-14) continue;
            double mag = w.grad_chiA_mag(rr);
            cplx grad_dot = dR[0].v[i] * (z0 / rr);
            if (d == 2) grad_dot += dR[1].v[i] * (z1 / rr);
            acc += mag * std::imag(grad_dot * std::conj(R.v[i])) * loc.phi[j][i];
        }
        morawetz += p.gamma / (2.0 * p.lambda) * acc * hd;
    }
    return 0.5 * grad2 + 0.5 * mass_terms - nonlin + morawetz;
}

double difference_functional(const Field& w, const Localizers& loc,
                             const std::vector<double>& lambdas) {
    if (loc.phi.size() != lambdas.size())
        throw ValidationError("difference_functional: lambda count mismatch");
    double g2 = norm_h1semi(w);
    double out = g2 * g2;
    const double hd = std::pow(w.grid->spacing, w.grid->dim);
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            double pj = loc.phi[j][i];
            acc += std::norm(w.v[i]) * pj * pj;
        }
        out += acc * hd / (lambdas[j] * lambdas[j]);
    }
    return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) return f;
    f.b = (n * sxy - sx * sy) / denom;
    f.a = (sy - f.b * sx) / n;
    double ss_tot = syy - sy * sy / n;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = y[i] - (f.a + f.b * x[i]);
        ss_res += e * e;
    }
    f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

RateFit fit_blowup_rate(const std::vector<double>& times,
                        const std::vector<std::vector<double>>& lambda_jt,
                        const std::vector<double>& r_l2, double T,
                        const std::vector<double>& overlaps) {
    if (times.size() < 10)
        throw ValidationError("fit_blowup_rate: need >= 10 checkpoints");
    RateFit out;
    double t_sum = 0.0;
    int t_count = 0;
    for (const std::vector<double>& lam : lambda_jt) {
        LineFit lf = fit_line(times, lam);
        double omega = -lf.b;
        out.omega_est.push_back(omega);
        double rms = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            double e = lam[i] - (lf.a + lf.b * times[i]);
            rms += e * e;
        }
        out.lambda_fit_rms.push_back(std::sqrt(rms / times.size()));
        if (omega != 0.0) {
            t_sum += lf.a / omega;
            ++t_count;
        }
    }
    out.T_est = t_count > 0 ? t_sum / t_count : 0.0;

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < times.size(); ++i) {
        double Tt = T - times[i];
        if (Tt > 0.0 && i < r_l2.size() && r_l2[i] > 0.0) {
            lx.push_back(std::log(Tt));
            ly.push_back(std::log(r_l2[i]));
        }
    }
    LineFit rf = fit_line(lx, ly);
    out.r_exponent = rf.b;
    out.r_fit_r2 = rf.r2;

    if (!overlaps.empty()) {
        std::vector<double> ox, oy;
        for (std::size_t i = 0; i < times.size() && i < overlaps.size(); ++i) {
            double Tt = T - times[i];
            if (Tt > 0.0 && overlaps[i] > 0.0) {
                ox.push_back(1.0 / Tt);
                oy.push_back(std::log(overlaps[i]));
            }
        }
        LineFit of = fit_line(ox, oy);
        out.overlap_slope = of.b;
        out.overlap_r2 = of.r2;
    }
    return out;
}

} // namespace mbnls
