#include "profiles.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mbnls {

BubbleParams pc_params(double omega, const Vec2& xc, double vartheta, double T,
                       double t) {
    if (!(t < T)) throw ValidationError("pc_params: requires t < T");
    BubbleParams p;
    p.omega = omega;
    p.xc = xc;
    p.vartheta = vartheta;
    p.lambda = omega * (T - t);
    p.alpha = xc;
    p.beta = {0.0, 0.0};
    p.gamma = omega * omega * (T - t);
    p.theta = 1.0 / (omega * omega * (T - t)) + vartheta;
    return p;
}

BubbleSet make_bubble_set(int dim, std::vector<BubbleParams> anchors,
                          double box_extent) {
    if (anchors.empty()) throw ValidationError("bubble set needs K >= 1 anchors");
    BubbleSet set;
    set.dim = dim;

    const std::size_t K = anchors.size();
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j) {
            double dx = anchors[i].xc[0] - anchors[j].xc[0];
            double dy = dim == 2 ? anchors[i].xc[1] - anchors[j].xc[1] : 0.0;
            if (dx * dx + dy * dy == 0.0)
                throw ValidationError("bubble anchors must be pairwise distinct");
        }

    Vec2 v1{1.0, 0.0};
    if (dim == 2 && K >= 2) {
        // rotate so the anchors separate along v1; pick the angle maximizing
        // the smallest projection gap
        double best_score = -1.0, best_phi = 0.0;
        for (int step = 0; step < 720; ++step) {
            double phi = M_PI * step / 720.0;
            Vec2 v{std::cos(phi), std::sin(phi)};
            double score = 1e300;
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = i + 1; j < K; ++j) {
                    double proj = (anchors[i].xc[0] - anchors[j].xc[0]) * v[0] +
                                  (anchors[i].xc[1] - anchors[j].xc[1]) * v[1];
                    score = std::min(score, std::abs(proj));
                }
            if (score > best_score) {
                best_score = score;
                best_phi = phi;
            }
        }
        if (best_score <= 0.0)
            throw ValidationError("bubble anchors are not separable along any axis");
        v1 = {std::cos(best_phi), std::sin(best_phi)};
    }
    set.v1 = v1;

    std::sort(anchors.begin(), anchors.end(),
              [&](const BubbleParams& a, const BubbleParams& b) {
                  return a.xc[0] * v1[0] + a.xc[1] * v1[1] <
                         b.xc[0] * v1[0] + b.xc[1] * v1[1];
              });
    set.anchors = std::move(anchors);

    if (K >= 2) {
        double min_gap = 1e300;
        for (std::size_t j = 0; j + 1 < K; ++j) {
            double gap = (set.anchors[j + 1].xc[0] - set.anchors[j].xc[0]) * v1[0] +
                         (set.anchors[j + 1].xc[1] - set.anchors[j].xc[1]) * v1[1];
            min_gap = std::min(min_gap, gap);
        }
        set.sigma = min_gap / 12.0;
        if (set.sigma <= 0.0)
            throw ValidationError("bubble anchors are not separated along v1");
    } else {
        set.sigma = box_extent / 4.0;
    }
    return set;
}

namespace {

void check_resolvable(double lambda, const GridPtr& g) {
    if (!(lambda > 0.0)) throw ValidationError("bubble: lambda must be positive");
    if (lambda < 4.0 * g->spacing) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "under-resolved bubble: lambda=%.3g < 4h=%.3g", lambda,
                      4.0 * g->spacing);
        throw ResolutionError(buf);
    }
}

} // namespace

Field bubble(const BubbleParams& p, const RadialProfile& Q, const GridPtr& g) {
    check_resolvable(p.lambda, g);
    const double pref = std::pow(p.lambda, -0.5 * g->dim);
    return synthesize(g, [&](double x, double y) {
        double y0 = (x - p.alpha[0]) / p.lambda;
        double y1 = g->dim == 2 ? (y - p.alpha[1]) / p.lambda : 0.0;
        double r2 = y0 * y0 + y1 * y1;
        double phase = p.beta[0] * y0 + p.beta[1] * y1 - 0.25 * p.gamma * r2 + p.theta;
        return pref * Q.eval(std::sqrt(r2)) * std::polar(1.0, phase);
    });
}

Field varrho_profile(const BubbleParams& p, const RadialProfile& rho,
                     const GridPtr& g) {
    return bubble(p, rho, g);
}

Field pseudo_conformal_S(double omega, const Vec2& xc, double vartheta, double T,
                         double t, const RadialProfile& Q, const GridPtr& g) {
    if (!(t < T)) throw ValidationError("pseudo_conformal_S: requires t < T");
    const double lam = omega * (T - t);
    check_resolvable(lam, g);
    const double pref = std::pow(lam, -0.5 * g->dim);
    const double Tt = T - t;
    return synthesize(g, [&](double x, double y) {
        double dx = x - xc[0];
        double dy = g->dim == 2 ? y - xc[1] : 0.0;
        double r2 = dx * dx + dy * dy;
        double phase = -0.25 * r2 / Tt + 1.0 / (omega * omega * Tt) + vartheta;
        return pref * Q.eval(std::sqrt(r2) / lam) * std::polar(1.0, phase);
    });
}

Field sum_profiles(const std::vector<BubbleParams>& params, const RadialProfile& Q,
                   const GridPtr& g) {
    Field out(g);
    for (const BubbleParams& p : params) {
        Field u = bubble(p, Q, g);
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += u.v[i];
    }
    return out;
}

Field pc_transform(const Field& f, double t, double mass_tol) {
    if (t == 0.0) throw ValidationError("pc_transform: t must be nonzero");
    const GridPtr& g = f.grid;
    const double scale = -1.0 / t;

    std::size_t escaped = 0;
    Field sampled = sample_affine(f, scale, {0.0, 0.0}, &escaped);
    if (escaped > 0) {
        // estimate the unseen mass by the content of the outer 10% shell
        double shell = 0, total = 0;
        const double edge = 0.9 * g->extent;
        const int n = g->points;
        for (std::size_t i = 0; i < f.size(); ++i) {
            double ax, ay = 0.0;
            if (g->dim == 1)
                ax = std::abs(g->node[i]);
            else {
                ax = std::abs(g->node[i / n]);
                ay = std::abs(g->node[i % n]);
            }
            double m = std::norm(f.v[i]);
            total += m;
            if (ax > edge || ay > edge) shell += m;
        }
        if (total > 0.0 && shell > mass_tol * total) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "pc_transform: rescaled support escapes the box "
                          "(boundary mass fraction %.3g)",
                          shell / total);
            throw TruncationError(buf, shell * std::pow(g->spacing, g->dim));
        }
    }

    const double pref = std::pow(std::abs(t), -0.5 * g->dim);
    const double chirp = -0.25 / t;
    const int n = g->points;
    Field out(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        double r2;
        if (g->dim == 1) {
            double x = g->node[i];
            r2 = x * x;
        } else {
            double x = g->node[i / n], y = g->node[i % n];
            r2 = x * x + y * y;
        }
        out.v[i] = pref * sampled.v[i] * std::polar(1.0, chirp * r2);
    }
    return out;
}

std::vector<Field> bubble_param_derivatives(const BubbleParams& p,
                                            const RadialProfile& Q,
                                            const GridPtr& g) {
    check_resolvable(p.lambda, g);
    const int d = g->dim;
    const double pref = std::pow(p.lambda, -0.5 * d);
    const cplx I(0.0, 1.0);

    Field U(g), lamU(g);
    std::vector<Field> gradU(d, Field(g));
    Field dgamma(g), dtheta(g);
    std::vector<Field> dbeta(d, Field(g));

    const int n = g->points;
    for (std::size_t idx = 0; idx < U.size(); ++idx) {
        double x0, x1 = 0.0;
        if (d == 1)
            x0 = g->node[idx];
        else {
            x0 = g->node[idx / n];
            x1 = g->node[idx % n];
        }
        double y0 = (x0 - p.alpha[0]) / p.lambda;
        double y1 = d == 2 ? (x1 - p.alpha[1]) / p.lambda : 0.0;
        double r2 = y0 * y0 + y1 * y1;
        double r = std::sqrt(r2);
        double q = Q.eval(r);
        double qp = Q.eval_d1(r);
        double qp_over_r = r > 1e-12 ? qp / r : Q.d2[0];
        double phase = p.beta[0] * y0 + p.beta[1] * y1 - 0.25 * p.gamma * r2 + p.theta;
        cplx e = pref * std::polar(1.0, phase);

        cplx u = e * q;
        U.v[idx] = u;
        dtheta.v[idx] = I * u;
        dgamma.v[idx] = -I * 0.25 * r2 * u;
        // Lam U = (d/2)U + (x-alpha).grad U; in y-variables d/2 Q + r Q' + i(beta.y - gamma r^2/2) Q
        cplx lam = e * (cplx(0.5 * d * q + r * qp, 0.0) +
                        I * (p.beta[0] * y0 + p.beta[1] * y1 - 0.5 * p.gamma * r2) * q);
        lamU.v[idx] = lam;
        double yv[2] = {y0, y1};
        for (int ax = 0; ax < d; ++ax) {
            cplx dq = e * (cplx(qp_over_r * yv[ax], 0.0) +
                           I * (p.beta[ax] - 0.5 * p.gamma * yv[ax]) * q);
            gradU[ax].v[idx] = dq / p.lambda; // d/dx_ax
            dbeta[ax].v[idx] = I * yv[ax] * u;
        }
    }

    std::vector<Field> out;
    // d/d lambda = -(1/lambda) Lam U
    Field dlam(g);
    for (std::size_t i = 0; i < U.size(); ++i) dlam.v[i] = -lamU.v[i] / p.lambda;
    out.push_back(std::move(dlam));
    // d/d alpha_i = -d/dx_i
    for (int ax = 0; ax < d; ++ax) {
        Field da(g);
        for (std::size_t i = 0; i < U.size(); ++i) da.v[i] = -gradU[ax].v[i];
        out.push_back(std::move(da));
    }
    for (int ax = 0; ax < d; ++ax) out.push_back(std::move(dbeta[ax]));
    out.push_back(std::move(dgamma));
    out.push_back(std::move(dtheta));
    return out;
}

BubbleDirections bubble_directions(const BubbleParams& p, const RadialProfile& Q,
                                   const RadialProfile& rho, const GridPtr& g) {
    check_resolvable(p.lambda, g);
    const int d = g->dim;
    const double pref = std::pow(p.lambda, -0.5 * d);
    const cplx I(0.0, 1.0);

    BubbleDirections out;
    out.xU.assign(d, Field(g));
    out.gradU.assign(d, Field(g));
    out.x2U = Field(g);
    out.lamU = Field(g);
    out.varrho = Field(g);

    const int n = g->points;
    for (std::size_t idx = 0; idx < out.x2U.size(); ++idx) {
        double x0, x1 = 0.0;
        if (d == 1)
            x0 = g->node[idx];
        else {
            x0 = g->node[idx / n];
            x1 = g->node[idx % n];
        }
        double w0 = x0 - p.alpha[0];
        double w1 = d == 2 ? x1 - p.alpha[1] : 0.0;
        double y0 = w0 / p.lambda, y1 = w1 / p.lambda;
        double r2 = y0 * y0 + y1 * y1;
        double r = std::sqrt(r2);
        double q = Q.eval(r), qp = Q.eval_d1(r);
        double qp_over_r = r > 1e-12 ? qp / r : Q.d2[0];
        double rh = rho.eval(r);
        double phase = p.beta[0] * y0 + p.beta[1] * y1 - 0.25 * p.gamma * r2 + p.theta;
        cplx e = pref * std::polar(1.0, phase);
        cplx u = e * q;

        double wv[2] = {w0, w1};
        double yv[2] = {y0, y1};
        for (int ax = 0; ax < d; ++ax) {
            out.xU[ax].v[idx] = wv[ax] * u;
            out.gradU[ax].v[idx] =
                e / p.lambda *
                (cplx(qp_over_r * yv[ax], 0.0) + I * (p.beta[ax] - 0.5 * p.gamma * yv[ax]) * q);
        }
        out.x2U.v[idx] = (w0 * w0 + w1 * w1) * u;
        out.lamU.v[idx] = e * (cplx(0.5 * d * q + r * qp, 0.0) +
                               I * (p.beta[0] * y0 + p.beta[1] * y1 - 0.5 * p.gamma * r2) * q);
        out.varrho.v[idx] = e * rh;
    }
    return out;
}

} // namespace mbnls
