#include "modulation.hpp"

#include "errors.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace mbnls {

double localizer_profile(double z, double sigma) {
    double t = (z - 4.0 * sigma) / (4.0 * sigma);
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    double s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); // smoothstep
    return 1.0 - s;
}

double localizer_slope(double z, double sigma) {
    double t = (z - 4.0 * sigma) / (4.0 * sigma);
    if (t <= 0.0 || t >= 1.0) return 0.0;
    double ds = 30.0 * t * t * (1.0 + t * (-2.0 + t));
    return -ds / (4.0 * sigma);
}

Localizers make_localizers(const BubbleSet& set, const GridPtr& g) {
    if (set.count() < 1) throw ValidationError("make_localizers: K >= 1 required");
    if (set.sigma <= 0.0) throw ValidationError("make_localizers: sigma <= 0");
    Localizers loc;
    loc.grid = g;
    loc.sigma = set.sigma;
    const std::size_t K = set.count();
    const std::size_t nn = g->size();
    loc.phi.assign(K, std::vector<double>(nn, 0.0));
    if (K == 1) {
        loc.phi[0].assign(nn, 1.0);
        return loc;
    }
    const int np = g->points;
    // step profiles Phi(x - x_j) for j = 1..K-1, then difference them
    std::vector<std::vector<double>> step(K - 1, std::vector<double>(nn));
    for (std::size_t j = 0; j + 1 < K; ++j) {
        const Vec2& xj = set.anchors[j].xc;
        for (std::size_t i = 0; i < nn; ++i) {
            double x0, x1 = 0.0;
            if (g->dim == 1)
                x0 = g->node[i];
            else {
                x0 = g->node[i / np];
                x1 = g->node[i % np];
            }
            double z = (x0 - xj[0]) * set.v1[0] + (x1 - xj[1]) * set.v1[1];
            step[j][i] = localizer_profile(z, set.sigma);
        }
    }
    for (std::size_t i = 0; i < nn; ++i) {
        loc.phi[0][i] = step[0][i];
        for (std::size_t j = 1; j + 1 < K; ++j)
            loc.phi[j][i] = step[j][i] - step[j - 1][i];
        loc.phi[K - 1][i] = 1.0 - step[K - 2][i];
    }
    return loc;
}

namespace {

int conditions_per_bubble(int dim) { return 2 * dim + 3; }

// residual layout per bubble: [Re<(x-a)_i U, R>]_i, Re<|x-a|^2 U, R>,
// [Im<d_i U, R>]_i, Im<Lam U, R>, Im<varrho, R>
void bubble_residuals(const BubbleDirections& dirs, const Field& R, int dim,
                      double* out) {
    int k = 0;
    for (int ax = 0; ax < dim; ++ax) out[k++] = std::real(inner(dirs.xU[ax], R));
    out[k++] = std::real(inner(dirs.x2U, R));
    for (int ax = 0; ax < dim; ++ax) out[k++] = std::imag(inner(dirs.gradU[ax], R));
    out[k++] = std::imag(inner(dirs.lamU, R));
    out[k++] = std::imag(inner(dirs.varrho, R));
}

} // namespace

Decomposition decompose(const Field& u, const std::vector<BubbleParams>& guess,
                        const RadialProfile& Q, const RadialProfile& rho,
                        double tol_factor, int max_iter) {
    if (!u.finite()) throw ValidationError("decompose: field has non-finite entries");
    const GridPtr& g = u.grid;
    const int dim = g->dim;
    const int mb = conditions_per_bubble(dim);
    const std::size_t K = guess.size();
    const int M = int(K) * mb;
    const double tol = tol_factor * norm_l2(u);

    Decomposition dec;
    dec.params = guess;

    Eigen::VectorXd F(M), delta(M);
    Eigen::MatrixXd J(M, M);

    auto assemble = [&](const std::vector<BubbleParams>& P, Field& R,
                        std::vector<BubbleDirections>& dirs, Eigen::VectorXd& FF) {
        R = u;
        dirs.clear();
        for (std::size_t j = 0; j < K; ++j) {
            Field Uj = bubble(P[j], Q, g);
            for (std::size_t i = 0; i < R.size(); ++i) R.v[i] -= Uj.v[i];
        }
        for (std::size_t j = 0; j < K; ++j)
            dirs.push_back(bubble_directions(P[j], Q, rho, g));
        for (std::size_t j = 0; j < K; ++j)
            bubble_residuals(dirs[j], R, dim, FF.data() + j * mb);
    };

    Field R;
    std::vector<BubbleDirections> dirs;
    assemble(dec.params, R, dirs, F);

    for (dec.iterations = 0; dec.iterations < max_iter; ++dec.iterations) {
        double fmax = F.cwiseAbs().maxCoeff();
        if (fmax <= tol) {
            dec.converged = true;
            break;
        }
        // J[m][p] = -<D_m, dU_l/dp> with the appropriate Re/Im part
        for (std::size_t l = 0; l < K; ++l) {
            std::vector<Field> dU = bubble_param_derivatives(dec.params[l], Q, g);
            for (int p = 0; p < mb; ++p) {
                for (std::size_t j = 0; j < K; ++j) {
                    int k = 0;
                    int row0 = int(j) * mb;
                    for (int ax = 0; ax < dim; ++ax, ++k)
                        J(row0 + k, int(l) * mb + p) =
                            -std::real(inner(dirs[j].xU[ax], dU[p]));
                    J(row0 + k, int(l) * mb + p) =
                        -std::real(inner(dirs[j].x2U, dU[p]));
                    ++k;
                    for (int ax = 0; ax < dim; ++ax, ++k)
                        J(row0 + k, int(l) * mb + p) =
                            -std::imag(inner(dirs[j].gradU[ax], dU[p]));
                    J(row0 + k, int(l) * mb + p) =
                        -std::imag(inner(dirs[j].lamU, dU[p]));
                    ++k;
                    J(row0 + k, int(l) * mb + p) =
                        -std::imag(inner(dirs[j].varrho, dU[p]));
                }
            }
        }
        // Note: <D_m, dU/dp> pairs the CONJUGATE of dU with D_m; the residuals
        // pair D_m against R with conj on R. inner(a,b) = int a conj(b), and
        // d/dp Re<D, R> = Re<D, dR/dp> with dR/dp = -dU/dp, hence the sign.

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        double smin = svd.singularValues()(M - 1), smax = svd.singularValues()(0);
        dec.jacobian_condition = smin > 0.0 ? smax / smin : 1e300;
        if (dec.jacobian_condition > 1e12) break; // bubble collision or R too large
        delta = svd.solve(-F);

        double damp = 1.0;
        std::vector<BubbleParams> trial = dec.params;
        Eigen::VectorXd Ftrial(M);
        Field Rtrial;
        std::vector<BubbleDirections> dirs_trial;
        for (int halving = 0; halving < 8; ++halving) {
            trial = dec.params;
            for (std::size_t l = 0; l < K; ++l) {
                int base = int(l) * mb, k = 0;
                trial[l].lambda += damp * delta(base + k++);
                for (int ax = 0; ax < dim; ++ax)
                    trial[l].alpha[ax] += damp * delta(base + k++);
                for (int ax = 0; ax < dim; ++ax)
                    trial[l].beta[ax] += damp * delta(base + k++);
                trial[l].gamma += damp * delta(base + k++);
                trial[l].theta += damp * delta(base + k++);
            }
            bool ok = true;
            for (const BubbleParams& p : trial)
                if (!(p.lambda >= 4.0 * g->spacing)) ok = false;
            if (ok) {
                assemble(trial, Rtrial, dirs_trial, Ftrial);
                if (Ftrial.cwiseAbs().maxCoeff() < F.cwiseAbs().maxCoeff() ||
                    halving == 7)
                    break;
            }
            damp *= 0.5;
        }
        dec.params = trial;
        F = Ftrial;
        R = Rtrial;
        dirs = dirs_trial;
    }
    if (!dec.converged && F.cwiseAbs().maxCoeff() <= tol) dec.converged = true;
    dec.remainder = R;
    dec.residuals.assign(F.data(), F.data() + M);
    return dec;
}

ModSeries mod_vector(const std::vector<double>& times,
                     const std::vector<std::vector<BubbleParams>>& params_at_time,
                     double T, int nu_star) {
    const std::size_t n = times.size();
    if (n < 3) throw ValidationError("mod_vector: need at least 3 samples");
    if (params_at_time.size() != n)
        throw ValidationError("mod_vector: times/params size mismatch");
    const std::size_t K = params_at_time[0].size();
    const int kappa = nu_star - 3;

    ModSeries out;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double h1 = times[i] - times[i - 1];
        double h2 = times[i + 1] - times[i];
        double wm = -h2 / (h1 * (h1 + h2));
        double w0 = (h2 - h1) / (h1 * h2);
        double wp = h1 / (h2 * (h1 + h2));
        out.times.push_back(times[i]);
        double total = 0.0;
        std::vector<double> per_bubble(K, 0.0);
        for (std::size_t j = 0; j < K; ++j) {
            const BubbleParams& pm = params_at_time[i - 1][j];
            const BubbleParams& p0 = params_at_time[i][j];
            const BubbleParams& pp = params_at_time[i + 1][j];
            double lam_dot = wm * pm.lambda + w0 * p0.lambda + wp * pp.lambda;
            double gam_dot = wm * pm.gamma + w0 * p0.gamma + wp * pp.gamma;
            double theta_dot = wm * pm.theta + w0 * p0.theta + wp * pp.theta;
            double alpha_dot[2] = {0, 0}, beta_dot[2] = {0, 0};
            for (int ax = 0; ax < 2; ++ax) {
                alpha_dot[ax] = wm * pm.alpha[ax] + w0 * p0.alpha[ax] + wp * pp.alpha[ax];
                beta_dot[ax] = wm * pm.beta[ax] + w0 * p0.beta[ax] + wp * pp.beta[ax];
            }
            double lam = p0.lambda, gam = p0.gamma;
            double beta2 = p0.beta[0] * p0.beta[0] + p0.beta[1] * p0.beta[1];
            double m = std::abs(lam * lam_dot + gam) +
                       std::abs(lam * lam * gam_dot + gam * gam);
            double a_term = 0.0, b_term = 0.0;
            for (int ax = 0; ax < 2; ++ax) {
                a_term += std::pow(lam * alpha_dot[ax] - 2.0 * p0.beta[ax], 2);
                b_term += std::pow(lam * lam * beta_dot[ax] + gam * p0.beta[ax], 2);
            }
            m += std::sqrt(a_term) + std::sqrt(b_term);
            m += std::abs(lam * lam * theta_dot - 1.0 - beta2);
            per_bubble[j] = m;
            total += m;
        }
        out.mod_j.push_back(per_bubble);
        out.mod_total.push_back(total);
        double Tt = T - times[i];
        out.bound_ratio.push_back(Tt > 0.0 ? total / std::pow(Tt, kappa + 3) : 0.0);
    }
    return out;
}

Field renormalize_remainder(const Field& R, const std::vector<double>& phi_j,
                            const BubbleParams& p) {
    const GridPtr& g = R.grid;
    if (p.lambda < 4.0 * g->spacing)
        throw ResolutionError("renormalize_remainder: lambda below 4h");
    Field W = R;
    if (!phi_j.empty()) {
        if (phi_j.size() != R.size())
            throw ValidationError("renormalize_remainder: localizer size mismatch");
        for (std::size_t i = 0; i < W.size(); ++i) W.v[i] *= phi_j[i];
    }
    Field eps = sample_affine(W, p.lambda, p.alpha);
    const double pref = std::pow(p.lambda, 0.5 * g->dim);
    const cplx rot = std::polar(1.0, -p.theta);
    for (std::size_t i = 0; i < eps.size(); ++i) eps.v[i] *= pref * rot;
    return eps;
}

Field renormalize_full_phase(const Field& w, const BubbleParams& p) {
    Field e = renormalize_remainder(w, {}, p);
    const GridPtr& g = e.grid;
    const int np = g->points;
    for (std::size_t i = 0; i < e.size(); ++i) {
        double y0, y1 = 0.0;
        if (g->dim == 1)
            y0 = g->node[i];
        else {
            y0 = g->node[i / np];
            y1 = g->node[i % np];
        }
        double phase = p.beta[0] * y0 + p.beta[1] * y1 -
                       0.25 * p.gamma * (y0 * y0 + y1 * y1);
        e.v[i] *= std::polar(1.0, -phase);
    }
    return e;
}

ScalDirections make_scal_directions(const LinearizedOps& ops, const Field& rho_grid) {
    ScalDirections d;
    d.grid = ops.grid;
    d.Q = ops.Q;
    d.rho = rho_grid;
    const GridPtr& g = ops.grid;
    const int np = g->points;
    d.y2Q = Field(g);
    d.lamQ = Field(g);
    for (int ax = 0; ax < g->dim; ++ax) {
        d.gradQ.push_back(gradient(ops.Q, ax));
        d.yQ.emplace_back(g);
    }
    for (std::size_t i = 0; i < d.Q.size(); ++i) {
        double y0, y1 = 0.0;
        if (g->dim == 1)
            y0 = g->node[i];
        else {
            y0 = g->node[i / np];
            y1 = g->node[i % np];
        }
        double q = d.Q.v[i].real();
        d.yQ[0].v[i] = y0 * q;
        if (g->dim == 2) d.yQ[1].v[i] = y1 * q;
        d.y2Q.v[i] = (y0 * y0 + y1 * y1) * q;
        double xg = y0 * d.gradQ[0].v[i].real() +
                    (g->dim == 2 ? y1 * d.gradQ[1].v[i].real() : 0.0);
        d.lamQ.v[i] = 0.5 * g->dim * q + xg;
    }
    return d;
}

ScalResult scal(const Field& eps, const ScalDirections& dirs) {
    ScalResult r;
    r.products[0] = std::real(inner(eps, dirs.Q));
    double yq = 0.0, gq = 0.0;
    for (std::size_t ax = 0; ax < dirs.yQ.size(); ++ax) {
        double a = std::real(inner(eps, dirs.yQ[ax]));
        double b = std::imag(inner(eps, dirs.gradQ[ax]));
        yq += a * a;
        gq += b * b;
    }
    r.products[1] = std::sqrt(yq);
    r.products[2] = std::real(inner(eps, dirs.y2Q));
    r.products[3] = std::sqrt(gq);
    r.products[4] = std::imag(inner(eps, dirs.lamQ));
    r.products[5] = std::imag(inner(eps, dirs.rho));
    for (double v : r.products) r.scal += v * v;
    return r;
}

std::vector<std::vector<double>> interaction_overlap(
    const std::vector<BubbleParams>& params, const RadialProfile& Q,
    const GridPtr& g, int m, int n, const std::array<int, 2>& nu) {
    const std::size_t K = params.size();
    if (K < 2) throw ValidationError("interaction_overlap: K >= 2 required");
    const int np = g->points;

    std::vector<Field> U, dU;
    for (const BubbleParams& p : params) {
        Field u = bubble(p, Q, g);
        Field d = u;
        for (int k = 0; k < nu[0]; ++k) d = gradient(d, 0);
        for (int k = 0; k < nu[1]; ++k) d = gradient(d, 1);
        U.push_back(std::move(u));
        dU.push_back(std::move(d));
    }

    auto dist_pow = [&](std::size_t i, const Vec2& a, int pw) {
        if (pw == 0) return 1.0;
        double x0, x1 = 0.0;
        if (g->dim == 1)
            x0 = g->node[i];
        else {
            x0 = g->node[i / np];
            x1 = g->node[i % np];
        }
        double r = std::sqrt((x0 - a[0]) * (x0 - a[0]) + (x1 - a[1]) * (x1 - a[1]));
        return std::pow(r, pw);
    };

    std::vector<std::vector<double>> out(K, std::vector<double>(K, 0.0));
    const double hd = std::pow(g->spacing, g->dim);
    for (std::size_t l = 0; l < K; ++l)
        for (std::size_t j = 0; j < K; ++j) {
            if (l == j) continue;
            double acc = 0.0;
            for (std::size_t i = 0; i < U[j].size(); ++i)
                acc += dist_pow(i, params[l].alpha, n) * std::abs(dU[l].v[i]) *
                       dist_pow(i, params[j].alpha, m) * std::abs(U[j].v[i]);
            out[l][j] = acc * hd;
        }
    return out;
}

} // namespace mbnls
