#include "ground_state.hpp"

#include "errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace mbnls {

namespace {

int power_exponent(int dim) { return dim == 1 ? 5 : 3; } // p = 1 + 4/d

double ipow(double x, int p) {
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
}

ShootingInfo g_shooting_info;

// RK4 shooting for the initializer: returns the turning/crossing behavior of
// the profile started at Q(0)=a. +1 -> crossed zero (a high), -1 -> turned
// back up while positive (a low).
int classify_shot(int dim, double a, double rmax, double h,
                  std::vector<double>* out_r = nullptr,
                  std::vector<double>* out_q = nullptr) {
    const int p = power_exponent(dim);
    double q2 = (a - ipow(a, p)) / dim; // Q''(0)
    double r = 1e-4;
    double q = a + 0.5 * q2 * r * r;
    double pq = q2 * r;
    // first equation of the system is trivially Q' = P
    auto fp = [&](double rr, double qq, double pp) {
        return qq - ipow(qq, p) - (dim - 1) * pp / rr;
    };
    double qmin = a;
    while (r < rmax) {
        if (out_r) {
            out_r->push_back(r);
            out_q->push_back(q);
        }
        double k1q = pq, k1p = fp(r, q, pq);
        double k2q = pq + 0.5 * h * k1p, k2p = fp(r + 0.5 * h, q + 0.5 * h * k1q, pq + 0.5 * h * k1p);
        double k3q = pq + 0.5 * h * k2p, k3p = fp(r + 0.5 * h, q + 0.5 * h * k2q, pq + 0.5 * h * k2p);
        double k4q = pq + h * k3p, k4p = fp(r + h, q + h * k3q, pq + h * k3p);
        q += h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
        pq += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
        r += h;
        if (q < 0.0) return +1;
        qmin = std::min(qmin, q);
        if (q > 1.05 * qmin && pq > 0.0 && q > 10.0 * qmin) return -1;
    }
    return -1; // reached rmax still positive: treat as undershoot
}

} // namespace

const ShootingInfo& last_shooting_info() { return g_shooting_info; }

double RadialProfile::eval(double rr) const {
    rr = std::abs(rr);
    const int n = int(r.size());
    if (rr >= rmax) {
        double delta = decay_rate > 0.0 ? decay_rate : 1.0;
        return val[n - 1] * std::exp(-delta * (rr - rmax));
    }
    int hi = int(std::upper_bound(r.begin(), r.end(), rr) - r.begin());
    if (hi <= 0) hi = 1;
    if (hi >= n) hi = n - 1;
    int lo = hi - 1;
    double dx = r[hi] - r[lo];
    double t = (rr - r[lo]) / dx;
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    // quintic Hermite basis on [0,1]
    double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
    double h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    double h3 = 10 * t3 - 15 * t4 + 6 * t5;
    double h4 = -4 * t3 + 7 * t4 - 3 * t5;
    double h5 = 0.5 * (t3 - 2 * t4 + t5);
    return val[lo] * h0 + d1[lo] * dx * h1 + d2[lo] * dx * dx * h2 +
           val[hi] * h3 + d1[hi] * dx * h4 + d2[hi] * dx * dx * h5;
}

double RadialProfile::eval_d1(double rr) const {
    double sign = rr < 0.0 ? -1.0 : 1.0;
    rr = std::abs(rr);
    const int n = int(r.size());
    if (rr >= rmax) {
        double delta = decay_rate > 0.0 ? decay_rate : 1.0;
        return sign * (-delta) * val[n - 1] * std::exp(-delta * (rr - rmax));
    }
    int hi = int(std::upper_bound(r.begin(), r.end(), rr) - r.begin());
    if (hi <= 0) hi = 1;
    if (hi >= n) hi = n - 1;
    int lo = hi - 1;
    double dx = r[hi] - r[lo];
    double t = (rr - r[lo]) / dx;
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    double g0 = (-30 * t2 + 60 * t3 - 30 * t4) / dx;
    double g1 = (1 - 18 * t2 + 32 * t3 - 15 * t4);
    double g2 = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4) * dx;
    double g3 = (30 * t2 - 60 * t3 + 30 * t4) / dx;
    double g4 = (-12 * t2 + 28 * t3 - 15 * t4);
    double g5 = 0.5 * (3 * t2 - 8 * t3 + 5 * t4) * dx;
    return sign * (val[lo] * g0 + d1[lo] * g1 + d2[lo] * g2 +
                   val[hi] * g3 + d1[hi] * g4 + d2[hi] * g5);
}

namespace {

// Assembles stencil rows (9-point, even reflection at the origin) for the
// Newton/linear solves. Row 0 imposes the L'Hopital form d*f''(0) + ...; the
// last row carries the boundary condition.
struct StencilTable {
    int n = 0, width = 9, half = 4;
    std::vector<int> lo;                      // leftmost virtual index per row
    std::vector<std::vector<double>> w1, w2;  // first/second derivative weights
};

StencilTable build_stencils(const std::vector<double>& r, int width) {
    StencilTable st;
    st.n = int(r.size());
    st.width = width;
    st.half = width / 2;
    st.lo.resize(st.n);
    st.w1.resize(st.n);
    st.w2.resize(st.n);
    std::vector<double> xs(width);
    std::vector<std::vector<double>> w;
    for (int i = 0; i < st.n; ++i) {
        int lo = i - st.half;
        if (lo + width > st.n) lo = st.n - width;
        st.lo[i] = lo;
        for (int s = 0; s < width; ++s) {
            int j = lo + s;
            xs[s] = j >= 0 ? r[j] : -r[-j];
        }
        fd_weights(r[i], xs, 2, w);
        st.w1[i] = w[1];
        st.w2[i] = w[2];
    }
    return st;
}

// Scatter a stencil row into triplets, folding reflected nodes (j < 0) onto
// their mirror with the parity sign.
void scatter_row(std::vector<Eigen::Triplet<double>>& trip, int row,
                 const StencilTable& st, const std::vector<double>& wt,
                 double coef, double parity_sign) {
    for (int s = 0; s < st.width; ++s) {
        int j = st.lo[row] + s;
        double v = coef * wt[s];
        if (v == 0.0) continue;
        if (j >= 0)
            trip.emplace_back(row, j, v);
        else
            trip.emplace_back(row, -j, parity_sign * v);
    }
}

} // namespace

RadialMeshConfig resolve_mesh(int dim, const RadialMeshConfig& cfg_in) {
    RadialMeshConfig cfg = cfg_in;
    if (cfg.n == 0) cfg.n = dim == 1 ? 3001 : 2001;
    return cfg;
}

RadialProfile solve_ground_state(int dim, const RadialMeshConfig& cfg_in) {
    if (dim != 1 && dim != 2) throw ValidationError("solve_ground_state: dim must be 1 or 2");
    const RadialMeshConfig cfg = resolve_mesh(dim, cfg_in);
    const int p = power_exponent(dim);
    std::vector<double> r = graded_mesh(cfg.n, cfg.rmax, cfg.grading);
    const int n = cfg.n;

    // Shooting pass: bracket and bisect on Q(0).
    double lo = 0.6, hi = 4.0;
    const double shoot_rmax = std::min(cfg.rmax, 25.0), shoot_h = 2e-3;
    if (classify_shot(dim, lo, shoot_rmax, shoot_h) != -1 ||
        classify_shot(dim, hi, shoot_rmax, shoot_h) != +1) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "ground-state shooting bracket failure on [%g, %g]", lo, hi);
        throw ValidationError(buf);
    }
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (classify_shot(dim, mid, shoot_rmax, shoot_h) == +1)
            hi = mid;
        else
            lo = mid;
    }
    double amp = 0.5 * (lo + hi);
    g_shooting_info = {amp, lo, hi};

    std::vector<double> sr, sq;
    classify_shot(dim, amp, shoot_rmax, shoot_h, &sr, &sq);

    // Initial iterate: shooting profile (linear interp), exponential past its
    // trustworthy range.
    std::vector<double> q(n, 0.0);
    double r_trust = sr.back();
    for (std::size_t i = 1; i < sq.size(); ++i) {
        if (sq[i] > sq[i - 1]) { // turned up: integrator left the stable manifold
            r_trust = sr[i - 1];
            break;
        }
    }
    auto shoot_at = [&](double rr) {
        auto it = std::upper_bound(sr.begin(), sr.end(), rr);
        std::size_t hi_idx = std::min<std::size_t>(it - sr.begin(), sr.size() - 1);
        if (hi_idx == 0) hi_idx = 1;
        std::size_t lo_idx = hi_idx - 1;
        double t = (rr - sr[lo_idx]) / (sr[hi_idx] - sr[lo_idx]);
        return sq[lo_idx] * (1 - t) + sq[hi_idx] * t;
    };
    double q_trust = std::max(shoot_at(std::max(r_trust - 0.5, 1.0)), 1e-12);
    for (int i = 0; i < n; ++i) {
        if (r[i] <= r_trust - 0.5)
            q[i] = std::max(shoot_at(r[i]), 0.0);
        else
            q[i] = q_trust * std::exp(-(r[i] - std::max(r_trust - 0.5, 1.0)));
    }
    q[0] = amp;

    // Newton polish on the mesh: 9-point stencils, Robin outflow boundary.
    StencilTable st = build_stencils(r, 9);
    const double robin = 1.0 + (dim - 1) / (2.0 * cfg.rmax);
    Eigen::VectorXd F(n), dq(n);
    auto eval_F = [&](const std::vector<double>& qq) {
        for (int i = 0; i < n; ++i) {
            double d2 = 0.0, d1v = 0.0;
            for (int s = 0; s < st.width; ++s) {
                int j = st.lo[i] + s;
                double v = j >= 0 ? qq[j] : qq[-j];
                d2 += st.w2[i][s] * v;
                if (i > 0 && i < n - 1) d1v += st.w1[i][s] * v;
                if (i == n - 1) d1v += st.w1[i][s] * v;
            }
            if (i == 0)
                F(i) = dim * d2 - qq[0] + ipow(qq[0], p);
            else if (i == n - 1)
                F(i) = d1v + robin * qq[i];
            else
                F(i) = d2 + (dim - 1) * d1v / r[i] - qq[i] + ipow(qq[i], p);
        }
    };

    Eigen::SparseMatrix<double> J(n, n);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    std::vector<Eigen::Triplet<double>> trip;
    eval_F(q);
    for (int newton = 0; newton < 40; ++newton) {
        double f0 = F.cwiseAbs().maxCoeff();
        if (f0 < 1e-13) break;
        trip.clear();
        for (int i = 0; i < n; ++i) {
            if (i == 0) {
                scatter_row(trip, i, st, st.w2[i], dim, +1.0);
                trip.emplace_back(0, 0, -1.0 + p * ipow(q[0], p - 1));
            } else if (i == n - 1) {
                scatter_row(trip, i, st, st.w1[i], 1.0, +1.0);
                trip.emplace_back(i, i, robin);
            } else {
                scatter_row(trip, i, st, st.w2[i], 1.0, +1.0);
                scatter_row(trip, i, st, st.w1[i], (dim - 1) / r[i], +1.0);
                trip.emplace_back(i, i, -1.0 + p * ipow(q[i], p - 1));
            }
        }
        J.setFromTriplets(trip.begin(), trip.end());
        lu.compute(J);
        if (lu.info() != Eigen::Success)
            throw std::runtime_error("ground-state Newton: singular Jacobian");
        dq = lu.solve(-F);
        double step = 1.0;
        std::vector<double> qn(n);
        for (int halving = 0; halving < 9; ++halving) {
            for (int i = 0; i < n; ++i) qn[i] = q[i] + step * dq(i);
            eval_F(qn);
            if (F.cwiseAbs().maxCoeff() < f0 || halving == 8) break;
            step *= 0.5;
        }
        q = qn;
    }

    RadialProfile out;
    out.dim = dim;
    out.rmax = cfg.rmax;
    out.r = r;
    out.val = q;
    out.d1 = radial_derivative(r, q, 1, 9, Parity::Even);
    out.d2 = radial_derivative(r, q, 2, 9, Parity::Even);
    out.decay_rate = fit_decay_rate(r, q, 0.45 * cfg.rmax, 0.8 * cfg.rmax);
    if (out.decay_rate <= 0.0)
        throw std::runtime_error("ground state failed to decay (increase rmax)");
    return out;
}

double ground_state_residual(const RadialProfile& Q) {
    const int p = power_exponent(Q.dim);
    std::vector<double> d2 = radial_derivative(Q.r, Q.val, 2, 11, Parity::Even);
    std::vector<double> d1 = radial_derivative(Q.r, Q.val, 1, 11, Parity::Even);
    double worst = 0.0;
    for (std::size_t i = 0; i < Q.r.size(); ++i) {
        double res;
        if (i == 0)
            res = Q.dim * d2[0] - Q.val[0] + ipow(Q.val[0], p);
        else
            res = d2[i] + (Q.dim - 1) * d1[i] / Q.r[i] - Q.val[i] + ipow(Q.val[i], p);
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

RadialProfile solve_rho(const RadialProfile& Q) {
    const int dim = Q.dim;
    const int p = power_exponent(dim);
    const int n = int(Q.r.size());
    const std::vector<double>& r = Q.r;
    StencilTable st = build_stencils(r, 9);

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        double vplus = (1.0 + 4.0 / dim) * ipow(Q.val[i], p - 1);
        if (i == 0) {
            scatter_row(trip, i, st, st.w2[i], -double(dim), +1.0);
            trip.emplace_back(0, 0, 1.0 - vplus);
            b(0) = 0.0;
        } else if (i == n - 1) {
            trip.emplace_back(i, i, 1.0); // Dirichlet: rho decays exponentially
            b(i) = 0.0;
        } else {
            scatter_row(trip, i, st, st.w2[i], -1.0, +1.0);
            scatter_row(trip, i, st, st.w1[i], -(dim - 1) / r[i], +1.0);
            trip.emplace_back(i, i, 1.0 - vplus);
            b(i) = -r[i] * r[i] * Q.val[i];
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("rho solve: factorization failed");
    Eigen::VectorXd x = lu.solve(b);

    // crude 1-norm condition estimate; the radial restriction of L+ is
    // invertible, so this only guards against mesh pathologies
    double anorm = 0.0;
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
            anorm = std::max(anorm, std::abs(it.value()));
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    double ainv = lu.solve(ones).cwiseAbs().maxCoeff();
    if (anorm * ainv > 1e12)
        throw std::runtime_error("rho solve: near-singular operator, condition estimate " +
                                 std::to_string(anorm * ainv));

    RadialProfile rho;
    rho.dim = dim;
    rho.rmax = Q.rmax;
    rho.r = r;
    rho.val.assign(x.data(), x.data() + n);
    rho.d1 = radial_derivative(r, rho.val, 1, 9, Parity::Even);
    rho.d2 = radial_derivative(r, rho.val, 2, 9, Parity::Even);
    rho.decay_rate = fit_decay_rate(r, rho.val, 0.45 * Q.rmax, 0.8 * Q.rmax);
    return rho;
}

double rho_residual_l2(const RadialProfile& rho, const RadialProfile& Q) {
    const int dim = Q.dim;
    const int p = power_exponent(dim);
    const int n = int(Q.r.size());
    std::vector<double> d2 = radial_derivative(rho.r, rho.val, 2, 11, Parity::Even);
    std::vector<double> d1 = radial_derivative(rho.r, rho.val, 1, 11, Parity::Even);
    std::vector<double> res2(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double vplus = (1.0 + 4.0 / dim) * ipow(Q.val[i], p - 1);
        double lap = i == 0 ? dim * d2[0] : d2[i] + (dim - 1) * d1[i] / rho.r[i];
        double res = -lap + rho.val[i] - vplus * rho.val[i] + rho.r[i] * rho.r[i] * Q.val[i];
        res2[i] = res * res;
    }
    return std::sqrt(radial_integral(rho.r, res2, dim));
}

// ---- grid side -------------------------------------------------------------

Field profile_to_grid(const RadialProfile& p, const GridPtr& g, const Vec2& center) {
    return synthesize(g, [&](double x, double y) {
        double dx = x - center[0];
        double dy = g->dim == 2 ? y - center[1] : 0.0;
        return cplx(p.eval(std::sqrt(dx * dx + dy * dy)), 0.0);
    });
}

namespace {

// (-lap + 1)^{-s} Fourier multiplier, s in {1, 1/2}; data in place.
void apply_helmholtz_power(Field& f, double s) {
    const Grid& g = *f.grid;
    to_spectral(f);
    const int n = g.points;
    if (g.dim == 1) {
        for (int j = 0; j < n; ++j)
            f.v[j] *= std::pow(1.0 + g.wave[j] * g.wave[j], -s);
    } else {
        for (int ix = 0; ix < n; ++ix) {
            double kx2 = g.wave[ix] * g.wave[ix];
            for (int iy = 0; iy < n; ++iy)
                f.v[g.index(ix, iy)] *=
                    std::pow(1.0 + kx2 + g.wave[iy] * g.wave[iy], -s);
        }
    }
    to_physical(f);
}

double grid_ode_residual_norm(const Field& q, int p) {
    Field lap = laplacian(q);
    Field res = q;
    for (std::size_t i = 0; i < q.size(); ++i) {
        double qq = q.v[i].real();
        res.v[i] = lap.v[i].real() - qq + ipow(qq, p);
    }
    return norm_l2(res);
}

} // namespace

Field petviashvili_polish(const GridPtr& g, const Field& init, double tol,
                          int maxit, double* out_residual) {
    const int p = power_exponent(g->dim);
    const double gamma = double(p) / (p - 1);
    Field q = init;
    double res = grid_ode_residual_norm(q, p);
    for (int it = 0; it < maxit && res > tol; ++it) {
        // S = (||grad q||^2 + ||q||^2) / <q^p, q>
        double num = norm_h1semi(q), l2 = norm_l2(q);
        double den = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            den += ipow(q.v[i].real(), p) * q.v[i].real();
        den *= std::pow(g->spacing, g->dim);
        double S = (num * num + l2 * l2) / den;
        Field rhs(g);
        for (std::size_t i = 0; i < q.size(); ++i)
            rhs.v[i] = ipow(q.v[i].real(), p);
        apply_helmholtz_power(rhs, 1.0);
        double fac = std::pow(S, gamma);
        for (std::size_t i = 0; i < q.size(); ++i)
            q.v[i] = fac * rhs.v[i].real();
        res = grid_ode_residual_norm(q, p);
    }
    if (out_residual) *out_residual = res;
    return q;
}

LinearizedOps make_linearized_ops(const GridPtr& g, const Field& q_grid) {
    LinearizedOps ops;
    ops.grid = g;
    ops.Q = q_grid;
    const int pm1 = power_exponent(g->dim) - 1; // 4/d
    ops.vplus.resize(q_grid.size());
    ops.vminus.resize(q_grid.size());
    for (std::size_t i = 0; i < q_grid.size(); ++i) {
        double q4d = ipow(q_grid.v[i].real(), pm1);
        ops.vminus[i] = q4d;
        ops.vplus[i] = (1.0 + 4.0 / g->dim) * q4d;
    }
    return ops;
}

Field apply_L(const Field& f, LWhich which, const LinearizedOps& ops) {
    require_same_grid(f, ops.Q);
    Field lap = laplacian(f);
    Field out(f.grid);
    const std::vector<double>& V = which == LWhich::Plus ? ops.vplus : ops.vminus;
    for (std::size_t i = 0; i < f.size(); ++i)
        out.v[i] = -lap.v[i] + f.v[i] - V[i] * f.v[i];
    return out;
}

Field solve_rho_grid(const LinearizedOps& ops, const Field& init, double tol,
                     int maxit, double* out_residual) {
    const GridPtr& g = ops.grid;
    const std::size_t n = init.size();

    // rhs of the original system: -|x|^2 Q
    Field rhs(g);
    {
        const int np = g->points;
        if (g->dim == 1) {
            for (int j = 0; j < np; ++j)
                rhs.v[j] = -g->node[j] * g->node[j] * ops.Q.v[j].real();
        } else {
            for (int ix = 0; ix < np; ++ix)
                for (int iy = 0; iy < np; ++iy)
                    rhs.v[g->index(ix, iy)] =
                        -(g->node[ix] * g->node[ix] + g->node[iy] * g->node[iy]) *
                        ops.Q.v[g->index(ix, iy)].real();
        }
    }

    // Symmetric preconditioning: solve Ahat xhat = bhat with
    // Ahat = M^{-1/2} L+ M^{-1/2}, M = (-lap + 1); then rho = M^{-1/2} xhat.
    auto apply_Ahat = [&](const Field& x) {
        Field t = x;
        apply_helmholtz_power(t, 0.5);
        Field lt = apply_L(t, LWhich::Plus, ops);
        apply_helmholtz_power(lt, 0.5);
        return lt;
    };
    auto dot = [&](const Field& a, const Field& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += a.v[i].real() * b.v[i].real();
        return acc;
    };

    Field bhat = rhs;
    apply_helmholtz_power(bhat, 0.5);

    // x0 = M^{1/2} init  (so that M^{-1/2} x0 = init)
    Field x = init;
    {
        to_spectral(x);
        const int np = g->points;
        if (g->dim == 1) {
            for (int j = 0; j < np; ++j)
                x.v[j] *= std::sqrt(1.0 + g->wave[j] * g->wave[j]);
        } else {
            for (int ix = 0; ix < np; ++ix) {
                double kx2 = g->wave[ix] * g->wave[ix];
                for (int iy = 0; iy < np; ++iy)
                    x.v[g->index(ix, iy)] *=
                        std::sqrt(1.0 + kx2 + g->wave[iy] * g->wave[iy]);
            }
        }
        to_physical(x);
    }

    // MINRES (Paige-Saunders) on the symmetric indefinite Ahat.
    Field r(g);
    {
        Field ax = apply_Ahat(x);
        for (std::size_t i = 0; i < n; ++i) r.v[i] = bhat.v[i].real() - ax.v[i].real();
    }
    double beta = std::sqrt(dot(r, r));
    Field v_old(g), v(g), w0(g), w1(g);
    for (std::size_t i = 0; i < n; ++i) v.v[i] = r.v[i].real() / beta;
    double eta = beta;
    double c_old = 1.0, c_new = 1.0, s_old = 0.0, s_new = 0.0;
    double beta_k = beta;

    double true_res = 0.0;
    auto measure_true_residual = [&]() {
        Field rho = x;
        apply_helmholtz_power(rho, 0.5);
        Field lr = apply_L(rho, LWhich::Plus, ops);
        Field resid(g);
        for (std::size_t i = 0; i < n; ++i)
            resid.v[i] = lr.v[i].real() - rhs.v[i].real();
        return norm_l2(resid);
    };

    for (int it = 1; it <= maxit; ++it) {
        Field p = apply_Ahat(v);
        double alpha = dot(v, p);
        for (std::size_t i = 0; i < n; ++i)
            p.v[i] = p.v[i].real() - alpha * v.v[i].real() -
                     (it > 1 ? beta_k * v_old.v[i].real() : 0.0);
        double beta_next = std::sqrt(dot(p, p));

        // Givens updates
        double delta = c_new * alpha - c_old * s_new * beta_k;
        double rho1 = std::sqrt(delta * delta + beta_next * beta_next);
        double rho2 = s_new * alpha + c_old * c_new * beta_k;
        double rho3 = s_old * beta_k;
        c_old = c_new;
        s_old = s_new;
        c_new = delta / rho1;
        s_new = beta_next / rho1;

        Field w(g);
        for (std::size_t i = 0; i < n; ++i)
            w.v[i] = (v.v[i].real() - rho3 * w0.v[i].real() - rho2 * w1.v[i].real()) / rho1;
        for (std::size_t i = 0; i < n; ++i)
            x.v[i] = x.v[i].real() + c_new * eta * w.v[i].real();
        eta = -s_new * eta;

        w0 = w1;
        w1 = w;
        v_old = v;
        for (std::size_t i = 0; i < n; ++i) v.v[i] = p.v[i].real() / beta_next;
        beta_k = beta_next;

        if (it % 20 == 0 || std::abs(eta) < 0.1 * tol) {
            true_res = measure_true_residual();
            if (true_res < tol) break;
        }
    }
    true_res = measure_true_residual();
    if (out_residual) *out_residual = true_res;

    apply_helmholtz_power(x, 0.5); // back to rho = M^{-1/2} xhat
    // project out the exact discrete kernel directions (grad Q), hygiene only
    for (int axis = 0; axis < g->dim; ++axis) {
        Field dq = gradient(ops.Q, axis);
        double nrm2 = dot(dq, dq);
        if (nrm2 <= 0.0) continue;
        double proj = dot(x, dq) / nrm2;
        for (std::size_t i = 0; i < n; ++i)
            x.v[i] = x.v[i].real() - proj * dq.v[i].real();
    }
    return x;
}

double KernelReport::max_residual() const {
    double m = 0.0;
    for (double rv : residual) m = std::max(m, rv);
    return m;
}

KernelReport kernel_report_grid(const LinearizedOps& ops, const Field& rho_grid) {
    const GridPtr& g = ops.grid;
    if (norm_l2(ops.Q) <= 0.0)
        throw ValidationError("kernel_report: degenerate (zero) ground state");
    KernelReport rep;
    const int p = power_exponent(g->dim);
    const std::size_t n = ops.Q.size();

    // distilled ODE residual: lap Q - Q + Q^p (equals -L_- Q)
    Field lapQ = laplacian(ops.Q);
    Field ode(g);
    for (std::size_t i = 0; i < n; ++i) {
        double q = ops.Q.v[i].real();
        ode.v[i] = lapQ.v[i].real() - q + ipow(q, p);
    }
    rep.residual[3] = norm_l2(ode);

    // [0] L+ grad Q: worst axis
    double worst = 0.0;
    for (int axis = 0; axis < g->dim; ++axis) {
        Field dq = gradient(ops.Q, axis);
        worst = std::max(worst, norm_l2(apply_L(dq, LWhich::Plus, ops)));
    }
    rep.residual[0] = worst;

    // [1] weight-commuted L+ Lam Q + 2Q:
    //   -(d/2+2) lap Q - x.grad(lap Q) + (1 - Vplus) Lam Q + 2Q
    {
        Field lamQ(g);
        std::vector<Field> gradQ, gradLap;
        for (int axis = 0; axis < g->dim; ++axis) {
            gradQ.push_back(gradient(ops.Q, axis));
            gradLap.push_back(gradient(lapQ, axis));
        }
        const int np = g->points;
        Field res(g);
        auto node_coord = [&](std::size_t idx, int axis) {
            if (g->dim == 1) return g->node[idx];
            return axis == 0 ? g->node[idx / np] : g->node[idx % np];
        };
        for (std::size_t i = 0; i < n; ++i) {
            double xdotgQ = 0.0, xdotgL = 0.0;
            for (int axis = 0; axis < g->dim; ++axis) {
                double xc = node_coord(i, axis);
                xdotgQ += xc * gradQ[axis].v[i].real();
                xdotgL += xc * gradLap[axis].v[i].real();
            }
            double lam = 0.5 * g->dim * ops.Q.v[i].real() + xdotgQ;
            lamQ.v[i] = lam;
            res.v[i] = -(0.5 * g->dim + 2.0) * lapQ.v[i].real() - xdotgL +
                       (1.0 - ops.vplus[i]) * lam + 2.0 * ops.Q.v[i].real();
        }
        rep.residual[1] = norm_l2(res);
    }

    // [2] L+ rho + |x|^2 Q
    {
        Field lr = apply_L(rho_grid, LWhich::Plus, ops);
        Field res(g);
        const int np = g->points;
        for (std::size_t i = 0; i < n; ++i) {
            double x2;
            if (g->dim == 1) {
                double xc = g->node[i];
                x2 = xc * xc;
            } else {
                double xc = g->node[i / np], yc = g->node[i % np];
                x2 = xc * xc + yc * yc;
            }
            res.v[i] = lr.v[i].real() + x2 * ops.Q.v[i].real();
        }
        rep.residual[2] = norm_l2(res);
    }

    // [4] x_i * ode ; [5] |x|^2 * ode  (weights commute; see module comment)
    {
        const int np = g->points;
        double worst4 = 0.0;
        Field res5(g);
        for (int axis = 0; axis < g->dim; ++axis) {
            Field res4(g);
            for (std::size_t i = 0; i < n; ++i) {
                double xc;
                if (g->dim == 1)
                    xc = g->node[i];
                else
                    xc = axis == 0 ? g->node[i / np] : g->node[i % np];
                res4.v[i] = xc * ode.v[i].real();
            }
            worst4 = std::max(worst4, norm_l2(res4));
        }
        rep.residual[4] = worst4;
        for (std::size_t i = 0; i < n; ++i) {
            double x2;
            if (g->dim == 1) {
                double xc = g->node[i];
                x2 = xc * xc;
            } else {
                double xc = g->node[i / np], yc = g->node[i % np];
                x2 = xc * xc + yc * yc;
            }
            res5.v[i] = x2 * ode.v[i].real();
        }
        rep.residual[5] = norm_l2(res5);
    }
    return rep;
}

KernelReport kernel_report_radial(const RadialProfile& Q, const RadialProfile& rho) {
    const int dim = Q.dim;
    const int p = power_exponent(dim);
    const int n = int(Q.r.size());
    const std::vector<double>& r = Q.r;
    if (*std::max_element(Q.val.begin(), Q.val.end()) <= 0.0)
        throw ValidationError("kernel_report: degenerate (zero) ground state");
    KernelReport rep;
    rep.q_decay = Q.decay_rate;
    rep.rho_decay = rho.decay_rate;

    auto lap_even = [&](const std::vector<double>& f) {
        std::vector<double> d2 = radial_derivative(r, f, 2, 11, Parity::Even);
        std::vector<double> d1 = radial_derivative(r, f, 1, 11, Parity::Even);
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i)
            out[i] = i == 0 ? dim * d2[0] : d2[i] + (dim - 1) * d1[i] / r[i];
        return out;
    };
    // l=1 sector: lap(g Y_1) = (g'' + (d-1)g'/r - (d-1)g/r^2) Y_1
    auto lap_odd = [&](const std::vector<double>& f) {
        std::vector<double> d2 = radial_derivative(r, f, 2, 11, Parity::Odd);
        std::vector<double> d1 = radial_derivative(r, f, 1, 11, Parity::Odd);
        std::vector<double> out(n, 0.0);
        for (int i = 1; i < n; ++i)
            out[i] = d2[i] + (dim - 1) * d1[i] / r[i] - (dim - 1) * f[i] / (r[i] * r[i]);
        return out;
    };
    auto l2norm = [&](const std::vector<double>& res, bool skip0) {
        std::vector<double> sq(n, 0.0);
        for (int i = skip0 ? 1 : 0; i < n; ++i) sq[i] = res[i] * res[i];
        return std::sqrt(radial_integral(r, sq, dim));
    };

    std::vector<double> vplus(n), vminus(n);
    for (int i = 0; i < n; ++i) {
        vminus[i] = ipow(Q.val[i], p - 1);
        vplus[i] = (1.0 + 4.0 / dim) * vminus[i];
    }
    std::vector<double> qp = radial_derivative(r, Q.val, 1, 11, Parity::Even);

    // [0] L+ Q' = 0  (odd sector)
    {
        std::vector<double> lp = lap_odd(qp), res(n, 0.0);
        for (int i = 1; i < n; ++i) res[i] = -lp[i] + qp[i] - vplus[i] * qp[i];
        rep.residual[0] = l2norm(res, true);
    }
    // [1] L+ Lam Q + 2Q, Lam Q = d/2 Q + r Q'
    {
        std::vector<double> lam(n), res(n);
        for (int i = 0; i < n; ++i) lam[i] = 0.5 * dim * Q.val[i] + r[i] * qp[i];
        std::vector<double> lp = lap_even(lam);
        for (int i = 0; i < n; ++i)
            res[i] = -lp[i] + lam[i] - vplus[i] * lam[i] + 2.0 * Q.val[i];
        rep.residual[1] = l2norm(res, false);
    }
    // [2] L+ rho + r^2 Q
    {
        std::vector<double> lp = lap_even(rho.val), res(n);
        for (int i = 0; i < n; ++i)
            res[i] = -lp[i] + rho.val[i] - vplus[i] * rho.val[i] + r[i] * r[i] * Q.val[i];
        rep.residual[2] = l2norm(res, false);
    }
    // [3] L- Q = 0
    {
        std::vector<double> lp = lap_even(Q.val), res(n);
        for (int i = 0; i < n; ++i)
            res[i] = -lp[i] + Q.val[i] - vminus[i] * Q.val[i];
        rep.residual[3] = l2norm(res, false);
    }
    // [4] L- (rQ) + 2Q' (odd sector)
    {
        std::vector<double> rq(n), res(n, 0.0);
        for (int i = 0; i < n; ++i) rq[i] = r[i] * Q.val[i];
        std::vector<double> lp = lap_odd(rq);
        for (int i = 1; i < n; ++i)
            res[i] = -lp[i] + rq[i] - vminus[i] * rq[i] + 2.0 * qp[i];
        rep.residual[4] = l2norm(res, true);
    }
    // [5] L- (r^2 Q) + 4 Lam Q
    {
        std::vector<double> r2q(n), res(n);
        for (int i = 0; i < n; ++i) r2q[i] = r[i] * r[i] * Q.val[i];
        std::vector<double> lp = lap_even(r2q);
        for (int i = 0; i < n; ++i)
            res[i] = -lp[i] + r2q[i] - vminus[i] * r2q[i] +
                     4.0 * (0.5 * dim * Q.val[i] + r[i] * qp[i]);
        rep.residual[5] = l2norm(res, false);
    }
    return rep;
}

// ---- cache -----------------------------------------------------------------

void save_profile_cache(const std::string& path, const RadialProfile& p) {
    std::ofstream f(path, std::ios::binary);
    if (!f) return;
    std::uint32_t dim = p.dim, n = std::uint32_t(p.r.size());
    double rmax = p.rmax;
    f.write(reinterpret_cast<const char*>(&dim), 4);
    f.write(reinterpret_cast<const char*>(&rmax), 8);
    f.write(reinterpret_cast<const char*>(&n), 4);
    f.write(reinterpret_cast<const char*>(p.r.data()), 8 * n);
    f.write(reinterpret_cast<const char*>(p.val.data()), 8 * n);
}

std::optional<RadialProfile> load_profile_cache(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    std::uint32_t dim = 0, n = 0;
    double rmax = 0.0;
    f.read(reinterpret_cast<char*>(&dim), 4);
    f.read(reinterpret_cast<char*>(&rmax), 8);
    f.read(reinterpret_cast<char*>(&n), 4);
    if (!f || n == 0 || n > 1u << 22) return std::nullopt;
    RadialProfile p;
    p.dim = int(dim);
    p.rmax = rmax;
    p.r.resize(n);
    p.val.resize(n);
    f.read(reinterpret_cast<char*>(p.r.data()), 8 * n);
    f.read(reinterpret_cast<char*>(p.val.data()), 8 * n);
    if (!f) return std::nullopt;
    p.d1 = radial_derivative(p.r, p.val, 1, 9, Parity::Even);
    p.d2 = radial_derivative(p.r, p.val, 2, 9, Parity::Even);
    p.decay_rate = fit_decay_rate(p.r, p.val, 0.45 * rmax, 0.8 * rmax);
    return p;
}

std::string profile_cache_name(const char* which, int dim, const RadialMeshConfig& cfg) {
    // FNV-1a over the mesh parameters; version suffix in the name keeps the
    // byte format fixed
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    mix(std::uint64_t(dim));
    mix(std::uint64_t(cfg.n));
    std::uint64_t bits;
    std::memcpy(&bits, &cfg.rmax, 8);
    mix(bits);
    std::memcpy(&bits, &cfg.grading, 8);
    mix(bits);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s_d%d_%016llx_v1.bin", which, dim,
                  static_cast<unsigned long long>(h));
    return buf;
}

RadialProfile ground_state_cached(int dim, const RadialMeshConfig& cfg_in,
                                  const std::string& cache_dir) {
    const RadialMeshConfig cfg = resolve_mesh(dim, cfg_in);
    std::string path;
    if (!cache_dir.empty()) {
        std::filesystem::create_directories(cache_dir);
        path = cache_dir + "/" + profile_cache_name("q", dim, cfg);
        if (auto p = load_profile_cache(path); p && p->dim == dim) return *p;
    }
    RadialProfile q = solve_ground_state(dim, cfg);
    if (!path.empty()) save_profile_cache(path, q);
    return q;
}

RadialProfile rho_cached(const RadialProfile& Q, const RadialMeshConfig& cfg_in,
                         const std::string& cache_dir) {
    const RadialMeshConfig cfg = resolve_mesh(Q.dim, cfg_in);
    std::string path;
    if (!cache_dir.empty()) {
        std::filesystem::create_directories(cache_dir);
        path = cache_dir + "/" + profile_cache_name("rho", Q.dim, cfg);
        if (auto p = load_profile_cache(path); p && p->dim == Q.dim) return *p;
    }
    RadialProfile rho = solve_rho(Q);
    if (!path.empty()) save_profile_cache(path, rho);
    return rho;
}

} // namespace mbnls
