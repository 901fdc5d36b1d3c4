#include "grid.hpp"

#include "errors.hpp"
#include "fftwrap.hpp"

#include <cmath>
#include <cstring>

namespace mbnls {

namespace {
bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }
} // namespace

GridPtr make_grid(int dim, double extent, int points) {
    if (dim != 1 && dim != 2)
        throw ValidationError("make_grid: dim must be 1 or 2");
    if (!(extent > 0.0))
        throw ValidationError("make_grid: extent must be positive");
    if (points < 8 || !power_of_two(points))
        throw ValidationError("make_grid: points must be a power of two >= 8");

    auto g = std::make_shared<Grid>();
    g->dim = dim;
    g->extent = extent;
    g->points = points;
    g->spacing = 2.0 * extent / points;
    g->node.resize(points);
    g->wave.resize(points);
    g->wave_d.resize(points);
    const double k1 = M_PI / extent; // fundamental wavenumber for period 2L
    for (int j = 0; j < points; ++j) {
        g->node[j] = g->spacing * j - extent;
        int m = j <= points / 2 ? j : j - points;
        g->wave[j] = k1 * m;
        g->wave_d[j] = (j == points / 2) ? 0.0 : k1 * m;
    }
    return g;
}

bool Field::finite() const {
    for (const cplx& z : v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

void require_same_grid(const Field& a, const Field& b) {
    if (a.grid == b.grid) return;
    if (!a.grid || !b.grid) throw ValidationError("field has no grid");
    if (a.grid->dim != b.grid->dim || a.grid->points != b.grid->points ||
        a.grid->extent != b.grid->extent)
        throw ValidationError("grid mismatch between fields");
}

Field synthesize(const GridPtr& g, const std::function<cplx(double, double)>& fn) {
    Field f(g);
    const int n = g->points;
    if (g->dim == 1) {
        for (int j = 0; j < n; ++j) f.v[j] = fn(g->node[j], 0.0);
    } else {
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy)
                f.v[g->index(ix, iy)] = fn(g->node[ix], g->node[iy]);
    }
    return f;
}

void to_spectral(Field& f) { fft_forward(f.grid->dim, f.grid->points, f.v.data()); }
void to_physical(Field& f) { fft_inverse(f.grid->dim, f.grid->points, f.v.data()); }

Field laplacian(const Field& f) {
    const Grid& g = *f.grid;
    Field out = f;
    to_spectral(out);
    const int n = g.points;
    if (g.dim == 1) {
        for (int j = 0; j < n; ++j) out.v[j] *= -g.wave[j] * g.wave[j];
    } else {
        for (int ix = 0; ix < n; ++ix) {
            double kx2 = g.wave[ix] * g.wave[ix];
            for (int iy = 0; iy < n; ++iy)
                out.v[g.index(ix, iy)] *= -(kx2 + g.wave[iy] * g.wave[iy]);
        }
    }
    to_physical(out);
    return out;
}

Field gradient(const Field& f, int axis) {
    const Grid& g = *f.grid;
    if (axis < 0 || axis >= g.dim) throw ValidationError("gradient: bad axis");
    Field out = f;
    to_spectral(out);
    const int n = g.points;
    const cplx I(0.0, 1.0);
    if (g.dim == 1) {
        for (int j = 0; j < n; ++j) out.v[j] *= I * g.wave_d[j];
    } else {
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy) {
                double k = axis == 0 ? g.wave_d[ix] : g.wave_d[iy];
                out.v[g.index(ix, iy)] *= I * k;
            }
    }
    to_physical(out);
    return out;
}

cplx inner(const Field& f, const Field& g) {
    require_same_grid(f, g);
    cplx acc(0.0, 0.0);
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) acc += f.v[i] * std::conj(g.v[i]);
    double hd = std::pow(f.grid->spacing, f.grid->dim);
    return acc * hd;
}

double norm_l2(const Field& f) {
    double acc = 0.0;
    for (const cplx& z : f.v) acc += std::norm(z);
    return std::sqrt(acc * std::pow(f.grid->spacing, f.grid->dim));
}

double norm_h1semi(const Field& f) {
    // Parseval on the derivative multipliers; one forward transform.
    const Grid& g = *f.grid;
    Field s = f;
    to_spectral(s);
    const int n = g.points;
    double acc = 0.0;
    if (g.dim == 1) {
        for (int j = 0; j < n; ++j) acc += g.wave[j] * g.wave[j] * std::norm(s.v[j]);
        acc /= n;
    } else {
        for (int ix = 0; ix < n; ++ix) {
            double kx2 = g.wave[ix] * g.wave[ix];
            for (int iy = 0; iy < n; ++iy)
                acc += (kx2 + g.wave[iy] * g.wave[iy]) * std::norm(s.v[g.index(ix, iy)]);
        }
        acc /= double(n) * n;
    }
    return std::sqrt(acc * std::pow(g.spacing, g.dim));
}

double norm_sigma_weight(const Field& f) {
    const Grid& g = *f.grid;
    const int n = g.points;
    double acc = 0.0;
    if (g.dim == 1) {
        for (int j = 0; j < n; ++j) acc += g.node[j] * g.node[j] * std::norm(f.v[j]);
    } else {
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy)
                acc += (g.node[ix] * g.node[ix] + g.node[iy] * g.node[iy]) *
                       std::norm(f.v[g.index(ix, iy)]);
    }
    return std::sqrt(acc * std::pow(g.spacing, g.dim));
}

double norm_lp(const Field& f, double p) {
    double acc = 0.0;
    for (const cplx& z : f.v) acc += std::pow(std::abs(z), p);
    return std::pow(acc * std::pow(f.grid->spacing, f.grid->dim), 1.0 / p);
}

double norm_linf(const Field& f) {
    double m = 0.0;
    for (const cplx& z : f.v) m = std::max(m, std::abs(z));
    return m;
}

Norms norms(const Field& f, const std::vector<double>& pvals) {
    Norms out;
    out.l2 = norm_l2(f);
    out.h1semi = norm_h1semi(f);
    out.sigma_weight = norm_sigma_weight(f);
    for (double p : pvals) out.lp.push_back(norm_lp(f, p));
    return out;
}

Field sample_affine(const Field& f, double scale, const Vec2& center,
                    std::size_t* out_escaped) {
    const Grid& g = *f.grid;
    const int n = g.points;
    const double L = g.extent;
    Field spec = f;
    to_spectral(spec);

    std::size_t escaped = 0;
    Field out(f.grid);

    // Per-axis target coordinates and in-box mask.
    auto axis_targets = [&](int axis) {
        std::vector<double> t(n);
        for (int j = 0; j < n; ++j) t[j] = center[axis] + scale * g.node[j];
        return t;
    };

    if (g.dim == 1) {
        std::vector<double> tx = axis_targets(0);
        const double norm = 1.0 / n;
        for (int j = 0; j < n; ++j) {
            if (tx[j] < -L || tx[j] >= L) {
                ++escaped;
                out.v[j] = 0.0;
                continue;
            }
            cplx acc(0.0, 0.0);
            for (int m = 0; m < n; ++m) {
                double k = g.wave_d[m];
                // exp(i k (x + L)) matches the DFT convention with node index phase
                acc += spec.v[m] * std::polar(1.0, k * (tx[j] + L));
            }
            out.v[j] = acc * norm;
        }
    } else {
        // Separable evaluation: E_x * F * E_y^T with per-axis phase matrices.
        std::vector<double> tx = axis_targets(0), ty = axis_targets(1);
        std::vector<char> okx(n), oky(n);
        for (int j = 0; j < n; ++j) okx[j] = (tx[j] >= -L && tx[j] < L);
        for (int j = 0; j < n; ++j) oky[j] = (ty[j] >= -L && ty[j] < L);

        std::vector<cplx> ex(std::size_t(n) * n), ey(std::size_t(n) * n);
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) {
                ex[std::size_t(j) * n + m] = std::polar(1.0, g.wave_d[m] * (tx[j] + L));
                ey[std::size_t(j) * n + m] = std::polar(1.0, g.wave_d[m] * (ty[j] + L));
            }
        // tmp[m][jy] = sum_my F[m][my] ey[jy][my]
        std::vector<cplx> tmp(std::size_t(n) * n, cplx(0, 0));
        for (int m = 0; m < n; ++m) {
            const cplx* frow = &spec.v[g.index(m, 0)];
            for (int jy = 0; jy < n; ++jy) {
                const cplx* eyrow = &ey[std::size_t(jy) * n];
                cplx acc(0.0, 0.0);
                for (int my = 0; my < n; ++my) acc += frow[my] * eyrow[my];
                tmp[std::size_t(m) * n + jy] = acc;
            }
        }
        const double norm = 1.0 / (double(n) * n);
        for (int jx = 0; jx < n; ++jx)
            for (int jy = 0; jy < n; ++jy) {
                if (!okx[jx] || !oky[jy]) {
                    ++escaped;
                    continue;
                }
                cplx acc(0.0, 0.0);
                for (int m = 0; m < n; ++m)
                    acc += ex[std::size_t(jx) * n + m] * tmp[std::size_t(m) * n + jy];
                out.v[g.index(jx, jy)] = acc * norm;
            }
    }
    if (out_escaped) *out_escaped = escaped;
    return out;
}

} // namespace mbnls
