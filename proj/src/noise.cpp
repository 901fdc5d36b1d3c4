#include "noise.hpp"

#include "errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace mbnls {

double Poly::eval(double x, double y) const {
    double p = 0.0;
    if (dim == 1) {
        for (int i = w - 1; i >= 0; --i) p = p * x + c[i];
        return p;
    }
    for (int i = w - 1; i >= 0; --i) {
        double row = 0.0;
        for (int j = w - 1; j >= 0; --j) row = row * y + c[std::size_t(i) * w + j];
        p = p * x + row;
    }
    return p;
}

Poly Poly::deriv(int axis) const {
    Poly out;
    out.dim = dim;
    out.w = std::max(1, w - 1);
    if (dim == 1) {
        out.c.assign(out.w, 0.0);
        for (int i = 1; i < w; ++i) out.c[i - 1] += i * c[i];
        return out;
    }
    out.w = w; // keep the square layout; high row/col stays zero
    out.c.assign(std::size_t(out.w) * out.w, 0.0);
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
            double v = c[std::size_t(i) * w + j];
            if (v == 0.0) continue;
            if (axis == 0 && i >= 1) out.c[std::size_t(i - 1) * out.w + j] += i * v;
            if (axis == 1 && j >= 1) out.c[std::size_t(i) * out.w + (j - 1)] += j * v;
        }
    return out;
}

Poly Poly::mul(const Poly& other) const {
    Poly out;
    out.dim = dim;
    out.w = w + other.w - 1;
    if (dim == 1) {
        out.c.assign(out.w, 0.0);
        for (int i = 0; i < w; ++i)
            for (int j = 0; j < other.w; ++j) out.c[i + j] += c[i] * other.c[j];
        return out;
    }
    out.c.assign(std::size_t(out.w) * out.w, 0.0);
    for (int i1 = 0; i1 < w; ++i1)
        for (int j1 = 0; j1 < w; ++j1) {
            double va = c[std::size_t(i1) * w + j1];
            if (va == 0.0) continue;
            for (int i2 = 0; i2 < other.w; ++i2)
                for (int j2 = 0; j2 < other.w; ++j2) {
                    double vb = other.c[std::size_t(i2) * other.w + j2];
                    if (vb == 0.0) continue;
                    out.c[std::size_t(i1 + i2) * out.w + (j1 + j2)] += va * vb;
                }
        }
    return out;
}

Poly Poly::scaled(double f) const {
    Poly out = *this;
    for (double& v : out.c) v *= f;
    return out;
}

Poly Poly::plus(const Poly& other) const {
    Poly out;
    out.dim = dim;
    out.w = std::max(w, other.w);
    if (dim == 1) {
        out.c.assign(out.w, 0.0);
        for (int i = 0; i < w; ++i) out.c[i] += c[i];
        for (int i = 0; i < other.w; ++i) out.c[i] += other.c[i];
        return out;
    }
    out.c.assign(std::size_t(out.w) * out.w, 0.0);
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j)
            out.c[std::size_t(i) * out.w + j] += c[std::size_t(i) * w + j];
    for (int i = 0; i < other.w; ++i)
        for (int j = 0; j < other.w; ++j)
            out.c[std::size_t(i) * out.w + j] += other.c[std::size_t(i) * other.w + j];
    return out;
}

double PolyGauss::eval(double x, double y) const {
    double v = pref.eval(x, y);
    for (const Factor& f : factors) {
        double b = f.base.eval(x, y);
        for (int k = 0; k < f.power; ++k) v *= b;
    }
    double r2 = dim == 1 ? x * x : x * x + y * y;
    return v * std::exp(-r2 / (s * s));
}

PolyGauss PolyGauss::deriv(int axis) const {
    // d/dx [prod base_j^{p_j} pref E] =
    //   prod base_j^{p_j-1} * [ sum_j p_j base_j' (prod_{l!=j} base_l) pref
    //                           + (prod base_l)(pref' - (2 x_axis/s^2) pref) ] E
    PolyGauss out;
    out.dim = dim;
    out.s = s;
    for (const Factor& f : factors)
        if (f.power > 1) out.factors.push_back({f.base, f.power - 1});

    // envelope derivative term: pref' - (2 x_axis / s^2) pref
    Poly mono; // x_axis
    mono.dim = dim;
    if (dim == 1) {
        mono.w = 2;
        mono.c = {0.0, 1.0};
    } else {
        mono.w = 2;
        mono.c.assign(4, 0.0);
        if (axis == 0)
            mono.c[1 * 2 + 0] = 1.0;
        else
            mono.c[0 * 2 + 1] = 1.0;
    }
    Poly env_term = pref.deriv(axis).plus(mono.mul(pref).scaled(-2.0 / (s * s)));

    Poly bracket = env_term;
    for (const Factor& f : factors) bracket = bracket.mul(f.base);

    for (std::size_t j = 0; j < factors.size(); ++j) {
        Poly term = factors[j].base.deriv(axis).scaled(double(factors[j].power));
        term = term.mul(pref);
        for (std::size_t l = 0; l < factors.size(); ++l)
            if (l != j) term = term.mul(factors[l].base);
        bracket = bracket.plus(term);
    }
    out.pref = bracket;
    return out;
}

PolyGauss PolyGauss::scaled(double f) const {
    PolyGauss out = *this;
    out.pref = out.pref.scaled(f);
    return out;
}

FlatWeights make_flat_weights(int dim, const std::vector<Vec2>& anchors,
                              const FlatWeightConfig& cfg, double box_extent) {
    if (anchors.empty()) throw ValidationError("flat weights need anchors");
    for (std::size_t i = 0; i < anchors.size(); ++i)
        for (std::size_t j = i + 1; j < anchors.size(); ++j)
            if (anchors[i] == anchors[j])
                throw ValidationError("flat weights: anchors must be distinct");

    FlatWeights out;
    out.nu_star = cfg.nu_star;
    out.below_hypothesis = cfg.nu_star < 5;

    const double sf = cfg.factor_scale;
    PolyGauss base;
    base.dim = dim;
    base.s = cfg.envelope;
    base.pref.dim = dim;
    if (dim == 1) {
        for (const Vec2& a : anchors) {
            Poly lin; // (x - a)/sf
            lin.dim = 1;
            lin.w = 2;
            lin.c = {-a[0] / sf, 1.0 / sf};
            base.factors.push_back({lin, cfg.nu_star + 1});
        }
    } else {
        base.pref.w = 1;
        base.pref.c = {1.0};
        int m = (cfg.nu_star + 2) / 2; // 2m >= nu_star + 1
        for (const Vec2& a : anchors) {
            Poly quad; // ((x-ax)^2 + (y-ay)^2)/sf^2
            quad.dim = 2;
            quad.w = 3;
            quad.c.assign(9, 0.0);
            double inv = 1.0 / (sf * sf);
            quad.c[0 * 3 + 0] = (a[0] * a[0] + a[1] * a[1]) * inv;
            quad.c[1 * 3 + 0] = -2.0 * a[0] * inv;
            quad.c[2 * 3 + 0] = inv;
            quad.c[0 * 3 + 1] = -2.0 * a[1] * inv;
            quad.c[0 * 3 + 2] = inv;
            base.factors.push_back({quad, m});
        }
    }

    for (int mode = 0; mode < cfg.modes; ++mode) {
        PolyGauss w = base;
        if (mode > 0) {
            Poly mono; // (x/s_e)^mode
            mono.dim = dim;
            if (dim == 1) {
                mono.w = mode + 1;
                mono.c.assign(mono.w, 0.0);
                mono.c[mode] = std::pow(cfg.envelope, -mode);
            } else {
                mono.w = mode + 1;
                mono.c.assign(std::size_t(mono.w) * mono.w, 0.0);
                mono.c[std::size_t(mode) * mono.w + 0] = std::pow(cfg.envelope, -mode);
            }
            w.pref = w.pref.mul(mono);
        }
        // sup-normalize over the box on a fine scan
        double sup = 0.0;
        const int scan = dim == 1 ? 8192 : 512;
        for (int i = 0; i < scan; ++i) {
            double x = -box_extent + 2.0 * box_extent * i / scan;
            if (dim == 1) {
                sup = std::max(sup, std::abs(w.eval(x)));
            } else {
                for (int j = 0; j < scan; ++j) {
                    double y = -box_extent + 2.0 * box_extent * j / scan;
                    sup = std::max(sup, std::abs(w.eval(x, y)));
                }
            }
        }
        if (sup <= 0.0) throw ValidationError("flat weight degenerated to zero");
        out.phi.push_back(w.scaled(cfg.amplitude / sup));
    }
    return out;
}

BrownianPaths sample_brownian(std::uint64_t seed, double t_max, double dt_noise,
                              int modes) {
    if (!(dt_noise > 0.0)) throw ValidationError("sample_brownian: dt_noise > 0 required");
    BrownianPaths p;
    p.seed = seed;
    p.dt = dt_noise;
    p.t_max = t_max;
    p.modes = modes;
    int nsteps = int(std::ceil(t_max / dt_noise)) + 1;
    p.b.assign(std::size_t(nsteps + 1) * modes, 0.0);

    std::mt19937_64 rng(seed);
    auto uniform = [&]() {
        return (rng() >> 11) * (1.0 / 9007199254740992.0) + 1e-300;
    };
    double sqdt = std::sqrt(dt_noise);
    for (int s = 1; s <= nsteps; ++s)
        for (int k = 0; k < modes; ++k) {
            double u1 = uniform(), u2 = uniform();
            double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
            p.b[std::size_t(s) * modes + k] = p.b[std::size_t(s - 1) * modes + k] + sqdt * z;
        }
    return p;
}

double BrownianPaths::eval(int mode, double t) const {
    if (t < 0.0 || t > t_max + dt)
        throw ValidationError("Brownian path evaluated outside [0, t_max]");
    double s = t / dt;
    int i0 = std::min(int(s), steps() - 1);
    double frac = s - i0;
    double b0 = b[std::size_t(i0) * modes + mode];
    double b1 = b[std::size_t(i0 + 1) * modes + mode];
    return b0 + frac * (b1 - b0);
}

NoiseModel make_noise_model(const GridPtr& g, const std::vector<Vec2>& anchors,
                            const FlatWeightConfig& cfg, std::uint64_t seed,
                            double dt_noise, double t_max) {
    NoiseModel m;
    m.dim = g->dim;
    m.grid = g;
    m.anchors = anchors;
    if (cfg.modes <= 0 || cfg.amplitude == 0.0) return m; // disabled model
    m.weights = make_flat_weights(g->dim, anchors, cfg, g->extent);
    double boundary = asymptotic_flatness_residual(m);
    if (boundary > 1e-6) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "noise weights fail the boundary decay check (%.3g > 1e-6): "
                      "shrink the envelope or enlarge the box",
                      boundary);
        throw ValidationError(buf);
    }
    m.paths = sample_brownian(seed, t_max, dt_noise, cfg.modes);

    const std::size_t nn = g->size();
    const int np = g->points;
    auto fill = [&](const PolyGauss& p, std::vector<double>& dst) {
        dst.resize(nn);
        if (g->dim == 1) {
            for (int j = 0; j < np; ++j) dst[j] = p.eval(g->node[j]);
        } else {
            for (int ix = 0; ix < np; ++ix)
                for (int iy = 0; iy < np; ++iy)
                    dst[g->index(ix, iy)] = p.eval(g->node[ix], g->node[iy]);
        }
    };
    for (const PolyGauss& phi : m.weights.phi) {
        PolyGauss dx = phi.deriv(0);
        PolyGauss dxx = dx.deriv(0);
        m.phi_g.emplace_back();
        fill(phi, m.phi_g.back());
        m.dphi_g[0].emplace_back();
        fill(dx, m.dphi_g[0].back());
        m.hess_g[0].emplace_back();
        fill(dxx, m.hess_g[0].back());
        if (g->dim == 1) {
            m.lap_g.emplace_back();
            fill(dxx, m.lap_g.back());
            m.bilap_g.emplace_back();
            fill(dxx.deriv(0).deriv(0), m.bilap_g.back());
        } else {
            PolyGauss dy = phi.deriv(1);
            PolyGauss dyy = dy.deriv(1);
            PolyGauss dxy = dx.deriv(1);
            m.dphi_g[1].emplace_back();
            fill(dy, m.dphi_g[1].back());
            m.hess_g[1].emplace_back();
            fill(dxy, m.hess_g[1].back());
            m.hess_g[2].emplace_back();
            fill(dyy, m.hess_g[2].back());
            m.lap_g.emplace_back();
            m.lap_g.back().resize(nn);
            std::vector<double> lxx(nn), lyy(nn);
            fill(dxx, lxx);
            fill(dyy, lyy);
            for (std::size_t i = 0; i < nn; ++i) m.lap_g.back()[i] = lxx[i] + lyy[i];
            // lap^2 = dxxxx + 2 dxxyy + dyyyy
            std::vector<double> axxxx(nn), axxyy(nn), ayyyy(nn);
            fill(dxx.deriv(0).deriv(0), axxxx);
            fill(dxx.deriv(1).deriv(1), axxyy);
            fill(dyy.deriv(1).deriv(1), ayyyy);
            m.bilap_g.emplace_back();
            m.bilap_g.back().resize(nn);
            for (std::size_t i = 0; i < nn; ++i)
                m.bilap_g.back()[i] = axxxx[i] + 2.0 * axxyy[i] + ayyyy[i];
        }
    }
    return m;
}

void eval_coefficient_arrays(const NoiseModel& model, double t,
                             std::vector<double> beta[2],
                             std::vector<double>& c_re,
                             std::vector<double>& c_im) {
    const std::size_t nn = model.grid->size();
    for (int ax = 0; ax < model.dim; ++ax) beta[ax].assign(nn, 0.0);
    c_re.assign(nn, 0.0);
    c_im.assign(nn, 0.0);
    if (!model.enabled()) return;
    for (std::size_t k = 0; k < model.modes(); ++k) {
        double bk = model.paths.eval(int(k), t);
        if (bk == 0.0) continue;
        for (int ax = 0; ax < model.dim; ++ax) {
            const std::vector<double>& d = model.dphi_g[ax][k];
            for (std::size_t i = 0; i < nn; ++i) beta[ax][i] += 2.0 * bk * d[i];
        }
        const std::vector<double>& lap = model.lap_g[k];
        for (std::size_t i = 0; i < nn; ++i) c_im[i] += bk * lap[i];
    }
    // c_re = -sum_ax (sum_k d_ax phi_k B_k)^2 = -sum_ax (beta_ax/2)^2
    for (int ax = 0; ax < model.dim; ++ax)
        for (std::size_t i = 0; i < nn; ++i)
            c_re[i] -= 0.25 * beta[ax][i] * beta[ax][i];
}

Coefficients coefficients_at(const NoiseModel& model, double t) {
    std::vector<double> beta[2], c_re, c_im;
    eval_coefficient_arrays(model, t, beta, c_re, c_im);
    Coefficients out;
    out.c = Field(model.grid);
    for (int ax = 0; ax < model.dim; ++ax) {
        Field b(model.grid);
        for (std::size_t i = 0; i < b.size(); ++i) b.v[i] = cplx(0.0, beta[ax][i]);
        out.b.push_back(std::move(b));
    }
    for (std::size_t i = 0; i < out.c.size(); ++i)
        out.c.v[i] = cplx(c_re[i], c_im[i]);
    return out;
}

Field gauge(const Field& f, const NoiseModel& model, double t, GaugeDirection dir) {
    Field out = f;
    if (!model.enabled()) return out;
    if (f.size() != model.grid->size())
        throw ValidationError("gauge: field not on the model grid");
    const double sign = dir == GaugeDirection::ToU ? -1.0 : 1.0;
    const std::size_t nn = f.size();
    std::vector<double> phase(nn, 0.0);
    for (std::size_t k = 0; k < model.modes(); ++k) {
        double bk = model.paths.eval(int(k), t);
        const std::vector<double>& p = model.phi_g[k];
        for (std::size_t i = 0; i < nn; ++i) phase[i] += bk * p[i];
    }
    for (std::size_t i = 0; i < nn; ++i)
        out.v[i] *= std::polar(1.0, sign * phase[i]);
    return out;
}

double flatness_residual(const NoiseModel& model) {
    double worst = 0.0;
    const int nu_star = model.weights.nu_star;
    for (const PolyGauss& phi : model.weights.phi) {
        PolyGauss dx = phi;
        for (int ox = 0; ox <= nu_star; ++ox) {
            PolyGauss dxy = dx;
            for (int oy = 0; ox + oy <= nu_star; ++oy) {
                for (const Vec2& a : model.anchors)
                    worst = std::max(worst, std::abs(dxy.eval(a[0], a[1])));
                if (model.dim == 1) break;
                dxy = dxy.deriv(1);
            }
            dx = dx.deriv(0);
        }
    }
    return worst;
}

double asymptotic_flatness_residual(const NoiseModel& model) {
    const double L = model.grid->extent;
    double worst = 0.0;
    auto weight = [&](double x, double y) { return 1.0 + x * x + y * y; };
    for (const PolyGauss& phi : model.weights.phi) {
        std::vector<PolyGauss> derivs;
        PolyGauss dx = phi;
        for (int ox = 0; ox <= 4; ++ox) {
            PolyGauss dxy = dx;
            for (int oy = 0; ox + oy <= 4; ++oy) {
                if (ox + oy > 0) derivs.push_back(dxy);
                if (model.dim == 1) break;
                dxy = dxy.deriv(1);
            }
            dx = dx.deriv(0);
        }
        const int scan = 256;
        for (const PolyGauss& d : derivs) {
            if (model.dim == 1) {
                worst = std::max(worst, weight(L, 0) * std::abs(d.eval(-L)));
                worst = std::max(worst, weight(L, 0) * std::abs(d.eval(L)));
            } else {
                for (int i = 0; i <= scan; ++i) {
                    double c = -L + 2.0 * L * i / scan;
                    for (double e : {-L, L}) {
                        worst = std::max(worst, weight(c, e) * std::abs(d.eval(c, e)));
                        worst = std::max(worst, weight(e, c) * std::abs(d.eval(e, c)));
                    }
                }
            }
        }
    }
    return worst;
}

void dump_paths_csv(const BrownianPaths& paths, const std::string& path) {
    std::ofstream f(path);
    f << "t";
    for (int k = 0; k < paths.modes; ++k) f << ",B_" << (k + 1);
    f << "\n";
    char buf[32];
    for (int s = 0; s <= paths.steps(); ++s) {
        std::snprintf(buf, sizeof buf, "%.17g", s * paths.dt);
        f << buf;
        for (int k = 0; k < paths.modes; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", paths.b[std::size_t(s) * paths.modes + k]);
            f << "," << buf;
        }
        f << "\n";
    }
}

} // namespace mbnls
