#ifndef MBNLS_NOISE_HPP
#define MBNLS_NOISE_HPP

#include "grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mbnls {

// Dense polynomial in one or two variables (expanded monomial coefficients).
struct Poly {
    int dim = 1;
    int w = 1;                     // row width (degree + 1)
    std::vector<double> c{1.0};    // 1D: c[i] x^i; 2D: c[i*w+j] x^i y^j

    double eval(double x, double y = 0.0) const;
    Poly deriv(int axis) const;
    Poly mul(const Poly& other) const;
    Poly scaled(double f) const;
    Poly plus(const Poly& other) const;
};

// Weight in factored form:
//   phi(x) = [prod_j base_j(x)^{p_j}] * pref(x) * exp(-|x|^2 / s^2).
// The anchor factors are kept factored through differentiation, so the
// high-order zeros at the blow-up points evaluate exactly (no cancellation),
// which the flatness checks and the lambda-ball ladder rely on.
struct PolyGauss {
    int dim = 1;
    double s = 1.0; // envelope scale
    struct Factor {
        Poly base;
        int power = 1;
    };
    std::vector<Factor> factors;
    Poly pref;

    double eval(double x, double y = 0.0) const;
    PolyGauss deriv(int axis) const;
    PolyGauss scaled(double f) const;
};

// Weight family satisfying (A1): a factor of order nu_star+1 at every anchor
// forces all derivatives up to nu_star to vanish there; the Gaussian envelope
// gives (A0). Modes k differ by an extra (x1/s)^k factor. sup-normalized to
// `amplitude` over the box.
struct FlatWeightConfig {
    int nu_star = 5;
    double amplitude = 0.01;
    double envelope = 2.5;     // Gaussian scale s_e
    double factor_scale = 4.0; // anchor-factor normalization s_f
    int modes = 1;
};
struct FlatWeights {
    std::vector<PolyGauss> phi;
    int nu_star = 5;
    bool below_hypothesis = false; // nu_star < 5: outside the multi-bubble regime
};
FlatWeights make_flat_weights(int dim, const std::vector<Vec2>& anchors,
                              const FlatWeightConfig& cfg, double box_extent);

// Seeded Brownian paths on a uniform mesh, linear interpolation in between.
// Gaussian increments via Box-Muller on raw mt19937_64 output (bitwise
// reproducible per seed across platforms).
struct BrownianPaths {
    std::uint64_t seed = 0;
    double dt = 0.0, t_max = 0.0;
    int modes = 0;
    std::vector<double> b; // (nsteps+1) x modes, row-major in time

    double eval(int mode, double t) const;
    int steps() const { return modes > 0 ? int(b.size()) / modes - 1 : 0; }
};
BrownianPaths sample_brownian(std::uint64_t seed, double t_max, double dt_noise,
                              int modes);

// Spatial weights + paths + per-grid derivative caches. Immutable after
// construction; safe for concurrent reads.
struct NoiseModel {
    int dim = 1;
    GridPtr grid;
    FlatWeights weights;
    BrownianPaths paths;
    std::vector<Vec2> anchors;

    // per-mode cached arrays on the grid
    std::vector<std::vector<double>> phi_g;           // [mode][node]
    std::vector<std::vector<double>> dphi_g[2];       // per axis
    std::vector<std::vector<double>> lap_g;
    std::vector<std::vector<double>> hess_g[3];       // xx, xy, yy (xy unused in 1D)
    std::vector<std::vector<double>> bilap_g;

    std::size_t modes() const { return weights.phi.size(); }
    bool enabled() const { return modes() > 0; }
};

NoiseModel make_noise_model(const GridPtr& g, const std::vector<Vec2>& anchors,
                            const FlatWeightConfig& cfg, std::uint64_t seed,
                            double dt_noise, double t_max);

// b = 2 grad W (purely imaginary) and c = sum_j (d_j W)^2 + lap W at time t.
struct Coefficients {
    std::vector<Field> b; // per axis
    Field c;
};
Coefficients coefficients_at(const NoiseModel& model, double t);

// Real working arrays for the stepper: beta = 2 sum_k grad(phi_k) B_k,
// c_re = -sum_j (sum_k d_j phi_k B_k)^2, c_im = sum_k lap(phi_k) B_k.
void eval_coefficient_arrays(const NoiseModel& model, double t,
                             std::vector<double> beta[2],
                             std::vector<double>& c_re,
                             std::vector<double>& c_im);

enum class GaugeDirection { ToU, ToX };
Field gauge(const Field& f, const NoiseModel& model, double t, GaugeDirection dir);

// Max over anchors and multi-indices |nu| <= nu_star of |d^nu phi_k(x_j)|.
double flatness_residual(const NoiseModel& model);
// Max over the box boundary of <x>^2 |d^nu phi_k|, |nu| <= 4.
double asymptotic_flatness_residual(const NoiseModel& model);

void dump_paths_csv(const BrownianPaths& paths, const std::string& path);

} // namespace mbnls

#endif
