#include <doctest.h>

#include "diagnostics.hpp"
#include "errors.hpp"
#include "noise.hpp"

#include <cmath>

using namespace mbnls;

namespace {
NoiseModel test_model(int modes = 2, int nu_star = 5, double amplitude = 0.01,
                      std::uint64_t seed = 42) {
    GridPtr g = make_grid(1, 16.0, 1024);
    FlatWeightConfig cfg;
    cfg.modes = modes;
    cfg.nu_star = nu_star;
    cfg.amplitude = amplitude;
    return make_noise_model(g, {{-4.0, 0.0}, {4.0, 0.0}}, cfg, seed, 2.5e-5, 2.0);
}
} // namespace

TEST_CASE("flat weights: (A1) flatness at the anchors") {
    NoiseModel m = test_model();
    CHECK(flatness_residual(m) <= 1e-10);
    CHECK_FALSE(m.weights.below_hypothesis);

    // first/second derivative cross-check by central differences at an anchor
    const PolyGauss& phi = m.weights.phi[0];
    const double h = 1e-3;
    for (double a : {-4.0, 4.0}) {
        double fd1 = (phi.eval(a + h) - phi.eval(a - h)) / (2 * h);
        double fd2 = (phi.eval(a + h) - 2 * phi.eval(a) + phi.eval(a - h)) / (h * h);
        CHECK(std::abs(fd1) < 1e-9);
        CHECK(std::abs(fd2) < 1e-6);
    }
}

TEST_CASE("flat weights: anchors at -2 and 2 stay flat to order 5") {
    GridPtr g = make_grid(1, 16.0, 1024);
    FlatWeightConfig cfg;
    cfg.modes = 1;
    cfg.nu_star = 5;
    NoiseModel m =
        make_noise_model(g, {{-2.0, 0.0}, {2.0, 0.0}}, cfg, 1, 2.5e-5, 1.0);
    CHECK(flatness_residual(m) <= 1e-10);
}

TEST_CASE("flat weights: nu_star below the hypothesis flags a warning") {
    NoiseModel m = test_model(1, 4);
    CHECK(m.weights.below_hypothesis);
    CHECK(m.weights.nu_star == 4);
}

TEST_CASE("flat weights: (A0) asymptotic flatness at the box boundary") {
    NoiseModel m = test_model();
    CHECK(asymptotic_flatness_residual(m) <= 1e-6);
}

TEST_CASE("symbolic derivatives agree with finite differences") {
    NoiseModel m = test_model();
    const PolyGauss& phi = m.weights.phi[1];
    PolyGauss d1 = phi.deriv(0);
    const double h = 1e-5;
    for (double x : {-6.0, -1.5, 0.7, 5.0, 9.0}) {
        double fd = (phi.eval(x + h) - phi.eval(x - h)) / (2 * h);
        CHECK(std::abs(fd - d1.eval(x)) <= 1e-9);
    }
}

TEST_CASE("Brownian paths: determinism, B(0) = 0, Monte Carlo variance") {
    BrownianPaths a = sample_brownian(1234, 1.0, 1e-3, 3);
    BrownianPaths b = sample_brownian(1234, 1.0, 1e-3, 3);
    REQUIRE(a.b.size() == b.b.size());
    for (std::size_t i = 0; i < a.b.size(); ++i) CHECK(a.b[i] == b.b[i]);
    for (int k = 0; k < 3; ++k) CHECK(a.eval(k, 0.0) == 0.0);

    double var = 0.0;
    const int nsamp = 10000;
    for (int s = 0; s < nsamp; ++s) {
        BrownianPaths p = sample_brownian(100000 + s, 1.0, 1e-2, 1);
        double v = p.eval(0, 1.0);
        var += v * v;
    }
    var /= nsamp;
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));

    CHECK_THROWS_AS(sample_brownian(1, 1.0, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(a.eval(0, 5.0), ValidationError);
}

TEST_CASE("coefficients: t = 0 vanishes, single-mode closed form, Re b = 0") {
    NoiseModel m = test_model(1);
    Coefficients c0 = coefficients_at(m, 0.0);
    CHECK(norm_l2(c0.b[0]) == 0.0);
    CHECK(norm_l2(c0.c) == 0.0);

    double t = 0.37;
    double beta_k = m.paths.eval(0, t);
    Coefficients c = coefficients_at(m, t);
    const GridPtr& g = m.grid;
    PolyGauss dphi = m.weights.phi[0].deriv(0);
    PolyGauss lap = dphi.deriv(0);
    double sup_re = 0.0, sup_im = 0.0, sup_b = 0.0;
    for (std::size_t i = 0; i < c.c.size(); ++i) {
        double x = g->node[i];
        double dp = dphi.eval(x);
        sup_re = std::max(sup_re, std::abs(c.c.v[i].real() + beta_k * beta_k * dp * dp));
        sup_im = std::max(sup_im, std::abs(c.c.v[i].imag() - beta_k * lap.eval(x)));
        // b purely imaginary with Im b = 2 dphi B
        sup_b = std::max(sup_b, std::abs(c.b[0].v[i].real()));
        sup_b = std::max(sup_b, std::abs(c.b[0].v[i].imag() - 2.0 * beta_k * dp));
    }
    CHECK(sup_re <= 1e-14);
    CHECK(sup_im <= 1e-14);
    CHECK(sup_b <= 1e-14);
}

TEST_CASE("zero-amplitude model is disabled: b = c = 0") {
    NoiseModel m = test_model(2, 5, 0.0);
    CHECK_FALSE(m.enabled());
    std::vector<double> beta[2], cre, cim;
    eval_coefficient_arrays(m, 0.5, beta, cre, cim);
    for (double v : beta[0]) CHECK(v == 0.0);
    for (double v : cre) CHECK(v == 0.0);
    for (double v : cim) CHECK(v == 0.0);
}

TEST_CASE("gauge: round trip identity and L2 isometry") {
    NoiseModel m = test_model();
    GridPtr g = m.grid;
    Field f = synthesize(g, [](double x, double) {
        return cplx(std::exp(-x * x), 0.4 * std::exp(-0.5 * x * x));
    });
    double t = 0.8;
    Field x_form = gauge(f, m, t, GaugeDirection::ToX);
    CHECK(norm_l2(x_form) == doctest::Approx(norm_l2(f)).epsilon(1e-12));
    Field back = gauge(x_form, m, t, GaugeDirection::ToU);
    double sup = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        sup = std::max(sup, std::abs(back.v[i] - f.v[i]));
    CHECK(sup <= 1e-13);

    NoiseModel off = test_model(2, 5, 0.0);
    Field same = gauge(f, off, t, GaugeDirection::ToX);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(same.v[i] == f.v[i]);
}

TEST_CASE("flatness-order ladder: sup over a lambda-ball scales like lambda^{nu+1}") {
    NoiseModel m = test_model(1);
    const PolyGauss& phi = m.weights.phi[0];
    const double anchor = 4.0;
    std::vector<double> lx, ly;
    for (double lam = 1e-3; lam <= 1e-1 * 1.0001; lam *= std::pow(10.0, 0.25)) {
        double sup = 0.0;
        for (int i = -50; i <= 50; ++i)
            sup = std::max(sup, std::abs(phi.eval(anchor + lam * i / 50.0)));
        lx.push_back(std::log(lam));
        ly.push_back(std::log(sup));
    }
    LineFit fit = fit_line(lx, ly);
    CHECK(fit.b == doctest::Approx(6.0).epsilon(0.1 / 6.0)); // nu_star + 1
}

TEST_CASE("d=2 weights: flatness, asymptotic decay, coefficient caches") {
    GridPtr g = make_grid(2, 12.0, 64);
    FlatWeightConfig cfg;
    cfg.modes = 2;
    cfg.amplitude = 0.01;
    cfg.envelope = 1.8; // the default 2.5 cannot decay inside a 12-box
    NoiseModel m = make_noise_model(g, {{-3.0, 1.0}, {3.0, -1.0}}, cfg, 7, 2.5e-5, 1.0);
    CHECK(flatness_residual(m) <= 1e-10);
    CHECK(asymptotic_flatness_residual(m) <= 1e-6);

    // anchors too close to the boundary (equivalently: an envelope too wide
    // for the box) fail the construction-time decay check
    FlatWeightConfig wide = cfg;
    wide.envelope = 2.5;
    CHECK_THROWS_AS(
        make_noise_model(g, {{-3.0, 1.0}, {3.0, -1.0}}, wide, 7, 2.5e-5, 1.0),
        ValidationError);

    // symbolic vs finite-difference cross-check for both axes
    const PolyGauss& phi = m.weights.phi[0];
    PolyGauss dx = phi.deriv(0), dy = phi.deriv(1);
    const double h = 1e-5;
    for (double x : {-4.0, 0.5, 2.0})
        for (double y : {-1.5, 0.0, 3.0}) {
            double fdx = (phi.eval(x + h, y) - phi.eval(x - h, y)) / (2 * h);
            double fdy = (phi.eval(x, y + h) - phi.eval(x, y - h)) / (2 * h);
            CHECK(std::abs(fdx - dx.eval(x, y)) <= 1e-9);
            CHECK(std::abs(fdy - dy.eval(x, y)) <= 1e-9);
        }

    // coefficient identities on the grid caches at a frozen time
    double t = 0.4;
    Coefficients c = coefficients_at(m, t);
    REQUIRE(c.b.size() == 2);
    double worst = 0.0;
    for (std::size_t i = 0; i < c.c.size(); ++i) {
        // Re c = -sum_ax (Im b_ax / 2)^2
        double b0 = c.b[0].v[i].imag(), b1 = c.b[1].v[i].imag();
        worst = std::max(worst,
                         std::abs(c.c.v[i].real() + 0.25 * (b0 * b0 + b1 * b1)));
        worst = std::max(worst, std::abs(c.b[0].v[i].real()));
    }
    CHECK(worst <= 1e-15);

    // gauge is an isometry in d=2 as well
    Field f = synthesize(g, [](double x, double y) {
        return cplx(std::exp(-(x * x + y * y)), 0.3 * std::exp(-0.5 * x * x));
    });
    Field xf = gauge(f, m, t, GaugeDirection::ToX);
    CHECK(norm_l2(xf) == doctest::Approx(norm_l2(f)).epsilon(1e-12));
}
