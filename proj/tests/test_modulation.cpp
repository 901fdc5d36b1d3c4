#include <doctest.h>

#include "errors.hpp"
#include "evolution.hpp"
#include "ground_state.hpp"
#include "modulation.hpp"
#include "profiles.hpp"

#include <cmath>
#include <random>

using namespace mbnls;

namespace {
const RadialProfile& qm() {
    static RadialProfile q = solve_ground_state(1);
    return q;
}
const RadialProfile& rhom() {
    static RadialProfile r = solve_rho(qm());
    return r;
}
const RadialProfile& qm2() {
    static RadialProfile q = solve_ground_state(2);
    return q;
}
const RadialProfile& rhom2() {
    static RadialProfile r = solve_rho(qm2());
    return r;
}

BubbleSet two_bubbles(double lam = 1.0) {
    BubbleParams a, b;
    a.xc = {-4.0, 0.0};
    b.xc = {4.0, 0.0};
    BubbleSet set = make_bubble_set(1, {a, b}, 16.0);
    (void)lam;
    return set;
}
} // namespace

TEST_CASE("localizers: partition of unity, bounds, separation constant") {
    GridPtr g = make_grid(1, 16.0, 1024);
    BubbleSet set1 = make_bubble_set(1, {BubbleParams{}}, 16.0);
    Localizers l1 = make_localizers(set1, g);
    for (double v : l1.phi[0]) CHECK(v == 1.0);

    BubbleSet set = two_bubbles();
    CHECK(set.sigma == doctest::Approx(2.0 / 3.0));
    Localizers loc = make_localizers(set, g);

    double sup_dev = 0.0, min_v = 1.0, max_v = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
        double s = loc.phi[0][i] + loc.phi[1][i];
        sup_dev = std::max(sup_dev, std::abs(s - 1.0));
        for (std::size_t j = 0; j < 2; ++j) {
            min_v = std::min(min_v, loc.phi[j][i]);
            max_v = std::max(max_v, loc.phi[j][i]);
        }
    }
    CHECK(sup_dev <= 1e-12);
    CHECK(min_v >= 0.0);
    CHECK(max_v <= 1.0);

    // |grad Phi| <= C / sigma with the quintic transition's C = 15/32
    double worst_slope = 0.0;
    for (double z = 0.0; z < 8.0 * set.sigma; z += 1e-3)
        worst_slope = std::max(worst_slope, std::abs(localizer_slope(z, set.sigma)));
    CHECK(worst_slope <= 1.0 / set.sigma);

    // three bubbles telescope too
    BubbleParams c1, c2, c3;
    c1.xc = {-6.0, 0.0};
    c2.xc = {0.0, 0.0};
    c3.xc = {6.0, 0.0};
    BubbleSet set3 = make_bubble_set(1, {c1, c2, c3}, 16.0);
    Localizers loc3 = make_localizers(set3, g);
    sup_dev = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
        double s = loc3.phi[0][i] + loc3.phi[1][i] + loc3.phi[2][i];
        sup_dev = std::max(sup_dev, std::abs(s - 1.0));
    }
    CHECK(sup_dev <= 1e-12);
}

TEST_CASE("decompose: zero-remainder fixed point recovers exactly") {
    GridPtr g = make_grid(1, 16.0, 1024);
    std::vector<BubbleParams> truth(2);
    truth[0].lambda = 0.8;
    truth[0].alpha = {-4.0, 0.0};
    truth[0].beta = {0.05, 0.0};
    truth[0].gamma = 0.4;
    truth[0].theta = 0.7;
    truth[1].lambda = 0.6;
    truth[1].alpha = {4.0, 0.0};
    truth[1].beta = {-0.03, 0.0};
    truth[1].gamma = 0.3;
    truth[1].theta = -0.4;
    Field u = sum_profiles(truth, qm(), g);

    Decomposition dec = decompose(u, truth, qm(), rhom());
    CHECK(dec.converged);
    CHECK(dec.iterations <= 2);
    CHECK(norm_l2(dec.remainder) <= 1e-10);
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(dec.params[j].lambda - truth[j].lambda) <= 1e-12);
        CHECK(std::abs(dec.params[j].alpha[0] - truth[j].alpha[0]) <= 1e-12);
        CHECK(std::abs(dec.params[j].beta[0] - truth[j].beta[0]) <= 1e-12);
        CHECK(std::abs(dec.params[j].gamma - truth[j].gamma) <= 1e-12);
        CHECK(std::abs(dec.params[j].theta - truth[j].theta) <= 1e-12);
    }
}

TEST_CASE("decompose: perturbed guess recovers to 1e-9 with tight residuals") {
    GridPtr g = make_grid(1, 16.0, 1024);
    std::vector<BubbleParams> truth(2);
    truth[0].lambda = 0.8;
    truth[0].alpha = {-4.0, 0.0};
    truth[0].gamma = 0.35;
    truth[0].theta = 0.2;
    truth[1].lambda = 0.7;
    truth[1].alpha = {4.0, 0.0};
    truth[1].gamma = 0.25;
    truth[1].theta = 1.2;
    Field u = sum_profiles(truth, qm(), g);

    std::vector<BubbleParams> guess = truth;
    for (int j = 0; j < 2; ++j) {
        guess[j].lambda += 1e-2;
        guess[j].alpha[0] -= 1e-2;
        guess[j].beta[0] += 1e-2;
        guess[j].gamma -= 1e-2;
        guess[j].theta += 1e-2;
    }
    Decomposition dec = decompose(u, guess, qm(), rhom());
    CHECK(dec.converged);
    double tol = 1e-10 * norm_l2(u);
    for (double r : dec.residuals) CHECK(std::abs(r) <= tol);
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(dec.params[j].lambda - truth[j].lambda) <= 1e-9);
        CHECK(std::abs(dec.params[j].alpha[0] - truth[j].alpha[0]) <= 1e-9);
        CHECK(std::abs(dec.params[j].beta[0] - truth[j].beta[0]) <= 1e-9);
        CHECK(std::abs(dec.params[j].gamma - truth[j].gamma) <= 1e-9);
        CHECK(std::abs(dec.params[j].theta - truth[j].theta) <= 1e-9);
    }
}

TEST_CASE("decompose: additive perturbation shifts parameters by O(eps)") {
    GridPtr g = make_grid(1, 16.0, 1024);
    std::vector<BubbleParams> truth(1);
    truth[0].lambda = 0.9;
    truth[0].gamma = 0.2;
    Field u = sum_profiles(truth, qm(), g);
    const double eps = 1e-4;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double x = g->node[i];
        u.v[i] += eps * std::exp(-0.5 * (x - 0.7) * (x - 0.7)) * cplx(1.0, 0.5);
    }
    Decomposition dec = decompose(u, truth, qm(), rhom());
    CHECK(dec.converged);
    double tol = 1e-10 * norm_l2(u);
    for (double r : dec.residuals) CHECK(std::abs(r) <= tol);
    CHECK(std::abs(dec.params[0].lambda - truth[0].lambda) <= 10 * eps);
    CHECK(std::abs(dec.params[0].gamma - truth[0].gamma) <= 10 * eps);
    CHECK(norm_l2(dec.remainder) <= 2.0 * eps);
}

TEST_CASE("decompose: uniqueness near the fixed point") {
    GridPtr g = make_grid(1, 16.0, 1024);
    std::vector<BubbleParams> truth(1);
    truth[0].lambda = 0.85;
    truth[0].gamma = 0.3;
    truth[0].theta = 0.5;
    Field u = sum_profiles(truth, qm(), g);

    std::vector<BubbleParams> g1 = truth, g2 = truth;
    g1[0].lambda += 8e-3;
    g1[0].theta -= 5e-3;
    g2[0].lambda -= 7e-3;
    g2[0].gamma += 9e-3;
    Decomposition d1 = decompose(u, g1, qm(), rhom());
    Decomposition d2 = decompose(u, g2, qm(), rhom());
    REQUIRE(d1.converged);
    REQUIRE(d2.converged);
    CHECK(std::abs(d1.params[0].lambda - d2.params[0].lambda) <= 1e-9);
    CHECK(std::abs(d1.params[0].gamma - d2.params[0].gamma) <= 1e-9);
    CHECK(std::abs(d1.params[0].theta - d2.params[0].theta) <= 1e-9);
}

TEST_CASE("decompose in d=2 with the 7-parameter vector") {
    GridPtr g = make_grid(2, 12.0, 128);
    std::vector<BubbleParams> truth(1);
    truth[0].lambda = 1.1;
    truth[0].alpha = {0.4, -0.3};
    truth[0].beta = {0.05, 0.02};
    truth[0].gamma = 0.2;
    truth[0].theta = 0.3;
    Field u = sum_profiles(truth, qm2(), g);

    std::vector<BubbleParams> guess = truth;
    guess[0].lambda += 5e-3;
    guess[0].alpha[1] -= 5e-3;
    guess[0].beta[0] += 5e-3;
    Decomposition dec = decompose(u, guess, qm2(), rhom2());
    CHECK(dec.converged);
    CHECK(std::abs(dec.params[0].lambda - truth[0].lambda) <= 1e-9);
    CHECK(std::abs(dec.params[0].alpha[1] - truth[0].alpha[1]) <= 1e-9);
    CHECK(std::abs(dec.params[0].beta[1] - truth[0].beta[1]) <= 1e-9);
}

TEST_CASE("mod_vector: exact pseudo-conformal flow annihilates Mod") {
    const double T = 1.0;
    auto series = [&](double dt_s, double t0, int n) {
        std::vector<double> times;
        std::vector<std::vector<BubbleParams>> params;
        for (int i = 0; i < n; ++i) {
            double t = t0 + i * dt_s;
            times.push_back(t);
            params.push_back({pc_params(1.3, {0.5, 0.0}, 0.2, T, t)});
        }
        return std::make_pair(times, params);
    };
    auto [t1, p1] = series(1e-3, 0.3, 21);
    ModSeries m1 = mod_vector(t1, p1, T, 5);
    double worst1 = 0.0;
    for (double v : m1.mod_total) worst1 = std::max(worst1, v);

    auto [t2, p2] = series(5e-4, 0.3, 41);
    ModSeries m2 = mod_vector(t2, p2, T, 5);
    double worst2 = 0.0;
    for (double v : m2.mod_total) worst2 = std::max(worst2, v);

    CHECK(worst1 <= 1e-4);                       // O(dt^2) finite-difference error
    CHECK(worst1 / worst2 == doctest::Approx(4.0).epsilon(0.2));

    // constant parameters lambda = gamma = 1 leave |gamma^2| = 1 in Mod
    std::vector<double> tc{0.0, 0.1, 0.2};
    BubbleParams c;
    c.lambda = 1.0;
    c.gamma = 1.0;
    std::vector<std::vector<BubbleParams>> pc_series(3, {c});
    ModSeries mc = mod_vector(tc, pc_series, T, 5);
    CHECK(mc.mod_total[0] >= 1.0);

    CHECK_THROWS_AS(mod_vector({0.0, 0.1}, {{c}, {c}}, T, 5), ValidationError);
}

TEST_CASE("renormalize_remainder: bubble pullback and window isometry") {
    GridPtr g = make_grid(1, 16.0, 1024);
    BubbleParams p;
    p.lambda = 0.5;
    p.alpha = {1.0, 0.0};
    p.theta = 0.8;
    Field R = bubble(p, qm(), g);
    std::vector<double> ones(g->size(), 1.0);
    Field eps = renormalize_remainder(R, ones, p);
    // eps(y) = Q(y) exactly (beta = gamma = 0)
    Field qg = profile_to_grid(qm(), g);
    double sup = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i)
        sup = std::max(sup, std::abs(eps.v[i] - qg.v[i]));
    CHECK(sup <= 1e-9);
    CHECK(norm_l2(eps) == doctest::Approx(norm_l2(R)).epsilon(1e-10));

    // window isometry on a smooth field supported inside alpha + lambda*box
    Field w = synthesize(g, [](double x, double) {
        return cplx(std::exp(-(x - 1.0) * (x - 1.0)), 0.3 * std::exp(-x * x));
    });
    Field we = renormalize_remainder(w, ones, p);
    CHECK(norm_l2(we) == doctest::Approx(norm_l2(w)).epsilon(1e-10));

    BubbleParams bad = p;
    bad.lambda = g->spacing;
    CHECK_THROWS_AS(renormalize_remainder(w, ones, bad), ResolutionError);
}

TEST_CASE("scal: zero, iQ pairing, Q pairing, parity of the sum") {
    GridPtr g = make_grid(1, 16.0, 1024);
    double qres = 0.0, rres = 0.0;
    Field qg = petviashvili_polish(g, profile_to_grid(qm(), g), 1e-12, 400, &qres);
    LinearizedOps ops = make_linearized_ops(g, qg);
    Field rhog = solve_rho_grid(ops, profile_to_grid(rhom(), g), 1e-9, 4000, &rres);
    ScalDirections dirs = make_scal_directions(ops, rhog);

    Field zero(g);
    CHECK(scal(zero, dirs).scal == 0.0);

    // eps = iQ: <f2, Lam Q> = <Q, Lam Q> = 0 by exact integration by parts
    Field iq = qg;
    for (std::size_t i = 0; i < iq.size(); ++i) iq.v[i] = cplx(0.0, qg.v[i].real());
    ScalResult siq = scal(iq, dirs);
    CHECK(std::abs(siq.products[4]) <= 1e-10);
    CHECK(std::abs(siq.products[0]) <= 1e-12); // f1 = 0
    double rho_pair = std::real(inner(qg, rhog));
    CHECK(siq.products[5] == doctest::Approx(rho_pair).epsilon(1e-10));

    // eps = Q: Scal = <Q,Q>^2 + <Q,|y|^2 Q>^2, the yQ pairing dies by parity
    ScalResult sq = scal(qg, dirs);
    CHECK(std::abs(sq.products[1]) <= 1e-12);
    double qq = std::real(inner(qg, qg));
    double qy2q = std::real(inner(qg, dirs.y2Q));
    CHECK(sq.scal == doctest::Approx(qq * qq + qy2q * qy2q).epsilon(1e-10));

    // Scal is even in eps
    Field mq = qg;
    for (std::size_t i = 0; i < mq.size(); ++i) mq.v[i] = -mq.v[i];
    CHECK(scal(mq, dirs).scal == doctest::Approx(sq.scal).epsilon(1e-14));
}

TEST_CASE("interaction overlap: ceiling, smallness, lambda halving") {
    GridPtr g = make_grid(1, 16.0, 2048);
    std::vector<BubbleParams> ps(2);
    ps[0].alpha = {-4.0, 0.0};
    ps[1].alpha = {4.0, 0.0};
    ps[0].lambda = ps[1].lambda = 0.5;

    auto ov = interaction_overlap(ps, qm(), g, 0, 0, {0, 0});
    CHECK(ov[0][1] > 0.0);
    CHECK(ov[0][1] < 1e-4);

    // sanity ceiling: same anchor gives the weighted self-integral
    std::vector<BubbleParams> same(2);
    same[0].lambda = same[1].lambda = 0.5;
    auto ov_same = interaction_overlap(same, qm(), g, 0, 0, {0, 0});
    Field u = bubble(same[0], qm(), g);
    double self = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) self += std::norm(u.v[i]);
    self *= g->spacing;
    CHECK(ov_same[0][1] == doctest::Approx(self).epsilon(1e-10));
    CHECK(ov[0][1] < ov_same[0][1]);

    // halving lambda collapses the overlap by >= 1e3
    std::vector<BubbleParams> ph = ps;
    ph[0].lambda = ph[1].lambda = 0.25;
    auto ovh = interaction_overlap(ph, qm(), g, 0, 0, {0, 0});
    CHECK(ovh[0][1] * 1e3 <= ov[0][1]);

    // weighted variant with a derivative stays finite and small
    auto ovw = interaction_overlap(ps, qm(), g, 1, 1, {1, 0});
    CHECK(ovw[0][1] > 0.0);
    CHECK(ovw[0][1] < 1e-2);

    CHECK_THROWS_AS(interaction_overlap({ps[0]}, qm(), g, 0, 0, {0, 0}),
                    ValidationError);
}

TEST_CASE("almost orthogonality: localized products bounded via the tails") {
    GridPtr g = make_grid(1, 16.0, 1024);
    std::vector<BubbleParams> truth(2);
    truth[0].lambda = 0.5;
    truth[0].alpha = {-4.0, 0.0};
    truth[1].lambda = 0.5;
    truth[1].alpha = {4.0, 0.0};
    Field u = sum_profiles(truth, qm(), g);
    for (std::size_t i = 0; i < u.size(); ++i) {
        double x = g->node[i];
        u.v[i] += 1e-3 * cplx(std::exp(-0.2 * x * x), 0.4 * std::exp(-0.1 * x * x));
    }
    Decomposition dec = decompose(u, truth, qm(), rhom());
    REQUIRE(dec.converged);

    BubbleSet set = two_bubbles();
    Localizers loc = make_localizers(set, g);
    double r_l2 = norm_l2(dec.remainder);

    for (int j = 0; j < 2; ++j) {
        BubbleDirections dirs = bubble_directions(dec.params[j], qm(), rhom(), g);
        // localized product Re int (x - a_j) U_j conj(R_j)
        cplx acc(0, 0);
        for (std::size_t i = 0; i < u.size(); ++i)
            acc += dirs.xU[0].v[i] * std::conj(dec.remainder.v[i]) * loc.phi[j][i];
        double localized = std::abs(std::real(acc) * g->spacing);
        // tail content of the weighted profile outside its own localizer
        double tail2 = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            tail2 += std::norm(dirs.xU[0].v[i]) * (1.0 - loc.phi[j][i]);
        double bound = std::sqrt(tail2 * g->spacing) * r_l2;
        CHECK(localized <= 10.0 * bound);
    }
}

TEST_CASE("mod residuals stay below 1e-6 along a deterministic K=1 run") {
    GridPtr g = make_grid(1, 16.0, 1024);
    BubbleParams a;
    BubbleSet set = make_bubble_set(1, {a}, 16.0);
    // Mod picks up both the integrator's O(dt^2) modified-flow bias and the
    // O(dcp^2) centered-difference truncation; both must sit below 1e-6
    const double T = 1.0, t_n = 0.7, t_end = 0.65;
    StepController ctl;
    ctl.dt_base = 1.25e-5;
    std::vector<double> cps;
    for (int i = 0; i <= 400; ++i) cps.push_back(t_end + 1.25e-4 * i);
    Trajectory tr = construct_approximant(t_n, set, T, nullptr, ctl, qm(), g,
                                          t_end, cps);
    REQUIRE(tr.status == RunStatus::Completed);

    std::vector<double> times;
    std::vector<std::vector<BubbleParams>> series;
    std::vector<BubbleParams> warm{pc_params(1.0, {0.0, 0.0}, 0.0, T, tr.times[0])};
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        Decomposition dec = decompose(tr.fields[i], warm, qm(), rhom());
        REQUIRE(dec.converged);
        warm = dec.params;
        times.push_back(tr.times[i]);
        series.push_back(dec.params);
    }
    ModSeries ms = mod_vector(times, series, T, 5);
    double worst = 0.0;
    for (double v : ms.mod_total) worst = std::max(worst, v);
    CHECK(worst <= 1e-6);
}
