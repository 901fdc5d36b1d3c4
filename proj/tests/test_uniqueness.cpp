#include <doctest.h>

#include "errors.hpp"
#include "uniqueness.hpp"

#include <cmath>

using namespace mbnls;

namespace {
const RadialProfile& qu() {
    static RadialProfile q = solve_ground_state(1);
    return q;
}
const RadialProfile& rhou() {
    static RadialProfile r = solve_rho(qu());
    return r;
}

struct Lab {
    GridPtr g;
    BubbleSet set;
    Localizers loc;
    LinearizedOps ops;
    Field rhog;
    ScalDirections dirs;
    StepController ctl;
    double T = 1.0, t_n = 0.5, t_end = 0.3;
    std::vector<double> cps{0.3, 0.35, 0.4, 0.45};

    Lab() {
        g = make_grid(1, 16.0, 512);
        BubbleParams a;
        set = make_bubble_set(1, {a}, 16.0);
        loc = make_localizers(set, g);
        double qres = 0.0, rres = 0.0;
        Field qg = petviashvili_polish(g, profile_to_grid(qu(), g), 1e-12, 400, &qres);
        ops = make_linearized_ops(g, qg);
        rhog = solve_rho_grid(ops, profile_to_grid(rhou(), g), 1e-8, 3000, &rres);
        dirs = make_scal_directions(ops, rhog);
        ctl.dt_base = 2e-4;
    }

    Trajectory base_run() {
        return construct_approximant(t_n, set, T, nullptr, ctl, qu(), g, t_end, cps);
    }
    Trajectory jitter_run(double rel) {
        BubbleParams p = pc_params(1.0, {0.0, 0.0}, 0.0, T, t_n);
        p.lambda *= 1.0 + rel;
        p.theta += rel;
        Field u0 = bubble(p, qu(), g);
        StepController c = ctl;
        c.lambda_min = [this](double t) { return T - t; };
        return evolve(u0, t_n, t_end, nullptr, c, cps);
    }
    std::vector<Decomposition> decs(const Trajectory& tr) {
        std::vector<Decomposition> out;
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            Decomposition d = decompose(
                tr.fields[i], {pc_params(1.0, {0.0, 0.0}, 0.0, T, tr.times[i])}, qu(),
                rhou());
            REQUIRE(d.converged);
            out.push_back(std::move(d));
        }
        return out;
    }
};
} // namespace

TEST_CASE("difference series: identical runs give D == 0") {
    Lab lab;
    Trajectory a = lab.base_run();
    PairRun pr{a, a};
    auto decs = lab.decs(a);
    DifferenceSeries ds = difference_series(pr, decs, lab.loc, lab.dirs);
    for (double d : ds.D) CHECK(d == 0.0);
    for (const auto& row : ds.scal_j)
        for (double s : row) CHECK(s == 0.0);
}

TEST_CASE("difference series: halved perturbation quarters D") {
    Lab lab;
    Trajectory base = lab.base_run();
    auto decs = lab.decs(base);

    PairRun p1{base, lab.jitter_run(1e-3)};
    PairRun p2{base, lab.jitter_run(5e-4)};
    DifferenceSeries d1 = difference_series(p1, decs, lab.loc, lab.dirs);
    DifferenceSeries d2 = difference_series(p2, decs, lab.loc, lab.dirs);
    for (std::size_t i = 0; i < d1.times.size(); ++i) {
        CHECK(d1.D[i] / d2.D[i] == doctest::Approx(4.0).epsilon(0.02));
    }
}

TEST_CASE("contraction bookkeeping: sup D against the Scal right-hand side") {
    Lab lab;
    Trajectory base = lab.base_run();
    auto decs = lab.decs(base);
    PairRun pr{base, lab.jitter_run(1e-3)};
    DifferenceSeries ds = difference_series(pr, decs, lab.loc, lab.dirs);

    std::vector<std::vector<double>> lam(1);
    for (const Decomposition& d : decs) lam[0].push_back(d.params[0].lambda);

    // sort ascending in t for the trailing sup/integral bookkeeping
    DifferenceSeries s = ds;
    std::vector<std::vector<double>> lam_s = lam;
    if (s.times.front() > s.times.back()) {
        std::reverse(s.times.begin(), s.times.end());
        std::reverse(s.D.begin(), s.D.end());
        std::reverse(s.scal_j.begin(), s.scal_j.end());
        std::reverse(s.w_l2.begin(), s.w_l2.end());
        std::reverse(s.w_h1.begin(), s.w_h1.end());
        std::reverse(lam_s[0].begin(), lam_s[0].end());
    }
    ContractionCheck cc = contraction_check(s, lam_s);
    CHECK(cc.worst_ratio > 0.0);
    CHECK(std::isfinite(cc.worst_ratio));
    for (std::size_t i = 0; i + 1 < cc.supD.size(); ++i)
        CHECK(cc.supD[i] >= cc.supD[i + 1] - 1e-18); // trailing sup is monotone
}

TEST_CASE("renormalized difference: e_j vs eps_j and Scal consistency") {
    Lab lab;
    Field w = synthesize(lab.g, [](double x, double) {
        return cplx(std::exp(-(x - 0.5) * (x - 0.5)), 0.4 * std::exp(-x * x));
    });

    // beta = gamma = 0: both renormalizations coincide (K=1, Phi == 1)
    BubbleParams p;
    p.lambda = 0.8;
    p.theta = 0.3;
    Field ej = renormalize_full_phase(w, p);
    Field epsj = renormalize_remainder(w, lab.loc.phi[0], p);
    double sup = 0.0;
    for (std::size_t i = 0; i < ej.size(); ++i)
        sup = std::max(sup, std::abs(ej.v[i] - epsj.v[i]));
    CHECK(sup <= 1e-12);
    CHECK(norm_l2(ej) == doctest::Approx(norm_l2(w)).epsilon(1e-10));

    // Scal(e_j) -> Scal(eps_j) as the quadratic phase parameters shrink
    double prev_gap = 1e300;
    for (double scale : {1e-1, 1e-2, 1e-3}) {
        BubbleParams ps = p;
        ps.beta = {scale, 0.0};
        ps.gamma = scale;
        double se = scal(renormalize_full_phase(w, ps), lab.dirs).scal;
        double sp = scal(renormalize_remainder(w, lab.loc.phi[0], ps), lab.dirs).scal;
        double gap = std::abs(se / sp - 1.0);
        CHECK(gap < prev_gap + 1e-12);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-2);
}

TEST_CASE("cauchy check: deterministic approximants collapse together") {
    Lab lab;
    lab.ctl.dt_base = 5e-5; // the pairwise gap scales with the dt^2 error
    std::vector<Trajectory> runs;
    for (double tn : {0.45, 0.5, 0.55}) {
        Trajectory tr = construct_approximant(tn, lab.set, lab.T, nullptr, lab.ctl,
                                              qu(), lab.g, 0.3, {0.3, 0.35, 0.4});
        Trajectory shared;
        shared.status = tr.status;
        for (double c : {0.3, 0.35, 0.4})
            for (std::size_t i = 0; i < tr.times.size(); ++i)
                if (std::abs(tr.times[i] - c) < 1e-10) {
                    shared.times.push_back(tr.times[i]);
                    shared.fields.push_back(tr.fields[i]);
                }
        runs.push_back(std::move(shared));
    }
    CauchyReport rep = cauchy_check(runs);
    for (std::size_t a = 0; a < runs.size(); ++a)
        for (std::size_t b = a + 1; b < runs.size(); ++b)
            CHECK(rep.l2[a][b][0] <= 1e-6);

    // config mismatch: drop a checkpoint from one run
    runs[2].times.pop_back();
    runs[2].fields.pop_back();
    CHECK_THROWS_AS(cauchy_check(runs), ValidationError);
    CHECK_THROWS_AS(cauchy_check({runs[0], runs[1]}), ValidationError);
}

TEST_CASE("Scal is zero at w = 0 and Lipschitz under sampling") {
    Lab lab;
    Field zero(lab.g);
    CHECK(scal(zero, lab.dirs).scal == 0.0);

    Field w = synthesize(lab.g, [](double x, double) {
        return cplx(std::exp(-x * x), 0.5 * std::exp(-0.7 * x * x));
    });
    double s0 = scal(w, lab.dirs).scal;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        Field wp = w;
        for (std::size_t i = 0; i < wp.size(); ++i)
            wp.v[i] += eps * cplx(std::exp(-2.0 * lab.g->node[i] * lab.g->node[i]), 0.0);
        double s1 = scal(wp, lab.dirs).scal;
        // |Scal(w+dw) - Scal(w)| <= C ||dw|| on this bounded sample
        CHECK(std::abs(s1 - s0) <= 50.0 * eps);
    }
}
