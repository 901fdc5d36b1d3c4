#include "uniqueness.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>

namespace mbnls {

DifferenceSeries difference_series(const PairRun& pair,
                                   const std::vector<Decomposition>& base_decs,
                                   const Localizers& loc,
                                   const ScalDirections& dirs) {
    const Trajectory& a = pair.base;
    const Trajectory& b = pair.perturbed;
    if (a.times.size() != b.times.size())
        throw ValidationError("difference_series: misaligned checkpoint counts");
    for (std::size_t i = 0; i < a.times.size(); ++i)
        if (std::abs(a.times[i] - b.times[i]) > 1e-12)
            throw ValidationError("difference_series: misaligned checkpoint times");
    if (base_decs.size() != a.times.size())
        throw ValidationError("difference_series: one decomposition per checkpoint required");

    DifferenceSeries out;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        const Decomposition& dec = base_decs[i];
        Field w = b.fields[i];
        require_same_grid(w, a.fields[i]);
        for (std::size_t k = 0; k < w.size(); ++k) w.v[k] -= a.fields[i].v[k];

        std::vector<double> lambdas;
        for (const BubbleParams& p : dec.params) lambdas.push_back(p.lambda);

        out.times.push_back(a.times[i]);
        out.D.push_back(difference_functional(w, loc, lambdas));
        double l2 = norm_l2(w), h1s = norm_h1semi(w);
        out.w_l2.push_back(l2);
        out.w_h1.push_back(std::sqrt(l2 * l2 + h1s * h1s));

        std::vector<double> srow;
        for (std::size_t j = 0; j < dec.params.size(); ++j) {
            Field eps = renormalize_remainder(w, loc.phi[j], dec.params[j]);
            srow.push_back(scal(eps, dirs).scal);
        }
        out.scal_j.push_back(std::move(srow));
    }
    return out;
}

ContractionCheck contraction_check(const DifferenceSeries& ds,
                                   const std::vector<std::vector<double>>& lambda_jt) {
    const std::size_t n = ds.times.size();
    if (n < 2) throw ValidationError("contraction_check: need >= 2 checkpoints");
    const std::size_t K = ds.scal_j.empty() ? 0 : ds.scal_j[0].size();
    if (lambda_jt.size() != K)
        throw ValidationError("contraction_check: lambda series per bubble required");

    ContractionCheck out;
    out.times = ds.times;
    out.supD.assign(n, 0.0);
    out.rhs.assign(n, 0.0);

    // assume times sorted increasing; sup over s >= t
    std::vector<double> supD(n), supScal(n * K);
    double run = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        run = std::max(run, ds.D[i]);
        supD[i] = run;
    }
    for (std::size_t j = 0; j < K; ++j) {
        double s = 0.0;
        for (std::size_t i = n; i-- > 0;) {
            double lam = lambda_jt[j][i];
            s = std::max(s, ds.scal_j[i][j] / (lam * lam));
            supScal[i * K + j] = s;
        }
    }
    // trailing integral of sum_j Scal_j / lambda_j^3 (trapezoid)
    std::vector<double> integ(n, 0.0);
    for (std::size_t i = n - 1; i-- > 0;) {
        double f0 = 0.0, f1 = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            double l0 = lambda_jt[j][i], l1 = lambda_jt[j][i + 1];
            f0 += ds.scal_j[i][j] / (l0 * l0 * l0);
            f1 += ds.scal_j[i + 1][j] / (l1 * l1 * l1);
        }
        integ[i] = integ[i + 1] + 0.5 * (ds.times[i + 1] - ds.times[i]) * (f0 + f1);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double rhs = integ[i];
        for (std::size_t j = 0; j < K; ++j) rhs += supScal[i * K + j];
        out.supD[i] = supD[i];
        out.rhs[i] = rhs;
        if (rhs > 0.0) out.worst_ratio = std::max(out.worst_ratio, supD[i] / rhs);
    }
    return out;
}

CauchyReport cauchy_check(const std::vector<Trajectory>& runs) {
    if (runs.size() < 3)
        throw ValidationError("cauchy_check: need >= 3 runs");
    const std::size_t R = runs.size();
    const std::size_t n = runs[0].times.size();
    for (const Trajectory& tr : runs) {
        if (tr.times.size() != n)
            throw ValidationError("cauchy_check: runs have different checkpoint counts");
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(tr.times[i] - runs[0].times[i]) > 1e-12)
                throw ValidationError("cauchy_check: runs have different checkpoint times");
        require_same_grid(tr.fields[0], runs[0].fields[0]);
    }

    CauchyReport rep;
    rep.times = runs[0].times;
    rep.l2.assign(R, std::vector<std::vector<double>>(R, std::vector<double>(n, 0.0)));
    rep.h1 = rep.l2;
    for (std::size_t a = 0; a < R; ++a)
        for (std::size_t b = a + 1; b < R; ++b)
            for (std::size_t i = 0; i < n; ++i) {
                Field w = runs[a].fields[i];
                for (std::size_t k = 0; k < w.size(); ++k)
                    w.v[k] -= runs[b].fields[i].v[k];
                double l2 = norm_l2(w), h1s = norm_h1semi(w);
                rep.l2[a][b][i] = rep.l2[b][a][i] = l2;
                rep.h1[a][b][i] = rep.h1[b][a][i] = std::sqrt(l2 * l2 + h1s * h1s);
            }

    rep.consecutive_decreasing_l2 = true;
    for (std::size_t a = 0; a + 2 < R; ++a)
        if (!(rep.l2[a + 1][a + 2][0] < rep.l2[a][a + 1][0]))
            rep.consecutive_decreasing_l2 = false;
    return rep;
}

} // namespace mbnls
