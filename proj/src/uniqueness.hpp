#ifndef MBNLS_UNIQUENESS_HPP
#define MBNLS_UNIQUENESS_HPP

#include "diagnostics.hpp"
#include "evolution.hpp"
#include "modulation.hpp"

#include <vector>

namespace mbnls {

// Two trajectories on the same grid/noise with aligned checkpoint times.
struct PairRun {
    Trajectory base;
    Trajectory perturbed;
};

// D(t) and Scal_j(t) of the difference w = v - u, with the geometric
// decomposition of the base run supplying (lambda_j, alpha_j, theta_j).
struct DifferenceSeries {
    std::vector<double> times;
    std::vector<double> D;
    std::vector<std::vector<double>> scal_j; // per bubble
    std::vector<double> w_l2, w_h1;
};

DifferenceSeries difference_series(const PairRun& pair,
                                   const std::vector<Decomposition>& base_decs,
                                   const Localizers& loc,
                                   const ScalDirections& dirs);

// sup_{s>=t} D(s) vs the Scal right-hand side of the contraction estimate:
// rhs(t) = sum_j sup_{s>=t} Scal_j/lambda_j^2 + int_t sum_j Scal_j/lambda_j^3.
struct ContractionCheck {
    std::vector<double> times, supD, rhs;
    double worst_ratio = 0.0; // max supD / rhs
};
ContractionCheck contraction_check(const DifferenceSeries& ds,
                                   const std::vector<std::vector<double>>& lambda_jt);

// Pairwise L2/H1 distances of a family of trajectories at aligned times.
struct CauchyReport {
    std::vector<double> times;
    // dist[a][b][i]: distance between run a and run b at time index i
    std::vector<std::vector<std::vector<double>>> l2, h1;
    bool consecutive_decreasing_l2 = false; // d(u_n, u_{n+1}) decreasing in n
};
CauchyReport cauchy_check(const std::vector<Trajectory>& runs);

} // namespace mbnls

#endif
