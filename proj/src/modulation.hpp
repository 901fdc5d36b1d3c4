#ifndef MBNLS_MODULATION_HPP
#define MBNLS_MODULATION_HPP

#include "grid.hpp"
#include "ground_state.hpp"
#include "profiles.hpp"

#include <array>
#include <vector>

namespace mbnls {

// Smooth partition of unity separating the bubbles along the v1 axis.
// Transition: quintic smoothstep between the 4*sigma and 8*sigma bands.
struct Localizers {
    GridPtr grid;
    double sigma = 0.0;
    std::vector<std::vector<double>> phi; // one weight array per bubble
};

Localizers make_localizers(const BubbleSet& set, const GridPtr& g);

// 1D transition profile and its slope (for the gradient-bound checks).
double localizer_profile(double z, double sigma);
double localizer_slope(double z, double sigma);

struct Decomposition {
    std::vector<BubbleParams> params;
    Field remainder;
    std::vector<double> residuals; // (2d+3) per bubble, raw orthogonality values
    bool converged = false;
    int iterations = 0;
    double jacobian_condition = 0.0;
};

// Orthogonality-constrained fit of u = sum U_j(P) + R by damped Newton on the
// (2d+3)K parameter vector. Direction fields are frozen per iterate; the
// omitted Jacobian block is O(||R||) and vanishes at the fixed point.
Decomposition decompose(const Field& u, const std::vector<BubbleParams>& guess,
                        const RadialProfile& Q, const RadialProfile& rho,
                        double tol_factor = 1e-10, int max_iter = 50);

// Modulation-equation residuals from a fitted parameter trajectory, centered
// finite differences on the (possibly nonuniform) sample times. Entry i of the
// result corresponds to times[i] for 1 <= i <= n-2.
struct ModSeries {
    std::vector<double> times;                  // interior sample times
    std::vector<std::vector<double>> mod_j;     // per bubble
    std::vector<double> mod_total;
    std::vector<double> bound_ratio;            // Mod / (T-t)^{kappa+3}
};
ModSeries mod_vector(const std::vector<double>& times,
                     const std::vector<std::vector<BubbleParams>>& params_at_time,
                     double T, int nu_star);

// eps_j = lambda^{d/2} (R Phi_j)(alpha + lambda y) e^{-i theta}; trigonometric
// sampling on the scaled/shifted targets. Quadrature isometry holds for
// content inside the sampled window alpha + lambda*[-L, L).
Field renormalize_remainder(const Field& R, const std::vector<double>& phi_j,
                            const BubbleParams& p);

// Same map without the localizer and additionally stripping the
// (beta.y - gamma|y|^2/4) phase; the uniqueness lab's e_j variable.
Field renormalize_full_phase(const Field& w, const BubbleParams& p);

// Unstable directions on the grid (identity parameters, y = x).
struct ScalDirections {
    GridPtr grid;
    Field Q;
    std::vector<Field> yQ, gradQ;
    Field y2Q, lamQ, rho;
};
ScalDirections make_scal_directions(const LinearizedOps& ops, const Field& rho_grid);

struct ScalResult {
    // products: [ <f1,Q>, |<f1,yQ>|, <f1,|y|^2 Q>, |<f2,gradQ>|, <f2,LamQ>, <f2,rho> ]
    std::array<double, 6> products{};
    double scal = 0.0; // sum of squares
};
ScalResult scal(const Field& eps, const ScalDirections& dirs);

// Interaction overlaps int |x-a_l|^n |d^nu U_l| |x-a_j|^m |U_j| dx for l != j.
// nu is a per-axis multi-index with |nu| <= 2.
std::vector<std::vector<double>> interaction_overlap(
    const std::vector<BubbleParams>& params, const RadialProfile& Q,
    const GridPtr& g, int m, int n, const std::array<int, 2>& nu);

} // namespace mbnls

#endif
