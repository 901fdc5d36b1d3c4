#ifndef MBNLS_PROFILES_HPP
#define MBNLS_PROFILES_HPP

#include "grid.hpp"
#include "ground_state.hpp"

#include <vector>

namespace mbnls {

// One bubble's modulation vector (lambda, alpha, beta, gamma, theta) plus the
// fixed anchor triple (omega, x_c, vartheta) it is steered toward.
struct BubbleParams {
    double lambda = 1.0;
    Vec2 alpha{0.0, 0.0};
    Vec2 beta{0.0, 0.0};
    double gamma = 0.0;
    double theta = 0.0;

    double omega = 1.0;
    Vec2 xc{0.0, 0.0};
    double vartheta = 0.0;
};

// Exact pseudo-conformal parameter flow lambda = w(T-t), gamma = w^2(T-t),
// theta = 1/(w^2 (T-t)) + vartheta; annihilates every Mod component.
BubbleParams pc_params(double omega, const Vec2& xc, double vartheta, double T,
                       double t);

struct BubbleSet {
    int dim = 1;
    std::vector<BubbleParams> anchors; // one entry per bubble, sorted along v1
    Vec2 v1{1.0, 0.0};                 // separating axis (unit vector)
    double sigma = 0.0;                // (1/12) min gap of anchor projections

    std::size_t count() const { return anchors.size(); }
};

// Sorts anchors along a separating axis (rotating in d=2 when needed) and
// computes sigma. K=1 sets sigma from the box quarter-width.
BubbleSet make_bubble_set(int dim, std::vector<BubbleParams> anchors,
                          double box_extent);

// U = lambda^{-d/2} Q(y) e^{i(beta.y - gamma|y|^2/4 + theta)}, y=(x-alpha)/lambda.
// Throws ResolutionError when lambda < 4h.
Field bubble(const BubbleParams& p, const RadialProfile& Q, const GridPtr& g);

// S(t) per the explicit blow-up formula; kept independent of bubble() so the
// parameter-map consistency is a real check.
Field pseudo_conformal_S(double omega, const Vec2& xc, double vartheta, double T,
                         double t, const RadialProfile& Q, const GridPtr& g);

// Linear superposition; an empty list yields the zero field.
Field sum_profiles(const std::vector<BubbleParams>& params, const RadialProfile& Q,
                   const GridPtr& g);

// varrho_j: same modulation envelope built on rho instead of Q.
Field varrho_profile(const BubbleParams& p, const RadialProfile& rho,
                     const GridPtr& g);

// Pseudo-conformal transform at parameter t != 0:
//   (C_t f)(x) = |t|^{-d/2} f(x/(-t)) exp(-i|x|^2/(4t)).
// (|t| in the prefactor fixes the branch for t > 0; for t < 0 the two
// conventions agree.)  Out-of-box targets evaluate to zero; throws
// TruncationError when the escaping-mass estimate exceeds mass_tol * ||f||^2.
Field pc_transform(const Field& f, double t, double mass_tol = 1e-6);

// Parameter-derivative fields of bubble(): d U / d(lambda, alpha, beta, gamma,
// theta), used by the modulation Newton solve. Layout: [lambda, alpha_0..d-1,
// beta_0..d-1, gamma, theta].
std::vector<Field> bubble_param_derivatives(const BubbleParams& p,
                                            const RadialProfile& Q,
                                            const GridPtr& g);

// Direction fields against which decomposition/Scal pair the remainder:
// y-centered weights times U_j, gradient, Lam U_j and varrho_j.
struct BubbleDirections {
    std::vector<Field> xU;   // (x-alpha)_i U,  i < d
    Field x2U;               // |x-alpha|^2 U
    std::vector<Field> gradU;
    Field lamU;              // (d/2 + (x-alpha).grad) U
    Field varrho;
};
BubbleDirections bubble_directions(const BubbleParams& p, const RadialProfile& Q,
                                   const RadialProfile& rho, const GridPtr& g);

} // namespace mbnls

#endif
