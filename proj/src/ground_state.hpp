#ifndef MBNLS_GROUND_STATE_HPP
#define MBNLS_GROUND_STATE_HPP

#include "grid.hpp"
#include "radial.hpp"

#include <optional>
#include <string>

namespace mbnls {

struct RadialMeshConfig {
    // n = 0 resolves to the per-dimension default (3001 in d=1, 2001 in d=2;
    // the d=2 mesh is coarser because the pointwise-residual floor there is
    // round-off bound, not truncation bound)
    int n = 0;
    double rmax = 30.0;
    double grading = 1.0; // sinh grading, denser toward r = 0
};
RadialMeshConfig resolve_mesh(int dim, const RadialMeshConfig& cfg);

// Radial profile samples with first/second derivatives at the nodes; evaluates
// anywhere via piecewise quintic Hermite with an exponential tail beyond rmax.
struct RadialProfile {
    int dim = 1;
    double rmax = 0.0;
    std::vector<double> r, val, d1, d2;
    double decay_rate = 0.0; // fitted tail rate delta in |f| ~ C exp(-delta r)

    double eval(double rr) const;
    double eval_d1(double rr) const;
};

// Ground state Q of  Q'' + (d-1)Q'/r - Q + Q^{1+4/d} = 0, positive, decaying.
// A shooting pass (RK4 + bisection on Q(0)) supplies the initial iterate and
// the bracket; a Newton pass on the graded mesh drives the pointwise residual
// to round-off. Throws ValidationError with the bracket when shooting fails.
RadialProfile solve_ground_state(int dim, const RadialMeshConfig& cfg = {});

// rho solving L+ rho = -r^2 Q on the radial (even) subspace, banded FD solve.
RadialProfile solve_rho(const RadialProfile& Q);

// Max pointwise ODE residual of Q over the mesh, evaluated with independent
// 11-point stencils (the solver uses 9-point ones).
double ground_state_residual(const RadialProfile& Q);

// Radial L2 norm of L+ rho + r^2 Q, same independent stencils.
double rho_residual_l2(const RadialProfile& rho, const RadialProfile& Q);

// Reported by the shooting pass for diagnostics.
struct ShootingInfo {
    double amplitude = 0.0;
    double bracket_lo = 0.0, bracket_hi = 0.0;
};
const ShootingInfo& last_shooting_info();

// ---- grid side -----------------------------------------------------------

// Samples a radial profile at |x - center| on the grid (real values).
Field profile_to_grid(const RadialProfile& p, const GridPtr& g,
                      const Vec2& center = {0.0, 0.0});

// Fixed-point polish of the periodic discrete ground state; returns the field
// and writes the final residual ||lap Q - Q + Q^p|| to out_residual.
Field petviashvili_polish(const GridPtr& g, const Field& init, double tol,
                          int maxit, double* out_residual);

// L+/- around the grid ground state.
struct LinearizedOps {
    GridPtr grid;
    Field Q;                            // grid ground state, real-valued
    std::vector<double> vplus, vminus;  // (1+4/d) Q^{4/d} and Q^{4/d}
};
LinearizedOps make_linearized_ops(const GridPtr& g, const Field& q_grid);

enum class LWhich { Plus, Minus };
Field apply_L(const Field& f, LWhich which, const LinearizedOps& ops);

// MINRES on the symmetrically preconditioned system for L+ rho = -|x|^2 Q.
Field solve_rho_grid(const LinearizedOps& ops, const Field& init, double tol,
                     int maxit, double* out_residual);

// Residuals of the six generalized-kernel identities, in L2:
//   [0] L+ grad Q = 0        [1] L+ Lam Q = -2Q      [2] L+ rho = -|x|^2 Q
//   [3] L- Q = 0             [4] L- xQ = -2 grad Q   [5] L- |x|^2 Q = -4 Lam Q
// On the grid the polynomial weights are commuted past the derivatives
// before spectral evaluation, so the box tails do not pollute the report.
struct KernelReport {
    double residual[6] = {0, 0, 0, 0, 0, 0};
    double q_decay = 0.0, rho_decay = 0.0;
    double max_residual() const;
};
KernelReport kernel_report_grid(const LinearizedOps& ops, const Field& rho_grid);
KernelReport kernel_report_radial(const RadialProfile& Q, const RadialProfile& rho);

// ---- profile cache ---------------------------------------------------------
// Byte format: u32 dim | f64 r_max | u32 n | n*f64 radii | n*f64 values (LE).
void save_profile_cache(const std::string& path, const RadialProfile& p);
std::optional<RadialProfile> load_profile_cache(const std::string& path);
std::string profile_cache_name(const char* which, int dim, const RadialMeshConfig& cfg);

// Cached fetch: loads from cache_dir (when non-empty) or solves and stores.
RadialProfile ground_state_cached(int dim, const RadialMeshConfig& cfg,
                                  const std::string& cache_dir);
RadialProfile rho_cached(const RadialProfile& Q, const RadialMeshConfig& cfg,
                         const std::string& cache_dir);

} // namespace mbnls

#endif
