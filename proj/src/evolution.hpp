#ifndef MBNLS_EVOLUTION_HPP
#define MBNLS_EVOLUTION_HPP

#include "grid.hpp"
#include "noise.hpp"
#include "profiles.hpp"

#include <functional>
#include <vector>

namespace mbnls {

enum class RunStatus { Completed, ResolutionStop, Diverged };
const char* run_status_name(RunStatus s);

struct StepController {
    double dt_base = 1e-4;
    double c_dt = 0.02;    // dt <= c_dt * lambda_min^2
    double dt_min = 1e-10;
    double linf_cap = 1e6; // divergence guard
    // a-priori bubble scale for the adapt rule; empty means dt_base only
    std::function<double(double)> lambda_min;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Field> fields;
    RunStatus status = RunStatus::Completed;
    double t_final = 0.0;
    long steps_taken = 0;
};

// exp(i dt lap) applied spectrally; exact on the grid.
void apply_dispersion(Field& u, double dt);

// One Strang step of i u_t + lap u + |u|^{4/d} u + b.grad u + c u = 0.
// Palindromic composition: [transport, phase] dispersion [phase, transport],
// with the noise coefficients frozen at the midpoints of the two local
// half-intervals. The pointwise phase flow for |u|^{4/d} + Re c is exact; the
// transport beta.grad + Im c is a real skew operator advanced by a two-term
// Taylor update, which keeps the discrete mass drift at round-off.
// Supports dt < 0.
Field step(const Field& u, double t, double dt, const NoiseModel* model);

// March from t0 to t1 (either order), storing the field at the requested
// checkpoint times (plus both endpoints). Optional per-step observer for
// dense diagnostics.
Trajectory evolve(const Field& u0, double t0, double t1, const NoiseModel* model,
                  const StepController& ctl,
                  const std::vector<double>& checkpoints = {},
                  const std::function<void(double, const Field&)>& observer = {});

// Backward construction: u(t_n) = sum_j S_j(t_n), integrated to t_end.
Trajectory construct_approximant(double t_n, const BubbleSet& set, double T,
                                 const NoiseModel* model, const StepController& ctl,
                                 const RadialProfile& Q, const GridPtr& g,
                                 double t_end,
                                 const std::vector<double>& checkpoints = {},
                                 const std::function<void(double, const Field&)>& observer = {});

} // namespace mbnls

#endif
