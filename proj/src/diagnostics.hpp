#ifndef MBNLS_DIAGNOSTICS_HPP
#define MBNLS_DIAGNOSTICS_HPP

#include "grid.hpp"
#include "modulation.hpp"
#include "noise.hpp"

#include <vector>

namespace mbnls {

double mass(const Field& u);
double energy(const Field& u); // 1/2 ||grad u||^2 - d/(2d+4) ||u||_{2+4/d}^{2+4/d}
Vec2 momentum(const Field& u); // Im int grad(u) conj(u)

std::vector<double> localized_mass(const Field& u, const Localizers& loc);

// dE/dt along the noisy flow:
//   -2 sum_k B_k Re int hess(phi_k)(grad u, grad conj u)
//   + 1/2 sum_k B_k int lap^2 phi_k |u|^2
//   + 2/(d+2) sum_k B_k int lap phi_k |u|^{2+4/d}
//   - sum_j Im int grad[(sum_k d_j phi_k B_k)^2] . grad u conj(u)
double energy_rate(const Field& u, const NoiseModel& model, double t);

// chi_A(x) = A^2 chi(x/A), psi' = r (r<=1), 2-e^{-r} (r>=2), C3 quintic bridge.
struct MorawetzWeight {
    double A = 10.0;
    double psi_p(double r) const;   // psi'
    double psi_pp(double r) const;  // psi''
    double psi_ppp(double r) const; // psi'''
    // |grad chi_A|(x) direction x/|x|, magnitude A psi'(|x|/A)
    double grad_chiA_mag(double r) const { return A * psi_p(r / A); }
};

// Exterior-decay weight of the localized-coercivity corollary: 1 inside,
// e^{-r} outside, C2 log-space bridge on (1,2); phi_A(x) = phi(|x|/A).
struct CoercivityWeight {
    double A = 10.0;
    double eval(double r) const;
};

// Generalized energy I(t); u = U + R with R = dec.remainder.
double generalized_energy(const Field& u, const Decomposition& dec,
                          const Localizers& loc, const MorawetzWeight& w);

// D = ||grad w||^2 + sum_j ||w Phi_j||^2 / lambda_j^2
double difference_functional(const Field& w, const Localizers& loc,
                             const std::vector<double>& lambdas);

struct RateFit {
    double T_est = 0.0;
    std::vector<double> omega_est;      // per bubble
    std::vector<double> lambda_fit_rms; // residual of the linear fit
    double r_exponent = 0.0;            // slope of log||R|| vs log(T-t)
    double r_fit_r2 = 0.0;
    double overlap_slope = 0.0;         // slope of log overlap vs 1/(T-t)
    double overlap_r2 = 0.0;
};
RateFit fit_blowup_rate(const std::vector<double>& times,
                        const std::vector<std::vector<double>>& lambda_jt,
                        const std::vector<double>& r_l2, double T,
                        const std::vector<double>& overlaps = {});

// least-squares line y = a + b x; returns {a, b, r2}
struct LineFit {
    double a = 0.0, b = 0.0, r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

} // namespace mbnls

#endif
