#ifndef MBNLS_RADIAL_HPP
#define MBNLS_RADIAL_HPP

#include <vector>

namespace mbnls {

// sinh-graded mesh on [0, rmax], denser toward r = 0. grading = 0 gives a
// uniform mesh.
std::vector<double> graded_mesh(int n, double rmax, double grading);

// Fornberg finite-difference weights: given nodes x[0..m-1] and a point x0,
// fills w[order][i] (order = 0..maxorder) with the weights of d^order/dx^order.
void fd_weights(double x0, const std::vector<double>& x, int maxorder,
                std::vector<std::vector<double>>& w);

// Parity of a radial sample set under r -> -r, used to reflect stencils
// across the origin.
enum class Parity { Even, Odd };

// d^order/dr^order of samples f on mesh r, stencil of `width` nodes
// (odd, e.g. 9 or 11), reflecting across r=0 with the given parity.
std::vector<double> radial_derivative(const std::vector<double>& r,
                                      const std::vector<double>& f,
                                      int order, int width, Parity parity);

// Trapezoidal quadrature of f against the radial measure of dimension d
// (d=1: 2*dr over the half-line; d=2: 2*pi*r dr).
double radial_integral(const std::vector<double>& r, const std::vector<double>& f,
                       int dim);

// Least-squares fit of the tail decay rate delta in |f| ~ C exp(-delta r)
// over r in [r_lo, r_hi]; returns 0 if the tail is below round-off.
double fit_decay_rate(const std::vector<double>& r, const std::vector<double>& f,
                      double r_lo, double r_hi);

} // namespace mbnls

#endif
