#ifndef MBNLS_GRID_HPP
#define MBNLS_GRID_HPP

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <vector>

namespace mbnls {

using cplx = std::complex<double>;
using Vec2 = std::array<double, 2>; // spatial point/vector; component 1 unused in d=1

// Uniform periodic mesh on [-L, L)^d with the standard spectral wavenumbers
// for period 2L. points must be a power of two >= 8.
struct Grid {
    int dim = 1;
    double extent = 0.0;  // half-width L
    int points = 0;       // N per axis
    double spacing = 0.0; // h = 2L/N

    std::vector<double> node;    // per-axis coordinates, h*j - L
    std::vector<double> wave;    // per-axis wavenumbers (pi/L * signed mode)
    std::vector<double> wave_d;  // wavenumbers for odd-order derivatives (Nyquist zeroed)

    std::size_t size() const {
        return dim == 1 ? std::size_t(points) : std::size_t(points) * points;
    }
    std::size_t index(int ix, int iy) const {
        return std::size_t(ix) * points + iy;
    }
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(int dim, double extent, int points);

// Complex-valued state sampled on a Grid.
struct Field {
    GridPtr grid;
    std::vector<cplx> v;

    Field() = default;
    explicit Field(GridPtr g) : grid(std::move(g)), v(grid->size(), cplx(0.0, 0.0)) {}

    std::size_t size() const { return v.size(); }
    bool finite() const;
};

// Checks grids are compatible (same object or same dim/L/N); throws on mismatch.
void require_same_grid(const Field& a, const Field& b);

Field synthesize(const GridPtr& g, const std::function<cplx(double, double)>& fn);

Field laplacian(const Field& f);
Field gradient(const Field& f, int axis);

// h^d sum f * conj(g)  (trapezoidal = exact uniform quadrature on the torus)
cplx inner(const Field& f, const Field& g);

double norm_l2(const Field& f);
double norm_h1semi(const Field& f);       // ||grad f||_L2, spectral
double norm_sigma_weight(const Field& f); // ||x f||_L2, box-truncated
double norm_lp(const Field& f, double p);
double norm_linf(const Field& f);

struct Norms {
    double l2 = 0.0;
    double h1semi = 0.0;
    double sigma_weight = 0.0;
    std::vector<double> lp; // parallel to the requested exponents
};
Norms norms(const Field& f, const std::vector<double>& pvals = {});

// Trigonometric interpolation of f at the affine targets x = center + scale*y,
// y running over the grid nodes. Targets outside the box evaluate to zero and
// their count is reported through out_escaped (optional).
Field sample_affine(const Field& f, double scale, const Vec2& center,
                    std::size_t* out_escaped = nullptr);

// In-place spectral helpers used by the evolution kernel.
void to_spectral(Field& f);
void to_physical(Field& f);

} // namespace mbnls

#endif
