#include "radial.hpp"

#include "errors.hpp"

#include <cmath>
#include <cstdlib>

namespace mbnls {

std::vector<double> graded_mesh(int n, double rmax, double grading) {
    if (n < 16 || rmax <= 0.0) throw ValidationError("graded_mesh: bad mesh config");
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) {
        double xi = double(i) / (n - 1);
        r[i] = grading > 0.0 ? rmax * std::sinh(grading * xi) / std::sinh(grading)
                             : rmax * xi;
    }
    r[0] = 0.0;
    r[n - 1] = rmax;
    return r;
}

void fd_weights(double x0, const std::vector<double>& x, int maxorder,
                std::vector<std::vector<double>>& w) {
    // Fornberg (1988) recursion.
    const int nd = int(x.size()) - 1;
    const int m = maxorder;
    w.assign(m + 1, std::vector<double>(x.size(), 0.0));
    double c1 = 1.0;
    double c4 = x[0] - x0;
    w[0][0] = 1.0;
    for (int i = 1; i <= nd; ++i) {
        int mn = std::min(i, m);
        double c2 = 1.0;
        double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j <= i - 1; ++j) {
            double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    w[k][i] = c1 * (k * w[k - 1][i - 1] - c5 * w[k][i - 1]) / c2;
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k)
                w[k][j] = (c4 * w[k][j] - k * w[k - 1][j]) / c3;
            w[0][j] = c4 * w[0][j] / c3;
        }
        c1 = c2;
    }
}

std::vector<double> radial_derivative(const std::vector<double>& r,
                                      const std::vector<double>& f,
                                      int order, int width, Parity parity) {
    const int n = int(r.size());
    const int half = width / 2;
    std::vector<double> out(n, 0.0);
    std::vector<double> xs(width);
    std::vector<std::vector<double>> w;
    const double sign = parity == Parity::Even ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) {
        // stencil indices lo..lo+width-1 in "virtual" coordinates where
        // negative indices mean reflected nodes
        int lo = i - half;
        if (lo + width > n) lo = n - width;
        double acc = 0.0;
        for (int s = 0; s < width; ++s) {
            int j = lo + s;
            xs[s] = j >= 0 ? r[j] : -r[-j];
        }
        fd_weights(r[i], xs, order, w);
        for (int s = 0; s < width; ++s) {
            int j = lo + s;
            double val = j >= 0 ? f[j] : sign * f[-j];
            acc += w[order][s] * val;
        }
        out[i] = acc;
    }
    return out;
}

double radial_integral(const std::vector<double>& r, const std::vector<double>& f,
                       int dim) {
    const int n = int(r.size());
    double acc = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        double w0 = dim == 2 ? 2.0 * M_PI * r[i] : 2.0;
        double w1 = dim == 2 ? 2.0 * M_PI * r[i + 1] : 2.0;
        acc += 0.5 * (r[i + 1] - r[i]) * (w0 * f[i] + w1 * f[i + 1]);
    }
    return acc;
}

double fit_decay_rate(const std::vector<double>& r, const std::vector<double>& f,
                      double r_lo, double r_hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] < r_lo || r[i] > r_hi) continue;
        double a = std::abs(f[i]);
        if (a < 1e-300) continue;
        double y = std::log(a);
        sx += r[i];
        sy += y;
        sxx += r[i] * r[i];
        sxy += r[i] * y;
        ++m;
    }
    if (m < 4) return 0.0;
    double denom = m * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    double slope = (m * sxy - sx * sy) / denom;
    return -slope;
}

} // namespace mbnls
