#include "fftwrap.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace mbnls {

namespace {

std::mutex plan_mutex;

fftw_plan get_plan(int dim, int n, int sign) {
    static std::map<std::tuple<int, int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_tuple(dim, n, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    // Plan on a scratch buffer with FFTW_UNALIGNED so the plan can later be
    // executed on any caller buffer via fftw_execute_dft.
    std::size_t total = dim == 1 ? std::size_t(n) : std::size_t(n) * n;
    fftw_complex* scratch = fftw_alloc_complex(total);
    fftw_plan p;
    if (dim == 1)
        p = fftw_plan_dft_1d(n, scratch, scratch, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    else
        p = fftw_plan_dft_2d(n, n, scratch, scratch, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    cache[key] = p;
    return p;
}

} // namespace

void fft_forward(int dim, int n, std::complex<double>* data) {
    fftw_plan p = get_plan(dim, n, FFTW_FORWARD);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
}

void fft_inverse(int dim, int n, std::complex<double>* data) {
    fftw_plan p = get_plan(dim, n, FFTW_BACKWARD);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
    std::size_t total = dim == 1 ? std::size_t(n) : std::size_t(n) * n;
    double inv = 1.0 / double(total);
    for (std::size_t i = 0; i < total; ++i) data[i] *= inv;
}

} // namespace mbnls
