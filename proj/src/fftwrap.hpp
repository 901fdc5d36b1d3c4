#ifndef MBNLS_FFTWRAP_HPP
#define MBNLS_FFTWRAP_HPP

#include <complex>
#include <cstddef>

namespace mbnls {

// In-place complex DFTs on N or NxN data (N a power of two).
// Plans are cached per (dim, N, sign) behind a mutex; execution is
// thread-safe, so concurrent trajectories can share the cache.
void fft_forward(int dim, int n, std::complex<double>* data);

// Inverse transform including the 1/N^d normalization.
void fft_inverse(int dim, int n, std::complex<double>* data);

} // namespace mbnls

#endif
