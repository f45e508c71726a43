#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace kws {

std::size_t next_pow2(std::size_t n);

// In-place iterative radix-2 FFT (decimation in time). data.size() must be a
// power of two. Forward transform, e^{-i 2 pi k n / N} convention.
void fft_radix2(std::vector<std::complex<double>>& data);

// |X_k|^2 for k = 0..fft_size/2 of the real frame zero-padded to fft_size.
// fft_size must be a power of two >= frame.size().
std::vector<double> power_spectrum(std::span<const double> frame, std::size_t fft_size);

}  // namespace kws
