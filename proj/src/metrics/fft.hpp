#pragma once

#include <complex>
#include <vector>

#include "core/tensor.hpp"

namespace bsldm::metrics {

using cplx = std::complex<real>;

// In-place 1-D DFT. Radix-2 iterative FFT for power-of-two lengths, naive
// O(n^2) DFT otherwise (profile sizes are small, correctness over speed).
void fft_1d(std::vector<cplx>& a, bool inverse);

// Forward 2-D DFT of a row-major real image, out has h*w entries.
void dft_2d(const real* img, int h, int w, std::vector<cplx>& out);

}  // namespace bsldm::metrics
