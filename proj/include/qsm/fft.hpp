#pragma once

#include "volume.hpp"

#include <complex>
#include <span>
#include <vector>

namespace qsm::fft {

using Cx = std::complex<double>;

// In-place 3D transforms on an x-fastest array. The inverse is scaled by 1/N.
void forward(Dims const &dims, std::span<Cx> data);
void inverse(Dims const &dims, std::span<Cx> data);

std::vector<Cx> forward(Dims const &dims, std::span<float const> data);
std::vector<Cx> forward(Dims const &dims, std::span<double const> data);

// Signed DFT frequency index of sample i on an axis of length n (numpy fftfreq ordering, times n).
inline Index freqIndex(Index i, Index n) { return i < (n + 1) / 2 ? i : i - n; }

// Caps FFTW worker threads for plans created after the call.
void setThreads(int n);

} // namespace qsm::fft
