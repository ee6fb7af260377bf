#pragma once

#include "dipole.hpp"
#include "volume.hpp"

#include <span>
#include <vector>

namespace qsm {

struct InversionParams
{
  double tkd_threshold = 0.1;
  double tikhonov_alpha = 1e-3;
  double cosmos_threshold = 1e-6;

  void validate() const;
};

// Thresholded k-space division. Below the threshold the kernel is clamped to sign(D) * t.
Volume tkd(Volume const &field, DipoleKernel const &kernel, InversionParams const &params);

// chi(k) = D delta(k) / (D^2 + alpha)
Volume tikhonov(Volume const &field, DipoleKernel const &kernel, InversionParams const &params);

// Per-k least squares over >= 2 head orientations.
Volume cosmos(std::span<Volume const> fields, std::span<DipoleKernel const> kernels, InversionParams const &params);

} // namespace qsm
