#pragma once

#include "volume.hpp"

#include <vector>

namespace qsm {

inline constexpr double kGammaHzPerTesla = 42.577478518e6;

struct PrepParams
{
  double              te_s = 0.025;
  double              b0_t = 3.;
  std::vector<double> smv_radii_mm = defaultRadii();
  double              tsvd_threshold = 0.05;

  // 25 mm down to 1 mm in 1 mm steps.
  static std::vector<double> defaultRadii();
  void                       validate() const;
};

// Laplacian unwrapping with spectral Laplacians applied in k-space. Output is masked.
Volume laplacian_unwrap(Volume const &phase, Volume const &mask);

struct BackgroundRemoval
{
  Volume local;
  Volume mask;
};

/*
 * V-SHARP: each voxel of the eroded mask takes the high-pass (1 - SMV) of the largest radius whose
 * sphere fits inside the brain mask, then the combined map is deconvolved by the largest-radius
 * (1 - SMV) kernel with truncation below tsvd_threshold.
 */
BackgroundRemoval smv_background_removal(Volume const &field, Volume const &mask, PrepParams const &params);

Volume phase_to_ppm(Volume const &phase, PrepParams const &params);

// Normalized spherical kernel of the given radius (mm) on the grid, in k-space (real, even).
std::vector<double> smvKernel(Grid3 const &grid, double radius_mm);

} // namespace qsm
