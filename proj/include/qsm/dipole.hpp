#pragma once

#include "volume.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace qsm {

/*
 * Unit dipole response on the unshifted DFT frequency grid,
 * D(k) = 1/3 - (k.b0)^2 / |k|^2 with D(0) = 0. Real and even in k.
 */
struct DipoleKernel
{
  Grid3               grid;
  Eigen::Vector3d     b0;
  std::vector<double> values;

  double operator()(Index i, Index j, Index k) const { return values[grid.index(i, j, k)]; }
};

DipoleKernel build_kernel(Grid3 const &grid, Eigen::Vector3d const &b0);
inline DipoleKernel build_kernel(Grid3 const &grid) { return build_kernel(grid, grid.b0); }

// Field in double precision, real(IFFT(D * FFT(chi))).
std::vector<double> dipoleConvolve(std::span<float const> chi, DipoleKernel const &kernel);
Volume              forward_field(Volume const &chi, DipoleKernel const &kernel);

using Rotation = Eigen::Matrix3d;

// Throws unless R is orthonormal with det +1 (both to 1e-9).
void     requireRotation(Rotation const &R);
// R = Rz(z) * Ry(y) * Rx(x), angles in radians.
Rotation eulerZYX(double z, double y, double x);

/*
 * out(p) = in(R^T p) about the grid centre, trilinear, zero outside the source FOV. Masks are
 * re-binarized at 0.5 so they stay masks.
 */
Volume rotate_volume(Volume const &v, Rotation const &R);

} // namespace qsm
