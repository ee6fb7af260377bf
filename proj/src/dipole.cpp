#include "qsm/dipole.hpp"
#include "qsm/error.hpp"
#include "qsm/fft.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

namespace qsm {

DipoleKernel build_kernel(Grid3 const &grid, Eigen::Vector3d const &b0)
{
  double const n = b0.norm();
  if (!(n > 0.) || !std::isfinite(n)) { throw ValidationError("dipole kernel: b0 direction must be non-zero"); }
  for (auto d : grid.dims) {
    if (d < 2) { throw ValidationError("dipole kernel: every grid dimension must be >= 2"); }
  }
  Eigen::Vector3d const h = b0 / n;
  auto const [nx, ny, nz] = grid.dims;

  auto value = [&h](double kx, double ky, double kz) {
    double const k2 = kx * kx + ky * ky + kz * kz;
    double const kh = kx * h[0] + ky * h[1] + kz * h[2];
    return k2 > 0. ? 1. / 3. - kh * kh / k2 : 0.;
  };
  // A Nyquist sample stands for both +n/2 and -n/2. Averaging over the two keeps the kernel exactly
  // even on every grid, so the field of a real chi is real for any b0.
  auto freqs = [](Index i, Index n, double vox) {
    double const f = fft::freqIndex(i, n) / (n * vox);
    return 2 * i == n ? std::array{f, -f} : std::array{f, f};
  };

  DipoleKernel K{.grid = grid.withB0(h), .b0 = h, .values = std::vector<double>(static_cast<std::size_t>(grid.size()))};
  for (Index k = 0; k < nz; k++) {
    auto const kz = freqs(k, nz, grid.voxel_mm[2]);
    for (Index j = 0; j < ny; j++) {
      auto const ky = freqs(j, ny, grid.voxel_mm[1]);
      for (Index i = 0; i < nx; i++) {
        auto const kx = freqs(i, nx, grid.voxel_mm[0]);
        double     sum = 0.;
        for (double z : kz) {
          for (double y : ky) {
            for (double x : kx) { sum += value(x, y, z); }
          }
        }
        K.values[grid.index(i, j, k)] = sum / 8.;
      }
    }
  }
  // Copy one half onto the other so D(k) == D(-k) holds bitwise, not just up to summation order.
  for (Index k = 0; k < nz; k++) {
    for (Index j = 0; j < ny; j++) {
      for (Index i = 0; i < nx; i++) {
        auto const here = grid.index(i, j, k), there = grid.index((nx - i) % nx, (ny - j) % ny, (nz - k) % nz);
        if (there < here) { K.values[here] = K.values[there]; }
      }
    }
  }
  return K;
}

std::vector<double> dipoleConvolve(std::span<float const> chi, DipoleKernel const &kernel)
{
  auto const &dims = kernel.grid.dims;
  auto        k = fft::forward(dims, chi);
  for (std::size_t i = 0; i < k.size(); i++) { k[i] *= kernel.values[i]; }
  fft::inverse(dims, k);

  std::vector<double> out(k.size());
  double              maxRe = 0., maxIm = 0.;
  for (std::size_t i = 0; i < k.size(); i++) {
    out[i] = k[i].real();
    maxRe = std::max(maxRe, std::abs(k[i].real()));
    maxIm = std::max(maxIm, std::abs(k[i].imag()));
  }
  if (maxIm > 1e-6 * maxRe + 1e-300) { throw Error("dipole convolution left an imaginary residue"); }
  return out;
}

Volume forward_field(Volume const &chi, DipoleKernel const &kernel)
{
  requireKind(chi, Kind::Chi, "forward_field");
  if (!chi.grid.sameShape(kernel.grid)) { throw ValidationError("forward_field: grid mismatch"); }
  auto const field = dipoleConvolve(chi.data, kernel);
  return toVolume(chi.grid.withB0(kernel.b0), Kind::Field, field);
}

void requireRotation(Rotation const &R)
{
  if (!R.allFinite() || ((R.transpose() * R) - Rotation::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ValidationError("rotation matrix is not orthonormal");
  }
  if (std::abs(R.determinant() - 1.) > 1e-9) { throw ValidationError("rotation matrix must have determinant +1"); }
}

Rotation eulerZYX(double z, double y, double x)
{
  Rotation Rz, Ry, Rx;
  Rz << std::cos(z), -std::sin(z), 0., std::sin(z), std::cos(z), 0., 0., 0., 1.;
  Ry << std::cos(y), 0., std::sin(y), 0., 1., 0., -std::sin(y), 0., std::cos(y);
  Rx << 1., 0., 0., 0., std::cos(x), -std::sin(x), 0., std::sin(x), std::cos(x);
  return Rz * Ry * Rx;
}

namespace {

// Coordinates within this distance of a lattice point are treated as on it, so axis-aligned
// rotations reproduce the input exactly.
constexpr double kSnap = 1e-9;

double snap(double x)
{
  double const r = std::round(x);
  return std::abs(x - r) < kSnap ? r : x;
}

} // namespace

Volume rotate_volume(Volume const &v, Rotation const &R)
{
  requireRotation(R);
  auto const &g = v.grid;
  auto const [nx, ny, nz] = g.dims;
  Eigen::Vector3d const c((nx - 1) / 2., (ny - 1) / 2., (nz - 1) / 2.);
  Rotation const        Rt = R.transpose();

  auto sample = [&](Index i, Index j, Index k) -> double {
    if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) { return 0.; }
    return v(i, j, k);
  };

  Volume out(g, v.kind);
  for (Index k = 0; k < nz; k++) {
    for (Index j = 0; j < ny; j++) {
      for (Index i = 0; i < nx; i++) {
        Eigen::Vector3d const p = (Eigen::Vector3d(i, j, k) - c).cwiseProduct(g.voxel_mm);
        Eigen::Vector3d const s = (Rt * p).cwiseQuotient(g.voxel_mm) + c;
        double const          x = snap(s[0]), y = snap(s[1]), z = snap(s[2]);
        Index const           x0 = static_cast<Index>(std::floor(x)), y0 = static_cast<Index>(std::floor(y)),
                    z0 = static_cast<Index>(std::floor(z));
        double const fx = x - x0, fy = y - y0, fz = z - z0;

        double val = 0.;
        for (int dz = 0; dz < 2; dz++) {
          double const wz = dz ? fz : 1. - fz;
          if (wz == 0.) { continue; }
          for (int dy = 0; dy < 2; dy++) {
            double const wy = dy ? fy : 1. - fy;
            if (wy == 0.) { continue; }
            for (int dx = 0; dx < 2; dx++) {
              double const wx = dx ? fx : 1. - fx;
              if (wx == 0.) { continue; }
              val += wx * wy * wz * sample(x0 + dx, y0 + dy, z0 + dz);
            }
          }
        }
        if (v.kind == Kind::Mask) { val = val >= 0.5 ? 1. : 0.; }
        out(i, j, k) = static_cast<float>(val);
      }
    }
  }
  return out;
}

} // namespace qsm
