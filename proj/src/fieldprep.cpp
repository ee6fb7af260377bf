#include "qsm/fieldprep.hpp"
#include "qsm/error.hpp"
#include "qsm/fft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qsm {

std::vector<double> PrepParams::defaultRadii()
{
  std::vector<double> r;
  for (int mm = 25; mm >= 1; mm--) { r.push_back(mm); }
  return r;
}

void PrepParams::validate() const
{
  if (!(te_s > 0.)) { throw ValidationError("prep: te_s must be > 0"); }
  if (!(b0_t > 0.)) { throw ValidationError("prep: b0_t must be > 0"); }
  if (!(tsvd_threshold > 0. && tsvd_threshold <= 0.5)) { throw ValidationError("prep: tsvd_threshold must be in (0, 0.5]"); }
  if (smv_radii_mm.empty()) { throw ValidationError("prep: smv_radii_mm is empty"); }
  for (std::size_t i = 0; i < smv_radii_mm.size(); i++) {
    if (!(smv_radii_mm[i] > 0.)) { throw ValidationError("prep: SMV radii must be > 0"); }
    if (i > 0 && !(smv_radii_mm[i] < smv_radii_mm[i - 1])) {
      throw ValidationError("prep: SMV radii must be strictly descending");
    }
  }
}

namespace {

using fft::Cx;

// Continuous Laplacian -(2 pi |k|)^2. The 7-point stencil would bias the sin/cos identity badly once
// the phase gradient approaches 1 rad per voxel.
std::vector<double> laplacianSymbol(Grid3 const &g)
{
  std::vector<double> L(static_cast<std::size_t>(g.size()));
  auto const [nx, ny, nz] = g.dims;
  auto term = [](Index i, Index n, double h) {
    double const k = 2. * std::numbers::pi * fft::freqIndex(i, n) / (static_cast<double>(n) * h);
    return -k * k;
  };
  for (Index k = 0; k < nz; k++) {
    for (Index j = 0; j < ny; j++) {
      for (Index i = 0; i < nx; i++) {
        L[g.index(i, j, k)] = term(i, nx, g.voxel_mm[0]) + term(j, ny, g.voxel_mm[1]) + term(k, nz, g.voxel_mm[2]);
      }
    }
  }
  return L;
}

std::vector<double> applySymbol(Dims const &dims, std::vector<Cx> k, std::vector<double> const &symbol)
{
  for (std::size_t i = 0; i < k.size(); i++) { k[i] *= symbol[i]; }
  fft::inverse(dims, k);
  std::vector<double> out(k.size());
  std::transform(k.begin(), k.end(), out.begin(), [](Cx c) { return c.real(); });
  return out;
}

void requireNonEmpty(Volume const &mask, char const *what)
{
  if (maskCount(mask) == 0) { throw ValidationError(std::string(what) + ": mask is empty"); }
}

} // namespace

Volume laplacian_unwrap(Volume const &phase, Volume const &mask)
{
  requireKind(phase, Kind::Phase, "laplacian_unwrap");
  requireKind(mask, Kind::Mask, "laplacian_unwrap");
  requireSameShape(phase, mask, "laplacian_unwrap");
  requireNonEmpty(mask, "laplacian_unwrap");

  auto const         &dims = phase.grid.dims;
  auto const          L = laplacianSymbol(phase.grid);
  std::vector<double> s(phase.data.size()), c(phase.data.size());
  for (std::size_t i = 0; i < s.size(); i++) {
    s[i] = std::sin(static_cast<double>(phase.data[i]));
    c[i] = std::cos(static_cast<double>(phase.data[i]));
  }
  auto const lapS = applySymbol(dims, fft::forward(dims, std::span<double const>(s)), L);
  auto const lapC = applySymbol(dims, fft::forward(dims, std::span<double const>(c)), L);

  std::vector<double> lap(s.size());
  for (std::size_t i = 0; i < s.size(); i++) { lap[i] = c[i] * lapS[i] - s[i] * lapC[i]; }

  std::vector<double> inv(L.size());
  std::transform(L.begin(), L.end(), inv.begin(), [](double l) { return l != 0. ? 1. / l : 0.; });
  auto unwrapped = applySymbol(dims, fft::forward(dims, std::span<double const>(lap)), inv);
  for (std::size_t i = 0; i < unwrapped.size(); i++) {
    if (mask.data[i] == 0.f) { unwrapped[i] = 0.; }
  }
  return toVolume(phase.grid, Kind::Phase, unwrapped);
}

std::vector<double> smvKernel(Grid3 const &grid, double radius_mm)
{
  auto const [nx, ny, nz] = grid.dims;
  std::vector<double> sphere(static_cast<std::size_t>(grid.size()), 0.);
  double              n = 0.;
  for (Index k = 0; k < nz; k++) {
    double const z = fft::freqIndex(k, nz) * grid.voxel_mm[2];
    for (Index j = 0; j < ny; j++) {
      double const y = fft::freqIndex(j, ny) * grid.voxel_mm[1];
      for (Index i = 0; i < nx; i++) {
        double const x = fft::freqIndex(i, nx) * grid.voxel_mm[0];
        if (x * x + y * y + z * z <= radius_mm * radius_mm) {
          sphere[grid.index(i, j, k)] = 1.;
          n += 1.;
        }
      }
    }
  }
  for (auto &v : sphere) { v /= n; }
  auto const          k = fft::forward(grid.dims, std::span<double const>(sphere));
  std::vector<double> S(k.size());
  std::transform(k.begin(), k.end(), S.begin(), [](Cx c) { return c.real(); });
  return S;
}

BackgroundRemoval smv_background_removal(Volume const &field, Volume const &mask, PrepParams const &params)
{
  params.validate();
  requireKind(field, Kind::Field, "smv_background_removal");
  requireKind(mask, Kind::Mask, "smv_background_removal");
  requireSameShape(field, mask, "smv_background_removal");
  requireNonEmpty(mask, "smv_background_removal");

  auto const &g = field.grid;
  double      minFov = std::numeric_limits<double>::max();
  for (int i = 0; i < 3; i++) { minFov = std::min(minFov, g.dims[i] * g.voxel_mm[i]); }
  if (!(params.smv_radii_mm.front() < minFov / 2.)) {
    throw ValidationError("smv_background_removal: largest SMV radius must be smaller than half the minimum FOV extent");
  }

  auto const          N = static_cast<std::size_t>(g.size());
  std::vector<double> masked(N);
  for (std::size_t i = 0; i < N; i++) { masked[i] = mask.data[i] != 0.f ? field.data[i] : 0.; }
  auto const fieldK = fft::forward(g.dims, std::span<double const>(masked));
  auto const maskK = fft::forward(g.dims, mask.data);

  std::vector<double> combined(N, 0.);
  std::vector<char>   assigned(N, 0);
  std::vector<double> largest;
  for (double const r : params.smv_radii_mm) {
    auto const S = smvKernel(g, r);
    // A voxel survives erosion when its whole sphere lies inside the mask.
    auto const inside = applySymbol(g.dims, maskK, S);
    auto const smooth = applySymbol(g.dims, fieldK, S);
    for (std::size_t i = 0; i < N; i++) {
      if (!assigned[i] && mask.data[i] != 0.f && inside[i] > 1. - 1e-6) {
        combined[i] = masked[i] - smooth[i];
        assigned[i] = 1;
      }
    }
    if (largest.empty()) { largest = S; }
  }

  Volume eroded(g, Kind::Mask);
  for (std::size_t i = 0; i < N; i++) { eroded.data[i] = assigned[i] ? 1.f : 0.f; }
  if (maskCount(eroded) == 0) { throw ValidationError("smv_background_removal: eroded mask is empty"); }

  std::vector<double> inv(N);
  for (std::size_t i = 0; i < N; i++) {
    double const d = 1. - largest[i];
    inv[i] = std::abs(d) > params.tsvd_threshold ? 1. / d : 0.;
  }
  auto local = applySymbol(g.dims, fft::forward(g.dims, std::span<double const>(combined)), inv);
  for (std::size_t i = 0; i < N; i++) {
    if (!assigned[i]) { local[i] = 0.; }
  }
  return {toVolume(g, Kind::Field, local), std::move(eroded)};
}

Volume phase_to_ppm(Volume const &phase, PrepParams const &params)
{
  requireKind(phase, Kind::Phase, "phase_to_ppm");
  if (!(params.te_s > 0.) || !(params.b0_t > 0.)) { throw ValidationError("phase_to_ppm: te_s and b0_t must be > 0"); }
  double const scale = 1e6 / (2. * std::numbers::pi * kGammaHzPerTesla * params.b0_t * params.te_s);
  Volume       out(phase.grid, Kind::Field);
  for (std::size_t i = 0; i < out.data.size(); i++) { out.data[i] = static_cast<float>(phase.data[i] * scale); }
  return out;
}

} // namespace qsm
