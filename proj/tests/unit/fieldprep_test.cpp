#include "oracles.hpp"
#include "qsm/dipole.hpp"
#include "qsm/error.hpp"
#include "qsm/fieldprep.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace qsm;

namespace {

// RMSE of a - b over the mask after removing the mean difference.
double rmseUpToConstant(std::vector<double> const &a, std::vector<double> const &b, Volume const &mask)
{
  double off = 0., n = 0.;
  for (std::size_t i = 0; i < a.size(); i++) {
    if (mask.data[i] != 0.f) {
      off += a[i] - b[i];
      n += 1.;
    }
  }
  off /= n;
  double se = 0.;
  for (std::size_t i = 0; i < a.size(); i++) {
    if (mask.data[i] != 0.f) { se += std::pow(a[i] - b[i] - off, 2); }
  }
  return std::sqrt(se / n);
}

Volume wrap(std::vector<double> const &phi, Grid3 const &g)
{
  Volume w(g, Kind::Phase);
  for (std::size_t i = 0; i < phi.size(); i++) {
    w.data[i] = static_cast<float>(phi[i] - 2. * std::numbers::pi * std::floor((phi[i] + std::numbers::pi) / (2. * std::numbers::pi)));
  }
  return w;
}

std::vector<double> data(Volume const &v) { return {v.data.begin(), v.data.end()}; }

double rms(std::vector<double> const &v, Volume const &mask)
{
  double s = 0., n = 0.;
  for (std::size_t i = 0; i < v.size(); i++) {
    if (mask.data[i] != 0.f) {
      s += v[i] * v[i];
      n += 1.;
    }
  }
  return std::sqrt(s / n);
}

Volume masked(Volume v, Volume const &mask)
{
  for (std::size_t i = 0; i < v.data.size(); i++) { v.data[i] *= mask.data[i]; }
  return v;
}

} // namespace

namespace {

// Quadratic bowl with peak 6 pi at the grid centre, reaching 0 at radius R and flat beyond.
std::vector<double> quadraticPhase(Grid3 const &g, double R)
{
  std::vector<double> phi(g.size());
  Eigen::Vector3d const c(g.dims[0] / 2., g.dims[1] / 2., g.dims[2] / 2.);
  for (Index k = 0; k < g.dims[2]; k++) {
    for (Index j = 0; j < g.dims[1]; j++) {
      for (Index i = 0; i < g.dims[0]; i++) {
        double const r2 = (Eigen::Vector3d(i, j, k) - c).squaredNorm();
        phi[g.index(i, j, k)] = 6. * std::numbers::pi * std::max(0., 1. - r2 / (R * R));
      }
    }
  }
  return phi;
}

} // namespace

TEST_CASE("laplacian_unwrap", "[fieldprep]")
{
  Grid3 const g({64, 64, 64});
  auto const  mask = oracle::sphereMask(g, {32., 32., 32.}, 24.);
  auto const  interior = oracle::sphereMask(g, {32., 32., 32.}, 20.);

  SECTION("Smooth unwrapped input comes back up to a constant")
  {
    auto phi = oracle::smoothRandom(g, 3, 4., 1.4);
    phi.kind = Kind::Phase;
    auto const out = laplacian_unwrap(phi, mask);
    CHECK(rmseUpToConstant(data(out), data(phi), interior) < 1e-3);
  }

  SECTION("Wrapped quadratic is recovered")
  {
    auto const phi = quadraticPhase(g, 28.);
    auto const out = laplacian_unwrap(wrap(phi, g), mask);
    CHECK(rmseUpToConstant(data(out), phi, interior) < 1e-2);
  }

  SECTION("Zero phase")
  {
    auto const out = laplacian_unwrap(Volume(g, Kind::Phase), mask);
    CHECK(std::all_of(out.data.begin(), out.data.end(), [](float f) { return f == 0.f; }));
  }

  SECTION("A constant offset is discarded")
  {
    auto phi = oracle::smoothRandom(g, 4, 4., 1.);
    phi.kind = Kind::Phase;
    auto shifted = phi;
    for (auto &v : shifted.data) { v += 0.5f; }
    auto const a = laplacian_unwrap(phi, mask), b = laplacian_unwrap(shifted, mask);
    CHECK(oracle::relL2(data(b), data(a)) < 1e-5);
  }

  SECTION("Errors")
  {
    CHECK_THROWS_AS(laplacian_unwrap(Volume(g, Kind::Phase), Volume(g, Kind::Mask)), ValidationError);
    CHECK_THROWS_AS(laplacian_unwrap(Volume(g, Kind::Field), mask), ValidationError);
  }
}

TEST_CASE("smv_background_removal", "[fieldprep]")
{
  Grid3 const g({64, 64, 64});
  auto const  mask = oracle::sphereMask(g, {32., 32., 32.}, 26.);
  PrepParams  params;
  params.smv_radii_mm = {8., 7., 6., 5., 4., 3., 2., 1.};
  auto const kernel = build_kernel(g);

  SECTION("Field of an external source is suppressed")
  {
    auto src = oracle::sphereMask(g, {32., 32., 0.}, 4.);
    src.kind = Kind::Chi;
    auto const field = forward_field(src, kernel);
    auto const out = smv_background_removal(field, mask, params);
    CHECK(rms(data(out.local), out.mask) < 0.05 * rms(data(field), out.mask));
  }

  SECTION("Field of an internal source is preserved")
  {
    auto chi = oracle::smoothRandom(g, 8, 2., 0.1);
    auto const inner = oracle::sphereMask(g, {32., 32., 32.}, 10.);
    chi = masked(chi, inner);
    auto const field = forward_field(chi, kernel);
    auto const out = smv_background_removal(field, mask, params);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < field.data.size(); i++) {
      if (out.mask.data[i] != 0.f) {
        a.push_back(out.local.data[i]);
        b.push_back(field.data[i]);
      }
    }
    CHECK(oracle::relL2(a, b) < 0.15);
  }

  SECTION("Zero field and subset mask")
  {
    auto const out = smv_background_removal(Volume(g, Kind::Field), mask, params);
    CHECK(std::all_of(out.local.data.begin(), out.local.data.end(), [](float f) { return f == 0.f; }));
    CHECK(maskCount(out.mask) > 0);
    CHECK(maskCount(out.mask) < maskCount(mask));
    for (std::size_t i = 0; i < mask.data.size(); i++) {
      if (out.mask.data[i] != 0.f) { REQUIRE(mask.data[i] == 1.f); }
    }
  }

  SECTION("Applying twice changes little")
  {
    auto chi = masked(oracle::smoothRandom(g, 9, 2., 0.1), oracle::sphereMask(g, {32., 32., 32.}, 10.));
    auto const once = smv_background_removal(forward_field(chi, kernel), mask, params);
    auto const twice = smv_background_removal(once.local, once.mask, params);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < chi.data.size(); i++) {
      if (twice.mask.data[i] != 0.f) {
        a.push_back(twice.local.data[i]);
        b.push_back(once.local.data[i]);
      }
    }
    CHECK(oracle::relL2(a, b) < 0.02);
  }

  SECTION("Errors")
  {
    PrepParams big = params;
    big.smv_radii_mm = {32.};
    CHECK_THROWS_AS(smv_background_removal(Volume(g, Kind::Field), mask, big), ValidationError);
    PrepParams unsorted = params;
    unsorted.smv_radii_mm = {2., 4.};
    CHECK_THROWS_AS(smv_background_removal(Volume(g, Kind::Field), mask, unsorted), ValidationError);
    auto const tiny = oracle::sphereMask(g, {32., 32., 32.}, 1.5);
    PrepParams wide = params;
    wide.smv_radii_mm = {6., 5.};
    CHECK_THROWS_AS(smv_background_removal(Volume(g, Kind::Field), tiny, wide), ValidationError);
  }
}

TEST_CASE("phase_to_ppm", "[fieldprep]")
{
  Grid3 const g({4, 4, 4});
  PrepParams  p;
  Volume      phase(g, Kind::Phase);
  // 2 pi * gamma * B0 * TE * 1e-6 rad of phase is 1 ppm at 3 T, 25 ms.
  double const onePpm = 2. * std::numbers::pi * kGammaHzPerTesla * 3. * 0.025 * 1e-6;
  CHECK(onePpm == Catch::Approx(20.064).epsilon(1e-4));
  for (auto &v : phase.data) { v = static_cast<float>(onePpm); }
  auto const ppm = phase_to_ppm(phase, p);
  CHECK(ppm.kind == Kind::Field);
  for (float v : ppm.data) { CHECK(v == Catch::Approx(1.).epsilon(1e-6)); }

  p.te_s = 0.05;
  for (float v : phase_to_ppm(phase, p).data) { CHECK(v == Catch::Approx(0.5).epsilon(1e-6)); }

  auto const zero = phase_to_ppm(Volume(g, Kind::Phase), p);
  CHECK(std::all_of(zero.data.begin(), zero.data.end(), [](float f) { return f == 0.f; }));

  p.te_s = 0.;
  CHECK_THROWS_AS(phase_to_ppm(phase, p), ValidationError);
}
