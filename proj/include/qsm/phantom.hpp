#pragma once

#include "dipole.hpp"
#include "invert.hpp"
#include "lossmetrics.hpp"
#include "volume.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qsm {

struct LesionSpec
{
  std::array<Index, 3> center_vox{0, 0, 0};
  Eigen::Vector3d      radii_vox{1., 1., 1.};
  double               chi_assigned_ppm = 0.;
  std::uint64_t        noise_seed = 0;
};

// Ellipsoid sum(((x_i - c_i) / r_i)^2) <= 1; throws if it does not fit inside the grid.
Volume make_lesion_mask(Grid3 const &grid, LesionSpec const &spec);

// chi_ppm plus N(0, |chi_ppm|/2) noise on every masked voxel, zero elsewhere.
Volume lesion_chi(Volume const &lesion_mask, double chi_ppm, std::uint64_t seed, bool noise = true);

// base_field + forward_field(lesion_chi(...)).
Volume simulate_lesion(Volume const &base_field,
                       Volume const &lesion_mask,
                       double chi_ppm,
                       DipoleKernel const &kernel,
                       std::uint64_t seed,
                       bool noise = true);

// -1.4 to +1.4 ppm in 0.2 ppm steps (15 values).
std::vector<double> defaultSweepValues();

struct SweepOptions
{
  std::vector<std::string> methods{"tkd", "tikhonov"};
  std::vector<double>      values = defaultSweepValues();
  InversionParams          params;
  std::uint64_t            seed = 0;
  bool                     noise = true;
  // Reconstructions produced elsewhere (e.g. by a trained network), one per assigned value.
  std::map<std::string, std::vector<Volume>> external;
};

struct SweepReport
{
  std::vector<double>                        assigned_ppm;
  std::vector<std::string>                   methods;
  std::map<std::string, std::vector<double>> measured_ppm;
  std::map<std::string, double>              rmse_ppm;
  // Present only when at least two distinct values were swept.
  std::map<std::string, RegressionResult> regression;

  std::string json() const;
  // assigned,method,measured
  std::string csv() const;
};

double roiMean(Volume const &v, Volume const &mask);

// The simulated field for sweep point `index`, as fed to every method. Its noise seed is
// splitSeed(options.seed, index).
Volume sweepField(Volume const &base_field,
                  Volume const &lesion_mask,
                  DipoleKernel const &kernel,
                  SweepOptions const &options,
                  std::size_t index);

SweepReport lesion_sweep(Volume const &base_field,
                         Volume const &lesion_mask,
                         DipoleKernel const &kernel,
                         SweepOptions const &options);

} // namespace qsm
