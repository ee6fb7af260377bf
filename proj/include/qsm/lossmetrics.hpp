#pragma once

#include "dipole.hpp"
#include "volume.hpp"

#include <span>
#include <vector>

namespace qsm {

struct LossWeights
{
  double model = 0.5;
  double l1 = 1.;
  double gradient = 0.1;
};

struct LossBreakdown
{
  double      model = 0.;
  double      l1 = 0.;
  double      gradient = 0.;
  double      total = 0.;
  LossWeights weights;

  static LossBreakdown combine(double model, double l1, double gradient, LossWeights const &w = {});
};

// All losses are voxel-count normalized L1 norms.
double        loss_model(Volume const &chi, Volume const &field, Volume const &mask, DipoleKernel const &kernel);
double        loss_l1(Volume const &chi, Volume const &label);
// Forward differences, replicate boundary, summed over the three axes.
double        loss_gradient(Volume const &chi, Volume const &label);
LossBreakdown total_loss(Volume const &chi,
                         Volume const &label,
                         Volume const &field,
                         Volume const &mask,
                         DipoleKernel const &kernel,
                         LossWeights const &weights = {});

inline constexpr double kPsnrCap = 300.;
inline constexpr int    kLogSize = 15;
inline constexpr double kLogSigma = 1.5;
inline constexpr int    kSsimRadius = 5;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

struct Metrics
{
  double psnr_db = 0.;
  double nrmse = 0.;
  double hfen = 0.;
  double ssim = 0.;
};

/*
 * Image quality against a reference over the mask. HFEN and SSIM filter the masked volumes with
 * zero padding; the dynamic range for pSNR and SSIM is the reference max - min inside the mask.
 */
Metrics quality_metrics(Volume const &recon, Volume const &reference, Volume const &mask);

// 'same'-size separable filter with zero padding; each kernel has odd length and is centred.
std::vector<double> separableFilter(std::span<double const> in,
                                    Dims const &dims,
                                    std::span<double const> kx,
                                    std::span<double const> ky,
                                    std::span<double const> kz);

struct RegressionResult
{
  double slope = 0.;
  double intercept = 0.;
  double r_squared = 0.;
};

RegressionResult linear_regression(std::span<double const> xs, std::span<double const> ys);
double           sweep_rmse(std::span<double const> assigned, std::span<double const> measured);

} // namespace qsm
