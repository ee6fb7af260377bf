#include "qsm/error.hpp"
#include "qsm/lossmetrics.hpp"

#include <algorithm>
#include <cmath>

namespace qsm {

std::vector<double> separableFilter(std::span<double const> in,
                                    Dims const &dims,
                                    std::span<double const> kx,
                                    std::span<double const> ky,
                                    std::span<double const> kz)
{
  std::vector<double> a(in.begin(), in.end()), b(in.size());
  std::array<std::span<double const>, 3> const kernels{kx, ky, kz};
  std::array<Index, 3> const                  strides{1, dims[0], dims[0] * dims[1]};

  for (int axis = 0; axis < 3; axis++) {
    auto const  &kern = kernels[axis];
    Index const  r = static_cast<Index>(kern.size()) / 2;
    Index const  n = dims[axis], stride = strides[axis];
    for (Index k = 0; k < dims[2]; k++) {
      for (Index j = 0; j < dims[1]; j++) {
        for (Index i = 0; i < dims[0]; i++) {
          Index const pos = axis == 0 ? i : (axis == 1 ? j : k);
          Index const idx = i + dims[0] * (j + dims[1] * k);
          double      sum = 0.;
          for (Index t = -r; t <= r; t++) {
            Index const p = pos - t;
            if (p >= 0 && p < n) { sum += kern[t + r] * a[idx - t * stride]; }
          }
          b[idx] = sum;
        }
      }
    }
    std::swap(a, b);
  }
  return a;
}

namespace {

std::vector<double> gaussian1d(int radius, double sigma)
{
  std::vector<double> g;
  for (int t = -radius; t <= radius; t++) { g.push_back(std::exp(-t * t / (2. * sigma * sigma))); }
  return g;
}

/*
 * Laplacian of Gaussian in the fspecial style: normalized Gaussian times (r^2 - 3 s^2)/s^4, shifted
 * to zero sum. Each piece factors along the axes, so it is applied as four separable passes.
 */
std::vector<double> logFilter(std::vector<double> const &in, Dims const &dims)
{
  int const    r = kLogSize / 2;
  double const s2 = kLogSigma * kLogSigma;
  auto const   g = gaussian1d(r, kLogSigma);
  double       gsum = 0.;
  for (double v : g) { gsum += v; }
  double const norm = gsum * gsum * gsum;

  std::vector<double> qg(g.size());
  for (int t = -r; t <= r; t++) { qg[t + r] = (t * t - s2) / (s2 * s2) * g[t + r]; }
  double qgsum = 0.;
  for (double v : qg) { qgsum += v; }
  // Sum of the un-shifted kernel, spread evenly over all taps.
  double const shift = 3. * qgsum * gsum * gsum / norm / std::pow(static_cast<double>(kLogSize), 3);

  std::vector<double> out(in.size(), 0.);
  for (int axis = 0; axis < 3; axis++) {
    auto const part = separableFilter(in, dims, axis == 0 ? qg : g, axis == 1 ? qg : g, axis == 2 ? qg : g);
    for (std::size_t i = 0; i < out.size(); i++) { out[i] += part[i] / norm; }
  }
  std::vector<double> const box(static_cast<std::size_t>(kLogSize), 1.);
  auto const                boxed = separableFilter(in, dims, box, box, box);
  for (std::size_t i = 0; i < out.size(); i++) { out[i] -= shift * boxed[i]; }
  return out;
}

} // namespace

Metrics quality_metrics(Volume const &recon, Volume const &reference, Volume const &mask)
{
  requireKind(mask, Kind::Mask, "quality_metrics");
  requireSameShape(recon, reference, "quality_metrics");
  requireSameShape(recon, mask, "quality_metrics");
  if (maskCount(mask) == 0) { throw ValidationError("quality_metrics: mask is empty"); }

  auto const          N = recon.data.size();
  auto const         &dims = recon.grid.dims;
  std::vector<double> x(N, 0.), y(N, 0.);
  double              lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  double              se = 0., yy = 0., count = 0.;
  for (std::size_t i = 0; i < N; i++) {
    if (mask.data[i] == 0.f) { continue; }
    x[i] = recon.data[i];
    y[i] = reference.data[i];
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
    se += (x[i] - y[i]) * (x[i] - y[i]);
    yy += y[i] * y[i];
    count += 1.;
  }
  double const range = hi - lo;
  if (!(range > 0.)) { throw ValidationError("quality_metrics: reference is constant inside the mask, pSNR undefined"); }
  if (!(yy > 0.)) { throw ValidationError("quality_metrics: reference norm is zero, NRMSE undefined"); }

  Metrics    m;
  double const mse = se / count;
  m.psnr_db = mse > 0. ? std::min(kPsnrCap, 10. * std::log10(range * range / mse)) : kPsnrCap;
  m.nrmse = std::sqrt(se) / std::sqrt(yy);

  auto const lx = logFilter(x, dims);
  auto const ly = logFilter(y, dims);
  double     dd = 0., ll = 0.;
  for (std::size_t i = 0; i < N; i++) {
    if (mask.data[i] == 0.f) { continue; }
    dd += (lx[i] - ly[i]) * (lx[i] - ly[i]);
    ll += ly[i] * ly[i];
  }
  if (!(ll > 0.)) { throw ValidationError("quality_metrics: reference has no high-frequency content, HFEN undefined"); }
  m.hfen = std::sqrt(dd) / std::sqrt(ll);

  auto g = gaussian1d(kSsimRadius, kSsimSigma);
  double gsum = 0.;
  for (double v : g) { gsum += v; }
  for (auto &v : g) { v /= gsum; }
  std::vector<double> xx2(N), yy2(N), xy(N);
  for (std::size_t i = 0; i < N; i++) {
    xx2[i] = x[i] * x[i];
    yy2[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  auto const   mux = separableFilter(x, dims, g, g, g);
  auto const   muy = separableFilter(y, dims, g, g, g);
  auto const   sxx = separableFilter(xx2, dims, g, g, g);
  auto const   syy = separableFilter(yy2, dims, g, g, g);
  auto const   sxy = separableFilter(xy, dims, g, g, g);
  double const C1 = (kSsimK1 * range) * (kSsimK1 * range);
  double const C2 = (kSsimK2 * range) * (kSsimK2 * range);
  double       ssim = 0.;
  for (std::size_t i = 0; i < N; i++) {
    if (mask.data[i] == 0.f) { continue; }
    double const vx = sxx[i] - mux[i] * mux[i];
    double const vy = syy[i] - muy[i] * muy[i];
    double const cxy = sxy[i] - mux[i] * muy[i];
    ssim += ((2. * mux[i] * muy[i] + C1) * (2. * cxy + C2)) /
            ((mux[i] * mux[i] + muy[i] * muy[i] + C1) * (vx + vy + C2));
  }
  m.ssim = ssim / count;
  return m;
}

RegressionResult linear_regression(std::span<double const> xs, std::span<double const> ys)
{
  if (xs.size() != ys.size()) { throw ValidationError("linear_regression: xs and ys differ in length"); }
  if (xs.size() < 2) { throw ValidationError("linear_regression: needs at least 2 points"); }
  double const n = static_cast<double>(xs.size());
  double       mx = 0., my = 0.;
  for (std::size_t i = 0; i < xs.size(); i++) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0., sxy = 0., syy = 0.;
  for (std::size_t i = 0; i < xs.size(); i++) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.)) { throw ValidationError("linear_regression: xs are all equal"); }

  RegressionResult r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double res = 0.;
  for (std::size_t i = 0; i < xs.size(); i++) {
    double const e = ys[i] - (r.intercept + r.slope * xs[i]);
    res += e * e;
  }
  r.r_squared = syy > 0. ? std::clamp(1. - res / syy, 0., 1.) : 1.;
  return r;
}

double sweep_rmse(std::span<double const> assigned, std::span<double const> measured)
{
  if (assigned.size() != measured.size()) { throw ValidationError("sweep_rmse: length mismatch"); }
  if (assigned.empty()) { throw ValidationError("sweep_rmse: empty lists"); }
  double s = 0.;
  for (std::size_t i = 0; i < assigned.size(); i++) { s += (assigned[i] - measured[i]) * (assigned[i] - measured[i]); }
  return std::sqrt(s / static_cast<double>(assigned.size()));
}

} // namespace qsm
