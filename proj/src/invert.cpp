#include "qsm/invert.hpp"
#include "qsm/error.hpp"
#include "qsm/fft.hpp"

#include <cmath>
#include <string>

namespace qsm {

void InversionParams::validate() const
{
  if (!(tkd_threshold > 0. && tkd_threshold < 1.)) { throw ValidationError("invert: tkd_threshold must be in (0, 1)"); }
  if (!(tikhonov_alpha > 0.)) { throw ValidationError("invert: tikhonov_alpha must be > 0"); }
  if (!(cosmos_threshold >= 0.)) { throw ValidationError("invert: cosmos_threshold must be >= 0"); }
}

namespace {

void checkInput(Volume const &field, DipoleKernel const &kernel, char const *what)
{
  requireKind(field, Kind::Field, what);
  if (!field.grid.sameShape(kernel.grid)) { throw ValidationError(std::string(what) + ": grid mismatch"); }
}

template <typename Filter>
Volume filtered(Volume const &field, Filter &&filter)
{
  auto const &dims = field.grid.dims;
  auto        k = fft::forward(dims, field.data);
  for (std::size_t i = 0; i < k.size(); i++) { k[i] *= filter(i); }
  fft::inverse(dims, k);
  Volume chi(field.grid, Kind::Chi);
  for (std::size_t i = 0; i < k.size(); i++) { chi.data[i] = static_cast<float>(k[i].real()); }
  return chi;
}

} // namespace

Volume tkd(Volume const &field, DipoleKernel const &kernel, InversionParams const &params)
{
  params.validate();
  checkInput(field, kernel, "tkd");
  double const t = params.tkd_threshold;
  return filtered(field, [&](std::size_t i) {
    double const d = kernel.values[i];
    if (std::abs(d) > t) { return 1. / d; }
    return d > 0. ? 1. / t : (d < 0. ? -1. / t : 0.);
  });
}

Volume tikhonov(Volume const &field, DipoleKernel const &kernel, InversionParams const &params)
{
  params.validate();
  checkInput(field, kernel, "tikhonov");
  double const a = params.tikhonov_alpha;
  return filtered(field, [&](std::size_t i) {
    double const d = kernel.values[i];
    return d / (d * d + a);
  });
}

Volume cosmos(std::span<Volume const> fields, std::span<DipoleKernel const> kernels, InversionParams const &params)
{
  params.validate();
  if (fields.size() < 2) { throw ValidationError("cosmos: needs at least 2 orientations"); }
  if (fields.size() != kernels.size()) { throw ValidationError("cosmos: one kernel per field is required"); }
  for (std::size_t o = 0; o < fields.size(); o++) {
    checkInput(fields[o], kernels[o], "cosmos");
    requireSameShape(fields[o], fields[0], "cosmos");
  }

  auto const         &dims = fields[0].grid.dims;
  auto const          N = static_cast<std::size_t>(fields[0].size());
  std::vector<fft::Cx> num(N, 0.);
  std::vector<double>  den(N, 0.);
  for (std::size_t o = 0; o < fields.size(); o++) {
    auto const  k = fft::forward(dims, fields[o].data);
    auto const &D = kernels[o].values;
    for (std::size_t i = 0; i < N; i++) {
      num[i] += D[i] * k[i];
      den[i] += D[i] * D[i];
    }
  }
  for (std::size_t i = 0; i < N; i++) { num[i] = den[i] > params.cosmos_threshold ? num[i] / den[i] : 0.; }
  fft::inverse(dims, num);

  Volume chi(fields[0].grid, Kind::Chi);
  for (std::size_t i = 0; i < N; i++) { chi.data[i] = static_cast<float>(num[i].real()); }
  return chi;
}

} // namespace qsm
