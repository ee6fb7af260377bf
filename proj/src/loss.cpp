#include "qsm/error.hpp"
#include "qsm/lossmetrics.hpp"

#include <algorithm>
#include <cmath>

namespace qsm {

LossBreakdown LossBreakdown::combine(double model, double l1, double gradient, LossWeights const &w)
{
  return LossBreakdown{.model = model,
                       .l1 = l1,
                       .gradient = gradient,
                       .total = w.model * model + w.l1 * l1 + w.gradient * gradient,
                       .weights = w};
}

double loss_model(Volume const &chi, Volume const &field, Volume const &mask, DipoleKernel const &kernel)
{
  requireKind(mask, Kind::Mask, "loss_model");
  requireSameShape(chi, field, "loss_model");
  requireSameShape(chi, mask, "loss_model");
  if (!chi.grid.sameShape(kernel.grid)) { throw ValidationError("loss_model: grid mismatch"); }

  // Fields are stored as float32, so compare against the model at the same precision; a field made
  // by forward_field then fits exactly.
  auto const model = dipoleConvolve(chi.data, kernel);
  double     sum = 0.;
  for (std::size_t i = 0; i < model.size(); i++) {
    double const m = static_cast<float>(model[i]);
    sum += std::abs(mask.data[i] * (field.data[i] - m));
  }
  return sum / static_cast<double>(model.size());
}

double loss_l1(Volume const &chi, Volume const &label)
{
  requireSameShape(chi, label, "loss_l1");
  double sum = 0.;
  for (std::size_t i = 0; i < chi.data.size(); i++) {
    sum += std::abs(static_cast<double>(chi.data[i]) - label.data[i]);
  }
  return sum / static_cast<double>(chi.data.size());
}

double loss_gradient(Volume const &chi, Volume const &label)
{
  requireSameShape(chi, label, "loss_gradient");
  auto const [nx, ny, nz] = chi.grid.dims;
  double const n = static_cast<double>(chi.size());

  auto diff = [](Volume const &v, Index i, Index j, Index k, int axis) {
    auto const &d = v.grid.dims;
    Index       ii = i, jj = j, kk = k;
    if (axis == 0) { ii = std::min(i + 1, d[0] - 1); }
    if (axis == 1) { jj = std::min(j + 1, d[1] - 1); }
    if (axis == 2) { kk = std::min(k + 1, d[2] - 1); }
    return static_cast<double>(v(ii, jj, kk)) - v(i, j, k);
  };

  double total = 0.;
  for (int axis = 0; axis < 3; axis++) {
    double sum = 0.;
    for (Index k = 0; k < nz; k++) {
      for (Index j = 0; j < ny; j++) {
        for (Index i = 0; i < nx; i++) {
          sum += std::abs(std::abs(diff(chi, i, j, k, axis)) - std::abs(diff(label, i, j, k, axis)));
        }
      }
    }
    total += sum / n;
  }
  return total;
}

LossBreakdown total_loss(Volume const &chi,
                         Volume const &label,
                         Volume const &field,
                         Volume const &mask,
                         DipoleKernel const &kernel,
                         LossWeights const &weights)
{
  return LossBreakdown::combine(
    loss_model(chi, field, mask, kernel), loss_l1(chi, label), loss_gradient(chi, label), weights);
}

} // namespace qsm
