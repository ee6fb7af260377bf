#include "qsm/phantom.hpp"
#include "qsm/error.hpp"
#include "qsm/random.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <random>
#include <set>

namespace qsm {

Volume make_lesion_mask(Grid3 const &grid, LesionSpec const &spec)
{
  for (int a = 0; a < 3; a++) {
    double const c = static_cast<double>(spec.center_vox[a]), r = spec.radii_vox[a];
    if (!(r > 0.)) { throw ValidationError("lesion: radii must be > 0"); }
    if (c - r < 0. || c + r > static_cast<double>(grid.dims[a] - 1)) {
      throw ValidationError("lesion: ellipsoid extends outside the grid");
    }
  }
  Volume mask(grid, Kind::Mask);
  auto const [nx, ny, nz] = grid.dims;
  for (Index k = 0; k < nz; k++) {
    for (Index j = 0; j < ny; j++) {
      for (Index i = 0; i < nx; i++) {
        double const dx = (i - spec.center_vox[0]) / spec.radii_vox[0];
        double const dy = (j - spec.center_vox[1]) / spec.radii_vox[1];
        double const dz = (k - spec.center_vox[2]) / spec.radii_vox[2];
        if (dx * dx + dy * dy + dz * dz <= 1.) { mask(i, j, k) = 1.f; }
      }
    }
  }
  return mask;
}

Volume lesion_chi(Volume const &lesion_mask, double chi_ppm, std::uint64_t seed, bool noise)
{
  requireKind(lesion_mask, Kind::Mask, "lesion_chi");
  Volume       chi(lesion_mask.grid, Kind::Chi);
  double const sd = std::abs(chi_ppm) / 2.;
  std::mt19937_64                  gen(seed);
  std::normal_distribution<double> dist(0., sd > 0. ? sd : 1.);
  for (std::size_t i = 0; i < chi.data.size(); i++) {
    if (lesion_mask.data[i] == 0.f) { continue; }
    double v = chi_ppm;
    if (noise && sd > 0.) { v += dist(gen); }
    chi.data[i] = static_cast<float>(v);
  }
  return chi;
}

Volume simulate_lesion(Volume const &base_field,
                       Volume const &lesion_mask,
                       double chi_ppm,
                       DipoleKernel const &kernel,
                       std::uint64_t seed,
                       bool noise)
{
  requireSameShape(base_field, lesion_mask, "simulate_lesion");
  if (!base_field.grid.sameShape(kernel.grid)) { throw ValidationError("simulate_lesion: grid mismatch"); }
  auto const chi = lesion_chi(lesion_mask, chi_ppm, seed, noise);
  auto const lesion = dipoleConvolve(chi.data, kernel);
  Volume     out(base_field.grid, Kind::Field);
  for (std::size_t i = 0; i < out.data.size(); i++) {
    out.data[i] = static_cast<float>(base_field.data[i] + lesion[i]);
  }
  return out;
}

std::vector<double> defaultSweepValues()
{
  std::vector<double> v;
  for (int i = -7; i <= 7; i++) { v.push_back(i / 5.); }
  return v;
}

double roiMean(Volume const &v, Volume const &mask)
{
  requireSameShape(v, mask, "roi mean");
  double s = 0., n = 0.;
  for (std::size_t i = 0; i < v.data.size(); i++) {
    if (mask.data[i] != 0.f) {
      s += v.data[i];
      n += 1.;
    }
  }
  if (n == 0.) { throw ValidationError("roi mean: mask is empty"); }
  return s / n;
}

Volume sweepField(Volume const &base_field,
                  Volume const &lesion_mask,
                  DipoleKernel const &kernel,
                  SweepOptions const &options,
                  std::size_t index)
{
  return simulate_lesion(base_field, lesion_mask, options.values.at(index), kernel, splitSeed(options.seed, index),
                         options.noise);
}

SweepReport lesion_sweep(Volume const &base_field,
                         Volume const &lesion_mask,
                         DipoleKernel const &kernel,
                         SweepOptions const &options)
{
  if (options.values.empty()) { throw ValidationError("lesion_sweep: no susceptibility values given"); }
  options.params.validate();
  for (auto const &m : options.methods) {
    if (m == "tkd" || m == "tikhonov") { continue; }
    auto const it = options.external.find(m);
    if (it == options.external.end()) {
      throw ValidationError("lesion_sweep: unknown method '" + m + "' (valid: tkd, tikhonov, or an external reconstruction set)");
    }
    if (it->second.size() != options.values.size()) {
      throw ValidationError("lesion_sweep: external method '" + m + "' needs one volume per assigned value");
    }
  }

  SweepReport report;
  report.assigned_ppm = options.values;
  report.methods = options.methods;
  for (std::size_t i = 0; i < options.values.size(); i++) {
    bool const needField = std::any_of(options.methods.begin(), options.methods.end(),
                                       [](auto const &m) { return m == "tkd" || m == "tikhonov"; });
    Volume const field = needField ? sweepField(base_field, lesion_mask, kernel, options, i) : Volume{};
    for (auto const &m : options.methods) {
      double measured;
      if (m == "tkd") {
        measured = roiMean(tkd(field, kernel, options.params), lesion_mask);
      } else if (m == "tikhonov") {
        measured = roiMean(tikhonov(field, kernel, options.params), lesion_mask);
      } else {
        measured = roiMean(options.external.at(m)[i], lesion_mask);
      }
      report.measured_ppm[m].push_back(measured);
    }
  }

  std::set<double> const distinct(options.values.begin(), options.values.end());
  for (auto const &m : options.methods) {
    report.rmse_ppm[m] = sweep_rmse(report.assigned_ppm, report.measured_ppm[m]);
    if (distinct.size() >= 2) { report.regression[m] = linear_regression(report.assigned_ppm, report.measured_ppm[m]); }
  }
  return report;
}

std::string SweepReport::json() const
{
  nlohmann::json j;
  j["assigned_ppm"] = assigned_ppm;
  j["methods"] = methods;
  for (auto const &m : methods) {
    j["measured_ppm"][m] = measured_ppm.at(m);
    j["rmse_ppm"][m] = rmse_ppm.at(m);
    if (auto it = regression.find(m); it != regression.end()) {
      j["regression"][m] = {{"slope", it->second.slope},
                            {"intercept", it->second.intercept},
                            {"r_squared", it->second.r_squared}};
    }
  }
  return j.dump(2) + "\n";
}

std::string SweepReport::csv() const
{
  std::string out = "assigned,method,measured\n";
  for (auto const &m : methods) {
    auto const &vals = measured_ppm.at(m);
    for (std::size_t i = 0; i < assigned_ppm.size(); i++) {
      out += fmt::format("{},{},{}\n", assigned_ppm[i], m, vals[i]);
    }
  }
  return out;
}

} // namespace qsm
