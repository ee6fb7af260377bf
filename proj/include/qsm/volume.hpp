#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qsm {

using Index = std::int64_t;
using Dims = std::array<Index, 3>;

/*
 * Grid geometry. Voxel sizes are in mm; b0 is the unit main-field direction in grid axes.
 */
struct Grid3
{
  Dims            dims{1, 1, 1};
  Eigen::Vector3d voxel_mm{1., 1., 1.};
  Eigen::Vector3d b0{0., 0., 1.};

  Grid3() = default;
  // Validates sizes and normalizes b0.
  Grid3(Dims d, Eigen::Vector3d const &vox = Eigen::Vector3d::Ones(), Eigen::Vector3d const &b0dir = Eigen::Vector3d::UnitZ());

  Index size() const { return dims[0] * dims[1] * dims[2]; }
  Index index(Index i, Index j, Index k) const { return i + dims[0] * (j + dims[1] * k); }
  Grid3 withB0(Eigen::Vector3d const &dir) const;
  // Same dims and voxel sizes; b0 may differ.
  bool sameShape(Grid3 const &other) const;
};

enum class Kind
{
  Chi,
  Field,
  Phase,
  Magnitude,
  Mask
};

std::string_view kindName(Kind k);
Kind             parseKind(std::string_view name);

/*
 * A scalar volume, x-fastest. Storage is float32 so that the on-disk format round-trips bit-exactly;
 * numerical work is done in double by the modules that consume it.
 */
struct Volume
{
  Grid3              grid;
  Kind               kind = Kind::Chi;
  std::vector<float> data;

  Volume() = default;
  Volume(Grid3 const &g, Kind k);
  Volume(Grid3 const &g, Kind k, std::vector<float> values);

  Index size() const { return grid.size(); }
  float &operator()(Index i, Index j, Index k) { return data[grid.index(i, j, k)]; }
  float  operator()(Index i, Index j, Index k) const { return data[grid.index(i, j, k)]; }

  // Throws ValidationError if length, finiteness or mask contents are wrong.
  void validate() const;
};

void   requireSameShape(Volume const &a, Volume const &b, std::string_view what);
void   requireKind(Volume const &v, Kind k, std::string_view what);
Index  maskCount(Volume const &mask);
Volume toVolume(Grid3 const &g, Kind k, std::span<double const> values);

// `<base>.f32` payload and `<base>.json` sidecar. `path` may name either file or the bare base.
std::filesystem::path volumeBase(std::filesystem::path const &path);
Volume                load_volume(std::filesystem::path const &path);
void                  save_volume(Volume const &v, std::filesystem::path const &path);

struct MaskedStats
{
  double mean, std, min, max, p01, p99;
};

MaskedStats masked_stats(Volume const &v, Volume const &mask);

// Nearest-rank percentile of an ascending-sorted list, p in (0, 100].
double nearestRank(std::span<double const> sorted, double p);

/*
 * Histogram with 0 ppm on a bin edge. Bin b covers (b*w, (b+1)*w] for b >= 0 and [b*w, (b+1)*w) for
 * b < 0, so negation maps bin b onto bin -b-1. Exact zeros go by sign bit.
 */
struct Histogram
{
  double                   bin_width = 0.;
  Index                    first_bin = 0;
  std::vector<double>      bin_edges;
  std::vector<Index>       counts;
  Index                    total = 0;
  std::map<double, double> pct_bounds;

  Index count(Index bin) const;
  Index lastBin() const { return first_bin + static_cast<Index>(counts.size()) - 1; }
};

Index     binOf(double value, double width);
Histogram histogram(Volume const &v, Volume const &mask, double bin_width);
// Largest |counts(b) - counts(-b-1)| over all bins.
Index     mirrorAsymmetry(Histogram const &h);
// Histogram of an arbitrary list of values (e.g. pooled across volumes).
Histogram histogramOf(std::vector<double> values, double bin_width);

} // namespace qsm
