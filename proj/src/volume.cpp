#include "qsm/volume.hpp"
#include "qsm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace qsm {

namespace {

using json = nlohmann::json;

void swapBytes(std::vector<float> &v)
{
  for (auto &f : v) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    u = ((u & 0xFFu) << 24) | ((u & 0xFF00u) << 8) | ((u >> 8) & 0xFF00u) | (u >> 24);
    std::memcpy(&f, &u, 4);
  }
}

std::filesystem::path withExt(std::filesystem::path base, char const *ext)
{
  base += ext;
  return base;
}

} // namespace

Grid3::Grid3(Dims d, Eigen::Vector3d const &vox, Eigen::Vector3d const &b0dir)
  : dims{d}
  , voxel_mm{vox}
{
  for (int i = 0; i < 3; i++) {
    if (dims[i] < 1) { throw ValidationError("grid dimensions must be >= 1"); }
    if (!(voxel_mm[i] > 0.) || !std::isfinite(voxel_mm[i])) { throw ValidationError("voxel sizes must be > 0"); }
  }
  double const n = b0dir.norm();
  if (!(n > 0.) || !std::isfinite(n)) { throw ValidationError("b0 direction must be non-zero"); }
  b0 = b0dir / n;
}

Grid3 Grid3::withB0(Eigen::Vector3d const &dir) const { return Grid3(dims, voxel_mm, dir); }

bool Grid3::sameShape(Grid3 const &other) const { return dims == other.dims && voxel_mm == other.voxel_mm; }

std::string_view kindName(Kind k)
{
  switch (k) {
  case Kind::Chi: return "chi";
  case Kind::Field: return "field";
  case Kind::Phase: return "phase";
  case Kind::Magnitude: return "magnitude";
  case Kind::Mask: return "mask";
  }
  return "chi";
}

Kind parseKind(std::string_view name)
{
  for (Kind k : {Kind::Chi, Kind::Field, Kind::Phase, Kind::Magnitude, Kind::Mask}) {
    if (kindName(k) == name) { return k; }
  }
  throw ValidationError("unknown volume kind '" + std::string(name) + "' (expected chi|field|phase|magnitude|mask)");
}

Volume::Volume(Grid3 const &g, Kind k)
  : grid{g}
  , kind{k}
  , data(static_cast<std::size_t>(g.size()), 0.f)
{
}

Volume::Volume(Grid3 const &g, Kind k, std::vector<float> values)
  : grid{g}
  , kind{k}
  , data{std::move(values)}
{
  validate();
}

void Volume::validate() const
{
  if (static_cast<Index>(data.size()) != grid.size()) {
    throw ValidationError("volume has " + std::to_string(data.size()) + " values but grid holds " + std::to_string(grid.size()));
  }
  for (float const f : data) {
    if (!std::isfinite(f)) { throw ValidationError("volume contains NaN or Inf"); }
  }
  if (kind == Kind::Mask) {
    for (float const f : data) {
      if (f != 0.f && f != 1.f) { throw ValidationError("mask values must be 0 or 1"); }
    }
  }
}

void requireSameShape(Volume const &a, Volume const &b, std::string_view what)
{
  if (!a.grid.sameShape(b.grid)) { throw ValidationError(std::string(what) + ": grid mismatch"); }
}

void requireKind(Volume const &v, Kind k, std::string_view what)
{
  if (v.kind != k) {
    throw ValidationError(std::string(what) + ": expected a " + std::string(kindName(k)) + " volume, got " +
                          std::string(kindName(v.kind)));
  }
}

Index maskCount(Volume const &mask)
{
  return static_cast<Index>(std::count_if(mask.data.begin(), mask.data.end(), [](float f) { return f != 0.f; }));
}

Volume toVolume(Grid3 const &g, Kind k, std::span<double const> values)
{
  Volume v(g, k);
  std::transform(values.begin(), values.end(), v.data.begin(), [](double d) { return static_cast<float>(d); });
  return v;
}

std::filesystem::path volumeBase(std::filesystem::path const &path)
{
  auto p = path;
  if (p.extension() == ".f32" || p.extension() == ".json") { p.replace_extension(); }
  return p;
}

Volume load_volume(std::filesystem::path const &path)
{
  auto const base = volumeBase(path);
  auto const sidecar = withExt(base, ".json");
  auto const payload = withExt(base, ".f32");

  std::ifstream js(sidecar);
  if (!js) { throw IoError("missing sidecar " + sidecar.string()); }
  json h;
  try {
    js >> h;
  } catch (json::exception const &e) {
    throw ValidationError("malformed sidecar " + sidecar.string() + ": " + e.what());
  }

  Grid3 grid;
  Kind  kind;
  try {
    auto const d = h.at("dims").get<std::array<Index, 3>>();
    auto const vs = h.at("voxel_size_mm").get<std::array<double, 3>>();
    auto const b0 = h.at("b0_dir").get<std::array<double, 3>>();
    grid = Grid3(d, Eigen::Vector3d(vs[0], vs[1], vs[2]), Eigen::Vector3d(b0[0], b0[1], b0[2]));
    kind = parseKind(h.at("kind").get<std::string>());
  } catch (json::exception const &e) {
    throw ValidationError("bad sidecar " + sidecar.string() + ": " + e.what());
  }

  std::ifstream in(payload, std::ios::binary | std::ios::ate);
  if (!in) { throw IoError("missing payload " + payload.string()); }
  auto const bytes = static_cast<Index>(in.tellg());
  if (bytes != grid.size() * 4) {
    throw ValidationError("size mismatch: " + payload.string() + " holds " + std::to_string(bytes / 4) +
                          " floats, header dims require " + std::to_string(grid.size()));
  }
  in.seekg(0);
  std::vector<float> data(static_cast<std::size_t>(grid.size()));
  if (!in.read(reinterpret_cast<char *>(data.data()), bytes)) { throw IoError("short read on " + payload.string()); }
  if constexpr (std::endian::native == std::endian::big) { swapBytes(data); }
  return Volume(grid, kind, std::move(data));
}

void save_volume(Volume const &v, std::filesystem::path const &path)
{
  v.validate();
  auto const base = volumeBase(path);
  if (base.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(base.parent_path(), ec);
  }

  json h;
  h["dims"] = v.grid.dims;
  h["voxel_size_mm"] = {v.grid.voxel_mm[0], v.grid.voxel_mm[1], v.grid.voxel_mm[2]};
  h["b0_dir"] = {v.grid.b0[0], v.grid.b0[1], v.grid.b0[2]};
  h["kind"] = kindName(v.kind);

  auto const sidecar = withExt(base, ".json");
  std::ofstream js(sidecar);
  if (!js) { throw IoError("cannot write " + sidecar.string()); }
  js << h.dump() << '\n';

  auto const payload = withExt(base, ".f32");
  std::ofstream out(payload, std::ios::binary | std::ios::trunc);
  if (!out) { throw IoError("cannot write " + payload.string()); }
  if constexpr (std::endian::native == std::endian::big) {
    auto copy = v.data;
    swapBytes(copy);
    out.write(reinterpret_cast<char const *>(copy.data()), static_cast<std::streamsize>(copy.size() * 4));
  } else {
    out.write(reinterpret_cast<char const *>(v.data.data()), static_cast<std::streamsize>(v.data.size() * 4));
  }
  if (!out || !js) { throw IoError("write failed for " + base.string()); }
}

namespace {

std::vector<double> maskedValues(Volume const &v, Volume const &mask, std::string_view what)
{
  requireSameShape(v, mask, what);
  std::vector<double> vals;
  for (Index i = 0; i < v.size(); i++) {
    if (mask.data[i] != 0.f) { vals.push_back(v.data[i]); }
  }
  if (vals.empty()) { throw ValidationError(std::string(what) + ": mask is empty"); }
  return vals;
}

} // namespace

double nearestRank(std::span<double const> sorted, double p)
{
  auto const n = static_cast<double>(sorted.size());
  auto       rank = static_cast<Index>(std::ceil(p / 100. * n));
  rank = std::clamp<Index>(rank, 1, static_cast<Index>(sorted.size()));
  return sorted[rank - 1];
}

MaskedStats masked_stats(Volume const &v, Volume const &mask)
{
  auto vals = maskedValues(v, mask, "masked_stats");
  std::sort(vals.begin(), vals.end());
  double sum = 0.;
  for (double x : vals) { sum += x; }
  double const mean = sum / vals.size();
  double       ss = 0.;
  for (double x : vals) { ss += (x - mean) * (x - mean); }
  return MaskedStats{.mean = mean,
                     .std = std::sqrt(ss / vals.size()),
                     .min = vals.front(),
                     .max = vals.back(),
                     .p01 = nearestRank(vals, 1.),
                     .p99 = nearestRank(vals, 99.)};
}

Index binOf(double value, double width)
{
  if (value > 0. || (value == 0. && !std::signbit(value))) {
    return static_cast<Index>(std::ceil(value / width)) - (value == 0. ? 0 : 1);
  }
  return static_cast<Index>(std::floor(value / width)) - (value == 0. ? 1 : 0);
}

Index Histogram::count(Index bin) const
{
  if (bin < first_bin || bin > lastBin()) { return 0; }
  return counts[bin - first_bin];
}

Histogram histogramOf(std::vector<double> values, double bin_width)
{
  if (!(bin_width > 0.)) { throw ValidationError("histogram: bin width must be > 0"); }
  if (values.empty()) { throw ValidationError("histogram: mask is empty"); }
  std::sort(values.begin(), values.end());

  Index lo = binOf(values.front(), bin_width), hi = lo;
  for (double x : values) {
    Index const b = binOf(x, bin_width);
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }

  Histogram h;
  h.bin_width = bin_width;
  h.first_bin = lo;
  h.counts.assign(static_cast<std::size_t>(hi - lo + 1), 0);
  for (Index b = lo; b <= hi + 1; b++) { h.bin_edges.push_back(static_cast<double>(b) * bin_width); }
  for (double x : values) { h.counts[binOf(x, bin_width) - lo]++; }
  h.total = static_cast<Index>(values.size());
  for (double p : {1., 99.}) { h.pct_bounds[p] = nearestRank(values, p); }
  return h;
}

Histogram histogram(Volume const &v, Volume const &mask, double bin_width)
{
  if (!(bin_width > 0.)) { throw ValidationError("histogram: bin width must be > 0"); }
  return histogramOf(maskedValues(v, mask, "histogram"), bin_width);
}

Index mirrorAsymmetry(Histogram const &h)
{
  Index worst = 0;
  for (Index b = h.first_bin; b <= h.lastBin(); b++) {
    worst = std::max(worst, std::abs(h.count(b) - h.count(-b - 1)));
  }
  return worst;
}

} // namespace qsm
