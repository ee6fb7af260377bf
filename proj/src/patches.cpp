#include "qsm/patches.hpp"
#include "qsm/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <bit>
#include <cmath>
#include <fstream>

namespace qsm {

NormStats compute_norm_stats(DatasetManifest &manifest)
{
  if (manifest.entries.empty()) { throw ValidationError("compute_norm_stats: manifest is empty"); }

  // Two passes over the data keep the variance well conditioned.
  auto pooled = [&](bool field) {
    double sum = 0., n = 0.;
    for (auto const &e : manifest.entries) {
      auto const v = load_volume(manifest.resolve(field ? e.field_path : e.chi_path));
      auto const m = load_volume(manifest.resolve(e.mask_path));
      requireSameShape(v, m, "compute_norm_stats");
      for (std::size_t i = 0; i < v.data.size(); i++) {
        if (m.data[i] != 0.f) {
          sum += v.data[i];
          n += 1.;
        }
      }
    }
    if (n == 0.) { throw ValidationError("compute_norm_stats: all masks are empty"); }
    double const mean = sum / n;
    double       ss = 0.;
    for (auto const &e : manifest.entries) {
      auto const v = load_volume(manifest.resolve(field ? e.field_path : e.chi_path));
      auto const m = load_volume(manifest.resolve(e.mask_path));
      for (std::size_t i = 0; i < v.data.size(); i++) {
        if (m.data[i] != 0.f) { ss += (v.data[i] - mean) * (v.data[i] - mean); }
      }
    }
    double const sd = std::sqrt(ss / n);
    if (!(sd > 0.)) { throw ValidationError("compute_norm_stats: zero variance"); }
    return std::pair{mean, sd};
  };

  auto const [cm, cs] = pooled(false);
  auto const [fm, fs] = pooled(true);
  NormStats const stats{.chi_mean = cm, .chi_std = cs, .field_mean = fm, .field_std = fs};
  manifest.norm_stats = stats;
  manifest.save();
  return stats;
}

namespace {

std::pair<double, double> channel(NormStats const &s, Channel which)
{
  if (!(s.chi_std > 0.) || !(s.field_std > 0.)) { throw ValidationError("normalization std must be > 0"); }
  return which == Channel::Chi ? std::pair{s.chi_mean, s.chi_std} : std::pair{s.field_mean, s.field_std};
}

Kind channelKind(Channel which) { return which == Channel::Chi ? Kind::Chi : Kind::Field; }

} // namespace

double normalizeValue(double v, NormStats const &stats, Channel which)
{
  auto const [mean, sd] = channel(stats, which);
  return (v - mean) / sd;
}

double denormalizeValue(double v, NormStats const &stats, Channel which)
{
  auto const [mean, sd] = channel(stats, which);
  return v * sd + mean;
}

Volume normalize(Volume const &v, NormStats const &stats, Channel which)
{
  channel(stats, which);
  Volume out(v.grid, channelKind(which));
  for (std::size_t i = 0; i < v.data.size(); i++) { out.data[i] = static_cast<float>(normalizeValue(v.data[i], stats, which)); }
  return out;
}

Volume denormalize(Volume const &v, NormStats const &stats, Channel which)
{
  channel(stats, which);
  Volume out(v.grid, channelKind(which));
  for (std::size_t i = 0; i < v.data.size(); i++) { out.data[i] = static_cast<float>(denormalizeValue(v.data[i], stats, which)); }
  return out;
}

Index patchStride(Index patch_size, double overlap)
{
  if (patch_size < 1) { throw ValidationError("patch size must be >= 1"); }
  if (!(overlap >= 0. && overlap < 1.)) { throw ValidationError("overlap must be in [0, 1)"); }
  return std::max<Index>(1, static_cast<Index>(std::floor(static_cast<double>(patch_size) * (1. - overlap))));
}

std::vector<Index> patchOrigins(Index n, Index patch_size, Index stride)
{
  if (n < patch_size) { throw ValidationError("volume is smaller than the patch size"); }
  std::vector<Index> o;
  for (Index p = 0; p + patch_size <= n; p += stride) { o.push_back(p); }
  if (o.back() + patch_size < n) { o.push_back(n - patch_size); }
  return o;
}

std::vector<Patch> extract_patches(Volume const &chi,
                                   Volume const &field,
                                   Volume const &mask,
                                   NormStats const &stats,
                                   Index patch_size,
                                   double overlap)
{
  requireKind(mask, Kind::Mask, "extract_patches");
  requireSameShape(chi, field, "extract_patches");
  requireSameShape(chi, mask, "extract_patches");
  Index const stride = patchStride(patch_size, overlap);
  auto const &dims = chi.grid.dims;
  auto const  ox = patchOrigins(dims[0], patch_size, stride);
  auto const  oy = patchOrigins(dims[1], patch_size, stride);
  auto const  oz = patchOrigins(dims[2], patch_size, stride);
  channel(stats, Channel::Chi);

  std::vector<Patch> patches;
  auto const         P3 = static_cast<std::size_t>(patch_size * patch_size * patch_size);
  for (Index z0 : oz) {
    for (Index y0 : oy) {
      for (Index x0 : ox) {
        Patch p{.origin = {x0, y0, z0}, .chi = std::vector<float>(P3), .field = std::vector<float>(P3), .mask = std::vector<float>(P3)};
        bool  any = false;
        std::size_t o = 0;
        for (Index k = 0; k < patch_size; k++) {
          for (Index j = 0; j < patch_size; j++) {
            for (Index i = 0; i < patch_size; i++, o++) {
              auto const idx = chi.grid.index(x0 + i, y0 + j, z0 + k);
              p.chi[o] = static_cast<float>(normalizeValue(chi.data[idx], stats, Channel::Chi));
              p.field[o] = static_cast<float>(normalizeValue(field.data[idx], stats, Channel::Field));
              p.mask[o] = mask.data[idx];
              any = any || mask.data[idx] != 0.f;
            }
          }
        }
        if (any) { patches.push_back(std::move(p)); }
      }
    }
  }
  return patches;
}

Index PatchIndex::total() const
{
  Index t = 0;
  for (auto c : counts) { t += c; }
  return t;
}

namespace {

void writeFloats(std::ofstream &out, std::vector<float> const &v)
{
  static_assert(std::endian::native == std::endian::little, "shard writer assumes a little-endian host");
  out.write(reinterpret_cast<char const *>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

} // namespace

PatchIndex export_dataset(DatasetManifest const &manifest,
                          std::filesystem::path const &out_dir,
                          Index patch_size,
                          double overlap)
{
  if (!manifest.norm_stats) { throw ValidationError("export_dataset: manifest has no normalization statistics"); }
  auto const &stats = *manifest.norm_stats;
  std::filesystem::create_directories(out_dir);

  PatchIndex index;
  index.patch_size = patch_size;
  index.stride = patchStride(patch_size, overlap);

  nlohmann::json shards = nlohmann::json::array();
  for (std::size_t e = 0; e < manifest.entries.size(); e++) {
    auto const &entry = manifest.entries[e];
    auto const  chi = load_volume(manifest.resolve(entry.chi_path));
    auto const  field = load_volume(manifest.resolve(entry.field_path));
    auto const  mask = load_volume(manifest.resolve(entry.mask_path));
    auto const  patches = extract_patches(chi, field, mask, stats, patch_size, overlap);

    auto const    name = fmt::format("shard_{:05}.f32", e);
    std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) { throw IoError("cannot write " + (out_dir / name).string()); }
    std::vector<Origin> origins;
    for (auto const &p : patches) {
      writeFloats(out, p.chi);
      writeFloats(out, p.field);
      writeFloats(out, p.mask);
      origins.push_back(p.origin);
    }
    if (!out) { throw IoError("write failed for " + (out_dir / name).string()); }

    shards.push_back({{"file", name},
                      {"source_entry", e},
                      {"chi_path", entry.chi_path},
                      {"branch", branchName(entry.branch)},
                      {"dims", chi.grid.dims},
                      {"count", origins.size()},
                      {"origins", origins}});
    index.origins.push_back(std::move(origins));
    index.counts.push_back(static_cast<Index>(patches.size()));
    index.shards.push_back(name);
  }

  nlohmann::json j;
  j["patch_size"] = patch_size;
  j["overlap"] = overlap;
  j["stride"] = index.stride;
  j["record_layout"] = {{"channels", {"chi", "field", "mask"}},
                        {"dtype", "float32"},
                        {"endianness", "little"},
                        {"order", "x-fastest"},
                        {"floats_per_record", 3 * patch_size * patch_size * patch_size}};
  j["norm_stats"] = {{"chi_mean", stats.chi_mean},
                     {"chi_std", stats.chi_std},
                     {"field_mean", stats.field_mean},
                     {"field_std", stats.field_std}};
  j["meta"] = manifest.meta;
  j["total"] = index.total();
  j["shards"] = shards;

  std::ofstream out(out_dir / "patches.json");
  if (!out) { throw IoError("cannot write " + (out_dir / "patches.json").string()); }
  out << j.dump(2) << '\n';
  return index;
}

Patch readShardRecord(std::filesystem::path const &shard, Index patch_size, Index record)
{
  auto const    P3 = static_cast<std::size_t>(patch_size * patch_size * patch_size);
  std::ifstream in(shard, std::ios::binary);
  if (!in) { throw IoError("missing shard " + shard.string()); }
  in.seekg(static_cast<std::streamoff>(record * 3 * P3 * sizeof(float)));
  Patch p{.origin = {0, 0, 0}, .chi = std::vector<float>(P3), .field = std::vector<float>(P3), .mask = std::vector<float>(P3)};
  for (auto *v : {&p.chi, &p.field, &p.mask}) {
    if (!in.read(reinterpret_cast<char *>(v->data()), static_cast<std::streamsize>(P3 * sizeof(float)))) {
      throw IoError("short read on shard " + shard.string());
    }
  }
  return p;
}

} // namespace qsm
