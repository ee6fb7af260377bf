#pragma once

#include "augment.hpp"
#include "volume.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace qsm {

// Pooled in-mask mean/std (population) of every chi and every field in the manifest. Stores the
// result in manifest.norm_stats and rewrites manifest.json.
NormStats compute_norm_stats(DatasetManifest &manifest);

enum class Channel
{
  Chi,
  Field
};

// (v - mean) / std and its inverse, in double precision.
double normalizeValue(double v, NormStats const &stats, Channel which);
double denormalizeValue(double v, NormStats const &stats, Channel which);

// The same transforms applied voxel-wise; results are rounded to float32 storage.
Volume normalize(Volume const &v, NormStats const &stats, Channel which);
Volume denormalize(Volume const &v, NormStats const &stats, Channel which);

// max(1, floor(patch * (1 - overlap)))
Index              patchStride(Index patch_size, double overlap);
// Multiples of stride, plus n - patch when the last one leaves a tail uncovered.
std::vector<Index> patchOrigins(Index n, Index patch_size, Index stride);

using Origin = std::array<Index, 3>;

struct Patch
{
  Origin             origin{0, 0, 0};
  std::vector<float> chi, field, mask;
};

// Normalized patches on the origin lattice; patches without any mask voxel are dropped.
std::vector<Patch> extract_patches(Volume const &chi,
                                   Volume const &field,
                                   Volume const &mask,
                                   NormStats const &stats,
                                   Index patch_size = 64,
                                   double overlap = 0.66);

struct PatchIndex
{
  Index                            patch_size = 64;
  Index                            stride = 21;
  std::vector<std::vector<Origin>> origins;
  std::vector<Index>               counts;
  std::vector<std::string>         shards;

  Index total() const;
};

/*
 * One shard per manifest entry, `shard_NNNNN.f32`: back-to-back records of patch^3 float32 chi,
 * then field, then mask, little-endian, x-fastest. `patches.json` indexes the shards.
 */
PatchIndex export_dataset(DatasetManifest const &manifest,
                          std::filesystem::path const &out_dir,
                          Index patch_size = 64,
                          double overlap = 0.66);

Patch readShardRecord(std::filesystem::path const &shard, Index patch_size, Index record);

} // namespace qsm
