#pragma once

#include "dipole.hpp"
#include "volume.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qsm {

enum class RegionRule
{
  PositiveOnly,
  AllVoxels
};

std::string_view regionName(RegionRule r);
RegionRule       parseRegion(std::string_view name);

// The scaling map: voxels in the region are multiplied by lambda, the rest are left alone.
struct ScalingSpec
{
  double     lambda = 4.;
  RegionRule region = RegionRule::PositiveOnly;

  void validate() const;
};

struct AugmentPlan
{
  int           n_orientations = 5;
  double        angle_lo_deg = -30.;
  double        angle_hi_deg = 30.;
  ScalingSpec   scaling;
  bool          include_sign_inverted = true;
  // Rotate the brain mask together with chi; otherwise the input mask is reused unrotated.
  bool          rotate_mask = true;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Branch
{
  Original,
  Scaled,
  Inverted,
  ScaledInverted
};

std::string_view branchName(Branch b);
Branch           parseBranch(std::string_view name);

struct NormStats
{
  double chi_mean = 0.;
  double chi_std = 1.;
  double field_mean = 0.;
  double field_std = 1.;
};

struct ManifestEntry
{
  std::string chi_path;
  std::string field_path;
  std::string mask_path;
  Branch      branch = Branch::Original;
  Rotation    rotation = Rotation::Identity();
  double      lambda_applied = 1.;
  Index       input = 0;
  Index       orientation = 0;
};

/*
 * Catalogue of chi/field pairs. Paths are stored relative to the manifest directory, so a dataset
 * can be moved as a unit.
 */
struct DatasetManifest
{
  std::filesystem::path      root;
  std::vector<ManifestEntry> entries;
  std::optional<NormStats>   norm_stats;
  nlohmann::json             meta;
  nlohmann::json             plan;

  std::filesystem::path resolve(std::string const &rel) const { return root / rel; }

  nlohmann::json         toJson() const;
  static DatasetManifest fromJson(nlohmann::json const &j, std::filesystem::path root);
  // Writes `manifest.json` in root.
  void                   save() const;
  static DatasetManifest load(std::filesystem::path const &path);
};

// Training hyper-parameters recorded for downstream trainers.
nlohmann::json trainingMeta();

Volume scale_map(Volume const &chi, ScalingSpec const &spec);
Volume sign_invert(Volume const &chi);

struct Orientation
{
  Volume   chi;
  Volume   mask;
  Rotation rotation;
};

// Entry 0 is the input itself; the rest use z-y-x Euler angles drawn uniformly from the plan's range.
std::vector<Orientation> make_orientations(Volume const &chi, Volume const &mask, AugmentPlan const &plan);

using ChiMask = std::pair<Volume, Volume>;

/*
 * For every input and orientation: the original map, the scaled map (when lambda > 1), and the
 * sign-inverted copies of both (when enabled). Every field is synthesized from its masked chi.
 */
DatasetManifest build_training_set(std::span<ChiMask const> inputs,
                                   AugmentPlan const &plan,
                                   std::filesystem::path const &out_dir);

struct SymmetryReport
{
  Index     max_bin_asymmetry = 0;
  Histogram pooled;
};

SymmetryReport verify_symmetry(DatasetManifest const &manifest, double bin_width);

} // namespace qsm
