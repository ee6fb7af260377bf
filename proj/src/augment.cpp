#include "qsm/augment.hpp"
#include "qsm/error.hpp"
#include "qsm/random.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace qsm {

using json = nlohmann::json;

std::string_view regionName(RegionRule r) { return r == RegionRule::PositiveOnly ? "positive_only" : "all_voxels"; }

RegionRule parseRegion(std::string_view name)
{
  if (name == "positive_only") { return RegionRule::PositiveOnly; }
  if (name == "all_voxels") { return RegionRule::AllVoxels; }
  throw ValidationError("unknown region rule '" + std::string(name) + "' (expected positive_only|all_voxels)");
}

void ScalingSpec::validate() const
{
  if (!(lambda >= 1.) || !std::isfinite(lambda)) { throw ValidationError("scaling: lambda must be >= 1"); }
}

void AugmentPlan::validate() const
{
  scaling.validate();
  if (n_orientations < 1) { throw ValidationError("augment: n_orientations must be >= 1"); }
  if (!(angle_lo_deg < angle_hi_deg)) { throw ValidationError("augment: angle range must satisfy lo < hi"); }
}

std::string_view branchName(Branch b)
{
  switch (b) {
  case Branch::Original: return "original";
  case Branch::Scaled: return "scaled";
  case Branch::Inverted: return "inverted";
  case Branch::ScaledInverted: return "scaled_inverted";
  }
  return "original";
}

Branch parseBranch(std::string_view name)
{
  for (Branch b : {Branch::Original, Branch::Scaled, Branch::Inverted, Branch::ScaledInverted}) {
    if (branchName(b) == name) { return b; }
  }
  throw ValidationError("unknown branch '" + std::string(name) + "'");
}

json trainingMeta()
{
  return json{{"patch_size", 64},
              {"overlap", 0.66},
              {"epochs", 25},
              {"lr", 1e-3},
              {"lr_decay", {{"factor", 0.95}, {"every_steps", 600}}},
              {"batch", 12},
              {"optimizer", "RMSProp"},
              {"loss_weights", {0.5, 1.0, 0.1}}};
}

json DatasetManifest::toJson() const
{
  json j;
  j["entries"] = json::array();
  for (auto const &e : entries) {
    json rot = json::array();
    for (int r = 0; r < 3; r++) { rot.push_back({e.rotation(r, 0), e.rotation(r, 1), e.rotation(r, 2)}); }
    j["entries"].push_back({{"chi_path", e.chi_path},
                            {"field_path", e.field_path},
                            {"mask_path", e.mask_path},
                            {"branch", branchName(e.branch)},
                            {"rotation", rot},
                            {"lambda_applied", e.lambda_applied},
                            {"input", e.input},
                            {"orientation", e.orientation}});
  }
  if (norm_stats) {
    j["norm_stats"] = {{"chi_mean", norm_stats->chi_mean},
                       {"chi_std", norm_stats->chi_std},
                       {"field_mean", norm_stats->field_mean},
                       {"field_std", norm_stats->field_std}};
  } else {
    j["norm_stats"] = nullptr;
  }
  j["meta"] = meta;
  j["plan"] = plan;
  return j;
}

DatasetManifest DatasetManifest::fromJson(json const &j, std::filesystem::path root)
{
  DatasetManifest m;
  m.root = std::move(root);
  try {
    for (auto const &e : j.at("entries")) {
      ManifestEntry entry;
      entry.chi_path = e.at("chi_path").get<std::string>();
      entry.field_path = e.at("field_path").get<std::string>();
      entry.mask_path = e.at("mask_path").get<std::string>();
      entry.branch = parseBranch(e.at("branch").get<std::string>());
      auto const &rot = e.at("rotation");
      for (int r = 0; r < 3; r++) {
        for (int c = 0; c < 3; c++) { entry.rotation(r, c) = rot.at(r).at(c).get<double>(); }
      }
      entry.lambda_applied = e.at("lambda_applied").get<double>();
      entry.input = e.value("input", Index{0});
      entry.orientation = e.value("orientation", Index{0});
      m.entries.push_back(std::move(entry));
    }
    if (j.contains("norm_stats") && !j["norm_stats"].is_null()) {
      auto const &s = j["norm_stats"];
      m.norm_stats = NormStats{.chi_mean = s.at("chi_mean").get<double>(),
                               .chi_std = s.at("chi_std").get<double>(),
                               .field_mean = s.at("field_mean").get<double>(),
                               .field_std = s.at("field_std").get<double>()};
    }
    m.meta = j.value("meta", json::object());
    m.plan = j.value("plan", json::object());
  } catch (json::exception const &e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void DatasetManifest::save() const
{
  std::filesystem::create_directories(root);
  auto const    path = root / "manifest.json";
  std::ofstream out(path);
  if (!out) { throw IoError("cannot write " + path.string()); }
  out << toJson().dump(2) << '\n';
  if (!out) { throw IoError("write failed for " + path.string()); }
}

DatasetManifest DatasetManifest::load(std::filesystem::path const &path)
{
  auto const file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) { throw IoError("missing manifest " + file.string()); }
  json j;
  try {
    in >> j;
  } catch (json::exception const &e) {
    throw ValidationError("malformed manifest " + file.string() + ": " + e.what());
  }
  return fromJson(j, file.parent_path());
}

Volume scale_map(Volume const &chi, ScalingSpec const &spec)
{
  spec.validate();
  requireKind(chi, Kind::Chi, "scale_map");
  Volume out = chi;
  for (auto &v : out.data) {
    if (spec.region == RegionRule::AllVoxels || v > 0.f) { v = static_cast<float>(spec.lambda * v); }
  }
  return out;
}

Volume sign_invert(Volume const &chi)
{
  requireKind(chi, Kind::Chi, "sign_invert");
  Volume out = chi;
  for (auto &v : out.data) { v = -v; }
  return out;
}

std::vector<Orientation> make_orientations(Volume const &chi, Volume const &mask, AugmentPlan const &plan)
{
  plan.validate();
  requireKind(mask, Kind::Mask, "make_orientations");
  requireSameShape(chi, mask, "make_orientations");

  std::vector<Orientation> out;
  out.push_back({chi, mask, Rotation::Identity()});

  std::mt19937_64                        gen(plan.seed);
  double const                           deg = std::numbers::pi / 180.;
  std::uniform_real_distribution<double> angle(plan.angle_lo_deg * deg, plan.angle_hi_deg * deg);
  for (int o = 1; o < plan.n_orientations; o++) {
    double const   z = angle(gen), y = angle(gen), x = angle(gen);
    Rotation const R = eulerZYX(z, y, x);
    out.push_back({rotate_volume(chi, R), plan.rotate_mask ? rotate_volume(mask, R) : mask, R});
  }
  return out;
}

namespace {

std::string volumeName(Index input, Index orientation, std::string_view what)
{
  return fmt::format("volumes/in{:03}_or{:02}_{}", input, orientation, what);
}

} // namespace

DatasetManifest build_training_set(std::span<ChiMask const> inputs,
                                   AugmentPlan const &plan,
                                   std::filesystem::path const &out_dir)
{
  plan.validate();
  if (inputs.empty()) { throw ValidationError("build_training_set: no input maps"); }

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.meta = trainingMeta();
  manifest.plan = {{"n_orientations", plan.n_orientations},
                   {"angle_range_deg", {plan.angle_lo_deg, plan.angle_hi_deg}},
                   {"lambda", plan.scaling.lambda},
                   {"region_rule", regionName(plan.scaling.region)},
                   {"include_sign_inverted", plan.include_sign_inverted},
                   {"rotate_mask", plan.rotate_mask},
                   {"seed", plan.seed}};

  bool const withScaled = plan.scaling.lambda > 1.;
  for (std::size_t in = 0; in < inputs.size(); in++) {
    auto const &[chi, mask] = inputs[in];
    requireKind(chi, Kind::Chi, "build_training_set");
    requireKind(mask, Kind::Mask, "build_training_set");
    requireSameShape(chi, mask, "build_training_set");
    auto const kernel = build_kernel(chi.grid);

    AugmentPlan sub = plan;
    sub.seed = splitSeed(plan.seed, in);
    auto const orientations = make_orientations(chi, mask, sub);
    for (std::size_t o = 0; o < orientations.size(); o++) {
      auto const &orient = orientations[o];
      Volume      masked = orient.chi;
      for (std::size_t i = 0; i < masked.data.size(); i++) { masked.data[i] *= orient.mask.data[i]; }

      auto const maskRel = volumeName(in, o, "mask");
      save_volume(orient.mask, manifest.resolve(maskRel));

      std::vector<std::pair<Branch, Volume>> branches;
      branches.emplace_back(Branch::Original, masked);
      if (withScaled) { branches.emplace_back(Branch::Scaled, scale_map(masked, plan.scaling)); }
      if (plan.include_sign_inverted) {
        branches.emplace_back(Branch::Inverted, sign_invert(masked));
        if (withScaled) { branches.emplace_back(Branch::ScaledInverted, sign_invert(scale_map(masked, plan.scaling))); }
      }

      for (auto const &[branch, bchi] : branches) {
        auto const field = forward_field(bchi, kernel);
        auto const name = branchName(branch);
        ManifestEntry e{.chi_path = volumeName(in, o, std::string(name) + "_chi"),
                        .field_path = volumeName(in, o, std::string(name) + "_field"),
                        .mask_path = maskRel,
                        .branch = branch,
                        .rotation = orient.rotation,
                        .lambda_applied = (branch == Branch::Scaled || branch == Branch::ScaledInverted) ? plan.scaling.lambda : 1.,
                        .input = static_cast<Index>(in),
                        .orientation = static_cast<Index>(o)};
        save_volume(bchi, manifest.resolve(e.chi_path));
        save_volume(field, manifest.resolve(e.field_path));
        manifest.entries.push_back(std::move(e));
      }
    }
  }
  manifest.save();
  return manifest;
}

SymmetryReport verify_symmetry(DatasetManifest const &manifest, double bin_width)
{
  bool const hasInverted = std::any_of(manifest.entries.begin(), manifest.entries.end(),
                                       [](auto const &e) { return e.branch == Branch::Inverted; });
  if (!hasInverted) { throw ValidationError("verify_symmetry: manifest has no sign-inverted branches"); }

  std::vector<double> values;
  for (auto const &e : manifest.entries) {
    auto const chi = load_volume(manifest.resolve(e.chi_path));
    auto const mask = load_volume(manifest.resolve(e.mask_path));
    requireSameShape(chi, mask, "verify_symmetry");
    for (std::size_t i = 0; i < chi.data.size(); i++) {
      if (mask.data[i] != 0.f) { values.push_back(chi.data[i]); }
    }
  }
  if (values.empty()) { throw ValidationError("verify_symmetry: masks are empty"); }
  SymmetryReport r;
  r.pooled = histogramOf(std::move(values), bin_width);
  r.max_bin_asymmetry = mirrorAsymmetry(r.pooled);
  return r;
}

} // namespace qsm
