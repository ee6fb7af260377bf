#include "qsm/cli.hpp"
#include "qsm/augment.hpp"
#include "qsm/dipole.hpp"
#include "qsm/error.hpp"
#include "qsm/fft.hpp"
#include "qsm/fieldprep.hpp"
#include "qsm/invert.hpp"
#include "qsm/lossmetrics.hpp"
#include "qsm/patches.hpp"
#include "qsm/phantom.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <set>

namespace qsm::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Command
{
  std::string name;  // subcommand
  std::string block; // config block
  std::string help;
  json        defaults;
};

std::vector<Command> const &commands()
{
  static std::vector<Command> const cmds{
    {"forward", "forward", "Synthesize a local field from a susceptibility map",
     {{"chi", ""}, {"out", ""}, {"b0_dir", nullptr}}},
    {"prep", "prep", "Wrapped phase to local field: Laplacian unwrap, ppm scaling, V-SHARP",
     {{"phase", ""},
      {"mask", ""},
      {"out", ""},
      {"out_mask", ""},
      {"te_s", 0.025},
      {"b0_t", 3.0},
      {"smv_radii_mm", PrepParams::defaultRadii()},
      {"tsvd_threshold", 0.05}}},
    {"augment", "augment", "Build the scaled / sign-inverted / rotated training set",
     {{"inputs", json::array()},
      {"lambda", 4.0},
      {"region_rule", "positive_only"},
      {"n_orientations", 5},
      {"angle_range_deg", {-30.0, 30.0}},
      {"include_sign_inverted", true},
      {"rotate_mask", true},
      {"bin_width", 0.01}}},
    {"histogram", "histogram", "Masked susceptibility histogram and percentile bounds",
     {{"chi", ""}, {"mask", ""}, {"bin_width", 0.01}, {"out", ""}}},
    {"invert", "invert", "Dipole inversion (tkd, tikhonov, cosmos)",
     {{"method", "tikhonov"},
      {"fields", json::array()},
      {"out", ""},
      {"mask", ""},
      {"tkd_threshold", 0.1},
      {"tikhonov_alpha", 1e-3},
      {"cosmos_threshold", 1e-6}}},
    {"lesion-sweep", "sweep", "Simulated lesion linearity sweep",
     {{"base_field", ""},
      {"dims", {64, 64, 64}},
      {"voxel_size_mm", {1.0, 1.0, 1.0}},
      {"b0_dir", {0.0, 0.0, 1.0}},
      {"lesion_center_vox", nullptr},
      {"lesion_radii_vox", {5.0, 5.0, 5.0}},
      {"methods", {"tkd", "tikhonov"}},
      {"values", defaultSweepValues()},
      {"noise", true},
      {"tkd_threshold", 0.1},
      {"tikhonov_alpha", 1e-3},
      {"external", json::object()},
      {"save_fields", false}}},
    {"metrics", "metrics", "pSNR, NRMSE, HFEN and SSIM against a reference",
     {{"recon", ""}, {"reference", ""}, {"mask", ""}, {"out", ""}}},
    {"loss", "loss", "Model, L1 and gradient-difference losses",
     {{"chi", ""}, {"label", ""}, {"field", ""}, {"mask", ""}, {"out", ""}}},
    {"patches", "patches", "Normalize a manifest and export 3D training patches",
     {{"manifest", ""}, {"patch_size", 64}, {"overlap", 0.66}}},
  };
  return cmds;
}

json const globalDefaults{{"seed", 0}, {"out_dir", "out"}, {"threads", 1}};

bool sameType(json const &def, json const &v)
{
  if (def.is_null()) { return true; }
  if (def.is_number()) { return v.is_number(); }
  return def.type() == v.type();
}

void mergeBlock(json &into, json const &src, std::string const &block)
{
  if (!src.is_object()) { throw ValidationError("config block '" + block + "' must be an object"); }
  for (auto const &[k, v] : src.items()) {
    if (!into.contains(k)) { throw ValidationError("unknown key '" + k + "' in config block '" + block + "'"); }
    if (!sameType(into[k], v)) { throw ValidationError("config key '" + block + "." + k + "' has the wrong type"); }
    into[k] = v;
  }
}

json readConfig(fs::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw IoError("cannot open config " + path.string()); }
  try {
    json j;
    in >> j;
    return j;
  } catch (json::exception const &e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

// defaults <- config file <- flags, with unknown keys rejected everywhere.
json resolve(Command const &cmd, json const &file, json const &globalFlags, json const &flags)
{
  json resolved = globalDefaults;
  resolved[cmd.block] = cmd.defaults;
  if (!file.is_null()) {
    if (!file.is_object()) { throw ValidationError("config root must be a JSON object"); }
    for (auto const &[k, v] : file.items()) {
      if (globalDefaults.contains(k)) {
        if (!sameType(globalDefaults[k], v)) { throw ValidationError("config key '" + k + "' has the wrong type"); }
        resolved[k] = v;
        continue;
      }
      auto it = std::find_if(commands().begin(), commands().end(), [&](auto const &c) { return c.block == k; });
      if (it == commands().end()) { throw ValidationError("unknown config key '" + k + "'"); }
      json scratch = it->defaults;
      mergeBlock(scratch, v, k);
      if (k == cmd.block) { resolved[k] = scratch; }
    }
  }
  for (auto const &[k, v] : globalFlags.items()) { resolved[k] = v; }
  mergeBlock(resolved[cmd.block], flags, cmd.block);
  return resolved;
}

std::string need(json const &block, std::string const &key, std::string const &cmd)
{
  auto const v = block.at(key).get<std::string>();
  if (v.empty()) { throw ValidationError(cmd + ": '" + key + "' is required (flag --" + key + " or config)"); }
  return v;
}

void writeText(fs::path const &path, std::string const &text)
{
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::trunc);
  if (!out) { throw IoError("cannot write " + path.string()); }
  out << text;
  if (!out) { throw IoError("write failed for " + path.string()); }
}

// Resolved config next to a single-file output: <base>.run.json
void writeResolvedBeside(fs::path const &out, json const &resolved)
{
  auto p = volumeBase(out);
  p += ".run.json";
  writeText(p, resolved.dump(2) + "\n");
}

Eigen::Vector3d vec3(json const &j)
{
  auto const a = j.get<std::array<double, 3>>();
  return {a[0], a[1], a[2]};
}

std::vector<double> doubles(json const &j) { return j.get<std::vector<double>>(); }

int runForward(json const &r, std::ostream &out)
{
  auto const &b = r["forward"];
  auto const  chi = load_volume(need(b, "chi", "forward"));
  auto const  dst = need(b, "out", "forward");
  auto const  kernel = b["b0_dir"].is_null() ? build_kernel(chi.grid) : build_kernel(chi.grid, vec3(b["b0_dir"]));
  auto const  field = forward_field(chi, kernel);
  save_volume(field, dst);
  writeResolvedBeside(dst, r);
  out << "wrote " << volumeBase(dst).string() << ".f32\n";
  return kOk;
}

PrepParams prepParams(json const &b)
{
  PrepParams p;
  p.te_s = b["te_s"].get<double>();
  p.b0_t = b["b0_t"].get<double>();
  p.smv_radii_mm = doubles(b["smv_radii_mm"]);
  p.tsvd_threshold = b["tsvd_threshold"].get<double>();
  p.validate();
  return p;
}

int runPrep(json const &r, std::ostream &out)
{
  auto const &b = r["prep"];
  auto const  params = prepParams(b);
  auto const  phase = load_volume(need(b, "phase", "prep"));
  auto const  mask = load_volume(need(b, "mask", "prep"));
  auto const  dst = need(b, "out", "prep");
  auto const  unwrapped = laplacian_unwrap(phase, mask);
  auto const  total = phase_to_ppm(unwrapped, params);
  auto const  local = smv_background_removal(total, mask, params);
  save_volume(local.local, dst);
  auto maskOut = b["out_mask"].get<std::string>();
  if (maskOut.empty()) { maskOut = volumeBase(dst).string() + "_mask"; }
  save_volume(local.mask, maskOut);
  writeResolvedBeside(dst, r);
  out << fmt::format("local field: {}.f32  eroded mask: {} voxels\n", volumeBase(dst).string(), maskCount(local.mask));
  return kOk;
}

int runAugment(json const &r, std::ostream &out)
{
  auto const &b = r["augment"];
  AugmentPlan plan;
  plan.scaling.lambda = b["lambda"].get<double>();
  plan.scaling.region = parseRegion(b["region_rule"].get<std::string>());
  plan.n_orientations = b["n_orientations"].get<int>();
  auto const range = doubles(b["angle_range_deg"]);
  if (range.size() != 2) { throw ValidationError("augment: angle_range_deg must hold [lo, hi]"); }
  plan.angle_lo_deg = range[0];
  plan.angle_hi_deg = range[1];
  plan.include_sign_inverted = b["include_sign_inverted"].get<bool>();
  plan.rotate_mask = b["rotate_mask"].get<bool>();
  plan.seed = r["seed"].get<std::uint64_t>();
  plan.validate();

  std::vector<ChiMask> inputs;
  for (auto const &in : b["inputs"]) {
    if (!in.is_object() || !in.contains("chi") || !in.contains("mask")) {
      throw ValidationError("augment: each input needs {\"chi\": path, \"mask\": path}");
    }
    inputs.emplace_back(load_volume(in["chi"].get<std::string>()), load_volume(in["mask"].get<std::string>()));
  }
  if (inputs.empty()) { throw ValidationError("augment: no inputs given (config augment.inputs or --input chi,mask)"); }

  fs::path const dir = r["out_dir"].get<std::string>();
  auto const     manifest = build_training_set(inputs, plan, dir);
  json           sym;
  if (plan.include_sign_inverted) {
    auto const s = verify_symmetry(manifest, b["bin_width"].get<double>());
    sym["max_bin_asymmetry"] = s.max_bin_asymmetry;
    std::string csv = "bin_lo,bin_hi,count\n";
    for (Index bin = s.pooled.first_bin; bin <= s.pooled.lastBin(); bin++) {
      csv += fmt::format("{},{},{}\n", bin * s.pooled.bin_width, (bin + 1) * s.pooled.bin_width, s.pooled.count(bin));
    }
    writeText(dir / "pooled_histogram.csv", csv);
  }
  std::map<std::string, int> perBranch;
  for (auto const &e : manifest.entries) { perBranch[std::string(branchName(e.branch))]++; }
  sym["entries"] = manifest.entries.size();
  sym["per_branch"] = perBranch;
  writeText(dir / "augment_report.json", sym.dump(2) + "\n");
  writeText(dir / "augment.run.json", r.dump(2) + "\n");

  out << fmt::format("{} entries in {}\n", manifest.entries.size(), (dir / "manifest.json").string());
  for (auto const &[name, n] : perBranch) { out << fmt::format("  {:<16} {:>5}\n", name, n); }
  return kOk;
}

int runHistogram(json const &r, std::ostream &out)
{
  auto const &b = r["histogram"];
  auto const  chi = load_volume(need(b, "chi", "histogram"));
  auto const  mask = load_volume(need(b, "mask", "histogram"));
  auto const  dst = need(b, "out", "histogram");
  auto const  h = histogram(chi, mask, b["bin_width"].get<double>());
  auto const  st = masked_stats(chi, mask);

  json j;
  j["bin_width"] = h.bin_width;
  j["bin_edges"] = h.bin_edges;
  j["counts"] = h.counts;
  j["total"] = h.total;
  for (auto const &[p, v] : h.pct_bounds) { j["pct_bounds"][fmt::format("{}", p)] = v; }
  j["stats"] = {{"mean", st.mean}, {"std", st.std}, {"min", st.min}, {"max", st.max}, {"p01", st.p01}, {"p99", st.p99}};
  std::string csv = "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); i++) {
    csv += fmt::format("{},{},{}\n", h.bin_edges[i], h.bin_edges[i + 1], h.counts[i]);
  }
  writeText(dst + ".json", j.dump(2) + "\n");
  writeText(dst + ".csv", csv);
  writeText(dst + ".run.json", r.dump(2) + "\n");
  out << fmt::format("range [{:.4f}, {:.4f}] ppm, 1%..99% [{:.4f}, {:.4f}] ppm, {} voxels\n", st.min, st.max, st.p01,
                     st.p99, h.total);
  return kOk;
}

InversionParams inversionParams(json const &b)
{
  InversionParams p;
  p.tkd_threshold = b["tkd_threshold"].get<double>();
  p.tikhonov_alpha = b["tikhonov_alpha"].get<double>();
  if (b.contains("cosmos_threshold")) { p.cosmos_threshold = b["cosmos_threshold"].get<double>(); }
  p.validate();
  return p;
}

int runInvert(json const &r, std::ostream &out)
{
  auto const &b = r["invert"];
  auto const  method = b["method"].get<std::string>();
  if (method != "tkd" && method != "tikhonov" && method != "cosmos") {
    throw ValidationError("invert: unknown method '" + method + "' (valid: tkd, tikhonov, cosmos)");
  }
  auto const params = inversionParams(b);
  auto const dst = need(b, "out", "invert");
  auto const paths = b["fields"].get<std::vector<std::string>>();
  if (paths.empty()) { throw ValidationError("invert: no field given (--field)"); }

  std::vector<Volume>       fields;
  std::vector<DipoleKernel> kernels;
  for (auto const &p : paths) {
    fields.push_back(load_volume(p));
    kernels.push_back(build_kernel(fields.back().grid));
  }
  Volume chi;
  if (method == "cosmos") {
    chi = cosmos(fields, kernels, params);
  } else {
    if (fields.size() != 1) { throw ValidationError("invert: " + method + " takes exactly one field"); }
    chi = method == "tkd" ? tkd(fields[0], kernels[0], params) : tikhonov(fields[0], kernels[0], params);
  }
  if (auto const m = b["mask"].get<std::string>(); !m.empty()) {
    auto const mask = load_volume(m);
    requireSameShape(chi, mask, "invert");
    for (std::size_t i = 0; i < chi.data.size(); i++) { chi.data[i] *= mask.data[i]; }
  }
  save_volume(chi, dst);
  writeResolvedBeside(dst, r);
  out << "wrote " << volumeBase(dst).string() << ".f32 (" << method << ")\n";
  return kOk;
}

int runSweep(json const &r, std::ostream &out)
{
  auto const &b = r["sweep"];
  Volume      base;
  if (auto const p = b["base_field"].get<std::string>(); !p.empty()) {
    base = load_volume(p);
  } else {
    auto const d = b["dims"].get<std::array<Index, 3>>();
    base = Volume(Grid3(d, vec3(b["voxel_size_mm"]), vec3(b["b0_dir"])), Kind::Field);
  }
  LesionSpec spec;
  if (b["lesion_center_vox"].is_null()) {
    spec.center_vox = {base.grid.dims[0] / 2, base.grid.dims[1] / 2, base.grid.dims[2] / 2};
  } else {
    spec.center_vox = b["lesion_center_vox"].get<std::array<Index, 3>>();
  }
  spec.radii_vox = vec3(b["lesion_radii_vox"]);
  auto const lesion = make_lesion_mask(base.grid, spec);
  auto const kernel = build_kernel(base.grid);

  SweepOptions opt;
  opt.methods = b["methods"].get<std::vector<std::string>>();
  opt.values = doubles(b["values"]);
  opt.noise = b["noise"].get<bool>();
  opt.seed = r["seed"].get<std::uint64_t>();
  opt.params = inversionParams(b);
  for (auto const &[name, paths] : b["external"].items()) {
    for (auto const &p : paths) { opt.external[name].push_back(load_volume(p.get<std::string>())); }
  }

  fs::path const dir = r["out_dir"].get<std::string>();
  auto const     report = lesion_sweep(base, lesion, kernel, opt);
  writeText(dir / "sweep.json", report.json());
  writeText(dir / "sweep.csv", report.csv());
  writeText(dir / "sweep.run.json", r.dump(2) + "\n");
  save_volume(lesion, dir / "lesion_mask");
  if (b["save_fields"].get<bool>()) {
    for (std::size_t i = 0; i < opt.values.size(); i++) {
      save_volume(sweepField(base, lesion, kernel, opt, i), dir / fmt::format("fields/point_{:02}", i));
    }
  }

  out << fmt::format("{:<12} {:>10} {:>10} {:>10} {:>8}\n", "method", "rmse_ppm", "slope", "intercept", "r2");
  for (auto const &m : report.methods) {
    auto const it = report.regression.find(m);
    if (it == report.regression.end()) {
      out << fmt::format("{:<12} {:>10.4f} {:>10} {:>10} {:>8}\n", m, report.rmse_ppm.at(m), "-", "-", "-");
    } else {
      out << fmt::format("{:<12} {:>10.4f} {:>10.4f} {:>10.4f} {:>8.4f}\n", m, report.rmse_ppm.at(m), it->second.slope,
                         it->second.intercept, it->second.r_squared);
    }
  }
  return kOk;
}

int runMetrics(json const &r, std::ostream &out)
{
  auto const &b = r["metrics"];
  auto const  recon = load_volume(need(b, "recon", "metrics"));
  auto const  ref = load_volume(need(b, "reference", "metrics"));
  auto const  mask = load_volume(need(b, "mask", "metrics"));
  auto const  dst = need(b, "out", "metrics");
  auto const  m = quality_metrics(recon, ref, mask);
  json const  j{{"psnr_db", m.psnr_db}, {"nrmse", m.nrmse}, {"hfen", m.hfen}, {"ssim", m.ssim}};
  writeText(dst + ".json", j.dump(2) + "\n");
  writeText(dst + ".run.json", r.dump(2) + "\n");
  out << fmt::format("{:<8} {:>12}\n", "metric", "value");
  out << fmt::format("{:<8} {:>12.4f}\n{:<8} {:>12.6f}\n{:<8} {:>12.6f}\n{:<8} {:>12.6f}\n", "pSNR", m.psnr_db, "NRMSE",
                     m.nrmse, "HFEN", m.hfen, "SSIM", m.ssim);
  return kOk;
}

int runLoss(json const &r, std::ostream &out)
{
  auto const &b = r["loss"];
  auto const  chi = load_volume(need(b, "chi", "loss"));
  auto const  label = load_volume(need(b, "label", "loss"));
  auto const  field = load_volume(need(b, "field", "loss"));
  auto const  mask = load_volume(need(b, "mask", "loss"));
  auto const  dst = need(b, "out", "loss");
  auto const  l = total_loss(chi, label, field, mask, build_kernel(field.grid));
  json const  j{{"model", l.model},
                {"l1", l.l1},
                {"gradient", l.gradient},
                {"total", l.total},
                {"weights", {l.weights.model, l.weights.l1, l.weights.gradient}}};
  writeText(dst + ".json", j.dump(2) + "\n");
  writeText(dst + ".run.json", r.dump(2) + "\n");
  out << fmt::format("{:<10} {:>6} {:>14}\n", "loss", "weight", "value");
  out << fmt::format("{:<10} {:>6} {:>14.6e}\n", "model", l.weights.model, l.model);
  out << fmt::format("{:<10} {:>6} {:>14.6e}\n", "l1", l.weights.l1, l.l1);
  out << fmt::format("{:<10} {:>6} {:>14.6e}\n", "gradient", l.weights.gradient, l.gradient);
  out << fmt::format("{:<10} {:>6} {:>14.6e}\n", "total", "", l.total);
  return kOk;
}

int runPatches(json const &r, std::ostream &out)
{
  auto const &b = r["patches"];
  auto        manifest = DatasetManifest::load(need(b, "manifest", "patches"));
  auto const  stats = compute_norm_stats(manifest);
  fs::path const dir = r["out_dir"].get<std::string>();
  auto const index = export_dataset(manifest, dir, b["patch_size"].get<Index>(), b["overlap"].get<double>());
  writeText(dir / "patches.run.json", r.dump(2) + "\n");
  out << fmt::format("{} patches (stride {}) from {} volumes; chi {:.4g}±{:.4g} ppm, field {:.4g}±{:.4g} ppm\n",
                     index.total(), index.stride, manifest.entries.size(), stats.chi_mean, stats.chi_std,
                     stats.field_mean, stats.field_std);
  return kOk;
}

int execute(std::string const &name, json const &resolved, std::ostream &out)
{
  fft::setThreads(resolved["threads"].get<int>());
  if (name == "forward") { return runForward(resolved, out); }
  if (name == "prep") { return runPrep(resolved, out); }
  if (name == "augment") { return runAugment(resolved, out); }
  if (name == "histogram") { return runHistogram(resolved, out); }
  if (name == "invert") { return runInvert(resolved, out); }
  if (name == "lesion-sweep") { return runSweep(resolved, out); }
  if (name == "metrics") { return runMetrics(resolved, out); }
  if (name == "loss") { return runLoss(resolved, out); }
  if (name == "patches") { return runPatches(resolved, out); }
  throw ValidationError("unknown subcommand " + name);
}

template <typename T>
CLI::Option *flag(CLI::App *app, json &target, std::string const &name, std::string const &key, std::string const &desc)
{
  return app->add_option_function<T>(name, [&target, key](T const &v) { target[key] = v; }, desc);
}

} // namespace

int dispatch(std::vector<std::string> const &args, std::ostream &out, std::ostream &err)
{
  CLI::App app{"Volumetric QSM toolkit: dipole model, augmentation, inversions, lesion sweeps, metrics", "qsmtool"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string configPath;
  json        globals = json::object();
  app.add_option("--config", configPath, "JSON run config; flags override its keys");
  flag<std::uint64_t>(&app, globals, "--seed", "seed", "Global random seed");
  flag<std::string>(&app, globals, "--out-dir", "out_dir", "Output directory");
  flag<int>(&app, globals, "--threads", "threads", "Cap on FFT worker threads");

  std::map<std::string, json> flags;
  for (auto const &c : commands()) { flags[c.name] = json::object(); }
  std::map<std::string, CLI::App *> subs;
  for (auto const &c : commands()) { subs[c.name] = app.add_subcommand(c.name, c.help); }

  auto &fw = flags["forward"];
  flag<std::string>(subs["forward"], fw, "--chi", "chi", "Susceptibility volume (.f32 + .json)");
  flag<std::string>(subs["forward"], fw, "--out", "out", "Output field volume");
  flag<std::vector<double>>(subs["forward"], fw, "--b0-dir", "b0_dir", "B0 direction hx,hy,hz (default: chi sidecar)")
    ->delimiter(',');

  auto &pp = flags["prep"];
  flag<std::string>(subs["prep"], pp, "--phase", "phase", "Wrapped phase volume (rad)");
  flag<std::string>(subs["prep"], pp, "--mask", "mask", "Brain mask");
  flag<std::string>(subs["prep"], pp, "--out", "out", "Local field output (ppm)");
  flag<std::string>(subs["prep"], pp, "--out-mask", "out_mask", "Eroded mask output");
  flag<double>(subs["prep"], pp, "--te", "te_s", "Echo time (s)");
  flag<double>(subs["prep"], pp, "--b0", "b0_t", "Field strength (T)");
  flag<std::vector<double>>(subs["prep"], pp, "--radii", "smv_radii_mm", "Descending SMV radii (mm)")->delimiter(',');
  flag<double>(subs["prep"], pp, "--tsvd", "tsvd_threshold", "TSVD truncation threshold");

  auto &ag = flags["augment"];
  subs["augment"]
    ->add_option_function<std::vector<std::string>>(
      "--input",
      [&ag](std::vector<std::string> const &v) {
        for (auto const &s : v) {
          auto const comma = s.find(',');
          if (comma == std::string::npos) { throw CLI::ValidationError("--input", "expected chi,mask"); }
          ag["inputs"].push_back({{"chi", s.substr(0, comma)}, {"mask", s.substr(comma + 1)}});
        }
      },
      "Input map as chi,mask (repeatable)")
    ->allow_extra_args(false);
  flag<double>(subs["augment"], ag, "--lambda", "lambda", "Scaling factor (>= 1)");
  flag<std::string>(subs["augment"], ag, "--region", "region_rule", "positive_only | all_voxels");
  flag<int>(subs["augment"], ag, "--orientations", "n_orientations", "Orientations per input, including the original");
  flag<bool>(subs["augment"], ag, "--invert", "include_sign_inverted", "Emit sign-inverted branches (true/false)");
  flag<bool>(subs["augment"], ag, "--rotate-mask", "rotate_mask", "Rotate the mask with chi (true/false)");

  auto &hg = flags["histogram"];
  flag<std::string>(subs["histogram"], hg, "--chi", "chi", "Susceptibility volume");
  flag<std::string>(subs["histogram"], hg, "--mask", "mask", "Mask volume");
  flag<double>(subs["histogram"], hg, "--bin-width", "bin_width", "Bin width (ppm)");
  flag<std::string>(subs["histogram"], hg, "--out", "out", "Output prefix (.json, .csv)");

  auto &iv = flags["invert"];
  flag<std::string>(subs["invert"], iv, "--method", "method", "tkd | tikhonov | cosmos");
  flag<std::vector<std::string>>(subs["invert"], iv, "--field", "fields", "Field volume(s); repeat for cosmos");
  flag<std::string>(subs["invert"], iv, "--out", "out", "Output susceptibility volume");
  flag<std::string>(subs["invert"], iv, "--mask", "mask", "Optional mask applied to the output");
  flag<double>(subs["invert"], iv, "--tkd-threshold", "tkd_threshold", "TKD threshold");
  flag<double>(subs["invert"], iv, "--alpha", "tikhonov_alpha", "Tikhonov alpha");
  flag<double>(subs["invert"], iv, "--cosmos-threshold", "cosmos_threshold", "COSMOS conditioning threshold");

  auto &sw = flags["lesion-sweep"];
  flag<std::string>(subs["lesion-sweep"], sw, "--base-field", "base_field", "Healthy local field to add lesions to");
  flag<std::vector<std::string>>(subs["lesion-sweep"], sw, "--method", "methods", "Methods to evaluate");
  flag<std::vector<double>>(subs["lesion-sweep"], sw, "--values", "values", "Assigned values (ppm)")->delimiter(',');
  flag<bool>(subs["lesion-sweep"], sw, "--noise", "noise", "Add N(0, |chi|/2) lesion noise (true/false)");
  flag<double>(subs["lesion-sweep"], sw, "--alpha", "tikhonov_alpha", "Tikhonov alpha");
  flag<double>(subs["lesion-sweep"], sw, "--tkd-threshold", "tkd_threshold", "TKD threshold");
  flag<bool>(subs["lesion-sweep"], sw, "--save-fields", "save_fields", "Write each simulated field (true/false)");

  auto &mt = flags["metrics"];
  flag<std::string>(subs["metrics"], mt, "--recon", "recon", "Reconstruction");
  flag<std::string>(subs["metrics"], mt, "--reference", "reference", "Reference (e.g. COSMOS)");
  flag<std::string>(subs["metrics"], mt, "--mask", "mask", "Mask");
  flag<std::string>(subs["metrics"], mt, "--out", "out", "Output prefix (.json)");

  auto &ls = flags["loss"];
  flag<std::string>(subs["loss"], ls, "--chi", "chi", "Network output");
  flag<std::string>(subs["loss"], ls, "--label", "label", "Label");
  flag<std::string>(subs["loss"], ls, "--field", "field", "Input local field");
  flag<std::string>(subs["loss"], ls, "--mask", "mask", "Brain mask");
  flag<std::string>(subs["loss"], ls, "--out", "out", "Output prefix (.json)");

  auto &pt = flags["patches"];
  flag<std::string>(subs["patches"], pt, "--manifest", "manifest", "manifest.json from augment");
  flag<Index>(subs["patches"], pt, "--patch-size", "patch_size", "Patch edge (voxels)");
  flag<double>(subs["patches"], pt, "--overlap", "overlap", "Patch overlap fraction");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (CLI::CallForHelp const &) {
    out << app.help();
    return kOk;
  } catch (CLI::CallForAllHelp const &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (CLI::ParseError const &e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  auto const it = std::find_if(commands().begin(), commands().end(), [&](auto const &c) { return subs[c.name]->parsed(); });
  try {
    json const file = configPath.empty() ? json() : readConfig(configPath);
    json const resolved = resolve(*it, file, globals, flags[it->name]);
    return execute(it->name, resolved, out);
  } catch (ValidationError const &e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (IoError const &e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (fs::filesystem_error const &e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (json::exception const &e) {
    err << "error: invalid configuration value: " << e.what() << "\n";
    return kValidation;
  }
}

int dispatch(int argc, char **argv)
{
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

} // namespace qsm::cli
