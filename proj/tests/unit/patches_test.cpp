#include "oracles.hpp"
#include "qsm/error.hpp"
#include "qsm/patches.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <iterator>

using namespace qsm;

namespace {

std::string slurp(std::filesystem::path const &p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

NormStats unitStats() { return {.chi_mean = 0., .chi_std = 1., .field_mean = 0., .field_std = 1.}; }

// A one-input manifest written by hand, without augmentation.
DatasetManifest handManifest(std::filesystem::path const &dir, std::vector<Volume> const &chis, Volume const &mask)
{
  DatasetManifest m;
  m.root = dir;
  save_volume(mask, m.resolve("mask"));
  for (std::size_t i = 0; i < chis.size(); i++) {
    ManifestEntry e;
    e.chi_path = "chi" + std::to_string(i);
    e.field_path = "field" + std::to_string(i);
    e.mask_path = "mask";
    auto field = chis[i];
    field.kind = Kind::Field;
    save_volume(chis[i], m.resolve(e.chi_path));
    save_volume(field, m.resolve(e.field_path));
    m.entries.push_back(e);
  }
  m.save();
  return m;
}

} // namespace

TEST_CASE("Patch origins", "[patches]")
{
  CHECK(patchStride(64, 0.66) == 21);
  CHECK(patchStride(4, 0.9) == 1);
  CHECK(patchOrigins(64, 64, 21) == std::vector<Index>{0});
  CHECK(patchOrigins(128, 64, 21) == std::vector<Index>{0, 21, 42, 63, 64});
  CHECK(patchOrigins(100, 64, 36) == std::vector<Index>{0, 36});
  CHECK_THROWS_AS(patchOrigins(32, 64, 21), ValidationError);
  CHECK_THROWS_AS(patchStride(64, 1.), ValidationError);
}

TEST_CASE("extract_patches", "[patches]")
{
  SECTION("64^3 full mask gives one patch")
  {
    Grid3 const g({64, 64, 64});
    auto const  chi = oracle::random(g, Kind::Chi, 1);
    auto        field = oracle::random(g, Kind::Field, 2);
    auto const  p = extract_patches(chi, field, oracle::fullMask(g), unitStats());
    REQUIRE(p.size() == 1);
    CHECK(p[0].origin == Origin{0, 0, 0});
    CHECK(p[0].chi == chi.data);
  }

  SECTION("128^3 full mask gives 125 patches covering every voxel")
  {
    Grid3 const g({128, 128, 128});
    Volume      chi(g, Kind::Chi), field(g, Kind::Field);
    auto const  mask = oracle::fullMask(g);
    auto const  p = extract_patches(chi, field, mask, unitStats(), 64, 0.66);
    REQUIRE(p.size() == 125);
    std::vector<char> covered(static_cast<std::size_t>(g.size()), 0);
    for (auto const &q : p) {
      for (Index k = 0; k < 64; k++) {
        for (Index j = 0; j < 64; j++) {
          for (Index i = 0; i < 64; i++) { covered[g.index(q.origin[0] + i, q.origin[1] + j, q.origin[2] + k)] = 1; }
        }
      }
    }
    CHECK(std::all_of(covered.begin(), covered.end(), [](char c) { return c == 1; }));
  }

  SECTION("Patches outside the mask are dropped")
  {
    Grid3 const g({32, 32, 32});
    Volume      mask(g, Kind::Mask);
    mask(2, 2, 2) = 1.f;
    auto const p = extract_patches(Volume(g, Kind::Chi), Volume(g, Kind::Field), mask, unitStats(), 16, 0.5);
    REQUIRE(p.size() == 1);
    CHECK(p[0].origin == Origin{0, 0, 0});
  }

  SECTION("Values are normalized")
  {
    Grid3 const g({16, 16, 16});
    auto const  chi = oracle::random(g, Kind::Chi, 3);
    NormStats const s{.chi_mean = 0.01, .chi_std = 0.05, .field_mean = -0.2, .field_std = 2.};
    auto const  p = extract_patches(chi, Volume(g, Kind::Field), oracle::fullMask(g), s, 16, 0.);
    REQUIRE(p.size() == 1);
    for (std::size_t i = 0; i < chi.data.size(); i++) {
      REQUIRE(p[0].chi[i] == static_cast<float>((chi.data[i] - 0.01) / 0.05));
      REQUIRE(p[0].field[i] == static_cast<float>(0.2 / 2.));
    }
  }

  SECTION("Volume smaller than the patch")
  {
    Grid3 const g({16, 16, 16});
    CHECK_THROWS_AS(extract_patches(Volume(g, Kind::Chi), Volume(g, Kind::Field), oracle::fullMask(g), unitStats(), 32), ValidationError);
  }
}

TEST_CASE("Normalization", "[patches]")
{
  NormStats const s{.chi_mean = 0.01, .chi_std = 0.05, .field_mean = 0.3, .field_std = 0.7};
  CHECK(denormalizeValue(2., s, Channel::Chi) == Catch::Approx(0.11).epsilon(1e-12));
  CHECK(denormalizeValue(0., s, Channel::Field) == 0.3);

  Grid3 const g({16, 16, 16});
  auto const  v = oracle::random(g, Kind::Chi, 4);
  for (float x : v.data) {
    double const back = denormalizeValue(normalizeValue(x, s, Channel::Chi), s, Channel::Chi);
    REQUIRE(std::abs(back - x) <= 1e-9 * std::max(1., std::abs(static_cast<double>(x))));
  }
  auto const round = denormalize(normalize(v, s, Channel::Chi), s, Channel::Chi);
  CHECK(round.kind == Kind::Chi);
  for (std::size_t i = 0; i < v.data.size(); i++) { REQUIRE(round.data[i] == Catch::Approx(v.data[i]).margin(1e-6)); }

  NormStats bad = s;
  bad.chi_std = 0.;
  CHECK_THROWS_AS(normalize(v, bad, Channel::Chi), ValidationError);
}

TEST_CASE("compute_norm_stats", "[patches]")
{
  Grid3 const g({8, 8, 8});
  auto const  mask = oracle::sphereMask(g, {3.5, 3.5, 3.5}, 3.);

  SECTION("Values 0 and 2 pool to mean 1, std 1")
  {
    Volume zero(g, Kind::Chi), two(g, Kind::Chi);
    std::fill(two.data.begin(), two.data.end(), 2.f);
    auto m = handManifest(oracle::scratchDir("norm_02"), {zero, two}, mask);
    auto const s = compute_norm_stats(m);
    CHECK(s.chi_mean == Catch::Approx(1.).epsilon(1e-12));
    CHECK(s.chi_std == Catch::Approx(1.).epsilon(1e-12));
    CHECK(s.field_mean == Catch::Approx(1.).epsilon(1e-12));
    CHECK(DatasetManifest::load(m.root).norm_stats.has_value());
  }

  SECTION("Matches a single pass over the concatenated values")
  {
    auto const a = oracle::random(g, Kind::Chi, 5), b = oracle::random(g, Kind::Chi, 6, 0., 3.);
    auto m = handManifest(oracle::scratchDir("norm_cat"), {a, b}, mask);
    auto const s = compute_norm_stats(m);
    std::vector<double> all;
    for (auto const *v : {&a, &b}) {
      for (std::size_t i = 0; i < v->data.size(); i++) {
        if (mask.data[i] != 0.f) { all.push_back(v->data[i]); }
      }
    }
    double sum = 0., sq = 0.;
    for (double x : all) {
      sum += x;
      sq += x * x;
    }
    double const n = static_cast<double>(all.size()), mean = sum / n;
    CHECK(s.chi_mean == Catch::Approx(mean).epsilon(1e-9));
    CHECK(s.chi_std == Catch::Approx(std::sqrt(sq / n - mean * mean)).epsilon(1e-9));
  }

  SECTION("Errors")
  {
    Volume flat(g, Kind::Chi);
    std::fill(flat.data.begin(), flat.data.end(), 0.3f);
    auto m = handManifest(oracle::scratchDir("norm_flat"), {flat}, mask);
    CHECK_THROWS_AS(compute_norm_stats(m), ValidationError);
    DatasetManifest empty;
    empty.root = oracle::scratchDir("norm_empty");
    CHECK_THROWS_AS(compute_norm_stats(empty), ValidationError);
  }
}

TEST_CASE("export_dataset", "[patches]")
{
  Grid3 const g({64, 64, 64});
  auto const  chi = oracle::random(g, Kind::Chi, 7);
  auto const  mask = oracle::sphereMask(g, {31.5, 31.5, 31.5}, 30.);
  auto        m = handManifest(oracle::scratchDir("export_src"), {chi}, mask);
  compute_norm_stats(m);

  auto const dir = oracle::scratchDir("export_a");
  auto const idx = export_dataset(m, dir);
  REQUIRE(idx.total() == 1);
  REQUIRE(idx.shards.size() == 1);
  CHECK(std::filesystem::file_size(dir / idx.shards[0]) == 3 * 64 * 64 * 64 * sizeof(float));
  CHECK(std::filesystem::exists(dir / "patches.json"));

  auto const rec = readShardRecord(dir / idx.shards[0], 64, 0);
  CHECK(rec.mask == mask.data);
  Volume stored(g, Kind::Chi, rec.chi);
  auto const back = denormalize(stored, *m.norm_stats, Channel::Chi);
  for (std::size_t i = 0; i < chi.data.size(); i++) { REQUIRE(back.data[i] == Catch::Approx(chi.data[i]).margin(1e-6)); }
  CHECK_THROWS_AS(readShardRecord(dir / idx.shards[0], 64, 1), IoError);

  auto const again = oracle::scratchDir("export_b");
  export_dataset(m, again);
  CHECK(slurp(dir / idx.shards[0]) == slurp(again / idx.shards[0]));
  CHECK(slurp(dir / "patches.json") == slurp(again / "patches.json"));

  DatasetManifest noStats = m;
  noStats.norm_stats.reset();
  CHECK_THROWS_AS(export_dataset(noStats, oracle::scratchDir("export_c")), ValidationError);
}
