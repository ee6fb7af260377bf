#include "oracles.hpp"
#include "qsm/error.hpp"
#include "qsm/volume.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

using namespace qsm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(std::string const &name)
{
  auto const p = fs::temp_directory_path() / "qsm_unit" / name;
  fs::create_directories(p.parent_path());
  return p;
}

} // namespace

TEST_CASE("Grid3 invariants", "[volcore]")
{
  Grid3 const g({4, 5, 6}, Eigen::Vector3d(1., 1., 2.), Eigen::Vector3d(0., 0., 3.));
  CHECK(g.size() == 120);
  CHECK(g.b0.norm() == Catch::Approx(1.).margin(1e-12));
  CHECK(g.index(1, 2, 3) == 1 + 4 * (2 + 5 * 3));
  CHECK_THROWS_AS(Grid3({0, 4, 4}), ValidationError);
  CHECK_THROWS_AS(Grid3({4, 4, 4}, Eigen::Vector3d(1., 0., 1.)), ValidationError);
  CHECK_THROWS_AS(Grid3({4, 4, 4}, Eigen::Vector3d::Ones(), Eigen::Vector3d::Zero()), ValidationError);
}

TEST_CASE("load_volume and save_volume", "[volcore][io]")
{
  Grid3 const g({2, 2, 2});

  SECTION("Zero volume")
  {
    auto const p = scratch("zero");
    save_volume(Volume(g, Kind::Chi), p);
    auto const v = load_volume(p);
    CHECK(v.kind == Kind::Chi);
    CHECK(v.size() == 8);
    CHECK(std::all_of(v.data.begin(), v.data.end(), [](float f) { return f == 0.f; }));
  }

  SECTION("Round trip is bit exact")
  {
    Grid3 const gr({7, 5, 3}, Eigen::Vector3d(1., 0.5, 2.), Eigen::Vector3d(0.1, 0.2, 0.9));
    auto const  v = oracle::random(gr, Kind::Field, 42, -3., 3.);
    auto const  p = scratch("roundtrip.f32");
    save_volume(v, p);
    auto const r = load_volume(p);
    CHECK(r.grid.dims == v.grid.dims);
    CHECK(r.grid.voxel_mm == v.grid.voxel_mm);
    CHECK((r.grid.b0 - v.grid.b0).norm() < 1e-15);
    CHECK(r.kind == Kind::Field);
    CHECK(std::memcmp(r.data.data(), v.data.data(), v.data.size() * 4) == 0);
  }

  SECTION("Size mismatch")
  {
    auto const p = scratch("short");
    save_volume(Volume(Grid3({4, 4, 4}), Kind::Chi), p);
    fs::resize_file(fs::path(p.string() + ".f32"), 63 * 4);
    CHECK_THROWS_AS(load_volume(p), ValidationError);
  }

  SECTION("Missing sidecar")
  {
    auto const p = scratch("nosidecar");
    save_volume(Volume(g, Kind::Chi), p);
    fs::remove(fs::path(p.string() + ".json"));
    CHECK_THROWS_AS(load_volume(p), IoError);
  }

  SECTION("Non-finite payload")
  {
    auto const p = scratch("nan");
    save_volume(Volume(g, Kind::Chi), p);
    std::fstream f(p.string() + ".f32", std::ios::in | std::ios::out | std::ios::binary);
    float const  bad = std::numeric_limits<float>::quiet_NaN();
    f.write(reinterpret_cast<char const *>(&bad), 4);
    f.close();
    CHECK_THROWS_AS(load_volume(p), ValidationError);
  }

  SECTION("Mask values outside {0,1}")
  {
    Volume m(g, Kind::Mask);
    m.data[3] = 0.5f;
    CHECK_THROWS_AS(save_volume(m, scratch("badmask")), ValidationError);
    CHECK_FALSE(fs::exists(scratch("badmask.f32")));

    auto const p = scratch("badmask_disk");
    save_volume(Volume(g, Kind::Chi, std::vector<float>(8, 0.5f)), p);
    std::ofstream(p.string() + ".json") << R"({"dims":[2,2,2],"voxel_size_mm":[1,1,1],"b0_dir":[0,0,1],"kind":"mask"})";
    CHECK_THROWS_AS(load_volume(p), ValidationError);
  }
}

TEST_CASE("masked_stats", "[volcore]")
{
  Grid3 const g({4, 4, 4});
  auto const  full = oracle::fullMask(g);

  SECTION("Constant")
  {
    Volume v(g, Kind::Chi, std::vector<float>(64, 0.3f));
    auto const s = masked_stats(v, full);
    CHECK(s.mean == Catch::Approx(0.3f));
    CHECK(s.std == Catch::Approx(0.).margin(1e-12));
    CHECK(s.min == s.max);
    CHECK(s.min == Catch::Approx(0.3f));
  }

  SECTION("Symmetric +-1")
  {
    Volume v(g, Kind::Chi);
    for (std::size_t i = 0; i < v.data.size(); i++) { v.data[i] = i % 2 ? 1.f : -1.f; }
    auto const s = masked_stats(v, full);
    CHECK(s.mean == Catch::Approx(0.).margin(1e-15));
    CHECK(s.std == Catch::Approx(1.));
  }

  SECTION("Matches exhaustive sort of masked values")
  {
    Grid3 const gg({9, 8, 7});
    auto const  v = oracle::random(gg, Kind::Chi, 7);
    auto const  m = oracle::sphereMask(gg, {4, 4, 3}, 3.5);
    std::vector<double> vals;
    for (std::size_t i = 0; i < v.data.size(); i++) {
      if (m.data[i] != 0.f) { vals.push_back(v.data[i]); }
    }
    std::sort(vals.begin(), vals.end());
    auto const s = masked_stats(v, m);
    CHECK(s.min == vals.front());
    CHECK(s.max == vals.back());
    auto const n = vals.size();
    CHECK(s.p01 == vals[static_cast<std::size_t>(std::ceil(0.01 * n)) - 1]);
    CHECK(s.p99 == vals[static_cast<std::size_t>(std::ceil(0.99 * n)) - 1]);
  }

  SECTION("Permutation invariant within the mask")
  {
    auto        v = oracle::random(g, Kind::Chi, 3);
    auto const  a = masked_stats(v, full);
    std::mt19937 gen(5);
    std::shuffle(v.data.begin(), v.data.end(), gen);
    auto const b = masked_stats(v, full);
    CHECK(a.min == b.min);
    CHECK(a.max == b.max);
    CHECK(a.p01 == b.p01);
    CHECK(a.p99 == b.p99);
    CHECK(a.mean == Catch::Approx(b.mean).epsilon(1e-12));
    CHECK(a.std == Catch::Approx(b.std).epsilon(1e-12));
  }

  SECTION("Errors")
  {
    CHECK_THROWS_AS(masked_stats(Volume(g, Kind::Chi), Volume(g, Kind::Mask)), ValidationError);
    CHECK_THROWS_AS(masked_stats(Volume(Grid3({4, 4, 5}), Kind::Chi), full), ValidationError);
  }
}

TEST_CASE("histogram", "[volcore]")
{
  Grid3 const g({6, 6, 6});
  auto const  full = oracle::fullMask(g);

  SECTION("All zero")
  {
    auto const h = histogram(Volume(g, Kind::Chi), full, 0.01);
    REQUIRE(h.counts.size() == 1);
    CHECK(h.counts[0] == 216);
    CHECK(h.bin_edges[0] == 0.);
    CHECK(h.bin_edges[1] == Catch::Approx(0.01));
  }

  SECTION("Counts, edges and percentile bounds")
  {
    auto const v = oracle::random(g, Kind::Chi, 11, -0.4, 0.6);
    auto const m = oracle::sphereMask(g, {2.5, 2.5, 2.5}, 2.6);
    auto const h = histogram(v, m, 0.05);
    Index      sum = 0;
    for (auto c : h.counts) { sum += c; }
    CHECK(sum == h.total);
    CHECK(h.total == maskCount(m));
    for (std::size_t i = 1; i < h.bin_edges.size(); i++) {
      CHECK(h.bin_edges[i] - h.bin_edges[i - 1] == Catch::Approx(0.05));
    }
    auto const s = masked_stats(v, m);
    CHECK(h.bin_edges.front() <= s.min);
    CHECK(h.bin_edges.back() >= s.max);
    CHECK(h.pct_bounds.at(1.) == s.p01);
    CHECK(h.pct_bounds.at(99.) == s.p99);
  }

  SECTION("Mirror property under negation")
  {
    auto v = oracle::random(g, Kind::Chi, 12, -0.3, 0.7);
    // Include exact edge values and zeros.
    v.data[0] = 0.f;
    v.data[1] = 0.1f;
    v.data[2] = -0.2f;
    Volume neg = v;
    for (auto &x : neg.data) { x = -x; }
    double const w = 0.05;
    auto const   h = histogram(v, full, w);
    auto const   hn = histogram(neg, full, w);
    for (Index b = h.first_bin; b <= h.lastBin(); b++) { CHECK(h.count(b) == hn.count(-b - 1)); }
  }

  SECTION("Errors")
  {
    CHECK_THROWS_AS(histogram(Volume(g, Kind::Chi), full, 0.), ValidationError);
    CHECK_THROWS_AS(histogram(Volume(g, Kind::Chi), Volume(g, Kind::Mask), 0.01), ValidationError);
  }
}
