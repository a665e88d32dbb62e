#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "flairsyn/augment.hpp"
#include "flairsyn/manifest.hpp"
#include "flairsyn/pairs_folds.hpp"
#include "flairsyn/patches.hpp"
#include "flairsyn/volume.hpp"
#include "flairsyn/volume_io.hpp"

using namespace flairsyn;
using namespace flairsyn::data;
using testutil::random_volume;
using testutil::TmpDir;

TEST_CASE("center crop picks the lower start on odd margins") {
  Volume v({5, 6, 7});
  for (int64_t i = 0; i < v.numel(); ++i) v.voxels[i] = static_cast<double>(i);
  v.refresh_intensity_range();

  auto start = center_crop_start({5, 6, 7}, {2, 2, 2});
  CHECK(start == std::array<int64_t, 3>{1, 2, 2});

  Volume c = center_crop(v, {2, 2, 2});
  CHECK(c.shape == std::array<int64_t, 3>{2, 2, 2});
  for (int64_t z = 0; z < 2; ++z)
    for (int64_t y = 0; y < 2; ++y)
      for (int64_t x = 0; x < 2; ++x) CHECK(c.at(x, y, z) == v.at(x + 1, y + 2, z + 2));

  Volume e = crop_at(v, {0, 1, 3}, {2, 2, 2});
  CHECK(e.at(0, 0, 0) == v.at(0, 1, 3));

  CHECK_THROWS(center_crop(v, {9, 2, 2}));
  CHECK_THROWS(crop_at(v, {4, 0, 0}, {2, 2, 2}));
}

TEST_CASE("intensity normalization attains both endpoints") {
  Rng rng(31);
  Volume v = random_volume({4, 4, 4}, rng, 10.0, 90.0);
  Volume n = normalize_to_signed_unit(v);
  CHECK(n.min_intensity == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(n.max_intensity == doctest::Approx(1.0).epsilon(1e-15));
  bool hit_lo = false, hit_hi = false;
  for (double x : n.voxels) {
    if (x == -1.0) hit_lo = true;
    if (x == 1.0) hit_hi = true;
    CHECK(x >= -1.0);
    CHECK(x <= 1.0);
  }
  CHECK(hit_lo);
  CHECK(hit_hi);

  Volume flat({2, 2, 2});
  flat.voxels.assign(8, 3.0);
  flat.refresh_intensity_range();
  CHECK_THROWS_WITH_AS(normalize_to_signed_unit(flat), doctest::Contains("degenerate intensity range"),
                       std::invalid_argument);
}

TEST_CASE("volume validate catches broken invariants") {
  Volume v({2, 2, 2});
  v.refresh_intensity_range();
  v.validate("ok");
  Volume bad = v;
  bad.voxels[3] = std::nan("");
  CHECK_THROWS(bad.validate("nan"));
  Volume wrong = v;
  wrong.voxels.pop_back();
  CHECK_THROWS(wrong.validate("short"));
  Volume sp = v;
  sp.spacing_mm[1] = 0.0;
  CHECK_THROWS(sp.validate("spacing"));
}

TEST_CASE("volume files round-trip") {
  TmpDir tmp("volume_io");
  Rng rng(32);
  Volume v = random_volume({5, 4, 3}, rng, -2.0, 2.0);
  v.spacing_mm = {0.8, 1.0, 1.25};

  SUBCASE("rawvol is bit-exact") {
    auto p = tmp.file("a.rawvol");
    save_volume(v, p);
    Volume r = load_volume(p);
    CHECK(r.shape == v.shape);
    CHECK(r.spacing_mm == v.spacing_mm);
    for (int64_t i = 0; i < v.numel(); ++i) CHECK(r.voxels[i] == v.voxels[i]);
  }
  SUBCASE("nii float64 is bit-exact") {
    auto p = tmp.file("a.nii");
    save_volume(v, p, VoxelDType::float64);
    Volume r = load_volume(p);
    CHECK(r.shape == v.shape);
    for (int64_t i = 0; i < v.numel(); ++i) CHECK(r.voxels[i] == v.voxels[i]);
    for (int k = 0; k < 3; ++k) CHECK(r.spacing_mm[k] == doctest::Approx(v.spacing_mm[k]).epsilon(1e-6));
  }
  SUBCASE("nii.gz float64 is bit-exact") {
    auto p = tmp.file("a.nii.gz");
    save_volume(v, p, VoxelDType::float64);
    Volume r = load_volume(p);
    for (int64_t i = 0; i < v.numel(); ++i) CHECK(r.voxels[i] == v.voxels[i]);
  }
  SUBCASE("float32 costs precision but stays close") {
    auto p = tmp.file("a32.nii.gz");
    save_volume(v, p, VoxelDType::float32);
    Volume r = load_volume(p);
    for (int64_t i = 0; i < v.numel(); ++i) CHECK(r.voxels[i] == doctest::Approx(v.voxels[i]).epsilon(1e-6));
  }
  SUBCASE("integer-valued data survives an int16 round-trip") {
    Volume iv = v;
    for (auto& x : iv.voxels) x = std::floor(x * 100.0);  // integers in [-200, 200]
    iv.refresh_intensity_range();
    auto p = tmp.file("a16.nii");
    save_volume(iv, p, VoxelDType::int16);
    Volume r = load_volume(p);
    for (int64_t i = 0; i < iv.numel(); ++i) CHECK(r.voxels[i] == iv.voxels[i]);
  }
}

TEST_CASE("volume loader rejects corrupt files") {
  TmpDir tmp("volume_bad");
  {
    std::ofstream f(tmp.file("junk.nii"), std::ios::binary);
    f << "this is not a nifti header at all";
  }
  CHECK_THROWS(load_volume(tmp.file("junk.nii")));
  {
    Volume v({4, 4, 4});
    v.refresh_intensity_range();
    save_volume(v, tmp.file("t.rawvol"));
    auto bytes = std::filesystem::file_size(tmp.file("t.rawvol"));
    std::filesystem::resize_file(tmp.file("t.rawvol"), bytes / 2);
  }
  CHECK_THROWS(load_volume(tmp.file("t.rawvol")));
  CHECK_THROWS(load_volume(tmp.file("missing.nii.gz")));
  CHECK_THROWS(save_volume(Volume({2, 2, 2}), tmp.file("bad.xyz")));
}

namespace {

// 2-timepoint rawvol micro-cohort for manifest/sample tests.
std::vector<StudyRecord> write_micro_cohort(const TmpDir& tmp, const std::vector<std::pair<std::string, int>>& spec,
                                            std::array<int64_t, 3> shape = {6, 5, 4}) {
  Rng rng(99);
  std::vector<StudyRecord> records;
  for (const auto& [pid, ntp] : spec) {
    for (int tp = 1; tp <= ntp; ++tp) {
      StudyRecord rec;
      rec.participant_id = pid;
      rec.timepoint_index = tp;
      rec.days_from_baseline = (tp - 1) * 400;
      for (const auto& mod : kModalities) {
        Volume v = random_volume(shape, rng, 0.0, 100.0);
        auto path = tmp.file(pid + "_tp" + std::to_string(tp) + "_" + mod + ".rawvol");
        save_volume(v, path);
        rec.modality_paths[mod] = path;
      }
      records.push_back(rec);
    }
  }
  return records;
}

}  // namespace

TEST_CASE("manifest save/load round-trip resolves relative paths") {
  TmpDir tmp("manifest");
  auto records = write_micro_cohort(tmp, {{"A", 2}, {"B", 3}});
  auto mpath = tmp.file("manifest.csv");
  save_manifest(records, mpath);

  auto loaded = load_manifest(mpath);
  REQUIRE(loaded.size() == records.size());
  CHECK(loaded.front().participant_id == "A");
  CHECK(loaded.back().participant_id == "B");
  CHECK(loaded.back().timepoint_index == 3);
  for (const auto& rec : loaded)
    for (const auto& mod : kModalities) {
      CAPTURE(rec.participant_id);
      CHECK(std::filesystem::exists(rec.path(mod)));
      CHECK(std::filesystem::path(rec.path(mod)).is_absolute());
    }
  CHECK(loaded[1].days_from_baseline == 400);
}

TEST_CASE("manifest resolves bare filenames against its own directory") {
  TmpDir tmp("manifest_rel");
  Rng rng(41);
  for (const char* name : {"m.rawvol", "t.rawvol", "p.rawvol", "f.rawvol"})
    save_volume(random_volume({3, 3, 3}, rng), tmp.file(name));
  {
    std::ofstream f(tmp.file("manifest.csv"));
    f << "participant_id,timepoint_index,days_from_baseline,mprage_path,t2_path,pd_path,flair_path\n";
    f << "A,1,0,m.rawvol,t.rawvol,p.rawvol,f.rawvol\n";
  }
  auto loaded = load_manifest(tmp.file("manifest.csv"));
  REQUIRE(loaded.size() == 1);
  for (const auto& mod : kModalities) CHECK(std::filesystem::exists(loaded[0].path(mod)));
}

TEST_CASE("manifest loader reports the offending row") {
  TmpDir tmp("manifest_bad");
  const std::string header =
      "participant_id,timepoint_index,days_from_baseline,mprage_path,t2_path,pd_path,flair_path";

  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(tmp.file(name));
    f << header << "\n" << body;
    return tmp.file(name);
  };

  CHECK_THROWS_WITH_AS(load_manifest(write("short.csv", "A,1,0,a.nii\n")), doctest::Contains("manifest row 2"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(load_manifest(write("dup.csv",
                                           "A,1,0,a,b,c,d\n"
                                           "A,1,10,a,b,c,d\n")),
                       doctest::Contains("duplicate"), std::runtime_error);
  CHECK_THROWS_WITH_AS(load_manifest(write("days.csv",
                                           "A,1,100,a,b,c,d\n"
                                           "A,2,50,a,b,c,d\n")),
                       doctest::Contains("days_from_baseline"), std::runtime_error);
  CHECK_THROWS(load_manifest(tmp.file("nonexistent.csv")));
  {
    std::ofstream f(tmp.file("head.csv"));
    f << "participant,flair\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(tmp.file("head.csv")), doctest::Contains("header"), std::runtime_error);
}

TEST_CASE("sample pairs are all forward-in-time combinations") {
  std::vector<StudyRecord> records;
  auto add = [&](const std::string& pid, int tp, int days) {
    StudyRecord r;
    r.participant_id = pid;
    r.timepoint_index = tp;
    r.days_from_baseline = days;
    for (const auto& mod : kModalities) r.modality_paths[mod] = "unused";
    records.push_back(r);
  };
  add("A", 1, 0);
  add("A", 2, 360);
  add("A", 3, 740);
  add("B", 1, 0);
  add("C", 1, 0);
  add("C", 2, 800);

  std::vector<std::string> warnings;
  auto pairs = build_sample_pairs(records, &warnings);
  CHECK(pairs.size() == 3 + 0 + 1);  // C(3,2) + nothing + C(2,2)
  for (const auto& p : pairs) {
    CHECK(p.time_lag_days > 0);
    CHECK(p.source.timepoint_index < p.target.timepoint_index);
    CHECK(p.source.participant_id == p.target.participant_id);
    CHECK(p.time_lag_days == p.target.days_from_baseline - p.source.days_from_baseline);
  }
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("B") != std::string::npos);

  CHECK(pair_id(pairs[0]) == "A_tp1_to_tp2");
}

TEST_CASE("fold assignment balances timepoint counts and stays deterministic") {
  std::vector<ParticipantSummary> parts;
  for (int i = 0; i < 14; ++i) parts.push_back({"P" + std::to_string(i), 4});
  for (int i = 14; i < 18; ++i) parts.push_back({"P" + std::to_string(i), 5});
  parts.push_back({"P18", 6});

  auto split = assign_folds(parts, 5, 7);
  split.validate();
  CHECK(split.k == 5);
  std::array<int, 5> tp_total{};
  for (const auto& p : parts) tp_total[static_cast<size_t>(split.assignment.at(p.participant_id))] += p.timepoint_count;
  int lo = *std::min_element(tp_total.begin(), tp_total.end());
  int hi = *std::max_element(tp_total.begin(), tp_total.end());
  CHECK(hi - lo <= 6);  // no fold can end up further off than one participant

  auto again = assign_folds(parts, 5, 7);
  CHECK(again.assignment == split.assignment);
  auto other = assign_folds(parts, 5, 8);
  CHECK(other.k == 5);  // may or may not differ in layout; only shape is guaranteed

  FoldSplit broken = split;
  broken.assignment["P0"] = 9;
  CHECK_THROWS(broken.validate());
}

TEST_CASE("fold override file fixes the published split") {
  auto split = load_fold_override(testutil::fixture_path("isbi2015_fold_override.json"));
  split.validate();
  CHECK(split.k == 5);
  std::array<std::set<std::string>, 5> folds;
  for (const auto& [pid, fold] : split.assignment) folds[static_cast<size_t>(fold)].insert(pid);
  CHECK(folds[0] == std::set<std::string>{"P01", "P02", "P03", "P04"});
  CHECK(folds[1] == std::set<std::string>{"P05", "P06", "P07", "P08"});
  CHECK(folds[2] == std::set<std::string>{"P09", "P10", "P11", "P15"});
  CHECK(folds[3] == std::set<std::string>{"P12", "P13", "P16"});
  CHECK(folds[4] == std::set<std::string>{"P14", "P17", "P18", "P19"});
}

TEST_CASE("patch layout covers the volume with the two-offset grid") {
  auto layout = plan_patch_layout({150, 190, 150}, {128, 128, 128});
  CHECK(layout.offsets[0] == std::vector<int64_t>{0, 22});
  CHECK(layout.offsets[1] == std::vector<int64_t>{0, 62});
  CHECK(layout.offsets[2] == std::vector<int64_t>{0, 22});
  CHECK(layout.patch_count() == 8);
  CHECK(layout.offset_at(0) == std::array<int64_t, 3>{0, 0, 0});
  CHECK(layout.offset_at(1) == std::array<int64_t, 3>{0, 0, 22});  // x most significant
  CHECK(layout.offset_at(4) == std::array<int64_t, 3>{22, 0, 0});
  CHECK(layout.offset_at(7) == std::array<int64_t, 3>{22, 62, 22});

  auto exact = plan_patch_layout({24, 24, 24}, {24, 24, 24});
  CHECK(exact.patch_count() == 1);

  CHECK_THROWS(plan_patch_layout({16, 16, 16}, {24, 24, 24}));
}

TEST_CASE("patch extract/aggregate round-trips the volume") {
  Rng rng(33);
  for (auto shapes : {std::pair<std::array<int64_t, 3>, std::array<int64_t, 3>>{{10, 12, 9}, {6, 6, 6}},
                      {{8, 8, 8}, {8, 8, 8}},
                      {{13, 9, 11}, {7, 5, 8}}}) {
    Volume v = random_volume(shapes.first, rng, -1.0, 1.0);
    auto layout = plan_patch_layout(shapes.first, shapes.second);
    auto patches = extract_patches(v, layout);
    REQUIRE(static_cast<int64_t>(patches.size()) == layout.patch_count());
    for (const auto& p : patches) CHECK(p.shape == shapes.second);
    Volume back = aggregate_patches(patches, layout);
    REQUIRE(back.shape == v.shape);
    for (int64_t i = 0; i < v.numel(); ++i) CHECK(back.voxels[i] == doctest::Approx(v.voxels[i]).epsilon(1e-12));
  }
}

TEST_CASE("aggregate refuses layouts that leave voxels uncovered") {
  PatchLayout layout;
  layout.full_shape = {6, 4, 4};
  layout.patch_shape = {2, 4, 4};
  layout.offsets = {std::vector<int64_t>{0, 4}, std::vector<int64_t>{0}, std::vector<int64_t>{0}};  // gap at x=2..3
  std::vector<Volume> patches(2, Volume({2, 4, 4}));
  for (auto& p : patches) p.refresh_intensity_range();
  CHECK_THROWS(aggregate_patches(patches, layout));
}

TEST_CASE("load_sample crops, normalizes and labels the pair") {
  TmpDir tmp("load_sample");
  auto records = write_micro_cohort(tmp, {{"P07", 2}});
  SamplePair pair;
  pair.source = records[0];
  pair.target = records[1];
  pair.time_lag_days = records[1].days_from_baseline - records[0].days_from_baseline;

  Sample s = load_sample(pair, {4, 4, 4});
  CHECK(s.id == "P07_tp1_to_tp2");
  CHECK(s.participant_id == "P07");
  CHECK(s.time_lag_days == 400);
  for (const auto& v : s.sources) {
    CHECK(v.shape == std::array<int64_t, 3>{4, 4, 4});
    CHECK(v.min_intensity >= -1.0);
    CHECK(v.max_intensity <= 1.0);
  }
  CHECK(s.target.shape == std::array<int64_t, 3>{4, 4, 4});

  // crop axis 0 keeps the full extent
  Sample full = load_sample(pair, {0, 0, 0});
  CHECK(full.target.shape == std::array<int64_t, 3>{6, 5, 4});

  // explicit crop start beats the centered default
  Sample corner = load_sample(pair, {4, 4, 4}, std::array<int64_t, 3>{0, 0, 0});
  Volume raw = load_volume(records[1].path("FLAIR"));
  Volume manual = normalize_to_signed_unit(crop_at(raw, {0, 0, 0}, {4, 4, 4}));
  for (int64_t i = 0; i < manual.numel(); ++i) CHECK(corner.target.voxels[i] == manual.voxels[i]);

  CHECK_THROWS(load_sample(pair, {64, 64, 64}));
}

TEST_CASE("identity augmentation is bit-exact and draws stay in range") {
  Rng rng(34);
  Volume v = random_volume({7, 6, 5}, rng, -1.0, 1.0);

  AugmentParams id;  // zero angles, unit scale
  Volume same = apply_spatial_transform(v, id, 0.0);
  for (int64_t i = 0; i < v.numel(); ++i) CHECK(same.voxels[i] == v.voxels[i]);

  Rng draw_rng(35);
  for (int i = 0; i < 50; ++i) {
    auto p = draw_augment_params(draw_rng);
    for (double a : p.angles_rad) CHECK(std::abs(a) <= kMaxRotationDeg * M_PI / 180.0 + 1e-12);
    CHECK(p.scale >= kMinScale);
    CHECK(p.scale <= kMaxScale);
  }

  Rng r1(36), r2(36);
  auto p1 = draw_augment_params(r1);
  auto p2 = draw_augment_params(r2);
  CHECK(p1.angles_rad == p2.angles_rad);
  CHECK(p1.scale == p2.scale);
}

TEST_CASE("upscaling grows a centered ball roughly cubically") {
  Volume ball({24, 24, 24});
  const double c = 11.5, r = 6.0;
  int64_t before = 0;
  for (int64_t z = 0; z < 24; ++z)
    for (int64_t y = 0; y < 24; ++y)
      for (int64_t x = 0; x < 24; ++x) {
        double d2 = (x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c);
        ball.at(x, y, z) = d2 <= r * r ? 1.0 : 0.0;
        before += d2 <= r * r ? 1 : 0;
      }
  ball.refresh_intensity_range();

  AugmentParams p;
  p.scale = 1.1;
  Volume grown = apply_spatial_transform(ball, p, 0.0);
  int64_t after = 0;
  for (double x : grown.voxels) after += x > 0.5 ? 1 : 0;
  double ratio = static_cast<double>(after) / static_cast<double>(before);
  CHECK(ratio > 1.15);  // 1.1^3 = 1.331, trilinear blur erodes some of it
  CHECK(ratio < 1.5);
}

TEST_CASE("augment_sample applies one transform to all five volumes") {
  TmpDir tmp("augment_sample");
  auto records = write_micro_cohort(tmp, {{"Q", 2}}, {12, 12, 12});
  SamplePair pair{records[0], records[1], 400};
  Sample s = load_sample(pair, {0, 0, 0});

  Rng r1(40), r2(40);
  Sample a = augment_sample(s, r1);
  CHECK(a.time_lag_days == s.time_lag_days);
  CHECK(a.id == s.id);

  // same seed, single volume: the target must match a manual shared-params pass
  auto params = draw_augment_params(r2);
  Volume manual = apply_spatial_transform(s.target, params, -1.0);
  for (int64_t i = 0; i < manual.numel(); ++i) CHECK(a.target.voxels[i] == manual.voxels[i]);
  Volume manual0 = apply_spatial_transform(s.sources[0], params, -1.0);
  for (int64_t i = 0; i < manual0.numel(); ++i) CHECK(a.sources[0].voxels[i] == manual0.voxels[i]);
}
