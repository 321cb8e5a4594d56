#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "volformer/bytes.hpp"
#include "volformer/error.hpp"
#include "volformer/manifest.hpp"
#include "volformer/preprocess.hpp"
#include "volformer/rng.hpp"
#include "volformer/split.hpp"
#include "volformer/synthetic.hpp"
#include "volformer/volume.hpp"
#include "test_util.hpp"

using namespace volformer;
namespace fs = std::filesystem;
using volformer::testing_util::TempDir;

namespace {

Volume ramp_volume(VolumeExtents e) {
  Volume v;
  v.id = "ramp";
  v.extents = e;
  v.voxels.resize(e.voxels());
  for (std::size_t i = 0; i < v.voxels.size(); ++i) v.voxels[i] = static_cast<float>(i) * 0.5f;
  return v;
}

Manifest labeled_manifest(const std::vector<std::size_t>& per_class) {
  Manifest m;
  m.class_names = default_class_names(per_class.size());
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      m.entries.push_back({"c" + std::to_string(c) + "_" + std::to_string(i) + ".vvol",
                           static_cast<int>(c), std::nullopt, SplitTag::unassigned});
    }
  }
  return m;
}


}  // namespace

TEST(VvolTest, WriteReadRoundTrip) {
  TempDir dir;
  const Volume v = ramp_volume({3, 4, 5, 2});
  write_volume(v, dir.path() / "a.vvol");
  const Volume back = read_volume(dir.path() / "a.vvol");
  EXPECT_EQ(back.extents, v.extents);
  EXPECT_EQ(back.id, "a");
  ASSERT_EQ(back.voxels.size(), v.voxels.size());
  for (std::size_t i = 0; i < v.voxels.size(); ++i) EXPECT_EQ(back.voxels[i], v.voxels[i]);
  EXPECT_EQ(read_file(dir.path() / "a.vvol"), encode_volume(back));
}

TEST(VvolTest, HeaderLayout) {
  const auto bytes = encode_volume(ramp_volume({2, 2, 2, 1}));
  ASSERT_EQ(bytes.size(), 4u + 2 + 1 + 1 + 16 + 8 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "VVOL");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 0);  // dtype f32
  EXPECT_EQ(bytes[7], 4);  // rank
  EXPECT_EQ(bytes[8], 2);
  const Volume v = decode_volume(bytes);
  EXPECT_EQ(v.extents, (VolumeExtents{2, 2, 2, 1}));
  EXPECT_EQ(v.voxels.size(), 8u);
}

TEST(VvolTest, TruncatedPayloadReportsByteCounts) {
  auto bytes = encode_volume(ramp_volume({2, 2, 2, 1}));
  bytes.resize(bytes.size() - 3);
  try {
    decode_volume(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("expected 32 bytes"), std::string::npos) << what;
    EXPECT_NE(what.find("29 remain"), std::string::npos) << what;
    EXPECT_EQ(e.offset(), 24u);
  }
}

TEST(VvolTest, RejectsBadHeaders) {
  const auto good = encode_volume(ramp_volume({1, 1, 1, 1}));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_volume(bad_magic), FormatError);
  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_THROW(decode_volume(bad_version), FormatError);
  auto bad_rank = good;
  bad_rank[7] = 3;
  EXPECT_THROW(decode_volume(bad_rank), FormatError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_volume(trailing), FormatError);
  EXPECT_THROW(decode_volume(std::vector<std::uint8_t>{'V', 'V'}), FormatError);
  EXPECT_THROW(read_volume("/nonexistent/dir/x.vvol"), IoError);
}

TEST(ManifestTest, JsonlRoundTrip) {
  Manifest m = labeled_manifest({2, 1, 1});
  m.entries[0].subject_id = "S1";
  m.entries[1].split = SplitTag::val;
  const std::string text = manifest_to_jsonl(m);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            R"({"path":"c0_0.vvol","label":0,"subject_id":"S1","split":null})");
  const Manifest back = manifest_from_jsonl(text, 3);
  EXPECT_EQ(manifest_to_jsonl(back), text);
  EXPECT_EQ(back.entries[1].split, SplitTag::val);
}

TEST(ManifestTest, RejectsInvalidRecords) {
  EXPECT_THROW(manifest_from_jsonl(R"({"path":"a","label":5})", 3), DataError);
  EXPECT_THROW(manifest_from_jsonl("{\"path\":\"a\",\"label\":0}\n{\"path\":\"a\",\"label\":1}", 3),
               DataError);
  EXPECT_THROW(manifest_from_jsonl(R"({"path":"a","label":0,"split":"holdout"})", 3), DataError);
  EXPECT_THROW(manifest_from_jsonl(R"({"path":"a","label":0,"extra":1})", 3), DataError);
  EXPECT_THROW(manifest_from_jsonl("not json", 3), DataError);
}

TEST(CentralSlicesTest, SelectsFloorCenteredRange) {
  const Volume v = ramp_volume({192, 2, 3, 1});
  const Volume out = select_central_slices(v, 32);
  EXPECT_EQ(out.extents, (VolumeExtents{32, 2, 3, 1}));
  for (std::size_t t = 0; t < 32; ++t) {
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t w = 0; w < 3; ++w) EXPECT_EQ(out.at(t, h, w), v.at(t + 80, h, w));
    }
  }
}

TEST(CentralSlicesTest, IdentityAndOddRemainder) {
  const Volume v32 = ramp_volume({32, 2, 2, 1});
  EXPECT_EQ(select_central_slices(v32, 32).voxels, v32.voxels);
  const Volume v33 = ramp_volume({33, 2, 2, 1});
  const Volume out = select_central_slices(v33, 32);
  EXPECT_EQ(out.at(0, 0, 0), v33.at(0, 0, 0));
  EXPECT_EQ(out.at(31, 1, 1), v33.at(31, 1, 1));
  EXPECT_THROW(select_central_slices(ramp_volume({31, 2, 2, 1}), 32), DataError);
}

TEST(ResampleTest, IdentityConstantAndCenter) {
  const Volume v = ramp_volume({2, 3, 4, 1});
  EXPECT_EQ(resample_slices(v, 3, 4).voxels, v.voxels);

  Volume flat = ramp_volume({2, 5, 5, 1});
  std::fill(flat.voxels.begin(), flat.voxels.end(), 2.5f);
  const Volume up = resample_slices(flat, 7, 3);
  EXPECT_EQ(up.extents, (VolumeExtents{2, 7, 3, 1}));
  for (float x : up.voxels) EXPECT_EQ(x, 2.5f);

  Volume checker;
  checker.extents = {1, 2, 2, 1};
  checker.voxels = {1.0f, 0.0f, 0.0f, 1.0f};
  const Volume one = resample_slices(checker, 1, 1);
  EXPECT_FLOAT_EQ(one.voxels[0], 0.5f);
  checker.voxels = {1.0f, 2.0f, 3.0f, 6.0f};
  EXPECT_FLOAT_EQ(resample_slices(checker, 1, 1).voxels[0], 3.0f);
}

TEST(ResampleTest, CornersAreAligned) {
  const Volume v = ramp_volume({1, 4, 4, 1});
  const Volume out = resample_slices(v, 7, 7);
  EXPECT_EQ(out.at(0, 0, 0), v.at(0, 0, 0));
  EXPECT_EQ(out.at(0, 6, 6), v.at(0, 3, 3));
  EXPECT_FLOAT_EQ(out.at(0, 0, 1), (v.at(0, 0, 0) + v.at(0, 0, 1)) / 2);
}

TEST(NormalizeTest, MinMaxAndConstant) {
  Volume v;
  v.extents = {1, 1, 3, 1};
  v.voxels = {0.0f, 5.0f, 10.0f};
  EXPECT_EQ(normalize_intensity(v, NormalizeMode::minmax).voxels,
            (std::vector<float>{0.0f, 0.5f, 1.0f}));
  v.voxels = {0.1f, 0.1f, 0.1f};
  for (auto mode : {NormalizeMode::minmax, NormalizeMode::zscore}) {
    for (float x : normalize_intensity(v, mode).voxels) EXPECT_EQ(x, 0.0f);
  }
}

TEST(NormalizeTest, ZScoreMoments) {
  Rng rng(21);
  Volume v = ramp_volume({3, 5, 7, 1});
  for (auto& x : v.voxels) x = static_cast<float>(3.0 + 4.0 * rng.normal());
  const Volume z = normalize_intensity(v, NormalizeMode::zscore);
  double mean = 0, sq = 0;
  for (float x : z.voxels) mean += x;
  mean /= z.voxels.size();
  for (float x : z.voxels) sq += (x - mean) * (x - mean);
  EXPECT_NEAR(mean, 0.0, 1e-6);
  EXPECT_NEAR(std::sqrt(sq / z.voxels.size()), 1.0, 1e-6);
  EXPECT_THROW(parse_normalize_mode("robust"), ConfigError);
}

TEST(StratifiedSplitTest, SixTwoTwoPerClass) {
  const Manifest m = labeled_manifest({10, 10, 10});
  SplitSpec spec;
  spec.seed = 3;
  const Manifest out = stratified_split(m, spec);
  std::map<std::pair<int, SplitTag>, int> counts;
  for (const auto& e : out.entries) {
    ASSERT_NE(e.split, SplitTag::unassigned);
    ++counts[{e.label, e.split}];
  }
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ((counts[{c, SplitTag::train}]), 6);
    EXPECT_EQ((counts[{c, SplitTag::val}]), 2);
    EXPECT_EQ((counts[{c, SplitTag::test}]), 2);
  }
}

TEST(StratifiedSplitTest, SeedDeterminismAndCountConservation) {
  const Manifest m = labeled_manifest({12, 9, 7});
  SplitSpec a;
  a.seed = 1;
  SplitSpec b = a;
  b.seed = 2;
  const auto first = manifest_to_jsonl(stratified_split(m, a));
  EXPECT_EQ(first, manifest_to_jsonl(stratified_split(m, a)));
  const Manifest other = stratified_split(m, b);
  EXPECT_NE(first, manifest_to_jsonl(other));
  for (int c = 0; c < 3; ++c) {
    const SplitCounts expected = split_counts(m.class_counts()[c], a);
    std::size_t train = 0, val = 0, test = 0;
    for (const auto& e : other.entries) {
      if (e.label != c) continue;
      train += e.split == SplitTag::train;
      val += e.split == SplitTag::val;
      test += e.split == SplitTag::test;
    }
    EXPECT_EQ(train, expected.train);
    EXPECT_EQ(val, expected.val);
    EXPECT_EQ(test, expected.test);
  }
}

TEST(StratifiedSplitTest, RoundingRule) {
  SplitSpec spec;
  // 7: train round(4.2) = 4, val round(1.4) = 1, test 2.
  EXPECT_EQ(split_counts(7, spec).train, 4u);
  EXPECT_EQ(split_counts(7, spec).val, 1u);
  EXPECT_EQ(split_counts(7, spec).test, 2u);
  // 3: round(1.8) = 2 would leave test empty; clamps keep one per split.
  EXPECT_EQ(split_counts(3, spec).train, 1u);
  EXPECT_EQ(split_counts(3, spec).val, 1u);
  EXPECT_EQ(split_counts(3, spec).test, 1u);
}

TEST(StratifiedSplitTest, RejectsDegenerateRequests) {
  const Manifest m = labeled_manifest({10, 10, 2});
  SplitSpec spec;
  EXPECT_THROW(stratified_split(m, spec), DataError);
  spec.train = 1.0;
  spec.val = 0.0;
  spec.test = 0.0;
  EXPECT_THROW(stratified_split(labeled_manifest({10, 10, 10}), spec), ConfigError);
  spec.train = 0.5;
  spec.val = 0.3;
  spec.test = 0.3;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(StratifiedSplitTest, SubjectLevelKeepsSubjectsTogether) {
  Manifest m = labeled_manifest({12, 12, 12});
  for (std::size_t i = 0; i < m.entries.size(); ++i) m.entries[i].subject_id = "S" + std::to_string(i / 3);
  SplitSpec spec;
  spec.stratify_by = StratifyBy::subject;
  spec.seed = 5;
  const Manifest out = stratified_split(m, spec);
  std::map<std::string, std::set<SplitTag>> tags;
  for (const auto& e : out.entries) tags[*e.subject_id].insert(e.split);
  for (const auto& [subject, set] : tags) EXPECT_EQ(set.size(), 1u) << subject;
  std::set<SplitTag> used;
  for (const auto& e : out.entries) used.insert(e.split);
  EXPECT_EQ(used.size(), 3u);
}

TEST(FoldsTest, PartitionOfTwentySamples) {
  const Manifest m = labeled_manifest({10, 10});
  const auto folds = make_folds(m, 10, 4);
  ASSERT_EQ(folds.size(), 10u);
  std::vector<int> tested(m.entries.size(), 0);
  for (const auto& f : folds) {
    EXPECT_EQ(f.test.size(), 2u);
    EXPECT_EQ(f.train.size() + f.test.size(), m.entries.size());
    for (auto i : f.test) ++tested[i];
    std::set<std::size_t> train(f.train.begin(), f.train.end());
    for (auto i : f.test) EXPECT_EQ(train.count(i), 0u);
  }
  for (int t : tested) EXPECT_EQ(t, 1);
}

TEST(FoldsTest, LeaveOneOut) {
  const Manifest m = labeled_manifest({6});
  const auto folds = make_folds(m, 6);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    ASSERT_EQ(f.test.size(), 1u);
    seen.insert(f.test[0]);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(FoldsTest, ClassRatiosWithinOneItem) {
  // Counting oracle over a 3-class 30-item manifest with uneven classes.
  const Manifest m = labeled_manifest({14, 10, 6});
  const std::size_t k = 5;
  const auto folds = make_folds(m, k, 9);
  for (const auto& f : folds) {
    std::vector<double> counts(3, 0.0);
    for (auto i : f.test) counts[m.entries[i].label] += 1;
    for (int c = 0; c < 3; ++c) {
      const double proportional = static_cast<double>(m.class_counts()[c]) / k;
      EXPECT_LE(std::abs(counts[c] - proportional), 1.0);
    }
  }
  EXPECT_THROW(make_folds(labeled_manifest({10, 9}), 10), DataError);
}

TEST(FoldsTest, RepetitionsReshuffle) {
  const Manifest m = labeled_manifest({10, 10, 10});
  EXPECT_EQ(make_folds(m, 10, 1, 0)[0].test, make_folds(m, 10, 1, 0)[0].test);
  EXPECT_NE(make_folds(m, 10, 1, 0)[0].test, make_folds(m, 10, 1, 1)[0].test);
}

TEST(HoldoutTest, PerClassValidationCarve) {
  const Manifest m = labeled_manifest({8, 8, 8});
  std::vector<std::size_t> pool(m.entries.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  const auto h = stratified_holdout(m, pool, 0.25, 3);
  EXPECT_EQ(h.val.size(), 6u);
  EXPECT_EQ(h.train.size(), 18u);
}

TEST(SyntheticTest, SameSeedIsBitIdentical) {
  SyntheticSpec spec;
  spec.seed = 77;
  const auto a = gen_synthetic(spec);
  const auto b = gen_synthetic(spec);
  ASSERT_EQ(a.size(), 30u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].voxels, b[i].voxels);
    EXPECT_EQ(a[i].label, b[i].label);
  }
  spec.seed = 78;
  EXPECT_NE(gen_synthetic(spec)[0].voxels, a[0].voxels);
}

TEST(SyntheticTest, ClassMeansDiffer) {
  SyntheticSpec spec;
  spec.seed = 1;
  const auto volumes = gen_synthetic(spec);
  const std::size_t n = spec.extents.voxels();
  std::vector<std::vector<double>> means(3, std::vector<double>(n, 0.0));
  for (const auto& v : volumes) {
    for (std::size_t i = 0; i < n; ++i) means[v.label][i] += v.voxels[i] / 10.0;
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      double diff = 0;
      for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(means[a][i] - means[b][i]));
      EXPECT_GT(diff, 0.5) << a << " vs " << b;
    }
  }
}

TEST(SyntheticTest, NoiseFreeIsSeparableByBlobArgmax) {
  SyntheticSpec spec;
  spec.noise_sigma = 0.0;
  spec.extents = {4, 8, 8, 1};
  for (const auto& v : gen_synthetic(spec)) {
    const auto peak = std::max_element(v.voxels.begin(), v.voxels.end()) - v.voxels.begin();
    const std::size_t w = peak % 8, h = (peak / 8) % 8, t = peak / 64;
    int nearest = -1;
    double best = 1e30;
    for (int c = 0; c < 3; ++c) {
      const auto center = class_blob_center(c, 3, spec.extents);
      const double d = std::pow(t - center[0], 2) + std::pow(h - center[1], 2) +
                       std::pow(w - center[2], 2);
      if (d < best) {
        best = d;
        nearest = c;
      }
    }
    EXPECT_EQ(nearest, v.label) << v.id;
  }
}

TEST(SyntheticTest, WritesDatasetAndManifest) {
  TempDir dir;
  SyntheticSpec spec;
  spec.seed = 2;
  const Manifest m = write_synthetic_dataset(spec, dir.path());
  EXPECT_EQ(m.entries.size(), 30u);
  const Manifest back = read_manifest(dir.path() / "manifest.jsonl");
  EXPECT_EQ(back.class_counts(), (std::vector<std::size_t>{10, 10, 10}));
  const Volume v = load_entry(back, back.entries[12]);
  EXPECT_EQ(v.label, 1);
  EXPECT_EQ(v.voxels, gen_synthetic(spec)[12].voxels);
}
