#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "canids/dataset.hpp"

using namespace canids;

namespace {

struct TableRow {
  Subset subset;
  std::size_t benign, malicious;
};

// Per-subset composition of the ROAD corpus used in the original study.
constexpr TableRow kRoadTable[] = {
    {Subset::FA, 87907, 1061},       {Subset::MECTA, 57932, 88},    {Subset::MSA, 520216, 17221},
    {Subset::RLOFFA, 180357, 10605}, {Subset::RLONA, 480021, 15195}, {Subset::CSA, 175412, 5493},
};

Dataset synthetic_subset(Subset s, std::size_t benign, std::size_t malicious, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.reserve(benign + malicious);
  for (std::size_t i = 0; i < benign + malicious; ++i) {
    LabeledRecord r;
    for (auto& b : r.features) b = static_cast<std::uint8_t>(rng.below(256));
    r.label = i < benign ? 0 : 1;
    r.subset = s;
    r.can_id = static_cast<std::uint16_t>(rng.below(0x800));
    ds.add(r);
  }
  return ds;
}

AttackSpec speedometer_spec() {
  AttackSpec spec;
  spec.subset = Subset::MSA;
  spec.entries.push_back({0x0D0, PayloadPattern::exact({255, 255, 255, 255, 255, 255, 255, 255}), {{5.0, 10.0}}});
  return spec;
}

CanFrame frame(double t, std::uint16_t id, Payload p) { return {t, id, 8, p}; }

ErrorCode read_error(const std::string& text) {
  std::istringstream in(text);
  try {
    read_csv(in);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(LabelFrames, ExactMatchInsideWindow) {
  const Payload ones{255, 255, 255, 255, 255, 255, 255, 255};
  const auto recs = label_frames({frame(7.0, 0x0D0, ones)}, speedometer_spec());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].label, 1);
  EXPECT_EQ(recs[0].subset, Subset::MSA);
  EXPECT_EQ(recs[0].can_id, 0x0D0);
}

TEST(LabelFrames, PayloadMismatch) {
  const auto recs = label_frames({frame(7.0, 0x0D0, {254, 255, 255, 255, 255, 255, 255, 255})}, speedometer_spec());
  EXPECT_EQ(recs[0].label, 0);
}

TEST(LabelFrames, OutsideWindow) {
  const Payload ones{255, 255, 255, 255, 255, 255, 255, 255};
  const auto recs = label_frames({frame(12.0, 0x0D0, ones), frame(7.0, 0x0D1, ones)}, speedometer_spec());
  EXPECT_EQ(recs[0].label, 0);
  EXPECT_EQ(recs[1].label, 0);
}

TEST(LabelFrames, WindowIsClosed) {
  const Payload ones{255, 255, 255, 255, 255, 255, 255, 255};
  const auto recs = label_frames({frame(5.0, 0x0D0, ones), frame(10.0, 0x0D0, ones)}, speedometer_spec());
  EXPECT_EQ(recs[0].label, 1);
  EXPECT_EQ(recs[1].label, 1);
}

TEST(LabelFrames, WildcardsAndAnyId) {
  AttackSpec spec;
  spec.entries.push_back({std::nullopt, PayloadPattern::parse("XXXXFFXX"), {{0.0, 1.0}}});
  const auto recs = label_frames(
      {frame(0.5, 0x123, {0, 0, 0, 0, 9, 9, 0xFF, 1}), frame(0.5, 0x456, {0, 0, 0, 0, 0, 0, 0xFE, 1})}, spec);
  EXPECT_EQ(recs[0].label, 1);
  EXPECT_EQ(recs[1].label, 0);
}

TEST(LabelFrames, EmptyCapture) {
  try {
    label_frames({}, speedometer_spec());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCapture);
  }
}

TEST(AttackSpecText, RoundTrip) {
  AttackSpec spec;
  spec.subset = Subset::CSA;
  spec.entries.push_back({0x6E0, PayloadPattern::parse("3E80X2"), {{1.5, 2.25}, {4.0, 4.0}}});
  spec.entries.push_back({std::nullopt, PayloadPattern::exact({1, 2, 3, 4, 5, 6, 7, 8}), {{0.0, 9.0}}});
  std::istringstream in(serialize_attack_spec(spec));
  EXPECT_EQ(parse_attack_spec(in), spec);
}

TEST(AttackSpecText, RejectsUnknownKey) {
  std::istringstream in("subset=MSA\nattack id=0D0 payload=FF window=1:2 colour=red\n");
  EXPECT_THROW(parse_attack_spec(in), Error);
}

TEST(Dataset, CountsTrackRecords) {
  const Dataset ds = synthetic_subset(Subset::FA, 13, 4, 1);
  EXPECT_EQ(ds.benign_count(), 13u);
  EXPECT_EQ(ds.malicious_count(), 4u);
  EXPECT_EQ(ds.benign_count() + ds.malicious_count(), ds.size());
  Dataset bad;
  EXPECT_THROW(bad.add({{}, 2, Subset::FA, 0}), Error);
}

TEST(MergeSubsets, RoadCorpusTotals) {
  std::vector<Dataset> parts;
  for (const auto& row : kRoadTable)
    parts.push_back(synthetic_subset(row.subset, row.benign, row.malicious, static_cast<std::uint64_t>(row.subset)));
  const Dataset merged = merge_subsets(parts);
  EXPECT_EQ(merged.size(), 1551508u);
  EXPECT_EQ(merged.benign_count(), 1501845u);
  EXPECT_EQ(merged.malicious_count(), 49663u);
  for (const auto& row : kRoadTable) {
    const Dataset s = merged.with_subset(row.subset);
    EXPECT_EQ(s.benign_count(), row.benign);
    EXPECT_EQ(s.malicious_count(), row.malicious);
  }

  const auto [train, test] = split(merged, 0.7, 2024);
  EXPECT_EQ(train.size(), 1086055u);
  EXPECT_EQ(train.benign_count(), 1051291u);
  EXPECT_EQ(train.malicious_count(), 34764u);
  EXPECT_EQ(test.size(), 465453u);
  EXPECT_EQ(test.benign_count(), 450554u);
  EXPECT_EQ(test.malicious_count(), 14899u);
}

TEST(MergeSubsets, IdentityAndAdditivity) {
  const Dataset a = synthetic_subset(Subset::FA, 6, 4, 1);
  const Dataset b = synthetic_subset(Subset::CSA, 7, 3, 2);
  EXPECT_EQ(merge_subsets({a}), a);
  const Dataset ab = merge_subsets({a, b});
  EXPECT_EQ(ab.size(), 20u);
  EXPECT_EQ(ab.benign_count(), 13u);
  EXPECT_EQ(ab.with_subset(Subset::FA), a);
  EXPECT_EQ(ab.with_subset(Subset::CSA), b);
  EXPECT_THROW(merge_subsets({}), Error);
}

TEST(Split, HalfAndSeventyPercent) {
  const Dataset ds = synthetic_subset(Subset::FA, 10, 10, 3);
  auto [tr, te] = split(ds, 0.5, 1);
  EXPECT_EQ(tr.benign_count(), 5u);
  EXPECT_EQ(tr.malicious_count(), 5u);
  EXPECT_EQ(te.benign_count(), 5u);
  EXPECT_EQ(te.malicious_count(), 5u);
  std::tie(tr, te) = split(ds, 0.7, 1);
  EXPECT_EQ(tr.benign_count(), 7u);
  EXPECT_EQ(tr.malicious_count(), 7u);
  EXPECT_EQ(te.benign_count(), 3u);
  EXPECT_EQ(te.malicious_count(), 3u);
}

TEST(Split, IsPartitionAndPerClassFloor) {
  const Dataset ds = synthetic_subset(Subset::MSA, 997, 41, 4);
  for (double fraction : {0.1, 0.3, 0.7, 0.95}) {
    for (std::uint64_t seed : {0u, 1u, 99u}) {
      const SplitIndices idx = split_indices(ds, fraction, seed);
      std::vector<std::size_t> all = idx.train;
      all.insert(all.end(), idx.test.begin(), idx.test.end());
      std::sort(all.begin(), all.end());
      ASSERT_EQ(all.size(), ds.size());
      for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
      std::size_t b = 0, m = 0;
      for (auto i : idx.train) (ds[i].label ? m : b)++;
      EXPECT_EQ(b, static_cast<std::size_t>(fraction * 997 + 1e-9));
      EXPECT_EQ(m, static_cast<std::size_t>(fraction * 41 + 1e-9));
    }
  }
}

TEST(Split, DeterministicPerSeed) {
  const Dataset ds = synthetic_subset(Subset::MSA, 500, 50, 5);
  EXPECT_EQ(split(ds, 0.7, 8), split(ds, 0.7, 8));
  const auto a = split_indices(ds, 0.7, 8), b = split_indices(ds, 0.7, 9);
  EXPECT_NE(a.train, b.train);
  EXPECT_EQ(a.train.size(), b.train.size());
}

TEST(Split, Errors) {
  const Dataset only_benign = synthetic_subset(Subset::FA, 10, 0, 1);
  try {
    split(only_benign, 0.7, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClassAbsent);
  }
  const Dataset ds = synthetic_subset(Subset::FA, 10, 10, 1);
  EXPECT_THROW(split(ds, 0.0, 1), Error);
  EXPECT_THROW(split(ds, 1.0, 1), Error);
}

TEST(Csv, RoundTripThousandRecords) {
  Rng rng(77);
  Dataset ds;
  for (int i = 0; i < 1000; ++i) {
    LabeledRecord r;
    for (auto& b : r.features) b = static_cast<std::uint8_t>(rng.below(256));
    r.label = static_cast<std::uint8_t>(rng.below(2));
    r.subset = kAllSubsets[rng.below(6)];
    r.can_id = static_cast<std::uint16_t>(rng.below(0x800));
    ds.add(r);
  }
  const auto path = (std::filesystem::temp_directory_path() / "canids_dataset_test.csv").string();
  save_csv(ds, path);
  EXPECT_EQ(load_csv(path), ds);
  std::filesystem::remove(path);
}

TEST(Csv, SchemaErrors) {
  const std::string header = std::string(kDatasetCsvHeader) + "\n";
  EXPECT_EQ(read_error("FA,0D0,1,2,3,4,5,6,7,8,0\n"), ErrorCode::SchemaMismatch);
  EXPECT_EQ(read_error(header + "FA,0D0,1,2,3,4,5,6,7,8,2\n"), ErrorCode::SchemaMismatch);
  EXPECT_EQ(read_error(header + "FA,0D0,1,2,3,4,5,6,7,256,0\n"), ErrorCode::SchemaMismatch);
  EXPECT_EQ(read_error(header + "XX,0D0,1,2,3,4,5,6,7,8,0\n"), ErrorCode::SchemaMismatch);
  EXPECT_EQ(read_error(header + "FA,8D0,1,2,3,4,5,6,7,8,0\n"), ErrorCode::SchemaMismatch);
  EXPECT_EQ(read_error(header + "FA,0D0,1,2,3,4,5,6,7,0\n"), ErrorCode::SchemaMismatch);
}

TEST(Csv, MissingFile) {
  try {
    load_csv("/nonexistent/dir/data.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoFailure);
  }
}
