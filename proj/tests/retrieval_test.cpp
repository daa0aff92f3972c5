#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "csl/checks/oracles.hpp"
#include "csl/retrieval.hpp"
#include "csl/video.hpp"

using namespace csl;

namespace {

Frames ramp_video(std::size_t frames, std::size_t side = 2) {
  Frames v({frames, side, side, 3});
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < side * side * 3; ++i) v[f * side * side * 3 + i] = static_cast<float>(f) / 100.0f;
  }
  return v;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("csl_retrieval_" + name);
}

CorpusIndex random_index(Rng& rng, std::size_t videos, std::size_t d) {
  CorpusIndex index;
  for (std::size_t v = 0; v < videos; ++v) {
    index.add("v" + std::to_string(v), checks::random_unit_rows(1 + rng.below(6), d, rng));
  }
  return index;
}

}  // namespace

TEST(ClipBoundaries, ExactDivision) {
  auto w = clip_boundaries(16);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[1], (ClipWindow{8, 16}));
  EXPECT_EQ(w[1].padding(8), 0u);
}

TEST(ClipBoundaries, RemainderIsPadded) {
  auto w = clip_boundaries(12);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[1], (ClipWindow{8, 12}));
  EXPECT_EQ(w[1].padding(8), 4u);
  auto clips = split_clips(ramp_video(12));
  ASSERT_EQ(clips.size(), 2u);
  for (std::size_t f = 4; f < 8; ++f) {
    EXPECT_EQ(frame_window(clips[1], f, 1), frame_window(ramp_video(12), 11, 1));
  }
}

TEST(ClipBoundaries, SingleFrameRepeats) {
  auto clips = split_clips(ramp_video(1));
  ASSERT_EQ(clips.size(), 1u);
  EXPECT_EQ(clips[0].dim(0), 8u);
  for (std::size_t f = 0; f < 8; ++f) EXPECT_EQ(frame_window(clips[0], f, 1), ramp_video(1));
}

TEST(ClipBoundaries, EmptyVideoRejected) { EXPECT_THROW(clip_boundaries(0), ContractError); }

TEST(ClipBoundaries, StorageReductionForLongVideos) {
  for (std::size_t frames = 56; frames < 2000; frames += 7) {
    const double factor = static_cast<double>(frames) / clip_boundaries(frames).size();
    EXPECT_GE(factor, 7.0) << frames;
    EXPECT_LE(factor, 8.0) << frames;
  }
}

TEST(Store, RoundtripIsBitExact) {
  Rng rng(1);
  CorpusIndex index = random_index(rng, 5, 16);
  const auto path = temp_path("roundtrip.csf");
  write_store(index, path);
  CorpusIndex back = read_store(path);
  EXPECT_EQ(back, index);
  EXPECT_EQ(back.ids(), index.ids());
  std::filesystem::remove(path);
}

TEST(Store, TruncationIsFormatErrorWithOffset) {
  Rng rng(2);
  const auto bytes = encode_store(random_index(rng, 3, 4));
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    try {
      decode_store(std::vector<char>(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut)));
      FAIL() << "accepted truncation at " << cut;
    } catch (const FormatError& e) {
      EXPECT_LE(e.offset(), cut);
    }
  }
}

TEST(Store, BadMagicAndVersion) {
  Rng rng(3);
  auto bytes = encode_store(random_index(rng, 2, 4));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_store(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  try {
    decode_store(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Store, NonUnitRowIsIntegrityError) {
  CorpusIndex index;
  index.add("a", Tensor<float>({1, 2}, {1.0f, 0.0f}));
  auto bytes = encode_store(index);
  // Overwrite the first float of the payload with 2.0.
  const float two = 2.0f;
  std::memcpy(bytes.data() + bytes.size() - 8, &two, 4);
  EXPECT_THROW(decode_store(bytes), IntegrityError);
}

TEST(Store, EmptyIndexRejected) { EXPECT_THROW(encode_store(CorpusIndex{}), ContractError); }

TEST(Store, RandomRoundtripSuite) { EXPECT_TRUE(checks::store_roundtrip_suite(4, 50).passed); }

TEST(RankQuery, DuplicateRankedFirst) {
  Rng rng(5);
  CorpusIndex index;
  auto q = checks::random_unit_rows(4, 8, rng);
  index.add("q", q);
  index.add("dup", q);
  index.add("other", checks::random_unit_rows(3, 8, rng));
  auto ranked = rank_query("q", index);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].id, "dup");
  EXPECT_NEAR(ranked[0].score, 1.0, 1e-6);
}

TEST(RankQuery, TiesByAscendingId) {
  Rng rng(6);
  auto q = checks::random_unit_rows(2, 4, rng);
  auto c = checks::random_unit_rows(2, 4, rng);
  CorpusIndex index;
  index.add("q", q);
  index.add("zeta", c);
  index.add("alpha", c);
  auto ranked = rank_query("q", index);
  EXPECT_EQ(ranked[0].id, "alpha");
  EXPECT_EQ(ranked[1].id, "zeta");
}

TEST(RankQuery, MatchesBruteForceOrder) {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    CorpusIndex index = random_index(rng, 10, 6);
    auto ranked = rank_query("v0", index);
    ASSERT_EQ(ranked.size(), 9u);
    std::vector<std::pair<double, std::string>> brute;
    for (const auto& id : index.ids()) {
      if (id != "v0") brute.push_back({-checks::brute_topk_cs(index.get("v0"), index.get(id), 3), id});
    }
    std::sort(brute.begin(), brute.end());
    for (std::size_t i = 0; i < brute.size(); ++i) EXPECT_EQ(ranked[i].id, brute[i].second);
  }
}

TEST(RankQuery, UnknownIdIsLookupError) {
  Rng rng(8);
  EXPECT_THROW(rank_query("nope", random_index(rng, 2, 3)), LookupError);
}

TEST(RankQuery, DotProductCountIsClipPairs) {
  Rng rng(9);
  CorpusIndex index = random_index(rng, 6, 4);
  DotCounter counter;
  rank_query("v0", index, 3, &counter);
  std::uint64_t expected = 0;
  for (const auto& id : index.ids()) {
    if (id != "v0") expected += index.get("v0").dim(0) * index.get(id).dim(0);
  }
  EXPECT_EQ(counter.dots, expected);
}

TEST(AveragePrecision, Examples) {
  RankedList r{{"a", 3}, {"b", 2}, {"c", 1}};
  EXPECT_DOUBLE_EQ(average_precision(r, {"a", "b"}), 1.0);
  EXPECT_NEAR(average_precision(r, {"a", "c"}), 0.83333, 1e-5);
  EXPECT_DOUBLE_EQ(average_precision(r, {"x"}), 0.0);
  EXPECT_THROW(average_precision(r, {}), MetricError);
}

TEST(AveragePrecision, MatchesDefinitionOracle) {
  auto res = checks::map_oracle_suite(10, 100, 1e-9);
  EXPECT_TRUE(res.passed) << res.worst;
}

TEST(Annotations, JsonRoundtripAndTaskSets) {
  const std::string text = R"({"queries": {"q1": {"a": "ND", "b": "DS", "c": "CS", "d": "IS"}}})";
  AnnotationSet a = parse_annotations(text);
  EXPECT_EQ(a.relevant("q1", Task::DSVR), (std::set<std::string>{"a", "b"}));
  EXPECT_EQ(a.relevant("q1", Task::CSVR), (std::set<std::string>{"a", "b", "c"}));
  EXPECT_EQ(a.relevant("q1", Task::ISVR), (std::set<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(parse_annotations(annotations_to_json(a)).queries, a.queries);
}

TEST(Annotations, RejectsBadInput) {
  EXPECT_THROW(parse_annotations("{"), FormatError);
  EXPECT_THROW(parse_annotations(R"({"queries": {"q": {"a": "XX"}}})"), FormatError);
  EXPECT_THROW(parse_annotations(R"({"other": 1})"), FormatError);
}

TEST(Evaluate, DuplicateCorpusIsPerfect) {
  Rng rng(11);
  CorpusIndex index;
  AnnotationSet ann;
  for (int q = 0; q < 3; ++q) {
    auto m = checks::random_unit_rows(3, 16, rng);
    index.add("q" + std::to_string(q), m);
    index.add("q" + std::to_string(q) + "_dup", m);
    ann.queries["q" + std::to_string(q)]["q" + std::to_string(q) + "_dup"] = Label::ND;
  }
  for (Task t : {Task::DSVR, Task::CSVR, Task::ISVR}) EXPECT_DOUBLE_EQ(evaluate(index, ann, t).map, 1.0);
}

TEST(Evaluate, CsLabelIsIrrelevantForDsvr) {
  Rng rng(12);
  CorpusIndex index = random_index(rng, 4, 4);
  AnnotationSet ann;
  ann.queries["v0"] = {{"v1", Label::CS}, {"v2", Label::ND}};
  EXPECT_EQ(ann.relevant("v0", Task::DSVR), std::set<std::string>{"v2"});
  auto r = evaluate(index, ann, Task::DSVR);
  EXPECT_EQ(r.per_query.size(), 1u);
}

TEST(Evaluate, QueriesWithoutRelevantAreExcluded) {
  Rng rng(13);
  CorpusIndex index = random_index(rng, 4, 4);
  AnnotationSet ann;
  ann.queries["v0"] = {{"v1", Label::IS}};
  ann.queries["v1"] = {{"v2", Label::ND}};
  auto r = evaluate(index, ann, Task::DSVR);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.per_query.size(), 1u);
}

TEST(Evaluate, MapInvariantToInsertionOrder) {
  Rng rng(14);
  std::vector<std::pair<std::string, Tensor<float>>> items;
  for (int v = 0; v < 12; ++v) items.push_back({"v" + std::to_string(v), checks::random_unit_rows(2, 5, rng)});
  AnnotationSet ann;
  ann.queries["v0"] = {{"v3", Label::ND}, {"v7", Label::DS}};
  ann.queries["v5"] = {{"v1", Label::CS}, {"v9", Label::ND}};
  CorpusIndex fwd, rev;
  for (const auto& [id, m] : items) fwd.add(id, m);
  for (auto it = items.rbegin(); it != items.rend(); ++it) rev.add(it->first, it->second);
  EXPECT_EQ(evaluate(fwd, ann, Task::ISVR).map, evaluate(rev, ann, Task::ISVR).map);
}

TEST(Evaluate, ReportCsv) {
  EvalReport r;
  r.task = Task::CSVR;
  r.per_query = {{"q1", 0.5}};
  r.map = 0.5;
  EXPECT_EQ(map_report_csv({r}), "task,query_id,ap\ncsvr,q1,0.5\ncsvr,mAP,0.5\n");
}

TEST(ClipFile, RoundtripAndClamp) {
  Frames v({2, 3, 4, 3});
  for (std::size_t i = 0; i < v.numel(); ++i) v[i] = static_cast<float>(i) / v.numel();
  EXPECT_EQ(decode_clip_file(encode_clip_file(v)), v);
  auto bytes = encode_clip_file(v);
  bytes.pop_back();
  EXPECT_THROW(decode_clip_file(bytes), FormatError);
  Frames wild({1, 1, 1, 3}, {-1.0f, 0.5f, 7.0f});
  EXPECT_EQ(make_frames(wild).vec(), (std::vector<float>{0.0f, 0.5f, 1.0f}));
}

TEST(Hflip, InvolutionAndColumnMapping) {
  Frames v({2, 3, 5, 3});
  Rng rng(15);
  for (auto& x : v.data()) x = static_cast<float>(rng.uniform());
  EXPECT_EQ(hflip(hflip(v)), v);
  Frames narrow({2, 3, 1, 3});
  for (auto& x : narrow.data()) x = static_cast<float>(rng.uniform());
  EXPECT_EQ(hflip(narrow), narrow);
  Frames dot({1, 1, 4, 3});
  dot[0] = 1.0f;
  EXPECT_EQ(hflip(dot).at({0, 0, 3, 0}), 1.0f);
}
