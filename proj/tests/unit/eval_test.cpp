#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "spnet/error.hpp"
#include "spnet/eval.hpp"
#include "spnet/random.hpp"
#include "test_data.hpp"

using namespace spnet::eval;
using spnet::data::ManifestRow;

namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Detection, BoundaryIsInclusive) {
  EXPECT_DOUBLE_EQ(distance({112, 116}, {100, 100}), 20.0);
  EXPECT_TRUE(is_true_detection({112, 116}, {100, 100}));
  EXPECT_FALSE(is_true_detection({121, 100}, {100, 100}));
  EXPECT_TRUE(is_true_detection({121, 100}, {100, 100}, 21.0));
}

TEST(Tdr, MatchesIndependentRecount) {
  spnet::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PredictionPair> pairs(1 + rng.below(40));
    for (auto& p : pairs) {
      p.gt = {rng.uniform(0, 320), rng.uniform(0, 256)};
      p.pred = {p.gt.x + rng.uniform(-30, 30), p.gt.y + rng.uniform(-30, 30)};
    }
    const double t = rng.uniform(0, 40);
    std::size_t hits = 0;
    for (const auto& p : pairs) {
      const double dx = p.pred.x - p.gt.x, dy = p.pred.y - p.gt.y;
      hits += dx * dx + dy * dy <= t * t;
    }
    EXPECT_DOUBLE_EQ(tdr(pairs, t), static_cast<double>(hits) / pairs.size());
  }
}

TEST(Tdr, EmptyThrows) {
  EXPECT_THROW(tdr({}), spnet::EmptyResultsError);
  EXPECT_THROW(distance_accuracy_curve({}), spnet::EmptyResultsError);
}

TEST(Curve, MonotoneAndAnchored) {
  const std::vector<PredictionPair> pairs{
      {{0, 0}, {0, 0}}, {{3, 4}, {0, 0}}, {{30, 0}, {0, 0}}, {{100, 0}, {0, 0}}};
  const auto curve = distance_accuracy_curve(pairs);
  ASSERT_EQ(curve.size(), 41u);
  EXPECT_EQ(curve.front(), (CurvePoint{0, 0.25}));
  EXPECT_EQ(curve[4].accuracy, 0.25);
  EXPECT_EQ(curve[5].accuracy, 0.5);
  EXPECT_EQ(curve[30].accuracy, 0.75);
  EXPECT_EQ(curve.back().accuracy, 0.75);
  EXPECT_TRUE(std::is_sorted(curve.begin(), curve.end(),
                             [](const auto& a, const auto& b) { return a.accuracy < b.accuracy; }));
}

TEST(Report, JoinsByFilenameAndCountsGaps) {
  const std::vector<ManifestRow> truth{{"a.png", Point{10, 10}},
                                       {"b.png", Point{50, 50}},
                                       {"c.png", std::nullopt},
                                       {"d.png", Point{5, 5}}};
  const std::vector<ManifestRow> pred{{"b.png", Point{50, 80}},
                                      {"a.png", Point{13, 14}},
                                      {"d.png", std::nullopt},
                                      {"zzz.png", Point{1, 1}}};
  ReportOptions opts;
  opts.model_id = "m";
  opts.dataset_id = "d";
  const EvalReport r = build_report(pred, truth, opts);
  ASSERT_EQ(r.samples.size(), 3u);
  EXPECT_EQ(r.samples[0].id, "a.png");
  EXPECT_EQ(r.samples[0].distance, 5.0);
  EXPECT_EQ(r.samples[1].distance, 30.0);
  EXPECT_FALSE(r.samples[2].pred);
  EXPECT_FALSE(r.samples[2].distance);
  EXPECT_DOUBLE_EQ(r.tdr, 1.0 / 3.0);
  EXPECT_EQ(r.missing_predictions, 1u);
  EXPECT_EQ(r.unannotated, 1u);
  EXPECT_EQ(r.unmatched_predictions, 1u);
  EXPECT_EQ(r.model_id, "m");
  EXPECT_DOUBLE_EQ(r.curve[40].accuracy, 2.0 / 3.0);
}

TEST(Report, NothingToScoreThrows) {
  EXPECT_THROW(build_report({}, {{"a.png", std::nullopt}}), spnet::EmptyResultsError);
}

TEST(Report, JsonRoundTrip) {
  const EvalReport r = build_report({{"a.png", Point{1.5, 2.25}}},
                                    {{"a.png", Point{1, 2}}, {"b.png", Point{3, 4}}});
  const std::string json = report_to_json(r);
  EXPECT_EQ(parse_report(json), r);
  EXPECT_NE(json.find("\"schema\""), std::string::npos);
  EXPECT_THROW(parse_report("{not json"), spnet::IoError);
  EXPECT_THROW(parse_report(R"({"schema": 99})"), spnet::IoError);
}

TEST(Report, EmitWritesThreeArtifacts) {
  testing_support::TempDir dir;
  const EvalReport r = build_report(
      {{"a.png", Point{0, 0}}, {"b.png", Point{4, 3}}},
      {{"a.png", Point{0, 0}}, {"b.png", Point{0, 0}}, {"c.png", Point{9, 9}}});
  emit_report(r, dir / "out/nested");
  EXPECT_EQ(read_report(dir / "out/nested/report.json"), r);
  const std::string csv = slurp(dir / "out/nested/distances.csv");
  EXPECT_EQ(csv,
            "id,pred_x,pred_y,gt_x,gt_y,distance\n"
            "a.png,0,0,0,0,0\n"
            "b.png,4,3,0,0,5\n"
            "c.png,,,9,9,\n");
  const std::string svg = slurp(dir / "out/nested/curve.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(count_of(svg, "<polyline"), 1u);
  // One comma-separated coordinate pair per threshold.
  const auto start = svg.find("points=\"") + 8;
  const std::string points = svg.substr(start, svg.find('"', start) - start);
  EXPECT_EQ(count_of(points, ","), r.curve.size());
  EXPECT_NE(svg.find("Distance threshold (px)"), std::string::npos);
}
