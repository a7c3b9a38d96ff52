#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "foodfuse/metrics.hpp"

namespace foodfuse {
namespace {

LabelMap row(std::vector<std::uint8_t> v) {
  const int n = static_cast<int>(v.size());
  return LabelMap({n, 1}, std::move(v));
}

TEST(Metrics, HandComputedFixture) {
  const auto cm = confusion_matrix(row({0, 1, 1, 1}), row({0, 0, 1, 1}), 2);
  EXPECT_DOUBLE_EQ(miou(cm), 7.0 / 12.0);
  EXPECT_EQ(macc(cm), 0.75);
  EXPECT_EQ(aacc(cm), 0.75);
}

TEST(Metrics, EmptyClassesExcludedUnlessStrict) {
  const auto cm = confusion_matrix(row({0, 1}), row({0, 1}), 4);
  EXPECT_EQ(miou(cm), 1.0);
  EXPECT_EQ(miou(cm, true), 0.5);
  EXPECT_EQ(macc(cm, true), 0.5);
}

TEST(Metrics, IgnoredGroundTruthSkipped) {
  const std::vector<CategoryId> ignore = {255};
  const auto cm = confusion_matrix(row({0, 1, 1}), row({0, 255, 1}), 2, ignore);
  EXPECT_EQ(cm.total(), 2);
  EXPECT_EQ(aacc(cm), 1.0);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(aacc(ConfusionMatrix(3)), Error);
  EXPECT_THROW(confusion_matrix(row({0}), row({0, 1}), 2), Error);
  try {
    confusion_matrix(row({0, 5}), row({0, 1}), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLabelOutOfRange);
  }
}

TEST(Metrics, RandomPairsMatchOracle) {
  std::mt19937 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto gt = oracle::random_labels(rng, {32, 32}, 8);
    const auto pred = oracle::random_labels(rng, {32, 32}, 8);
    const auto cm = confusion_matrix(pred, gt, 8);
    const auto want = oracle::metrics(pred, gt, 8);
    EXPECT_NEAR(miou(cm), want.miou, 1e-12);
    EXPECT_NEAR(macc(cm), want.macc, 1e-12);
    EXPECT_NEAR(aacc(cm), want.aacc, 1e-12);
  }
}

TEST(Metrics, ThreadCountDoesNotChangeCounts) {
  std::mt19937 rng(2);
  const auto gt = oracle::random_labels(rng, {37, 29}, 6);
  const auto pred = oracle::random_labels(rng, {37, 29}, 6);
  const auto one = confusion_matrix(pred, gt, 6, {}, 1);
  for (int t : {2, 3, 8}) EXPECT_EQ(confusion_matrix(pred, gt, 6, {}, t), one);
}

TEST(Report, StrictUsesTableSize) {
  const CategoryTable t({{0, "a"}, {1, "b"}, {2, "c"}, {3, "d"}});
  const auto cm = confusion_matrix(row({0, 1}), row({0, 1}), t.class_count());
  const auto lenient = make_report(cm, t);
  const auto strict = make_report(cm, t, true);
  EXPECT_EQ(lenient.miou, 1.0);
  EXPECT_EQ(strict.miou, 0.5);
  EXPECT_EQ(lenient.evaluated_classes, 2);
  const auto j = report_to_json(lenient, t);
  EXPECT_TRUE(j["per_class"][3]["iou"].is_null());
  EXPECT_NE(report_table(lenient, t).find("mIoU"), std::string::npos);
}

TEST(EvaluateDir, GlobalMatrixAndMissingPairs) {
  testing::TempDir pred, gt;
  const CategoryTable t({{0, "a"}, {1, "b"}});
  save_label_map(row({0, 1, 1, 1}), pred.str("x.png"));
  save_label_map(row({0, 0, 1, 1}), gt.str("x.png"));
  save_label_map(row({1, 1}), pred.str("y.png"));
  save_label_map(row({1, 1}), gt.str("y.png"));
  const auto r = evaluate_dir(pred.str(), gt.str(), t);
  EXPECT_EQ(r.pixels, 6);
  EXPECT_NEAR(r.aacc, 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(r.miou, (0.5 + 4.0 / 5.0) / 2, 1e-15);
  save_label_map(row({1}), pred.str("z.png"));
  try {
    evaluate_dir(pred.str(), gt.str(), t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingPair);
  }
}

}  // namespace
}  // namespace foodfuse
