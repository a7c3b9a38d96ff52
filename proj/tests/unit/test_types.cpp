#include <gtest/gtest.h>

#include <sstream>

#include "foodfuse/types.hpp"

namespace foodfuse {
namespace {

TEST(Grid, RowMajorIndexing) {
  LabelMap m({3, 2});
  m(2, 1) = 9;
  EXPECT_EQ(m.data()[5], 9);
  EXPECT_EQ(m.row(1)[2], 9);
  EXPECT_EQ(m.dims().pixels(), 6u);
}

TEST(Grid, DataLengthMismatchThrows) {
  try {
    LabelMap({2, 2}, std::vector<std::uint8_t>(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimMismatch);
  }
}

TEST(Box, ContainsIsHalfOpen) {
  const Box b{0, 0, 10, 10};
  EXPECT_TRUE(b.contains({0, 0}));
  EXPECT_TRUE(b.contains({9.999, 5}));
  EXPECT_FALSE(b.contains({10, 5}));
  EXPECT_FALSE(b.contains({5, 10}));
  EXPECT_TRUE(b.covers_pixel(9, 9));
  EXPECT_FALSE(b.covers_pixel(10, 0));
}

TEST(Box, FromRect) {
  EXPECT_EQ(Box::from_rect({2, 3, 4, 5}), (Box{2, 3, 6, 8}));
  EXPECT_DOUBLE_EQ((Box{1, 1, 1, 5}).area(), 0.0);
}

TEST(TightBbox, CoversForeground) {
  BinaryMask m({8, 6});
  m(2, 1) = 1;
  m(5, 4) = 1;
  EXPECT_EQ(tight_bbox(m), (PixelRect{2, 1, 4, 4}));
  EXPECT_EQ(count_foreground(m), 2);
}

TEST(TightBbox, EmptyMaskThrows) {
  try {
    tight_bbox(BinaryMask({4, 4}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMask);
  }
}

TEST(CategoryTable, ParsesKindsAndComments) {
  std::istringstream in("# id name kind\n0\tbackground\n3\trice\tfood\n101\tplate\tnonfood\n\n");
  const auto t = CategoryTable::parse(in);
  EXPECT_EQ(t.size(), 3u);
  EXPECT_EQ(t.background_id(), 0);
  EXPECT_TRUE(t.is_food(3));
  EXPECT_TRUE(t.is_nonfood(101));
  EXPECT_FALSE(t.is_food(0));
  EXPECT_EQ(t.name(3), "rice");
  EXPECT_EQ(t.class_count(), 102);
}

TEST(CategoryTable, BackgroundColumnOverridesDefault) {
  std::istringstream in("0\tbowl\tnonfood\n255\tvoid\tbackground\n5\tsoup\n");
  const auto t = CategoryTable::parse(in);
  EXPECT_EQ(t.background_id(), 255);
  EXPECT_TRUE(t.is_food(5));
}

TEST(CategoryTable, DuplicateIdIsSchemaError) {
  std::istringstream in("0\tbackground\n1\ta\n1\tb\n");
  try {
    CategoryTable::parse(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
  }
}

TEST(MaskRecord, FromPixelsDerivesMetadata) {
  BinaryMask m({6, 6});
  m(3, 2) = m(4, 2) = m(3, 3) = 1;
  const auto r = MaskRecord::from_pixels(7, m);
  EXPECT_EQ(r.area, 3);
  EXPECT_EQ(r.bbox, (PixelRect{3, 2, 2, 2}));
  EXPECT_EQ(r.point_input, (Point{3.5, 2.5}));
}

TEST(MaskSet, ValidateRejectsDuplicateIds) {
  BinaryMask m({4, 4});
  m(1, 1) = 1;
  MaskSet s{{4, 4}, {MaskRecord::from_pixels(1, m), MaskRecord::from_pixels(1, m)}};
  EXPECT_THROW(s.validate(), Error);
}

TEST(ConfusionMatrix, CountsAndDerivedTerms) {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 4);
  cm.add(0, 1, 2);
  cm.add(2, 1, 1);
  EXPECT_EQ(cm.total(), 7);
  EXPECT_EQ(cm.trace(), 4);
  EXPECT_EQ(cm.fp(1), 3);
  EXPECT_EQ(cm.fn(0), 2);
  ConfusionMatrix other(3);
  other.add(1, 1);
  cm += other;
  EXPECT_EQ(cm.tp(1), 1);
  EXPECT_THROW(cm += ConfusionMatrix(2), Error);
}

TEST(SegmentMap, ValidateDetectsStaleTable) {
  SegmentMap s;
  s.id_grid = IdGrid({4, 4});
  s.id_grid(1, 1) = 1;
  s.segments.push_back({1, 3, 1, {1, 1, 1, 1}, true});
  EXPECT_NO_THROW(s.validate());
  s.segments[0].area = 2;
  EXPECT_THROW(s.validate(), Error);
  EXPECT_EQ(count_foreground(s.segment_mask(1)), 1);
}

}  // namespace
}  // namespace foodfuse
