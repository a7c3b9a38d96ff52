#include <gtest/gtest.h>
#include <png.h>

#include <filesystem>
#include <fstream>

#include "../support/temp_dir.hpp"
#include "foodfuse/mask_io.hpp"
#include "foodfuse/png.hpp"

namespace foodfuse {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no foodfuse::Error thrown";
  return ErrorCode::kInvalidArgument;
}

MaskSet two_masks() {
  MaskSet s;
  s.dims = {8, 6};
  BinaryMask a(s.dims), b(s.dims);
  for (int y = 1; y < 4; ++y)
    for (int x = 1; x < 5; ++x) a(x, y) = 1;
  b(7, 5) = 1;
  s.records.push_back(MaskRecord::from_pixels(0, a, Point{2.5, 2.5}, 0.91, 0.8));
  s.records.push_back(MaskRecord::from_pixels(4, b, std::nullopt, 0.5, 0.25));
  return s;
}

void rewrite_csv(const std::string& dir, const std::function<std::string(std::string)>& edit) {
  const auto path = fs::path(dir) / "metadata.csv";
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  in.close();
  std::ofstream(path, std::ios::trunc) << edit(text);
}

TEST(LabelMapIo, RoundTripsEveryValue) {
  TempDir tmp;
  LabelMap m({16, 16});
  for (int i = 0; i < 256; ++i) m.data()[i] = static_cast<std::uint8_t>(i);
  save_label_map(m, tmp.str("m.png"));
  EXPECT_EQ(load_label_map(tmp.str("m.png")), m);
}

TEST(LabelMapIo, AcceptsPaletteIndices) {
  TempDir tmp;
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = 4;
  img.height = 2;
  img.format = PNG_FORMAT_RGB_COLORMAP;
  img.colormap_entries = 256;
  std::vector<std::uint8_t> cmap(256 * 3);
  for (int i = 0; i < 256; ++i) cmap[i * 3] = static_cast<std::uint8_t>(i);
  const std::vector<std::uint8_t> idx = {0, 1, 2, 3, 200, 201, 202, 7};
  ASSERT_TRUE(png_image_write_to_file(&img, tmp.str("p.png").c_str(), 0, idx.data(), 0, cmap.data()));
  const auto m = load_label_map(tmp.str("p.png"));
  EXPECT_EQ(std::vector<std::uint8_t>(m.data().begin(), m.data().end()), idx);
}

TEST(LabelMapIo, RejectsRgb) {
  const std::vector<std::uint8_t> rgb(2 * 2 * 3, 10);
  const auto bytes = png::encode_rgb8(2, 2, rgb);
  EXPECT_EQ(code_of([&] { decode_label_map(bytes); }), ErrorCode::kFormatError);
}

TEST(LabelMapIo, EncodingIsDeterministic) {
  LabelMap m({5, 3}, 4);
  EXPECT_EQ(encode_label_map(m), encode_label_map(m));
}

TEST(MaskSetIo, RoundTrip) {
  TempDir tmp;
  const auto s = two_masks();
  save_mask_set(s, tmp.str("masks"));
  const auto back = load_mask_set(tmp.str("masks"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.dims, s.dims);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.records[i].mask_id, s.records[i].mask_id);
    EXPECT_EQ(back.records[i].pixels, s.records[i].pixels);
    EXPECT_EQ(back.records[i].bbox, s.records[i].bbox);
    EXPECT_EQ(back.records[i].point_input, s.records[i].point_input);
    EXPECT_DOUBLE_EQ(back.records[i].predicted_iou, s.records[i].predicted_iou);
  }
}

TEST(MaskSetIo, MissingDirectoryIsIoError) {
  EXPECT_EQ(code_of([] { load_mask_set("/nonexistent/masks"); }), ErrorCode::kIoError);
}

TEST(MaskSetIo, MissingMaskFile) {
  TempDir tmp;
  save_mask_set(two_masks(), tmp.str("masks"));
  fs::remove(tmp.path() / "masks" / "4.png");
  EXPECT_EQ(code_of([&] { load_mask_set(tmp.str("masks")); }), ErrorCode::kMissingMaskFile);
}

TEST(MaskSetIo, HeaderMismatch) {
  TempDir tmp;
  save_mask_set(two_masks(), tmp.str("masks"));
  rewrite_csv(tmp.str("masks"), [](std::string t) { return "id,area\n" + t.substr(t.find('\n') + 1); });
  EXPECT_EQ(code_of([&] { load_mask_set(tmp.str("masks")); }), ErrorCode::kCsvSchemaError);
}

TEST(MaskSetIo, NonNumericField) {
  TempDir tmp;
  save_mask_set(two_masks(), tmp.str("masks"));
  rewrite_csv(tmp.str("masks"), [](std::string t) {
    const auto pos = t.find("\n0,12,");
    return t.replace(pos, 6, "\n0,xx,");
  });
  EXPECT_EQ(code_of([&] { load_mask_set(tmp.str("masks")); }), ErrorCode::kCsvSchemaError);
}

TEST(MaskSetIo, AreaMismatchWarnsOrFails) {
  TempDir tmp;
  save_mask_set(two_masks(), tmp.str("masks"));
  rewrite_csv(tmp.str("masks"), [](std::string t) {
    const auto pos = t.find("\n0,12,");
    return t.replace(pos, 6, "\n0,13,");
  });
  std::vector<std::string> warnings;
  const auto s = load_mask_set(tmp.str("masks"), {}, &warnings);
  EXPECT_EQ(s.records[0].area, 12);
  EXPECT_EQ(warnings.size(), 1u);
  MaskLoadOptions strict;
  strict.trust_metadata = true;
  EXPECT_EQ(code_of([&] { load_mask_set(tmp.str("masks"), strict); }), ErrorCode::kCsvSchemaError);
}

TEST(MaskSetIo, EmptyMaskSkippedWithWarning) {
  TempDir tmp;
  save_mask_set(two_masks(), tmp.str("masks"));
  save_binary_mask(BinaryMask({8, 6}), (tmp.path() / "masks" / "4.png").string());
  std::vector<std::string> warnings;
  const auto s = load_mask_set(tmp.str("masks"), {}, &warnings);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(MaskSetIo, DimsMustAgree) {
  TempDir tmp;
  save_mask_set(two_masks(), tmp.str("masks"));
  MaskLoadOptions opts;
  opts.expected_dims = Dims{9, 6};
  EXPECT_EQ(code_of([&] { load_mask_set(tmp.str("masks"), opts); }), ErrorCode::kDimMismatch);
}

TEST(Rle, ColumnMajorWithLeadingBackgroundRun) {
  BinaryMask m({3, 2});
  m(0, 0) = 1;  // first pixel set: leading background run is 0
  m(2, 1) = 1;
  EXPECT_EQ(rle_encode(m), (RleCounts{0, 1, 4, 1}));
  EXPECT_EQ(rle_decode(rle_encode(m), m.dims()), m);
  EXPECT_EQ(rle_encode(BinaryMask({2, 2})), (RleCounts{4}));
}

TEST(Rle, LengthMismatch) {
  const RleCounts counts{1, 2};
  EXPECT_EQ(code_of([&] { rle_decode(counts, {2, 2}); }), ErrorCode::kLengthMismatch);
}

TEST(Rle, JsonForm) {
  BinaryMask m({4, 3});
  m(1, 2) = 1;
  const auto j = rle_to_json(m);
  EXPECT_EQ(j["size"], Json::array({3, 4}));
  EXPECT_EQ(rle_from_json(j), m);
  EXPECT_EQ(code_of([] { rle_from_json(Json{{"size", {3}}, {"counts", {12}}}); }), ErrorCode::kSchemaError);
}

TEST(Detections, ClampsAndDropsEmptyBoxes) {
  const CategoryTable table({{0, "background"}, {3, "rice"}, {101, "plate"}}, 0, {101});
  const Json doc = {{"boxes",
                     {{{"xyxy", {-5, 2, 20, 8}}, {"score", 0.9}, {"category_id", 101}},
                      {{"xyxy", {12, 2, 15, 8}}, {"score", 0.4}, {"category_id", 101}, {"label", "dish"}}}}};
  std::vector<std::string> warnings;
  const auto d = parse_detections(doc, {10, 10}, &table, &warnings);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].xyxy, (Box{0, 2, 10, 8}));
  EXPECT_EQ(d[0].label, "plate");
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Detections, FoodCategoryRejected) {
  const CategoryTable table({{0, "background"}, {3, "rice"}, {101, "plate"}}, 0, {101});
  const Json doc = {{"boxes", {{{"xyxy", {0, 0, 5, 5}}, {"score", 0.9}, {"category_id", 3}}}}};
  EXPECT_EQ(code_of([&] { parse_detections(doc, {10, 10}, &table); }), ErrorCode::kSchemaError);
  EXPECT_EQ(code_of([&] { parse_detections(Json{{"boxes", 3}}, {10, 10}); }), ErrorCode::kSchemaError);
}

TEST(SegmentMapIo, RoundTripAndColors) {
  TempDir tmp;
  const CategoryTable table({{0, "background"}, {3, "rice"}}, 0);
  SegmentMap s;
  s.id_grid = IdGrid({6, 4});
  s.id_grid(1, 1) = s.id_grid(2, 1) = 1;
  s.id_grid(5, 3) = 300;
  s.segments = {{1, 3, 2, {1, 1, 2, 1}, true}, {300, 3, 1, {5, 3, 1, 1}, true}};
  save_segment_map(s, table, tmp.str(), "instance");
  EXPECT_TRUE(fs::exists(tmp.path() / "instance_color.png"));
  const auto back = load_segment_map(tmp.str(), "instance");
  EXPECT_EQ(back, s);
  EXPECT_EQ(segment_color(0), (Rgb{0, 0, 0}));
  EXPECT_NE(segment_color(1), segment_color(2));
}

TEST(Scenes, LabelOutsideTable) {
  TempDir tmp;
  const CategoryTable table({{0, "background"}, {3, "rice"}}, 0);
  LabelMap sem({8, 6}, 0);
  sem(0, 0) = 9;
  save_label_map(sem, tmp.str("semantic.png"));
  save_mask_set(two_masks(), tmp.str("masks"));
  EXPECT_EQ(code_of([&] { load_scene(scene_paths_in(tmp.str()), table); }), ErrorCode::kLabelOutOfRange);
}

TEST(Scenes, ListSortedAndFiltered) {
  TempDir tmp;
  for (const char* id : {"b", "a", "c"}) {
    fs::create_directories(tmp.path() / id);
    if (std::string(id) != "c") save_label_map(LabelMap({2, 2}), (tmp.path() / id / "semantic.png").string());
  }
  EXPECT_EQ(list_scene_ids(tmp.str()), (std::vector<std::string>{"a", "b"}));
}

}  // namespace
}  // namespace foodfuse
