#include "foodfuse/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "foodfuse/png.hpp"

namespace fs = std::filesystem;

namespace foodfuse::synthetic {
namespace {

constexpr Dims kDims{64, 64};

template <class Pred>
BinaryMask mask_where(Pred pred) {
  BinaryMask m(kDims);
  for (int y = 0; y < kDims.height; ++y) {
    for (int x = 0; x < kDims.width; ++x) m(x, y) = pred(x, y) ? 1 : 0;
  }
  return m;
}

bool in_disk(int x, int y, double cx, double cy, double r) {
  const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
  return dx * dx + dy * dy <= r * r;
}

Rgb base_color(CategoryId c) {
  switch (c) {
    case kRice: return {236, 232, 214};
    case kEgg: return {250, 204, 60};
    case kBroccoli: return {60, 140, 52};
    case kPlate: return {210, 214, 222};
    case kCup: return {120, 80, 160};
    default: return {150, 106, 70};
  }
}

}  // namespace

CategoryTable demo_categories() {
  return CategoryTable({{0, "background"},
                        {kRice, "rice"},
                        {kEgg, "egg"},
                        {kBroccoli, "broccoli"},
                        {kPlate, "plate"},
                        {kCup, "cup"},
                        {kTable, "table"}},
                       0, {kPlate, kCup, kTable});
}

LabelMap erode_objects(const LabelMap& labels, int radius, CategoryId background) {
  LabelMap out = labels;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const auto v = labels(x, y);
      if (v == background) continue;
      bool boundary = false;
      for (int dy = -radius; dy <= radius && !boundary; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const int nx = x + dx, ny = y + dy;
          // The image border counts as "outside".
          if (!labels.dims().contains(nx, ny) || labels(nx, ny) != v) {
            boundary = true;
            break;
          }
        }
      }
      if (boundary) out(x, y) = static_cast<std::uint8_t>(background);
    }
  }
  return out;
}

SceneBundle SyntheticScene::bundle() const {
  SceneBundle b;
  b.scene_id = scene_id;
  b.semantic = coarse;
  b.masks = masks;
  b.detections = detections;
  b.categories = categories;
  return b;
}

SyntheticScene make_plate_scene(int variant) {
  const int dx = ((variant % 3) + 3) % 3;
  const int dy = (((variant / 3) % 3) + 3) % 3;
  const double plate_cx = 32 + dx, plate_cy = 32 + dy, plate_r = 24;
  const double egg_cx = 40 + dx, egg_cy = 40 + dy, egg_r = 9;
  const double broc_cx = 42 + dx, broc_cy = 22 + dy, broc_r = 8;
  const double cup_cx = 56 + dx, cup_cy = 7 + dy, cup_r = 5;
  auto in_rice = [&](int x, int y) { return x >= 14 + dx && x < 32 + dx && y >= 18 + dy && y < 32 + dy; };
  auto in_egg = [&](int x, int y) { return in_disk(x, y, egg_cx, egg_cy, egg_r); };
  auto in_broc = [&](int x, int y) { return in_disk(x, y, broc_cx, broc_cy, broc_r); };
  auto in_food = [&](int x, int y) { return in_rice(x, y) || in_egg(x, y) || in_broc(x, y); };
  auto in_plate = [&](int x, int y) { return in_disk(x, y, plate_cx, plate_cy, plate_r) && !in_food(x, y); };
  auto in_cup = [&](int x, int y) { return in_disk(x, y, cup_cx, cup_cy, cup_r); };
  auto in_table = [&](int x, int y) { return !in_food(x, y) && !in_plate(x, y) && !in_cup(x, y); };

  SyntheticScene s;
  s.scene_id = fmt::format("scene_{:02d}", variant);
  s.categories = demo_categories();
  s.ground_truth = LabelMap(kDims);
  for (int y = 0; y < kDims.height; ++y) {
    for (int x = 0; x < kDims.width; ++x) {
      CategoryId c = 0;
      if (in_rice(x, y)) c = kRice;
      if (in_egg(x, y)) c = kEgg;
      if (in_broc(x, y)) c = kBroccoli;
      s.ground_truth(x, y) = static_cast<std::uint8_t>(c);
    }
  }
  s.coarse = erode_objects(s.ground_truth, 2);

  s.masks.dims = kDims;
  auto add = [&](int id, BinaryMask m, double iou) {
    s.masks.records.push_back(MaskRecord::from_pixels(id, std::move(m), std::nullopt, iou, 0.95));
  };
  add(kRiceMask, mask_where(in_rice), 0.97);
  add(kEggMask, mask_where(in_egg), 0.96);
  add(kBroccoliMask, mask_where(in_broc), 0.95);
  add(kPlateMask, mask_where(in_plate), 0.94);
  add(kCupMask, mask_where(in_cup), 0.93);
  add(kTableMask, mask_where(in_table), 0.92);
  // Upper half of the egg joined with the lower half of the broccoli: no
  // coarse label holds a majority under it.
  add(kConfusedMask,
      mask_where([&](int x, int y) { return (in_egg(x, y) && y + 0.5 < egg_cy) || (in_broc(x, y) && y + 0.5 > broc_cy); }),
      0.91);

  auto box_of = [&](int mask_id, CategoryId c, const std::string& label, double score) {
    const auto* r = s.masks.find(mask_id);
    s.detections.push_back({Box::from_rect(r->bbox), score, c, label});
  };
  box_of(kPlateMask, kPlate, "plate", 0.9);
  box_of(kCupMask, kCup, "cup", 0.8);
  s.detections.push_back({{0, 0, static_cast<double>(kDims.width), static_cast<double>(kDims.height)}, 0.7, kTable,
                          "table"});

  s.image.dims = kDims;
  s.image.rgb.resize(kDims.pixels() * 3);
  for (int y = 0; y < kDims.height; ++y) {
    for (int x = 0; x < kDims.width; ++x) {
      CategoryId c = s.ground_truth(x, y);
      if (c == 0) c = in_plate(x, y) ? kPlate : in_cup(x, y) ? kCup : kTable;
      const Rgb base = base_color(c);
      const int texture = (x * 7 + y * 13) % 16 - 8;
      for (int k = 0; k < 3; ++k) {
        s.image.rgb[(static_cast<std::size_t>(y) * kDims.width + x) * 3 + k] =
            static_cast<std::uint8_t>(std::clamp(base[k] + texture, 0, 255));
      }
    }
  }
  return s;
}

void write_scene(const SyntheticScene& scene, const std::string& scene_dir) {
  fs::create_directories(scene_dir);
  const fs::path root(scene_dir);
  save_label_map(scene.coarse, (root / "semantic.png").string());
  save_label_map(scene.ground_truth, (root / "gt.png").string());
  png::write_file((root / "image.png").string(),
                  png::encode_rgb8(scene.image.dims.width, scene.image.dims.height, scene.image.rgb));
  std::ofstream det(root / "detections.json", std::ios::trunc);
  det << detections_to_json(scene.detections).dump(2) << '\n';
  save_mask_set(scene.masks, (root / "masks").string());
}

void write_corpus(const std::string& data_root, int n_scenes) {
  fs::create_directories(data_root);
  std::ofstream cats(fs::path(data_root) / "categories.tsv", std::ios::trunc);
  const auto table = demo_categories();
  for (const auto& e : table.entries()) {
    const char* kind = e.id == table.background_id() ? "background" : table.is_nonfood(e.id) ? "nonfood" : "food";
    cats << e.id << '\t' << e.name << '\t' << kind << '\n';
  }
  for (int i = 0; i < n_scenes; ++i) {
    const auto scene = make_plate_scene(i);
    write_scene(scene, (fs::path(data_root) / scene.scene_id).string());
  }
}

}  // namespace foodfuse::synthetic
