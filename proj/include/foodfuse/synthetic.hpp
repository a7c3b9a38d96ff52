#pragma once

// Synthetic plate scenes with known ground truth. The coarse map is the
// ground truth with every food object eroded by two pixels; the mask
// proposals are the exact object supports plus plate, cup, table and one
// deliberately ambiguous mask.

#include <string>

#include "foodfuse/mask_io.hpp"
#include "foodfuse/types.hpp"

namespace foodfuse::synthetic {

inline constexpr CategoryId kRice = 3;
inline constexpr CategoryId kEgg = 7;
inline constexpr CategoryId kBroccoli = 12;
inline constexpr CategoryId kPlate = 101;
inline constexpr CategoryId kCup = 102;
inline constexpr CategoryId kTable = 103;

/// Ids of the generated proposals.
inline constexpr int kRiceMask = 0;
inline constexpr int kEggMask = 1;
inline constexpr int kBroccoliMask = 2;
inline constexpr int kPlateMask = 3;
inline constexpr int kCupMask = 4;
inline constexpr int kTableMask = 5;
inline constexpr int kConfusedMask = 6;

struct SyntheticScene {
  std::string scene_id;
  CategoryTable categories;
  LabelMap ground_truth;
  LabelMap coarse;
  MaskSet masks;
  DetectionSet detections;
  RgbImage image;

  SceneBundle bundle() const;
};

CategoryTable demo_categories();

/// Sets to background every object pixel with a pixel of another label
/// within Euclidean distance `radius`.
LabelMap erode_objects(const LabelMap& labels, int radius, CategoryId background = 0);

/// 64x64 plate scene; `variant` shifts the layout by a few pixels.
SyntheticScene make_plate_scene(int variant = 0);

/// Writes semantic.png, gt.png, image.png, detections.json and masks/.
void write_scene(const SyntheticScene& scene, const std::string& scene_dir);

/// `n_scenes` variants under data_root/scene_XX plus categories.tsv.
void write_corpus(const std::string& data_root, int n_scenes);

}  // namespace foodfuse::synthetic
