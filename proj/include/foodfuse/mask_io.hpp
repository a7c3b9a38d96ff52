#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "foodfuse/types.hpp"

namespace foodfuse {

using Json = nlohmann::json;

// --- label maps -----------------------------------------------------------

/// Decodes an 8-bit single-channel PNG (gray or palette indices); pixel
/// value v becomes category id v. Throws kFormatError otherwise.
LabelMap decode_label_map(std::span<const std::uint8_t> png_bytes);
LabelMap load_label_map(const std::string& path);
std::vector<std::uint8_t> encode_label_map(const LabelMap& map);
void save_label_map(const LabelMap& map, const std::string& path);

BinaryMask load_binary_mask(const std::string& path);
void save_binary_mask(const BinaryMask& mask, const std::string& path);

// --- mask proposals ---------------------------------------------------------

inline constexpr std::string_view kMaskCsvHeader =
    "id,area,bbox_x0,bbox_y0,bbox_w,bbox_h,point_input_x,point_input_y,"
    "predicted_iou,stability_score,crop_box_x0,crop_box_y0,crop_box_w,crop_box_h";

struct MaskLoadOptions {
  /// When set, any disagreement between metadata.csv and the mask pixels is
  /// a kCsvSchemaError. When unset, the pixel-derived values replace the CSV
  /// ones and a warning is emitted.
  bool trust_metadata = false;
  std::optional<Dims> expected_dims;
};

/// Reads `dir/metadata.csv` plus one `{id}.png` per row. Warnings (if any)
/// are logged and appended to `warnings`.
MaskSet load_mask_set(const std::string& dir, const MaskLoadOptions& options = {},
                      std::vector<std::string>* warnings = nullptr);
void save_mask_set(const MaskSet& masks, const std::string& dir);

// --- run-length encoding ----------------------------------------------------

using RleCounts = std::vector<std::uint32_t>;

/// Column-major runs, the first run counting background pixels (possibly 0).
RleCounts rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(std::span<const std::uint32_t> counts, Dims dims);
/// {"size": [h, w], "counts": [...]}
Json rle_to_json(const BinaryMask& mask);
BinaryMask rle_from_json(const Json& j);

// --- detections -------------------------------------------------------------

/// Parses {"boxes": [{"xyxy": [...], "score": s, "category_id": c, "label": t}]}.
/// Boxes are clamped to the image; empty boxes after clamping are dropped.
/// With a table, unknown or food category ids are a kSchemaError.
DetectionSet parse_detections(const Json& doc, Dims image, const CategoryTable* categories = nullptr,
                              std::vector<std::string>* warnings = nullptr);
DetectionSet load_detections(const std::string& path, Dims image,
                             const CategoryTable* categories = nullptr,
                             std::vector<std::string>* warnings = nullptr);
Json detections_to_json(const DetectionSet& boxes);

// --- instance / panoptic outputs ---------------------------------------------

using Rgb = std::array<std::uint8_t, 3>;

/// Golden-ratio hue stepping keyed by segment id; id 0 is black.
Rgb segment_color(int segment_id);

struct RgbImage {
  Dims dims;
  std::vector<std::uint8_t> rgb;
};

RgbImage load_rgb_image(const std::string& path);

std::vector<std::uint8_t> encode_id_grid(const IdGrid& grid);
IdGrid decode_id_grid(std::span<const std::uint8_t> png_bytes);
/// Colorized view; blended 50/50 over `backdrop` when given.
std::vector<std::uint8_t> encode_segment_colors(const SegmentMap& map,
                                                const RgbImage* backdrop = nullptr);
Json segments_to_json(const SegmentMap& map, const CategoryTable& categories);

/// Writes `{stem}.png` (16-bit ids), `{stem}.json` (segment table) and
/// `{stem}_color.png`.
void save_segment_map(const SegmentMap& map, const CategoryTable& categories,
                      const std::string& dir, const std::string& stem,
                      const RgbImage* backdrop = nullptr);
SegmentMap load_segment_map(const std::string& dir, const std::string& stem);

inline void save_instance_map(const InstanceMap& map, const CategoryTable& categories,
                              const std::string& dir, const RgbImage* backdrop = nullptr) {
  save_segment_map(map, categories, dir, "instance", backdrop);
}
inline void save_panoptic_map(const PanopticMap& map, const CategoryTable& categories,
                              const std::string& dir, const RgbImage* backdrop = nullptr) {
  save_segment_map(map, categories, dir, "panoptic", backdrop);
}

// --- scenes -----------------------------------------------------------------

struct ScenePaths {
  std::string semantic;
  std::string masks;
  std::string detections;  // optional
  std::string image;       // optional
};

struct SceneBundle {
  std::string scene_id;
  std::optional<std::string> image_path;
  LabelMap semantic;
  MaskSet masks;
  std::optional<DetectionSet> detections;
  CategoryTable categories;

  Dims dims() const { return semantic.dims(); }
};

SceneBundle load_scene(const ScenePaths& paths, const CategoryTable& categories,
                       const MaskLoadOptions& options = {});

/// Scene directory layout: semantic.png, masks/, and optionally
/// detections.json, image.png.
ScenePaths scene_paths_in(const std::string& scene_dir);

/// Scene directories under `data_root`, sorted by name.
std::vector<std::string> list_scene_ids(const std::string& data_root);

}  // namespace foodfuse
