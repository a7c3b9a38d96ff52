#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "foodfuse/mask_io.hpp"
#include "foodfuse/types.hpp"

namespace foodfuse {

enum class PromptKind { kPoint, kBox, kMask, kRegular };

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view text);

struct Prompt {
  PromptKind kind = PromptKind::kRegular;
  Point point;
  Box box;
  BinaryMask mask;

  static Prompt at(Point p) { return {PromptKind::kPoint, p, {}, {}}; }
  static Prompt in_box(Box b) { return {PromptKind::kBox, {}, b, {}}; }
  static Prompt with_mask(BinaryMask m) { return {PromptKind::kMask, {}, {}, std::move(m)}; }
  static Prompt regular() { return {}; }
};

inline constexpr int kDefaultMaskSamples = 32;

/// dist(p, box center) / box diagonal.
double normalized_center_distance(Point p, const Box& box);

/// Among boxes containing `p`, the most central one; ties go to the smaller
/// box, then the lower index.
std::optional<std::size_t> select_by_point(Point p, const DetectionSet& boxes);

/// Highest-IoU box; none when every IoU is 0; ties go to the lower index.
std::optional<std::size_t> select_by_box(const Box& query, const DetectionSet& boxes);

/// min(n, area) pixel centers drawn from the foreground, one per equal
/// stratum of the row-major pixel order, offsets from mt19937(seed).
std::vector<Point> stratified_samples(const BinaryMask& mask, int n_samples, std::uint32_t seed = 0);

/// Each sample votes with select_by_point; most votes wins (ties: lower
/// index). Throws kEmptyMask on an empty mask.
std::optional<std::size_t> select_by_mask(const BinaryMask& mask, const DetectionSet& boxes,
                                          int n_samples = kDefaultMaskSamples, std::uint32_t seed = 0);

std::vector<std::size_t> select_regular(const DetectionSet& boxes);

struct SelectedSegment {
  int segment_id = 0;
  CategoryId category_id = 0;
  bool is_food = true;
  std::int64_t area = 0;
  /// Pixels shared with the prompt geometry (the segment area for regular).
  std::int64_t overlap = 0;
  BinaryMask mask;
};

struct PromptResult {
  PromptKind kind = PromptKind::kRegular;
  std::vector<SelectedSegment> segments;
  std::vector<std::size_t> selected_boxes;
  /// Enhanced semantic label under a point prompt.
  std::optional<CategoryId> semantic_category;
};

/// Prompted selection over a scene whose enhanced and panoptic maps are
/// already computed. Throws kOutOfBounds for geometry outside the image.
PromptResult promptable_segment(const SceneBundle& scene, const LabelMap& enhanced, const PanopticMap& panoptic,
                                const Prompt& prompt, int n_samples = kDefaultMaskSamples, std::uint32_t seed = 0);

Json prompt_result_to_json(const PromptResult& result, const SceneBundle& scene);

}  // namespace foodfuse
