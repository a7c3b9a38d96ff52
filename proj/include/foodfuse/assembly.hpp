#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "foodfuse/fusion.hpp"
#include "foodfuse/types.hpp"

namespace foodfuse {

struct AssemblyParams {
  /// Masks below this fraction of the image area are "small".
  double min_area_ratio = 0.005;
  /// Small masks join the nearest same-category mask whose centroid is
  /// closer than this fraction of the image diagonal.
  double merge_distance = 0.1;
  /// A background mask takes a detector category only above this IoU.
  double panoptic_iou_thresh = 0.5;
  /// Exact mask-vs-box IoU instead of the mask's bounding box.
  bool pixel_iou = false;

  void validate() const;
};

/// Food instances from the kept masks. Background- and non-food-voted
/// masks are ignored. Segment ids run 1..T by descending area.
InstanceMap assemble_instances(std::span<const LabeledMask> kept, const CategoryTable& categories, Dims dims,
                               const AssemblyParams& params);

double box_iou(const Box& a, const Box& b);
/// IoU between a mask's pixels and the pixels whose centers lie in `box`.
double mask_box_iou(const MaskRecord& mask, const Box& box);

/// Indices of boxes containing `p` (half-open bounds).
std::vector<std::size_t> boxes_containing(Point p, const DetectionSet& boxes);
/// mask_id -> indices of boxes containing the mask's prompt point.
std::map<int, std::vector<std::size_t>> candidate_filter_by_point(std::span<const MaskRecord* const> masks,
                                                                   const DetectionSet& boxes);
std::map<int, std::vector<std::size_t>> candidate_filter_by_point(const MaskSet& masks, const DetectionSet& boxes);

struct BackgroundMatch {
  int mask_id = 0;
  /// Detector category, or the background id when nothing matched.
  CategoryId category_id = 0;
  std::optional<std::size_t> box_index;
  double iou = 0.0;
};

/// Labels background masks with the category of the best-IoU candidate box
/// when that IoU exceeds the threshold.
std::vector<BackgroundMatch> match_background_masks(std::span<const MaskRecord* const> bg_masks,
                                                    const DetectionSet& boxes, const CategoryTable& categories,
                                                    const AssemblyParams& params);

/// Adds non-food segments (ids T+1..) beneath the food instances.
PanopticMap assemble_panoptic(const InstanceMap& instances, std::span<const LabeledMask> nonfood,
                              const CategoryTable& categories, const AssemblyParams& params);

}  // namespace foodfuse
