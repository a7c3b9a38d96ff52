#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "foodfuse/mask_io.hpp"
#include "foodfuse/parallel.hpp"
#include "foodfuse/types.hpp"

namespace foodfuse {

/// Paint order for overlapping masks. Ties on the key fall back to
/// ascending mask id.
enum class SortOrder { kAreaDesc, kAreaAsc, kIouDesc, kIouAsc };

std::string_view to_string(SortOrder order);
/// Accepts area_desc, area_asc, iou_desc, iou_asc.
SortOrder parse_sort_order(std::string_view text);

struct FusionParams {
  /// Masks whose confused degree is strictly below tau are rejected.
  double tau = 0.5;
  /// Keep only the k largest masks (area descending, then mask id).
  std::optional<int> top_k;
  SortOrder sort_order = SortOrder::kAreaDesc;
  /// Disables the confused-degree filter altogether.
  bool filter_confused = true;
  /// Background-voted masks are painted unless this is set.
  bool skip_background_paint = false;

  void validate() const;
};

/// A mask proposal together with the category it will be painted with.
struct LabeledMask {
  const MaskRecord* record = nullptr;
  CategoryId label = 0;
};

/// Majority vote of the coarse labels under the mask footprint. Ties go to
/// the lowest category id.
VoteOutcome vote_mask_label(const MaskRecord& record, const LabelMap& semantic);

/// Votes every record independently; parallel over masks, order preserved.
std::vector<VoteOutcome> vote_masks(std::span<const MaskRecord* const> records, const LabelMap& semantic,
                                    int n_threads = parallel::max_threads());
std::vector<VoteOutcome> vote_masks(const MaskSet& masks, const LabelMap& semantic,
                                    int n_threads = parallel::max_threads());

struct FilterResult {
  std::vector<VoteOutcome> kept;
  std::vector<VoteOutcome> rejected;
};

FilterResult filter_confused(std::span<const VoteOutcome> votes, double tau);

/// Stable paint order for `masks` under `order`.
std::vector<LabeledMask> paint_order(std::vector<LabeledMask> masks, SortOrder order);

/// Paints each mask's footprint with its label on a copy of `semantic`;
/// later masks in paint order overwrite earlier ones.
LabelMap merge_masks(const LabelMap& semantic, std::vector<LabeledMask> kept, const FusionParams& params,
                     CategoryId background_id = 0);

/// The k largest masks (all when k is unset), area descending then id.
std::vector<const MaskRecord*> select_top_k(const MaskSet& masks, std::optional<int> k);

struct EnhanceResult {
  LabelMap enhanced;
  /// One entry per voted mask, in top-k selection order.
  std::vector<VoteOutcome> votes;
  /// Masks that passed the filter, with their winners, in selection order.
  std::vector<LabeledMask> kept;
};

EnhanceResult enhance(const SceneBundle& scene, const FusionParams& params);

/// Same as enhance() but reuses votes computed for every mask in the scene
/// (any order); used by sweeps so each mask is voted once.
EnhanceResult enhance_with_votes(const SceneBundle& scene, std::span<const VoteOutcome> all_votes,
                                 const FusionParams& params);

Json votes_to_json(std::span<const VoteOutcome> votes, std::span<const LabeledMask> kept);

}  // namespace foodfuse
