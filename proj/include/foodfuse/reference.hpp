#pragma once

// Single-threaded, whole-grid versions of the parallel kernels. Kept for
// parity tests and as the baseline in bench/.

#include <span>
#include <vector>

#include "foodfuse/types.hpp"

namespace foodfuse::reference {

VoteOutcome vote_mask_label(const MaskRecord& record, const LabelMap& semantic);
std::vector<VoteOutcome> vote_masks(const MaskSet& masks, const LabelMap& semantic);

ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt, int n_classes,
                                 std::span<const CategoryId> ignore_ids = {});

}  // namespace foodfuse::reference
