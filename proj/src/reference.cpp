#include "foodfuse/reference.hpp"

#include <algorithm>
#include <map>

namespace foodfuse::reference {

VoteOutcome vote_mask_label(const MaskRecord& record, const LabelMap& semantic) {
  if (record.pixels.dims() != semantic.dims()) {
    throw Error(ErrorCode::kDimMismatch, "mask and semantic map dims differ");
  }
  VoteOutcome out;
  out.mask_id = record.mask_id;
  const auto mask = record.pixels.data();
  const auto labels = semantic.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      ++out.histogram[labels[i]];
      ++out.footprint_size;
    }
  }
  if (out.footprint_size == 0) throw Error(ErrorCode::kEmptyMask, "mask has no foreground");
  std::int64_t best = -1;
  for (const auto& [label, count] : out.histogram) {
    if (count > best) {
      best = count;
      out.winner = label;
    }
  }
  out.confused_degree = static_cast<double>(best) / static_cast<double>(out.footprint_size);
  return out;
}

std::vector<VoteOutcome> vote_masks(const MaskSet& masks, const LabelMap& semantic) {
  std::vector<VoteOutcome> out;
  out.reserve(masks.records.size());
  for (const auto& r : masks.records) out.push_back(vote_mask_label(r, semantic));
  return out;
}

ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt, int n_classes,
                                 std::span<const CategoryId> ignore_ids) {
  if (pred.dims() != gt.dims()) throw Error(ErrorCode::kDimMismatch, "prediction and ground truth dims differ");
  ConfusionMatrix cm(n_classes);
  const auto p = pred.data();
  const auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (std::find(ignore_ids.begin(), ignore_ids.end(), g[i]) != ignore_ids.end()) continue;
    if (g[i] >= n_classes || p[i] >= n_classes) {
      throw Error(ErrorCode::kLabelOutOfRange, "label outside [0, n_classes)");
    }
    cm.add(g[i], p[i]);
  }
  return cm;
}

}  // namespace foodfuse::reference
