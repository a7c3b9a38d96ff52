#include "foodfuse/fusion.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <map>
#include <tuple>

namespace foodfuse {

std::string_view to_string(SortOrder order) {
  switch (order) {
    case SortOrder::kAreaDesc: return "area_desc";
    case SortOrder::kAreaAsc: return "area_asc";
    case SortOrder::kIouDesc: return "iou_desc";
    case SortOrder::kIouAsc: return "iou_asc";
  }
  return "area_desc";
}

SortOrder parse_sort_order(std::string_view text) {
  if (text == "area_desc") return SortOrder::kAreaDesc;
  if (text == "area_asc") return SortOrder::kAreaAsc;
  if (text == "iou_desc") return SortOrder::kIouDesc;
  if (text == "iou_asc") return SortOrder::kIouAsc;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown sort order '{}'", text));
}

void FusionParams::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("tau must be in [0, 1], got {}", tau));
  }
  if (top_k && *top_k < 0) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("top_k must be >= 0, got {}", *top_k));
  }
}

VoteOutcome vote_mask_label(const MaskRecord& record, const LabelMap& semantic) {
  if (record.pixels.dims() != semantic.dims()) {
    throw Error(ErrorCode::kDimMismatch,
                fmt::format("mask {} is {}x{}, semantic map is {}x{}", record.mask_id, record.pixels.width(),
                            record.pixels.height(), semantic.width(), semantic.height()));
  }
  if (record.area <= 0) {
    throw Error(ErrorCode::kEmptyMask, fmt::format("mask {} has no foreground", record.mask_id));
  }
  std::array<std::int64_t, 256> counts{};
  std::int64_t footprint = 0;
  const auto& b = record.bbox;
  for (int y = b.y0; y < b.y0 + b.h; ++y) {
    const auto mask_row = record.pixels.row(y);
    const auto label_row = semantic.row(y);
    for (int x = b.x0; x < b.x0 + b.w; ++x) {
      if (mask_row[x]) {
        ++counts[label_row[x]];
        ++footprint;
      }
    }
  }
  VoteOutcome out;
  out.mask_id = record.mask_id;
  out.footprint_size = footprint;
  std::int64_t best = -1;
  for (int label = 0; label < 256; ++label) {
    if (counts[label] == 0) continue;
    out.histogram.emplace(label, counts[label]);
    if (counts[label] > best) {
      best = counts[label];
      out.winner = label;
    }
  }
  if (footprint == 0) {
    throw Error(ErrorCode::kEmptyMask, fmt::format("mask {} has no foreground", record.mask_id));
  }
  out.confused_degree = static_cast<double>(best) / static_cast<double>(footprint);
  return out;
}

std::vector<VoteOutcome> vote_masks(std::span<const MaskRecord* const> records, const LabelMap& semantic,
                                    int n_threads) {
  std::vector<VoteOutcome> out(records.size());
  parallel::for_each_index(
      0, static_cast<std::ptrdiff_t>(records.size()),
      [&](std::ptrdiff_t i) { out[i] = vote_mask_label(*records[i], semantic); }, n_threads);
  return out;
}

std::vector<VoteOutcome> vote_masks(const MaskSet& masks, const LabelMap& semantic, int n_threads) {
  std::vector<const MaskRecord*> ptrs;
  ptrs.reserve(masks.records.size());
  for (const auto& r : masks.records) ptrs.push_back(&r);
  return vote_masks(ptrs, semantic, n_threads);
}

FilterResult filter_confused(std::span<const VoteOutcome> votes, double tau) {
  FilterResult out;
  for (const auto& v : votes) {
    (v.confused_degree < tau ? out.rejected : out.kept).push_back(v);
  }
  return out;
}

std::vector<LabeledMask> paint_order(std::vector<LabeledMask> masks, SortOrder order) {
  auto key = [order](const LabeledMask& m) {
    const auto& r = *m.record;
    switch (order) {
      case SortOrder::kAreaDesc: return std::make_tuple(-static_cast<double>(r.area), r.mask_id);
      case SortOrder::kAreaAsc: return std::make_tuple(static_cast<double>(r.area), r.mask_id);
      case SortOrder::kIouDesc: return std::make_tuple(-r.predicted_iou, r.mask_id);
      case SortOrder::kIouAsc: return std::make_tuple(r.predicted_iou, r.mask_id);
    }
    return std::make_tuple(0.0, r.mask_id);
  };
  std::stable_sort(masks.begin(), masks.end(),
                   [&](const LabeledMask& a, const LabeledMask& b) { return key(a) < key(b); });
  return masks;
}

LabelMap merge_masks(const LabelMap& semantic, std::vector<LabeledMask> kept, const FusionParams& params,
                     CategoryId background_id) {
  LabelMap out = semantic;
  for (const auto& m : paint_order(std::move(kept), params.sort_order)) {
    const auto& r = *m.record;
    if (r.pixels.dims() != semantic.dims()) {
      throw Error(ErrorCode::kDimMismatch, fmt::format("mask {} dims differ from the semantic map", r.mask_id));
    }
    if (params.skip_background_paint && m.label == background_id) continue;
    const auto label = static_cast<std::uint8_t>(m.label);
    for (int y = r.bbox.y0; y < r.bbox.y0 + r.bbox.h; ++y) {
      const auto mask_row = r.pixels.row(y);
      for (int x = r.bbox.x0; x < r.bbox.x0 + r.bbox.w; ++x) {
        if (mask_row[x]) out(x, y) = label;
      }
    }
  }
  return out;
}

std::vector<const MaskRecord*> select_top_k(const MaskSet& masks, std::optional<int> k) {
  std::vector<const MaskRecord*> out;
  out.reserve(masks.records.size());
  for (const auto& r : masks.records) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(), [](const MaskRecord* a, const MaskRecord* b) {
    return std::tie(b->area, a->mask_id) < std::tie(a->area, b->mask_id);
  });
  if (k && static_cast<std::size_t>(*k) < out.size()) out.resize(*k);
  return out;
}

namespace {

EnhanceResult finish_enhance(const SceneBundle& scene, const std::vector<const MaskRecord*>& selected,
                             std::vector<VoteOutcome> votes, const FusionParams& params) {
  EnhanceResult out;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto& v = votes[i];
    if (params.filter_confused && v.confused_degree < params.tau) continue;
    out.kept.push_back({selected[i], v.winner});
  }
  out.votes = std::move(votes);
  out.enhanced = merge_masks(scene.semantic, out.kept, params, scene.categories.background_id());
  return out;
}

}  // namespace

EnhanceResult enhance(const SceneBundle& scene, const FusionParams& params) {
  params.validate();
  const auto selected = select_top_k(scene.masks, params.top_k);
  return finish_enhance(scene, selected, vote_masks(selected, scene.semantic), params);
}

EnhanceResult enhance_with_votes(const SceneBundle& scene, std::span<const VoteOutcome> all_votes,
                                 const FusionParams& params) {
  params.validate();
  std::map<int, const VoteOutcome*> by_id;
  for (const auto& v : all_votes) by_id[v.mask_id] = &v;
  const auto selected = select_top_k(scene.masks, params.top_k);
  std::vector<VoteOutcome> votes;
  votes.reserve(selected.size());
  for (const auto* r : selected) {
    auto it = by_id.find(r->mask_id);
    votes.push_back(it != by_id.end() ? *it->second : vote_mask_label(*r, scene.semantic));
  }
  return finish_enhance(scene, selected, std::move(votes), params);
}

Json votes_to_json(std::span<const VoteOutcome> votes, std::span<const LabeledMask> kept) {
  std::map<int, bool> kept_ids;
  for (const auto& k : kept) kept_ids[k.record->mask_id] = true;
  Json arr = Json::array();
  for (const auto& v : votes) {
    Json hist = Json::object();
    for (const auto& [label, count] : v.histogram) hist[std::to_string(label)] = count;
    arr.push_back({{"mask_id", v.mask_id},
                   {"winner", v.winner},
                   {"confused_degree", v.confused_degree},
                   {"footprint_size", v.footprint_size},
                   {"kept", kept_ids.count(v.mask_id) != 0},
                   {"histogram", hist}});
  }
  return arr;
}

}  // namespace foodfuse
