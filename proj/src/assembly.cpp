#include "foodfuse/assembly.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace foodfuse {
namespace {

struct Candidate {
  CategoryId category = 0;
  int primary_id = 0;
  std::vector<const MaskRecord*> parts;
  Point centroid;
  std::int64_t area = 0;  // union of parts
};

Point centroid_of(const MaskRecord& r) {
  double sx = 0.0, sy = 0.0;
  std::int64_t n = 0;
  for (int y = r.bbox.y0; y < r.bbox.y0 + r.bbox.h; ++y) {
    const auto row = r.pixels.row(y);
    for (int x = r.bbox.x0; x < r.bbox.x0 + r.bbox.w; ++x) {
      if (row[x]) {
        sx += x + 0.5;
        sy += y + 0.5;
        ++n;
      }
    }
  }
  return n ? Point{sx / n, sy / n} : Point{};
}

template <class F>
void for_each_pixel(const MaskRecord& r, F f) {
  for (int y = r.bbox.y0; y < r.bbox.y0 + r.bbox.h; ++y) {
    const auto row = r.pixels.row(y);
    for (int x = r.bbox.x0; x < r.bbox.x0 + r.bbox.w; ++x) {
      if (row[x]) f(x, y);
    }
  }
}

// Groups same-category masks (small ones join the nearest large one or are
// dropped), paints groups large-first into `grid` starting at `first_id`,
// and returns the segment table. Pixels already nonzero in `grid` are left
// untouched when `keep_existing` is set.
std::vector<Segment> group_and_paint(std::span<const LabeledMask> items, const AssemblyParams& params,
                                     IdGrid& grid, int first_id, bool is_food, bool keep_existing) {
  const Dims dims = grid.dims();
  std::vector<LabeledMask> sorted(items.begin(), items.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const LabeledMask& a, const LabeledMask& b) {
    return std::make_tuple(-a.record->area, a.record->mask_id) < std::make_tuple(-b.record->area, b.record->mask_id);
  });

  const double small_area = params.min_area_ratio * static_cast<double>(dims.pixels());
  const double max_dist = params.merge_distance * std::hypot(dims.width, dims.height);

  std::vector<Candidate> candidates;
  std::vector<const LabeledMask*> small;
  for (const auto& m : sorted) {
    if (static_cast<double>(m.record->area) < small_area) {
      small.push_back(&m);
    } else {
      candidates.push_back({m.label, m.record->mask_id, {m.record}, centroid_of(*m.record), 0});
    }
  }
  for (const auto* m : small) {
    const Point c = centroid_of(*m->record);
    Candidate* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    for (auto& cand : candidates) {
      if (cand.category != m->label) continue;
      const double d = std::hypot(cand.centroid.x - c.x, cand.centroid.y - c.y);
      if (d < max_dist && d < best_dist) {
        best = &cand;
        best_dist = d;
      }
    }
    if (best) best->parts.push_back(m->record);
  }

  std::vector<int> stamp(dims.pixels(), -1);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    for (const auto* part : candidates[k].parts) {
      for_each_pixel(*part, [&](int x, int y) {
        auto& s = stamp[static_cast<std::size_t>(y) * dims.width + x];
        if (s != static_cast<int>(k)) {
          s = static_cast<int>(k);
          ++candidates[k].area;
        }
      });
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::make_tuple(-a.area, a.primary_id) < std::make_tuple(-b.area, b.primary_id);
  });

  // Provisional ids are 1 + candidate index; larger groups paint first.
  std::vector<int> painted(dims.pixels(), 0);
  const auto existing = grid.data();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    for (const auto* part : candidates[k].parts) {
      for_each_pixel(*part, [&](int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * dims.width + x;
        if (keep_existing && existing[i] != 0) return;
        painted[i] = static_cast<int>(k) + 1;
      });
    }
  }

  struct Extent {
    std::int64_t area = 0;
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max(), x1 = -1, y1 = -1;
  };
  std::vector<Extent> extents(candidates.size() + 1);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const int p = painted[static_cast<std::size_t>(y) * dims.width + x];
      if (!p) continue;
      auto& e = extents[p];
      ++e.area;
      e.x0 = std::min(e.x0, x);
      e.y0 = std::min(e.y0, y);
      e.x1 = std::max(e.x1, x);
      e.y1 = std::max(e.y1, y);
    }
  }

  std::vector<int> final_id(candidates.size() + 1, 0);
  std::vector<Segment> segments;
  int next = first_id;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& e = extents[k + 1];
    if (e.area == 0) continue;
    if (next > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::kInvalidArgument, "more than 65535 segments");
    }
    final_id[k + 1] = next;
    segments.push_back({next, candidates[k].category, e.area, {e.x0, e.y0, e.x1 - e.x0 + 1, e.y1 - e.y0 + 1}, is_food});
    ++next;
  }
  auto out = grid.data();
  for (std::size_t i = 0; i < painted.size(); ++i) {
    if (painted[i]) out[i] = static_cast<std::uint16_t>(final_id[painted[i]]);
  }
  return segments;
}

}  // namespace

void AssemblyParams::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(min_area_ratio) || !in_unit(merge_distance) || !in_unit(panoptic_iou_thresh)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("assembly ratios must be in [0, 1] (min_area {}, merge_dist {}, iou_thresh {})",
                            min_area_ratio, merge_distance, panoptic_iou_thresh));
  }
}

InstanceMap assemble_instances(std::span<const LabeledMask> kept, const CategoryTable& categories, Dims dims,
                               const AssemblyParams& params) {
  params.validate();
  std::vector<LabeledMask> food;
  for (const auto& m : kept) {
    if (m.record->pixels.dims() != dims) {
      throw Error(ErrorCode::kDimMismatch, fmt::format("mask {} dims differ from the image", m.record->mask_id));
    }
    if (categories.is_food(m.label)) food.push_back(m);
  }
  InstanceMap out;
  out.id_grid = IdGrid(dims);
  out.segments = group_and_paint(food, params, out.id_grid, 1, true, false);
  return out;
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double mask_box_iou(const MaskRecord& mask, const Box& box) {
  const Dims dims = mask.pixels.dims();
  auto covered = [](double lo, double hi, int limit) {
    // Integer cells c with lo <= c + 0.5 < hi, clipped to [0, limit).
    const int first = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
    const int last = std::min(limit, static_cast<int>(std::ceil(hi - 0.5)));
    return std::max(0, last - first);
  };
  const std::int64_t box_pixels =
      static_cast<std::int64_t>(covered(box.x0, box.x1, dims.width)) * covered(box.y0, box.y1, dims.height);
  std::int64_t inter = 0;
  for_each_pixel(mask, [&](int x, int y) {
    if (box.covers_pixel(x, y)) ++inter;
  });
  const std::int64_t uni = mask.area + box_pixels - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<std::size_t> boxes_containing(Point p, const DetectionSet& boxes) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].xyxy.contains(p)) out.push_back(i);
  }
  return out;
}

std::map<int, std::vector<std::size_t>> candidate_filter_by_point(std::span<const MaskRecord* const> masks,
                                                                   const DetectionSet& boxes) {
  std::map<int, std::vector<std::size_t>> out;
  for (const auto* m : masks) out[m->mask_id] = boxes_containing(m->point_input, boxes);
  return out;
}

std::map<int, std::vector<std::size_t>> candidate_filter_by_point(const MaskSet& masks, const DetectionSet& boxes) {
  std::vector<const MaskRecord*> ptrs;
  for (const auto& r : masks.records) ptrs.push_back(&r);
  return candidate_filter_by_point(ptrs, boxes);
}

std::vector<BackgroundMatch> match_background_masks(std::span<const MaskRecord* const> bg_masks,
                                                    const DetectionSet& boxes, const CategoryTable& categories,
                                                    const AssemblyParams& params) {
  std::vector<BackgroundMatch> out(bg_masks.size());
  parallel::for_each_index(0, static_cast<std::ptrdiff_t>(bg_masks.size()), [&](std::ptrdiff_t i) {
    const auto& mask = *bg_masks[i];
    BackgroundMatch m;
    m.mask_id = mask.mask_id;
    m.category_id = categories.background_id();
    const Box mask_box = Box::from_rect(mask.bbox);
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t b : boxes_containing(mask.point_input, boxes)) {
      const double iou = params.pixel_iou ? mask_box_iou(mask, boxes[b].xyxy) : box_iou(mask_box, boxes[b].xyxy);
      if (iou > best_iou) {
        best_iou = iou;
        best = b;
      }
    }
    if (best) {
      m.iou = best_iou;
      if (best_iou > params.panoptic_iou_thresh) {
        m.box_index = best;
        m.category_id = boxes[*best].category_id;
      }
    }
    out[i] = m;
  });
  return out;
}

PanopticMap assemble_panoptic(const InstanceMap& instances, std::span<const LabeledMask> nonfood,
                              const CategoryTable& categories, const AssemblyParams& params) {
  params.validate();
  PanopticMap out = instances;
  for (auto& s : out.segments) s.is_food = true;
  std::vector<LabeledMask> items;
  for (const auto& m : nonfood) {
    if (!categories.is_nonfood(m.label)) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("mask {} labeled {} which is not a non-food id", m.record->mask_id, m.label));
    }
    if (m.record->pixels.dims() != out.id_grid.dims()) {
      throw Error(ErrorCode::kDimMismatch, fmt::format("mask {} dims differ from the image", m.record->mask_id));
    }
    items.push_back(m);
  }
  int first_id = 1;
  for (const auto& s : out.segments) first_id = std::max(first_id, s.segment_id + 1);
  auto extra = group_and_paint(items, params, out.id_grid, first_id, false, true);
  out.segments.insert(out.segments.end(), extra.begin(), extra.end());
  return out;
}

}  // namespace foodfuse
