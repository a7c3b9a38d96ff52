#include "foodfuse/prompt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include "foodfuse/assembly.hpp"

namespace foodfuse {

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::kPoint: return "point";
    case PromptKind::kBox: return "box";
    case PromptKind::kMask: return "mask";
    case PromptKind::kRegular: return "regular";
  }
  return "regular";
}

PromptKind parse_prompt_kind(std::string_view text) {
  if (text == "point") return PromptKind::kPoint;
  if (text == "box") return PromptKind::kBox;
  if (text == "mask") return PromptKind::kMask;
  if (text == "regular") return PromptKind::kRegular;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown prompt kind '{}'", text));
}

double normalized_center_distance(Point p, const Box& box) {
  const Point c = box.center();
  const double diag = std::hypot(box.width(), box.height());
  return diag > 0 ? std::hypot(p.x - c.x, p.y - c.y) / diag : 0.0;
}

std::optional<std::size_t> select_by_point(Point p, const DetectionSet& boxes) {
  std::optional<std::size_t> best;
  std::tuple<double, double, std::size_t> best_key;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i].xyxy;
    if (!b.contains(p)) continue;
    const auto key = std::make_tuple(normalized_center_distance(p, b), b.area(), i);
    if (!best || key < best_key) {
      best = i;
      best_key = key;
    }
  }
  return best;
}

std::optional<std::size_t> select_by_box(const Box& query, const DetectionSet& boxes) {
  std::optional<std::size_t> best;
  double best_iou = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double iou = box_iou(query, boxes[i].xyxy);
    if (iou > best_iou) {
      best_iou = iou;
      best = i;
    }
  }
  return best;
}

std::vector<Point> stratified_samples(const BinaryMask& mask, int n_samples, std::uint32_t seed) {
  std::vector<std::size_t> fg;
  const auto data = mask.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i]) fg.push_back(i);
  }
  if (fg.empty()) throw Error(ErrorCode::kEmptyMask, "mask prompt has no foreground pixel");
  if (n_samples <= 0) throw Error(ErrorCode::kInvalidArgument, "sample count must be positive");
  const std::size_t n = std::min<std::size_t>(n_samples, fg.size());
  std::mt19937 rng(seed);
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t lo = j * fg.size() / n;
    const std::size_t hi = (j + 1) * fg.size() / n;
    const std::size_t pick = lo + static_cast<std::size_t>(rng()) % (hi - lo);
    const auto idx = fg[pick];
    out.push_back({static_cast<double>(idx % mask.width()) + 0.5, static_cast<double>(idx / mask.width()) + 0.5});
  }
  return out;
}

std::optional<std::size_t> select_by_mask(const BinaryMask& mask, const DetectionSet& boxes, int n_samples,
                                          std::uint32_t seed) {
  std::map<std::size_t, int> votes;
  for (const Point& p : stratified_samples(mask, n_samples, seed)) {
    if (auto b = select_by_point(p, boxes)) ++votes[*b];
  }
  std::optional<std::size_t> best;
  int best_votes = 0;
  for (const auto& [index, count] : votes) {
    if (count > best_votes) {
      best_votes = count;
      best = index;
    }
  }
  return best;
}

std::vector<std::size_t> select_regular(const DetectionSet& boxes) {
  std::vector<std::size_t> out(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) out[i] = i;
  return out;
}

namespace {

SelectedSegment make_selected(const PanopticMap& panoptic, const Segment& s, std::int64_t overlap) {
  return {s.segment_id, s.category_id, s.is_food, s.area, overlap, panoptic.segment_mask(s.segment_id)};
}

// Segments overlapping `inside`, ranked by overlap then id.
template <class Inside>
std::vector<SelectedSegment> overlapping_segments(const PanopticMap& panoptic, Inside inside) {
  std::map<int, std::int64_t> overlap;
  const auto& grid = panoptic.id_grid;
  for (int y = 0; y < grid.height(); ++y) {
    const auto row = grid.row(y);
    for (int x = 0; x < grid.width(); ++x) {
      if (row[x] && inside(x, y)) ++overlap[row[x]];
    }
  }
  std::vector<std::pair<int, std::int64_t>> ranked(overlap.begin(), overlap.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<SelectedSegment> out;
  for (const auto& [id, count] : ranked) {
    if (const auto* s = panoptic.find(id)) out.push_back(make_selected(panoptic, *s, count));
  }
  return out;
}

}  // namespace

PromptResult promptable_segment(const SceneBundle& scene, const LabelMap& enhanced, const PanopticMap& panoptic,
                                const Prompt& prompt, int n_samples, std::uint32_t seed) {
  const Dims dims = panoptic.id_grid.dims();
  if (enhanced.dims() != dims || scene.dims() != dims) {
    throw Error(ErrorCode::kDimMismatch, "scene, enhanced and panoptic maps differ in size");
  }
  static const DetectionSet kNoBoxes;
  const DetectionSet& boxes = scene.detections ? *scene.detections : kNoBoxes;

  PromptResult result;
  result.kind = prompt.kind;
  switch (prompt.kind) {
    case PromptKind::kPoint: {
      const Point p = prompt.point;
      if (!(p.x >= 0 && p.y >= 0 && p.x < dims.width && p.y < dims.height)) {
        throw Error(ErrorCode::kOutOfBounds, fmt::format("point ({}, {}) outside {}x{}", p.x, p.y, dims.width,
                                                         dims.height));
      }
      const int px = static_cast<int>(p.x), py = static_cast<int>(p.y);
      result.semantic_category = enhanced(px, py);
      const int id = panoptic.id_grid(px, py);
      const Segment* hit = id ? panoptic.find(id) : nullptr;
      if (hit) result.segments.push_back(make_selected(panoptic, *hit, 1));
      if (!hit || !hit->is_food) {
        if (auto b = select_by_point(p, boxes)) result.selected_boxes.push_back(*b);
      }
      break;
    }
    case PromptKind::kBox: {
      const Box& q = prompt.box;
      if (!(q.x0 >= 0 && q.y0 >= 0 && q.x1 <= dims.width && q.y1 <= dims.height && q.x1 > q.x0 && q.y1 > q.y0)) {
        throw Error(ErrorCode::kOutOfBounds,
                    fmt::format("box ({}, {}, {}, {}) invalid for {}x{}", q.x0, q.y0, q.x1, q.y1, dims.width,
                                dims.height));
      }
      result.segments = overlapping_segments(panoptic, [&](int x, int y) { return q.covers_pixel(x, y); });
      if (auto b = select_by_box(q, boxes)) result.selected_boxes.push_back(*b);
      break;
    }
    case PromptKind::kMask: {
      const auto& m = prompt.mask;
      if (m.dims() != dims) {
        throw Error(ErrorCode::kOutOfBounds,
                    fmt::format("mask prompt is {}x{}, image is {}x{}", m.width(), m.height(), dims.width, dims.height));
      }
      const auto area = count_foreground(m);
      if (area == 0) throw Error(ErrorCode::kEmptyMask, "mask prompt has no foreground pixel");
      if (static_cast<std::size_t>(area) == dims.pixels()) {
        return promptable_segment(scene, enhanced, panoptic, Prompt::regular(), n_samples, seed);
      }
      result.segments = overlapping_segments(panoptic, [&](int x, int y) { return m(x, y) != 0; });
      if (auto b = select_by_mask(m, boxes, n_samples, seed)) result.selected_boxes.push_back(*b);
      break;
    }
    case PromptKind::kRegular: {
      for (const auto& s : panoptic.segments) result.segments.push_back(make_selected(panoptic, s, s.area));
      result.selected_boxes = select_regular(boxes);
      break;
    }
  }
  return result;
}

Json prompt_result_to_json(const PromptResult& result, const SceneBundle& scene) {
  Json segments = Json::array();
  for (const auto& s : result.segments) {
    const auto color = segment_color(s.segment_id);
    segments.push_back({{"segment_id", s.segment_id},
                        {"category_id", s.category_id},
                        {"category_name", scene.categories.name(s.category_id)},
                        {"source", s.is_food ? "food" : "nonfood"},
                        {"area", s.area},
                        {"overlap", s.overlap},
                        {"color", {color[0], color[1], color[2]}},
                        {"rle", rle_to_json(s.mask)}});
  }
  Json boxes = Json::array();
  for (std::size_t i : result.selected_boxes) {
    const auto& b = scene.detections->at(i);
    boxes.push_back({{"index", i},
                     {"category_id", b.category_id},
                     {"category_name", scene.categories.name(b.category_id)},
                     {"label", b.label},
                     {"score", b.score},
                     {"xyxy", {b.xyxy.x0, b.xyxy.y0, b.xyxy.x1, b.xyxy.y1}}});
  }
  Json out = {{"kind", std::string(to_string(result.kind))}, {"segments", segments}, {"boxes", boxes}};
  if (result.semantic_category) {
    out["semantic_category"] = {{"category_id", *result.semantic_category},
                                {"category_name", scene.categories.name(*result.semantic_category)}};
  }
  return out;
}

}  // namespace foodfuse
