#pragma once

// Brute-force recounts used as ground truth by the unit and acceptance
// tests. Nothing here calls into the library's kernels; every quantity is
// rederived from the pixels with the plainest possible loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "foodfuse/types.hpp"

namespace foodfuse::oracle {

// --- random inputs ------------------------------------------------------------

inline LabelMap random_labels(std::mt19937& rng, Dims dims, const std::vector<int>& ids) {
  LabelMap m(dims);
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  for (auto& v : m.data()) v = static_cast<std::uint8_t>(ids[pick(rng)]);
  return m;
}

inline LabelMap random_labels(std::mt19937& rng, Dims dims, int n_classes) {
  std::vector<int> ids(n_classes);
  for (int i = 0; i < n_classes; ++i) ids[i] = i;
  return random_labels(rng, dims, ids);
}

// Blocky label map: a few random rectangles over a random fill, so votes
// see realistic regions rather than salt-and-pepper noise.
inline LabelMap random_blocky_labels(std::mt19937& rng, Dims dims, const std::vector<int>& ids, int n_rects) {
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  LabelMap m(dims, static_cast<std::uint8_t>(ids[pick(rng)]));
  std::uniform_int_distribution<int> xs(0, dims.width - 1), ys(0, dims.height - 1);
  for (int r = 0; r < n_rects; ++r) {
    int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    const auto v = static_cast<std::uint8_t>(ids[pick(rng)]);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) m(x, y) = v;
  }
  return m;
}

// Non-empty random mask: a filled rectangle, optionally speckled.
inline BinaryMask random_mask(std::mt19937& rng, Dims dims, double keep = 1.0) {
  std::uniform_int_distribution<int> xs(0, dims.width - 1), ys(0, dims.height - 1);
  std::bernoulli_distribution on(keep);
  for (;;) {
    int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    BinaryMask m(dims);
    bool any = false;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (on(rng)) {
          m(x, y) = 1;
          any = true;
        }
      }
    }
    if (any) return m;
  }
}

inline Box random_box(std::mt19937& rng, Dims dims, bool integral) {
  std::uniform_real_distribution<double> ux(0.0, dims.width), uy(0.0, dims.height);
  for (;;) {
    double x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
    if (integral) {
      x0 = std::floor(x0), x1 = std::floor(x1), y0 = std::floor(y0), y1 = std::floor(y1);
    }
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    if (x1 > x0 && y1 > y0) return {x0, y0, x1, y1};
  }
}

// --- voting ---------------------------------------------------------------------

struct Vote {
  std::map<int, std::int64_t> histogram;
  int winner = 0;
  double d = 0.0;
  std::int64_t footprint = 0;
};

inline Vote vote(const BinaryMask& mask, const LabelMap& labels) {
  Vote v;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      if (mask(x, y) == 0) continue;
      v.histogram[labels(x, y)] += 1;
      v.footprint += 1;
    }
  }
  std::int64_t best = -1;
  for (const auto& [label, count] : v.histogram) {  // ascending ids: first max wins
    if (count > best) {
      best = count;
      v.winner = label;
    }
  }
  v.d = static_cast<double>(best) / static_cast<double>(v.footprint);
  return v;
}

// --- merge ----------------------------------------------------------------------

struct PaintItem {
  const BinaryMask* mask;
  int label;
  int mask_id;
  double key;  // smaller paints first
};

inline LabelMap paint(const LabelMap& base, std::vector<PaintItem> items) {
  // Selection sort on (key, mask_id): slow and obviously correct.
  LabelMap out = base;
  std::vector<bool> done(items.size(), false);
  for (std::size_t step = 0; step < items.size(); ++step) {
    std::size_t pick = items.size();
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (done[i]) continue;
      if (pick == items.size() || items[i].key < items[pick].key ||
          (items[i].key == items[pick].key && items[i].mask_id < items[pick].mask_id)) {
        pick = i;
      }
    }
    done[pick] = true;
    const auto& it = items[pick];
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x)
        if ((*it.mask)(x, y)) out(x, y) = static_cast<std::uint8_t>(it.label);
  }
  return out;
}

// --- metrics --------------------------------------------------------------------

struct Metrics {
  double miou = 0.0;
  double macc = 0.0;
  double aacc = 0.0;
};

inline Metrics metrics(const std::vector<const LabelMap*>& preds, const std::vector<const LabelMap*>& gts,
                       int n_classes, const std::set<int>& ignore = {}, bool strict_n = false) {
  Metrics m;
  double iou_sum = 0.0, acc_sum = 0.0;
  int iou_n = 0, acc_n = 0;
  std::int64_t correct = 0, valid = 0;
  for (int c = 0; c < n_classes; ++c) {
    std::int64_t both = 0, in_gt = 0, in_pred = 0;
    for (std::size_t k = 0; k < gts.size(); ++k) {
      const auto& g = *gts[k];
      const auto& p = *preds[k];
      for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
          if (ignore.count(g(x, y))) continue;
          const bool is_g = g(x, y) == c, is_p = p(x, y) == c;
          both += is_g && is_p;
          in_gt += is_g;
          in_pred += is_p;
        }
      }
    }
    const std::int64_t uni = in_gt + in_pred - both;
    if (uni > 0) {
      iou_sum += static_cast<double>(both) / static_cast<double>(uni);
      ++iou_n;
    }
    if (in_gt > 0) {
      acc_sum += static_cast<double>(both) / static_cast<double>(in_gt);
      ++acc_n;
    }
  }
  for (std::size_t k = 0; k < gts.size(); ++k) {
    const auto& g = *gts[k];
    const auto& p = *preds[k];
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        if (ignore.count(g(x, y))) continue;
        ++valid;
        correct += g(x, y) == p(x, y);
      }
    }
  }
  m.miou = iou_sum / (strict_n ? n_classes : iou_n);
  m.macc = acc_sum / (strict_n ? n_classes : acc_n);
  m.aacc = static_cast<double>(correct) / static_cast<double>(valid);
  return m;
}

inline Metrics metrics(const LabelMap& pred, const LabelMap& gt, int n_classes, const std::set<int>& ignore = {},
                       bool strict_n = false) {
  return metrics({&pred}, {&gt}, n_classes, ignore, strict_n);
}

// --- geometry -------------------------------------------------------------------

inline double box_iou(const Box& a, const Box& b) {
  const double left = a.x0 > b.x0 ? a.x0 : b.x0;
  const double right = a.x1 < b.x1 ? a.x1 : b.x1;
  const double top = a.y0 > b.y0 ? a.y0 : b.y0;
  const double bottom = a.y1 < b.y1 ? a.y1 : b.y1;
  if (right <= left || bottom <= top) return 0.0;
  const double inter = (right - left) * (bottom - top);
  return inter / ((a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter);
}

inline bool inside(Point p, const Box& b) { return b.x0 <= p.x && p.x < b.x1 && b.y0 <= p.y && p.y < b.y1; }

inline Box mask_extent(const BinaryMask& m) {
  int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) {
        x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
      }
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1), static_cast<double>(y1 + 1)};
}

inline double pixel_iou(const BinaryMask& m, const Box& b) {
  std::int64_t inter = 0, uni = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const bool in_m = m(x, y) != 0, in_b = inside({x + 0.5, y + 0.5}, b);
      inter += in_m && in_b;
      uni += in_m || in_b;
    }
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

struct Match {
  std::optional<std::size_t> box;
  int category = 0;
};

// Exhaustive: score every box, keep the containing ones, take the maximum,
// then the first index reaching it.
inline Match match(const BinaryMask& m, Point prompt, const DetectionSet& boxes, double thresh, bool use_pixels,
                   int background) {
  std::vector<double> score(boxes.size(), -1.0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!inside(prompt, boxes[i].xyxy)) continue;
    score[i] = use_pixels ? pixel_iou(m, boxes[i].xyxy) : box_iou(mask_extent(m), boxes[i].xyxy);
  }
  Match out{std::nullopt, background};
  double best = -1.0;
  for (double s : score) best = std::max(best, s);
  if (best < 0.0 || !(best > thresh)) return out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (score[i] == best) {
      out.box = i;
      out.category = boxes[i].category_id;
      break;
    }
  }
  return out;
}

// --- prompt selection -------------------------------------------------------------

inline std::optional<std::size_t> select_point(Point p, const DetectionSet& boxes) {
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    if (inside(p, boxes[i].xyxy)) cand.push_back(i);
  if (cand.empty()) return std::nullopt;
  auto dist = [&](std::size_t i) {
    const auto& b = boxes[i].xyxy;
    const double cx = (b.x0 + b.x1) / 2, cy = (b.y0 + b.y1) / 2;
    return std::hypot(p.x - cx, p.y - cy) / std::hypot(b.x1 - b.x0, b.y1 - b.y0);
  };
  auto area = [&](std::size_t i) {
    const auto& b = boxes[i].xyxy;
    return (b.x1 - b.x0) * (b.y1 - b.y0);
  };
  double best_d = dist(cand[0]);
  for (auto i : cand) best_d = std::min(best_d, dist(i));
  std::vector<std::size_t> closest;
  for (auto i : cand)
    if (dist(i) == best_d) closest.push_back(i);
  double best_a = area(closest[0]);
  for (auto i : closest) best_a = std::min(best_a, area(i));
  for (auto i : closest)
    if (area(i) == best_a) return i;  // ascending index order
  return std::nullopt;
}

inline std::optional<std::size_t> select_box(const Box& q, const DetectionSet& boxes) {
  double best = 0.0;
  for (const auto& b : boxes) best = std::max(best, box_iou(q, b.xyxy));
  if (best == 0.0) return std::nullopt;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    if (box_iou(q, boxes[i].xyxy) == best) return i;
  return std::nullopt;
}

inline std::vector<Point> samples(const BinaryMask& m, int n, std::uint32_t seed) {
  std::vector<Point> fg;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) fg.push_back({x + 0.5, y + 0.5});
  const std::size_t count = std::min<std::size_t>(n, fg.size());
  std::mt19937 rng(seed);
  std::vector<Point> out;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t lo = j * fg.size() / count, hi = (j + 1) * fg.size() / count;
    out.push_back(fg[lo + rng() % (hi - lo)]);
  }
  return out;
}

inline std::optional<std::size_t> select_mask(const BinaryMask& m, const DetectionSet& boxes, int n,
                                              std::uint32_t seed) {
  std::vector<int> votes(boxes.size(), 0);
  for (const auto& p : samples(m, n, seed))
    if (auto b = select_point(p, boxes)) ++votes[*b];
  int best = 0;
  for (int v : votes) best = std::max(best, v);
  if (best == 0) return std::nullopt;
  for (std::size_t i = 0; i < votes.size(); ++i)
    if (votes[i] == best) return i;
  return std::nullopt;
}

}  // namespace foodfuse::oracle
