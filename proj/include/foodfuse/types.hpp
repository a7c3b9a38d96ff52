#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "foodfuse/error.hpp"

namespace foodfuse {

using CategoryId = int;

struct Dims {
  int width = 0;
  int height = 0;

  std::size_t pixels() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  bool operator==(const Dims&) const = default;
};

// Row-major 2-D grid. x = column, y = row, origin top-left. The tag keeps
// label maps, binary masks and segment-id grids from mixing.
template <class T, class Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Dims dims, T fill = T{})
      : dims_(dims), data_(dims.pixels(), fill) {
    check_dims(dims);
  }
  Grid(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    check_dims(dims);
    if (data_.size() != dims.pixels()) {
      throw Error(ErrorCode::kDimMismatch,
                  "grid data length " + std::to_string(data_.size()) +
                      " != " + std::to_string(dims.width) + "x" +
                      std::to_string(dims.height));
    }
  }

  Dims dims() const { return dims_; }
  int width() const { return dims_.width; }
  int height() const { return dims_.height; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator()(int x, int y) { return data_[index(x, y)]; }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  std::span<const T> row(int y) const {
    return std::span<const T>(data_).subspan(
        static_cast<std::size_t>(y) * dims_.width, dims_.width);
  }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * dims_.width + x;
  }
  static void check_dims(Dims dims) {
    if (dims.width < 0 || dims.height < 0) {
      throw Error(ErrorCode::kInvalidArgument, "negative grid dimensions");
    }
  }

  Dims dims_;
  std::vector<T> data_;
};

struct LabelTag {};
struct MaskTag {};
struct SegmentTag {};

/// Per-pixel category ids (coarse prediction, ground truth or enhanced map).
using LabelMap = Grid<std::uint8_t, LabelTag>;
/// Binary mask, 1 = foreground.
using BinaryMask = Grid<std::uint8_t, MaskTag>;
/// Segment ids, 0 = no segment.
using IdGrid = Grid<std::uint16_t, SegmentTag>;

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Pixel rectangle (x0, y0, w, h), the layout used by mask metadata.
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
  bool operator==(const PixelRect&) const = default;
};

/// Corner box (x0, y0, x1, y1) in continuous pixel coordinates.
struct Box {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  static Box from_rect(const PixelRect& r) {
    return {static_cast<double>(r.x0), static_cast<double>(r.y0),
            static_cast<double>(r.x0 + r.w), static_cast<double>(r.y0 + r.h)};
  }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const {
    return width() > 0 && height() > 0 ? width() * height() : 0.0;
  }
  Point center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
  // Half-open: [x0, x1) x [y0, y1).
  bool contains(Point p) const {
    return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1;
  }
  // Pixel (x, y) belongs to the box when its center lies inside.
  bool covers_pixel(int x, int y) const { return contains({x + 0.5, y + 0.5}); }
  bool operator==(const Box&) const = default;
};

/// Minimal rectangle covering every foreground pixel. Throws kEmptyMask.
PixelRect tight_bbox(const BinaryMask& pixels);
std::int64_t count_foreground(const BinaryMask& pixels);

class CategoryTable {
 public:
  struct Entry {
    CategoryId id = 0;
    std::string name;
  };

  CategoryTable() = default;
  /// Every id except the background defaults to food unless listed in
  /// `nonfood_ids`.
  CategoryTable(std::vector<Entry> entries, CategoryId background_id = 0,
                std::set<CategoryId> nonfood_ids = {});

  /// Tab-separated "id<TAB>name[<TAB>food|nonfood|background]" lines.
  /// Blank lines and lines starting with '#' are skipped.
  static CategoryTable parse(std::istream& in);
  static CategoryTable load(const std::string& path);

  const std::vector<Entry>& entries() const { return entries_; }
  CategoryId background_id() const { return background_id_; }
  const std::set<CategoryId>& food_ids() const { return food_ids_; }
  const std::set<CategoryId>& nonfood_ids() const { return nonfood_ids_; }

  bool contains(CategoryId id) const { return index_.count(id) != 0; }
  bool is_food(CategoryId id) const { return food_ids_.count(id) != 0; }
  bool is_nonfood(CategoryId id) const { return nonfood_ids_.count(id) != 0; }
  std::string name(CategoryId id) const;
  /// One past the largest id; the class-axis length for confusion matrices.
  int class_count() const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
  std::map<CategoryId, std::size_t> index_;
  CategoryId background_id_ = 0;
  std::set<CategoryId> food_ids_;
  std::set<CategoryId> nonfood_ids_;
};

struct MaskRecord {
  int mask_id = 0;
  BinaryMask pixels;
  std::int64_t area = 0;
  PixelRect bbox;
  double predicted_iou = 1.0;
  double stability_score = 1.0;
  Point point_input;
  PixelRect crop_box;

  /// Builds a record whose area and bbox are derived from `pixels`. When no
  /// point is given, the first foreground pixel (row-major) is used.
  static MaskRecord from_pixels(int mask_id, BinaryMask pixels,
                                std::optional<Point> point_input = {},
                                double predicted_iou = 1.0,
                                double stability_score = 1.0);
};

struct MaskSet {
  Dims dims;
  std::vector<MaskRecord> records;

  std::size_t size() const { return records.size(); }
  const MaskRecord* find(int mask_id) const;
  /// Checks shared dims, unique ids and the area/bbox invariants.
  void validate() const;
};

struct DetectionBox {
  Box xyxy;
  double score = 0.0;
  CategoryId category_id = 0;
  std::string label;
};

using DetectionSet = std::vector<DetectionBox>;

struct VoteOutcome {
  int mask_id = 0;
  std::map<CategoryId, std::int64_t> histogram;
  CategoryId winner = 0;
  double confused_degree = 0.0;
  std::int64_t footprint_size = 0;

  bool operator==(const VoteOutcome&) const = default;
};

struct Segment {
  int segment_id = 0;
  CategoryId category_id = 0;
  std::int64_t area = 0;
  PixelRect bbox;
  bool is_food = true;

  bool operator==(const Segment&) const = default;
};

/// Instance or panoptic output: an id grid plus its segment table.
struct SegmentMap {
  IdGrid id_grid;
  std::vector<Segment> segments;

  const Segment* find(int segment_id) const;
  BinaryMask segment_mask(int segment_id) const;
  /// Throws kSchemaError when the table disagrees with the grid.
  void validate() const;

  bool operator==(const SegmentMap&) const = default;
};

using InstanceMap = SegmentMap;
using PanopticMap = SegmentMap;

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int n_classes)
      : n_(n_classes), counts_(static_cast<std::size_t>(n_classes) * n_classes) {}

  int n_classes() const { return n_; }
  std::int64_t at(int gt, int pred) const { return counts_[idx(gt, pred)]; }
  void add(int gt, int pred, std::int64_t count = 1) {
    counts_[idx(gt, pred)] += count;
  }
  std::span<const std::int64_t> counts() const { return counts_; }
  std::span<std::int64_t> counts() { return counts_; }

  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t tp(int c) const { return at(c, c); }
  std::int64_t fp(int c) const;  // column sum minus diagonal
  std::int64_t fn(int c) const;  // row sum minus diagonal

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t idx(int gt, int pred) const {
    return static_cast<std::size_t>(gt) * n_ + pred;
  }

  int n_ = 0;
  std::vector<std::int64_t> counts_;
};

}  // namespace foodfuse
