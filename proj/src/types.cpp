#include "foodfuse/types.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace foodfuse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kMissingMaskFile: return "MissingMaskFile";
    case ErrorCode::kCsvSchemaError: return "CsvSchemaError";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kMissingPair: return "MissingPair";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
  }
  return "Unknown";
}

PixelRect tight_bbox(const BinaryMask& pixels) {
  int x_min = pixels.width(), y_min = pixels.height(), x_max = -1, y_max = -1;
  for (int y = 0; y < pixels.height(); ++y) {
    const auto row = pixels.row(y);
    for (int x = 0; x < pixels.width(); ++x) {
      if (!row[x]) continue;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = y;
    }
  }
  if (x_max < 0) throw Error(ErrorCode::kEmptyMask, "mask has no foreground pixel");
  return {x_min, y_min, x_max - x_min + 1, y_max - y_min + 1};
}

std::int64_t count_foreground(const BinaryMask& pixels) {
  const auto data = pixels.data();
  return std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; });
}

// ---------------------------------------------------------------------------
// CategoryTable

CategoryTable::CategoryTable(std::vector<Entry> entries, CategoryId background_id,
                             std::set<CategoryId> nonfood_ids)
    : entries_(std::move(entries)), background_id_(background_id) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.id < 0) {
      throw Error(ErrorCode::kSchemaError, "negative category id " + std::to_string(e.id));
    }
    if (!index_.emplace(e.id, i).second) {
      throw Error(ErrorCode::kSchemaError, "duplicate category id " + std::to_string(e.id));
    }
  }
  if (!contains(background_id_)) {
    throw Error(ErrorCode::kSchemaError,
                "background id " + std::to_string(background_id_) + " missing from table");
  }
  for (CategoryId id : nonfood_ids) {
    if (!contains(id)) {
      throw Error(ErrorCode::kSchemaError, "unknown non-food id " + std::to_string(id));
    }
    if (id == background_id_) {
      throw Error(ErrorCode::kSchemaError, "background id cannot be non-food");
    }
  }
  nonfood_ids_ = std::move(nonfood_ids);
  for (const auto& e : entries_) {
    if (e.id != background_id_ && !nonfood_ids_.count(e.id)) food_ids_.insert(e.id);
  }
}

CategoryTable CategoryTable::parse(std::istream& in) {
  std::vector<Entry> entries;
  std::set<CategoryId> nonfood;
  std::optional<CategoryId> background;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 2 || cols.size() > 3) {
      throw Error(ErrorCode::kSchemaError,
                  "category line " + std::to_string(line_no) + ": expected 2 or 3 tab-separated columns");
    }
    CategoryId id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(cols[0], &used);
      if (used != cols[0].size()) throw std::invalid_argument(cols[0]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchemaError,
                  "category line " + std::to_string(line_no) + ": bad id '" + cols[0] + "'");
    }
    entries.push_back({id, cols[1]});
    if (cols.size() == 3) {
      if (cols[2] == "nonfood") {
        nonfood.insert(id);
      } else if (cols[2] == "background") {
        if (background && *background != id) {
          throw Error(ErrorCode::kSchemaError, "more than one background entry");
        }
        background = id;
      } else if (cols[2] != "food") {
        throw Error(ErrorCode::kSchemaError,
                    "category line " + std::to_string(line_no) + ": unknown kind '" + cols[2] + "'");
      }
    }
  }
  return CategoryTable(std::move(entries), background.value_or(0), std::move(nonfood));
}

CategoryTable CategoryTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open category table " + path);
  return parse(in);
}

std::string CategoryTable::name(CategoryId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? std::to_string(id) : entries_[it->second].name;
}

int CategoryTable::class_count() const {
  return index_.empty() ? 0 : index_.rbegin()->first + 1;
}

// ---------------------------------------------------------------------------
// Masks

MaskRecord MaskRecord::from_pixels(int mask_id, BinaryMask pixels,
                                   std::optional<Point> point_input,
                                   double predicted_iou, double stability_score) {
  MaskRecord r;
  r.mask_id = mask_id;
  r.bbox = tight_bbox(pixels);
  r.area = count_foreground(pixels);
  r.predicted_iou = predicted_iou;
  r.stability_score = stability_score;
  r.crop_box = {0, 0, pixels.width(), pixels.height()};
  if (point_input) {
    r.point_input = *point_input;
  } else {
    for (int y = r.bbox.y0; y < r.bbox.y0 + r.bbox.h && !point_input; ++y) {
      for (int x = r.bbox.x0; x < r.bbox.x0 + r.bbox.w; ++x) {
        if (pixels(x, y)) {
          point_input = Point{x + 0.5, y + 0.5};
          break;
        }
      }
    }
    r.point_input = *point_input;
  }
  r.pixels = std::move(pixels);
  return r;
}

const MaskRecord* MaskSet::find(int mask_id) const {
  for (const auto& r : records) {
    if (r.mask_id == mask_id) return &r;
  }
  return nullptr;
}

void MaskSet::validate() const {
  std::set<int> ids;
  for (const auto& r : records) {
    if (r.pixels.dims() != dims) {
      throw Error(ErrorCode::kDimMismatch, "mask " + std::to_string(r.mask_id) + " dims differ from set");
    }
    if (!ids.insert(r.mask_id).second) {
      throw Error(ErrorCode::kSchemaError, "duplicate mask id " + std::to_string(r.mask_id));
    }
    if (r.area != count_foreground(r.pixels) || r.bbox != tight_bbox(r.pixels)) {
      throw Error(ErrorCode::kSchemaError,
                  "mask " + std::to_string(r.mask_id) + " area/bbox disagree with pixels");
    }
    if (r.point_input.x < 0 || r.point_input.y < 0 || r.point_input.x > dims.width ||
        r.point_input.y > dims.height) {
      throw Error(ErrorCode::kOutOfBounds, "mask " + std::to_string(r.mask_id) + " point outside image");
    }
  }
}

// ---------------------------------------------------------------------------
// Segment maps

const Segment* SegmentMap::find(int segment_id) const {
  for (const auto& s : segments) {
    if (s.segment_id == segment_id) return &s;
  }
  return nullptr;
}

BinaryMask SegmentMap::segment_mask(int segment_id) const {
  BinaryMask out(id_grid.dims());
  const auto src = id_grid.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == segment_id ? 1 : 0;
  return out;
}

void SegmentMap::validate() const {
  std::map<int, std::int64_t> counts;
  for (auto v : id_grid.data()) {
    if (v != 0) ++counts[v];
  }
  std::set<int> seen;
  for (const auto& s : segments) {
    if (s.segment_id < 1 || !seen.insert(s.segment_id).second) {
      throw Error(ErrorCode::kSchemaError, "bad or duplicate segment id " + std::to_string(s.segment_id));
    }
    auto it = counts.find(s.segment_id);
    if (it == counts.end() || it->second != s.area) {
      throw Error(ErrorCode::kSchemaError, "segment " + std::to_string(s.segment_id) + " area mismatch");
    }
    if (tight_bbox(segment_mask(s.segment_id)) != s.bbox) {
      throw Error(ErrorCode::kSchemaError, "segment " + std::to_string(s.segment_id) + " bbox not tight");
    }
  }
  if (seen.size() != counts.size()) {
    throw Error(ErrorCode::kSchemaError, "id grid holds ids missing from the segment table");
  }
}

// ---------------------------------------------------------------------------
// ConfusionMatrix

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int c = 0; c < n_; ++c) t += at(c, c);
  return t;
}

std::int64_t ConfusionMatrix::fp(int c) const {
  std::int64_t s = 0;
  for (int g = 0; g < n_; ++g) s += at(g, c);
  return s - at(c, c);
}

std::int64_t ConfusionMatrix::fn(int c) const {
  std::int64_t s = 0;
  for (int p = 0; p < n_; ++p) s += at(c, p);
  return s - at(c, c);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_) {
    throw Error(ErrorCode::kDimMismatch, "confusion matrices of different class counts");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

}  // namespace foodfuse
