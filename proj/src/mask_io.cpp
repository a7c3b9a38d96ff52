#include "foodfuse/mask_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "foodfuse/log.hpp"
#include "foodfuse/png.hpp"

namespace fs = std::filesystem;

namespace foodfuse {
namespace {

void warn(std::vector<std::string>* sink, const std::string& message) {
  logger()->warn("{}", message);
  if (sink) sink->push_back(message);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& text, int line_no, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kCsvSchemaError,
                fmt::format("metadata.csv line {}: field {} is not a number ('{}')", line_no, field, text));
  }
}

int parse_int(const std::string& text, int line_no, const char* field) {
  const double v = parse_number(text, line_no, field);
  if (v != std::floor(v)) {
    throw Error(ErrorCode::kCsvSchemaError,
                fmt::format("metadata.csv line {}: field {} is not an integer ('{}')", line_no, field, text));
  }
  return static_cast<int>(v);
}

BinaryMask decode_binary_mask(std::span<const std::uint8_t> bytes, const std::string& what) {
  const auto img = png::decode(bytes);
  if (img.channels() != 1 || img.bit_depth != 8) {
    throw Error(ErrorCode::kFormatError, what + ": mask must be a single-channel PNG of at most 8 bits");
  }
  std::vector<std::uint8_t> data(img.samples.size());
  std::transform(img.samples.begin(), img.samples.end(), data.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v != 0 ? 1 : 0; });
  return BinaryMask({img.width, img.height}, std::move(data));
}

Json rect_json(const PixelRect& r) { return Json::array({r.x0, r.y0, r.w, r.h}); }

}  // namespace

// ---------------------------------------------------------------------------
// Label maps and binary masks

LabelMap decode_label_map(std::span<const std::uint8_t> png_bytes) {
  auto img = png::decode(png_bytes);
  if (img.channels() != 1) {
    throw Error(ErrorCode::kFormatError, "label map must be single-channel");
  }
  if (img.bit_depth != 8) {
    throw Error(ErrorCode::kFormatError, "label map must be 8-bit");
  }
  return LabelMap({img.width, img.height}, std::move(img.samples));
}

LabelMap load_label_map(const std::string& path) {
  try {
    return decode_label_map(png::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormatError) throw Error(e.code(), path + ": " + e.what());
    throw;
  }
}

std::vector<std::uint8_t> encode_label_map(const LabelMap& map) {
  return png::encode_gray8(map.width(), map.height(), map.data());
}

void save_label_map(const LabelMap& map, const std::string& path) {
  png::write_file(path, encode_label_map(map));
}

BinaryMask load_binary_mask(const std::string& path) {
  return decode_binary_mask(png::read_file(path), path);
}

void save_binary_mask(const BinaryMask& mask, const std::string& path) {
  std::vector<std::uint8_t> bytes(mask.size());
  std::transform(mask.data().begin(), mask.data().end(), bytes.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  png::write_file(path, png::encode_gray8(mask.width(), mask.height(), bytes));
}

// ---------------------------------------------------------------------------
// Mask sets

MaskSet load_mask_set(const std::string& dir, const MaskLoadOptions& options,
                      std::vector<std::string>* warnings) {
  const fs::path root(dir);
  const fs::path csv_path = root / "metadata.csv";
  std::ifstream csv(csv_path);
  if (!fs::is_directory(root) || !csv) {
    throw Error(ErrorCode::kIoError, "cannot read mask directory " + dir);
  }

  std::string line;
  if (!std::getline(csv, line)) throw Error(ErrorCode::kCsvSchemaError, "metadata.csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMaskCsvHeader) {
    throw Error(ErrorCode::kCsvSchemaError, "metadata.csv header mismatch: '" + line + "'");
  }

  MaskSet set;
  std::optional<Dims> dims = options.expected_dims;
  std::set<int> ids;
  int line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 14) {
      throw Error(ErrorCode::kCsvSchemaError,
                  fmt::format("metadata.csv line {}: expected 14 columns, got {}", line_no, cols.size()));
    }
    const int id = parse_int(cols[0], line_no, "id");
    if (!ids.insert(id).second) {
      throw Error(ErrorCode::kCsvSchemaError, fmt::format("metadata.csv line {}: duplicate id {}", line_no, id));
    }
    const std::int64_t csv_area = parse_int(cols[1], line_no, "area");
    const PixelRect csv_bbox{parse_int(cols[2], line_no, "bbox_x0"), parse_int(cols[3], line_no, "bbox_y0"),
                             parse_int(cols[4], line_no, "bbox_w"), parse_int(cols[5], line_no, "bbox_h")};
    const Point point{parse_number(cols[6], line_no, "point_input_x"),
                      parse_number(cols[7], line_no, "point_input_y")};
    const double predicted_iou = parse_number(cols[8], line_no, "predicted_iou");
    const double stability = parse_number(cols[9], line_no, "stability_score");
    const PixelRect crop{parse_int(cols[10], line_no, "crop_box_x0"), parse_int(cols[11], line_no, "crop_box_y0"),
                         parse_int(cols[12], line_no, "crop_box_w"), parse_int(cols[13], line_no, "crop_box_h")};

    const fs::path mask_path = root / fmt::format("{}.png", id);
    if (!fs::exists(mask_path)) {
      throw Error(ErrorCode::kMissingMaskFile, "missing " + mask_path.string());
    }
    BinaryMask pixels = load_binary_mask(mask_path.string());
    if (!dims) dims = pixels.dims();
    if (pixels.dims() != *dims) {
      throw Error(ErrorCode::kDimMismatch,
                  fmt::format("{} is {}x{}, expected {}x{}", mask_path.string(), pixels.width(),
                              pixels.height(), dims->width, dims->height));
    }
    const std::int64_t area = count_foreground(pixels);
    if (area == 0) {
      warn(warnings, fmt::format("mask {} has no foreground pixels; skipped", id));
      continue;
    }
    const PixelRect bbox = tight_bbox(pixels);
    if (area != csv_area || bbox != csv_bbox) {
      const auto message = fmt::format(
          "mask {}: metadata area {} bbox ({},{},{},{}) disagree with pixels area {} bbox ({},{},{},{})", id,
          csv_area, csv_bbox.x0, csv_bbox.y0, csv_bbox.w, csv_bbox.h, area, bbox.x0, bbox.y0, bbox.w, bbox.h);
      if (options.trust_metadata) throw Error(ErrorCode::kCsvSchemaError, message);
      warn(warnings, message + "; using pixel values");
    }
    if (point.x < 0 || point.y < 0 || point.x > dims->width || point.y > dims->height) {
      throw Error(ErrorCode::kCsvSchemaError,
                  fmt::format("metadata.csv line {}: point_input ({}, {}) outside image", line_no, point.x, point.y));
    }

    MaskRecord r;
    r.mask_id = id;
    r.pixels = std::move(pixels);
    r.area = area;
    r.bbox = bbox;
    r.predicted_iou = predicted_iou;
    r.stability_score = stability;
    r.point_input = point;
    r.crop_box = crop;
    set.records.push_back(std::move(r));
  }
  set.dims = dims.value_or(Dims{});
  return set;
}

void save_mask_set(const MaskSet& masks, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream csv(fs::path(dir) / "metadata.csv", std::ios::trunc);
  if (!csv) throw Error(ErrorCode::kIoError, "cannot write metadata.csv in " + dir);
  csv << kMaskCsvHeader << '\n';
  for (const auto& r : masks.records) {
    csv << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.mask_id, r.area, r.bbox.x0, r.bbox.y0,
                       r.bbox.w, r.bbox.h, r.point_input.x, r.point_input.y, r.predicted_iou,
                       r.stability_score, r.crop_box.x0, r.crop_box.y0, r.crop_box.w, r.crop_box.h);
    save_binary_mask(r.pixels, (fs::path(dir) / fmt::format("{}.png", r.mask_id)).string());
  }
  if (!csv) throw Error(ErrorCode::kIoError, "short write to metadata.csv in " + dir);
}

// ---------------------------------------------------------------------------
// RLE

RleCounts rle_encode(const BinaryMask& mask) {
  RleCounts counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const std::uint8_t v = mask(x, y) ? 1 : 0;
      if (v != current) {
        counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  counts.push_back(run);
  return counts;
}

BinaryMask rle_decode(std::span<const std::uint32_t> counts, Dims dims) {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  if (sum != dims.pixels()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("RLE counts sum to {}, expected {}", sum, dims.pixels()));
  }
  BinaryMask mask(dims);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (auto c : counts) {
    for (std::uint32_t i = 0; i < c; ++i, ++pos) {
      const int x = static_cast<int>(pos / dims.height);
      const int y = static_cast<int>(pos % dims.height);
      mask(x, y) = value;
    }
    value ^= 1;
  }
  return mask;
}

Json rle_to_json(const BinaryMask& mask) {
  return {{"size", {mask.height(), mask.width()}}, {"counts", rle_encode(mask)}};
}

BinaryMask rle_from_json(const Json& j) {
  try {
    const auto& size = j.at("size");
    if (!size.is_array() || size.size() != 2) throw Error(ErrorCode::kSchemaError, "RLE size must be [h, w]");
    const Dims dims{size[1].get<int>(), size[0].get<int>()};
    if (dims.width <= 0 || dims.height <= 0) throw Error(ErrorCode::kSchemaError, "RLE size must be positive");
    const auto counts = j.at("counts").get<RleCounts>();
    return rle_decode(counts, dims);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed RLE: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Detections

DetectionSet parse_detections(const Json& doc, Dims image, const CategoryTable* categories,
                              std::vector<std::string>* warnings) {
  DetectionSet out;
  try {
    const auto& boxes = doc.at("boxes");
    if (!boxes.is_array()) throw Error(ErrorCode::kSchemaError, "'boxes' must be an array");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto& b = boxes[i];
      const auto& xyxy = b.at("xyxy");
      if (!xyxy.is_array() || xyxy.size() != 4) {
        throw Error(ErrorCode::kSchemaError, fmt::format("box {}: xyxy must have 4 numbers", i));
      }
      DetectionBox box;
      box.xyxy = {xyxy[0].get<double>(), xyxy[1].get<double>(), xyxy[2].get<double>(), xyxy[3].get<double>()};
      box.score = b.at("score").get<double>();
      box.category_id = b.at("category_id").get<int>();
      box.label = b.value("label", std::string{});
      if (categories) {
        if (!categories->contains(box.category_id)) {
          throw Error(ErrorCode::kSchemaError,
                      fmt::format("box {}: category {} not in the category table", i, box.category_id));
        }
        if (!categories->is_nonfood(box.category_id)) {
          throw Error(ErrorCode::kSchemaError,
                      fmt::format("box {}: category {} is not a non-food id", i, box.category_id));
        }
        if (box.label.empty()) box.label = categories->name(box.category_id);
      }
      box.xyxy.x0 = std::clamp(box.xyxy.x0, 0.0, static_cast<double>(image.width));
      box.xyxy.x1 = std::clamp(box.xyxy.x1, 0.0, static_cast<double>(image.width));
      box.xyxy.y0 = std::clamp(box.xyxy.y0, 0.0, static_cast<double>(image.height));
      box.xyxy.y1 = std::clamp(box.xyxy.y1, 0.0, static_cast<double>(image.height));
      if (!(box.xyxy.x1 > box.xyxy.x0 && box.xyxy.y1 > box.xyxy.y0)) {
        warn(warnings, fmt::format("detection {} ('{}') is empty after clamping; dropped", i, box.label));
        continue;
      }
      out.push_back(std::move(box));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed detections: ") + e.what());
  }
  return out;
}

DetectionSet load_detections(const std::string& path, Dims image, const CategoryTable* categories,
                             std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open detections " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaError, path + ": " + e.what());
  }
  return parse_detections(doc, image, categories, warnings);
}

Json detections_to_json(const DetectionSet& boxes) {
  Json arr = Json::array();
  for (const auto& b : boxes) {
    arr.push_back({{"xyxy", {b.xyxy.x0, b.xyxy.y0, b.xyxy.x1, b.xyxy.y1}},
                   {"score", b.score},
                   {"category_id", b.category_id},
                   {"label", b.label}});
  }
  return {{"boxes", arr}};
}

// ---------------------------------------------------------------------------
// Segment maps

Rgb segment_color(int segment_id) {
  if (segment_id <= 0) return {0, 0, 0};
  constexpr double kGoldenRatioConjugate = 0.618033988749894848;
  const double hue = std::fmod(segment_id * kGoldenRatioConjugate, 1.0) * 6.0;
  constexpr double s = 0.65, v = 0.95;
  const int sector = static_cast<int>(hue) % 6;
  const double f = hue - std::floor(hue);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = v, g = t, b = p;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  auto to_byte = [](double c) { return static_cast<std::uint8_t>(std::lround(c * 255.0)); };
  return {to_byte(r), to_byte(g), to_byte(b)};
}

RgbImage load_rgb_image(const std::string& path) {
  auto img = png::decode_rgb8(png::read_file(path));
  return {{img.width, img.height}, std::move(img.samples)};
}

std::vector<std::uint8_t> encode_id_grid(const IdGrid& grid) {
  return png::encode_gray16(grid.width(), grid.height(), grid.data());
}

IdGrid decode_id_grid(std::span<const std::uint8_t> png_bytes) {
  const auto img = png::decode(png_bytes);
  if (img.channels() != 1) throw Error(ErrorCode::kFormatError, "id grid must be single-channel");
  std::vector<std::uint16_t> ids(static_cast<std::size_t>(img.width) * img.height);
  if (img.bit_depth == 16) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ids[i] = static_cast<std::uint16_t>((img.samples[2 * i] << 8) | img.samples[2 * i + 1]);
    }
  } else {
    std::copy(img.samples.begin(), img.samples.end(), ids.begin());
  }
  return IdGrid({img.width, img.height}, std::move(ids));
}

std::vector<std::uint8_t> encode_segment_colors(const SegmentMap& map, const RgbImage* backdrop) {
  const auto dims = map.id_grid.dims();
  if (backdrop && backdrop->dims != dims) {
    throw Error(ErrorCode::kDimMismatch, "visualization backdrop dims differ from the segment map");
  }
  std::vector<std::uint8_t> rgb(dims.pixels() * 3);
  const auto ids = map.id_grid.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Rgb c = segment_color(ids[i]);
    for (int k = 0; k < 3; ++k) {
      if (backdrop) {
        const int base = backdrop->rgb[3 * i + k];
        rgb[3 * i + k] = ids[i] ? static_cast<std::uint8_t>((base + c[k] + 1) / 2) : static_cast<std::uint8_t>(base);
      } else {
        rgb[3 * i + k] = c[k];
      }
    }
  }
  return png::encode_rgb8(dims.width, dims.height, rgb);
}

Json segments_to_json(const SegmentMap& map, const CategoryTable& categories) {
  Json arr = Json::array();
  for (const auto& s : map.segments) {
    arr.push_back({{"segment_id", s.segment_id},
                   {"category_id", s.category_id},
                   {"category_name", categories.name(s.category_id)},
                   {"area", s.area},
                   {"bbox", rect_json(s.bbox)},
                   {"is_food", s.is_food}});
  }
  return {{"width", map.id_grid.width()}, {"height", map.id_grid.height()}, {"segments", arr}};
}

void save_segment_map(const SegmentMap& map, const CategoryTable& categories, const std::string& dir,
                      const std::string& stem, const RgbImage* backdrop) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir + ": " + ec.message());
  const fs::path root(dir);
  png::write_file((root / (stem + ".png")).string(), encode_id_grid(map.id_grid));
  png::write_file((root / (stem + "_color.png")).string(), encode_segment_colors(map, backdrop));
  std::ofstream js(root / (stem + ".json"), std::ios::trunc);
  if (!js) throw Error(ErrorCode::kIoError, "cannot write " + (root / (stem + ".json")).string());
  js << segments_to_json(map, categories).dump(2) << '\n';
}

SegmentMap load_segment_map(const std::string& dir, const std::string& stem) {
  const fs::path root(dir);
  SegmentMap map;
  map.id_grid = decode_id_grid(png::read_file((root / (stem + ".png")).string()));
  std::ifstream js(root / (stem + ".json"));
  if (!js) throw Error(ErrorCode::kIoError, "cannot open " + (root / (stem + ".json")).string());
  try {
    Json doc;
    js >> doc;
    for (const auto& s : doc.at("segments")) {
      const auto bbox = s.at("bbox").get<std::vector<int>>();
      if (bbox.size() != 4) throw Error(ErrorCode::kSchemaError, "segment bbox must have 4 entries");
      map.segments.push_back({s.at("segment_id").get<int>(), s.at("category_id").get<int>(),
                              s.at("area").get<std::int64_t>(), {bbox[0], bbox[1], bbox[2], bbox[3]},
                              s.at("is_food").get<bool>()});
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("malformed segment table: ") + e.what());
  }
  return map;
}

// ---------------------------------------------------------------------------
// Scenes

SceneBundle load_scene(const ScenePaths& paths, const CategoryTable& categories, const MaskLoadOptions& options) {
  SceneBundle scene;
  scene.categories = categories;
  scene.semantic = load_label_map(paths.semantic);
  for (auto v : scene.semantic.data()) {
    if (!categories.contains(v)) {
      throw Error(ErrorCode::kLabelOutOfRange,
                  fmt::format("{}: label {} is not in the category table", paths.semantic, v));
    }
  }
  MaskLoadOptions opts = options;
  opts.expected_dims = scene.semantic.dims();
  scene.masks = load_mask_set(paths.masks, opts);
  scene.masks.dims = scene.semantic.dims();
  if (!paths.detections.empty()) {
    scene.detections = load_detections(paths.detections, scene.dims(), &categories);
  }
  if (!paths.image.empty()) scene.image_path = paths.image;
  return scene;
}

ScenePaths scene_paths_in(const std::string& scene_dir) {
  const fs::path root(scene_dir);
  ScenePaths p;
  p.semantic = (root / "semantic.png").string();
  p.masks = (root / "masks").string();
  if (fs::exists(root / "detections.json")) p.detections = (root / "detections.json").string();
  if (fs::exists(root / "image.png")) p.image = (root / "image.png").string();
  return p;
}

std::vector<std::string> list_scene_ids(const std::string& data_root) {
  std::error_code ec;
  fs::directory_iterator it(data_root, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot list " + data_root + ": " + ec.message());
  std::vector<std::string> ids;
  for (const auto& entry : it) {
    if (entry.is_directory() && fs::exists(entry.path() / "semantic.png")) {
      ids.push_back(entry.path().filename().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace foodfuse
