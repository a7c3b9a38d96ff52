#include "foodfuse/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

namespace fs = std::filesystem;

namespace foodfuse {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double class_iou(const ConfusionMatrix& cm, int c) {
  const auto denom = cm.tp(c) + cm.fp(c) + cm.fn(c);
  return denom > 0 ? static_cast<double>(cm.tp(c)) / static_cast<double>(denom) : kNaN;
}

double class_acc(const ConfusionMatrix& cm, int c) {
  const auto denom = cm.tp(c) + cm.fn(c);
  return denom > 0 ? static_cast<double>(cm.tp(c)) / static_cast<double>(denom) : kNaN;
}

double mean_of(const std::vector<double>& values, bool strict_n, std::size_t n, const char* what) {
  double sum = 0.0;
  std::size_t used = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++used;
  }
  const std::size_t denom = strict_n ? n : used;
  if (denom == 0) throw Error(ErrorCode::kInvalidArgument, fmt::format("{}: no class to average", what));
  return sum / static_cast<double>(denom);
}

std::set<std::string> png_names(const std::string& dir) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot list " + dir + ": " + ec.message());
  std::set<std::string> names;
  for (const auto& e : it) {
    if (e.is_regular_file() && e.path().extension() == ".png") names.insert(e.path().filename().string());
  }
  return names;
}

}  // namespace

ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt, int n_classes,
                                 std::span<const CategoryId> ignore_ids, int n_threads) {
  if (pred.dims() != gt.dims()) {
    throw Error(ErrorCode::kDimMismatch, fmt::format("prediction is {}x{}, ground truth is {}x{}", pred.width(),
                                                     pred.height(), gt.width(), gt.height()));
  }
  if (n_classes <= 0 || n_classes > 256) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("n_classes must be in [1, 256], got {}", n_classes));
  }
  std::array<bool, 256> ignored{};
  for (auto id : ignore_ids) {
    if (id >= 0 && id < 256) ignored[id] = true;
  }

  const int height = gt.height();
  const int blocks = std::max(1, std::min(height, std::max(1, n_threads) * 4));
  std::vector<ConfusionMatrix> partial(blocks, ConfusionMatrix(n_classes));
  parallel::for_each_index(
      0, blocks,
      [&](std::ptrdiff_t b) {
        auto& cm = partial[b];
        auto counts = cm.counts();
        const int y_begin = static_cast<int>(static_cast<std::int64_t>(height) * b / blocks);
        const int y_end = static_cast<int>(static_cast<std::int64_t>(height) * (b + 1) / blocks);
        for (int y = y_begin; y < y_end; ++y) {
          const auto g_row = gt.row(y);
          const auto p_row = pred.row(y);
          for (std::size_t x = 0; x < g_row.size(); ++x) {
            const int g = g_row[x];
            if (ignored[g]) continue;
            const int p = p_row[x];
            if (g >= n_classes || p >= n_classes) {
              throw Error(ErrorCode::kLabelOutOfRange,
                          fmt::format("pixel ({}, {}): label gt={} pred={} outside [0, {})", x, y, g, p, n_classes));
            }
            ++counts[static_cast<std::size_t>(g) * n_classes + p];
          }
        }
      },
      n_threads);

  ConfusionMatrix total(n_classes);
  for (const auto& cm : partial) total += cm;
  return total;
}

double miou(const ConfusionMatrix& cm, bool strict_n) {
  std::vector<double> ious(cm.n_classes());
  for (int c = 0; c < cm.n_classes(); ++c) ious[c] = class_iou(cm, c);
  return mean_of(ious, strict_n, cm.n_classes(), "mIoU");
}

double macc(const ConfusionMatrix& cm, bool strict_n) {
  std::vector<double> accs(cm.n_classes());
  for (int c = 0; c < cm.n_classes(); ++c) accs[c] = class_acc(cm, c);
  return mean_of(accs, strict_n, cm.n_classes(), "mAcc");
}

double aacc(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw Error(ErrorCode::kInvalidArgument, "aAcc of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

MetricReport make_report(const ConfusionMatrix& cm, const CategoryTable& categories, bool strict_n) {
  MetricReport report;
  report.pixels = cm.total();
  std::vector<double> ious, accs;
  for (const auto& e : categories.entries()) {
    if (e.id >= cm.n_classes()) {
      throw Error(ErrorCode::kLabelOutOfRange, fmt::format("category {} outside the matrix axis", e.id));
    }
    ClassMetrics m;
    m.category_id = e.id;
    m.tp = cm.tp(e.id);
    m.fp = cm.fp(e.id);
    m.fn = cm.fn(e.id);
    m.iou = class_iou(cm, e.id);
    m.acc = class_acc(cm, e.id);
    ious.push_back(m.iou);
    accs.push_back(m.acc);
    if (!std::isnan(m.iou)) ++report.evaluated_classes;
    report.per_class.push_back(m);
  }
  std::sort(report.per_class.begin(), report.per_class.end(),
            [](const ClassMetrics& a, const ClassMetrics& b) { return a.category_id < b.category_id; });
  report.miou = mean_of(ious, strict_n, categories.size(), "mIoU");
  report.macc = mean_of(accs, strict_n, categories.size(), "mAcc");
  report.aacc = aacc(cm);
  return report;
}

ConfusionMatrix accumulate_pairs(std::span<const LabelMap> preds, std::span<const LabelMap> gts, int n_classes,
                                 std::span<const CategoryId> ignore_ids) {
  if (preds.size() != gts.size()) throw Error(ErrorCode::kMissingPair, "prediction and ground-truth counts differ");
  std::vector<ConfusionMatrix> per_image(preds.size());
  parallel::for_each_index(0, static_cast<std::ptrdiff_t>(preds.size()), [&](std::ptrdiff_t i) {
    per_image[i] = confusion_matrix(preds[i], gts[i], n_classes, ignore_ids);
  });
  ConfusionMatrix total(n_classes);
  for (const auto& cm : per_image) total += cm;
  return total;
}

MetricReport evaluate_dir(const std::string& pred_dir, const std::string& gt_dir, const CategoryTable& categories,
                          const EvalOptions& options) {
  const auto pred_names = png_names(pred_dir);
  const auto gt_names = png_names(gt_dir);
  if (pred_names != gt_names) {
    std::vector<std::string> unmatched;
    std::set_symmetric_difference(pred_names.begin(), pred_names.end(), gt_names.begin(), gt_names.end(),
                                  std::back_inserter(unmatched));
    throw Error(ErrorCode::kMissingPair,
                fmt::format("{} file(s) without a partner, first: {}", unmatched.size(), unmatched.front()));
  }
  if (gt_names.empty()) throw Error(ErrorCode::kMissingPair, "no PNG files in " + gt_dir);
  std::vector<std::string> names(gt_names.begin(), gt_names.end());
  std::vector<LabelMap> preds(names.size()), gts(names.size());
  parallel::for_each_index(0, static_cast<std::ptrdiff_t>(names.size()), [&](std::ptrdiff_t i) {
    preds[i] = load_label_map((fs::path(pred_dir) / names[i]).string());
    gts[i] = load_label_map((fs::path(gt_dir) / names[i]).string());
  });
  const auto cm = accumulate_pairs(preds, gts, categories.class_count(), options.ignore_ids);
  return make_report(cm, categories, options.strict_n);
}

Json report_to_json(const MetricReport& report, const CategoryTable& categories) {
  auto num = [](double v) { return std::isnan(v) ? Json(nullptr) : Json(v); };
  Json rows = Json::array();
  for (const auto& m : report.per_class) {
    rows.push_back({{"category_id", m.category_id},
                    {"name", categories.name(m.category_id)},
                    {"iou", num(m.iou)},
                    {"acc", num(m.acc)},
                    {"tp", m.tp},
                    {"fp", m.fp},
                    {"fn", m.fn}});
  }
  return {{"miou", report.miou},
          {"macc", report.macc},
          {"aacc", report.aacc},
          {"evaluated_classes", report.evaluated_classes},
          {"pixels", report.pixels},
          {"per_class", rows}};
}

std::string report_table(const MetricReport& report, const CategoryTable& categories) {
  std::size_t name_width = 5;
  for (const auto& m : report.per_class) name_width = std::max(name_width, categories.name(m.category_id).size());
  auto pct = [](double v) { return std::isnan(v) ? std::string("-") : fmt::format("{:.2f}", 100.0 * v); };
  std::string out = fmt::format("{:>4}  {:<{}}  {:>7}  {:>7}\n", "id", "class", name_width, "IoU", "Acc");
  for (const auto& m : report.per_class) {
    out += fmt::format("{:>4}  {:<{}}  {:>7}  {:>7}\n", m.category_id, categories.name(m.category_id), name_width,
                       pct(m.iou), pct(m.acc));
  }
  out += fmt::format("\nmIoU {:.2f}  mAcc {:.2f}  aAcc {:.2f}  ({} classes, {} pixels)\n", 100.0 * report.miou,
                     100.0 * report.macc, 100.0 * report.aacc, report.evaluated_classes, report.pixels);
  return out;
}

}  // namespace foodfuse
