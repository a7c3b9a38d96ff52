#pragma once

#include <span>
#include <string>
#include <vector>

#include "foodfuse/mask_io.hpp"
#include "foodfuse/parallel.hpp"
#include "foodfuse/types.hpp"

namespace foodfuse {

/// counts[g][p] over every pixel whose ground truth is not in `ignore_ids`.
/// Row blocks are tallied in parallel and summed in block order.
ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt, int n_classes,
                                 std::span<const CategoryId> ignore_ids = {},
                                 int n_threads = parallel::max_threads());

// Means run over classes with a non-empty denominator unless `strict_n`,
// in which case every class on the matrix axis counts (empty ones as 0).
double miou(const ConfusionMatrix& cm, bool strict_n = false);
double macc(const ConfusionMatrix& cm, bool strict_n = false);
/// trace / total; throws kInvalidArgument on an empty matrix.
double aacc(const ConfusionMatrix& cm);

struct ClassMetrics {
  CategoryId category_id = 0;
  double iou = 0.0;
  double acc = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct MetricReport {
  std::vector<ClassMetrics> per_class;
  double miou = 0.0;
  double macc = 0.0;
  double aacc = 0.0;
  int evaluated_classes = 0;
  std::int64_t pixels = 0;
};

struct EvalOptions {
  bool strict_n = false;
  std::vector<CategoryId> ignore_ids;
};

/// Per-class rows cover the table's categories; in strict mode N is the
/// table size.
MetricReport make_report(const ConfusionMatrix& cm, const CategoryTable& categories, bool strict_n = false);

/// One global confusion matrix over every `*.png` pair with matching file
/// names. Throws kMissingPair when the two name sets differ.
MetricReport evaluate_dir(const std::string& pred_dir, const std::string& gt_dir,
                          const CategoryTable& categories, const EvalOptions& options = {});
ConfusionMatrix accumulate_pairs(std::span<const LabelMap> preds, std::span<const LabelMap> gts, int n_classes,
                                 std::span<const CategoryId> ignore_ids = {});

Json report_to_json(const MetricReport& report, const CategoryTable& categories);
/// Aligned text table, one row per class plus the three aggregates.
std::string report_table(const MetricReport& report, const CategoryTable& categories);

}  // namespace foodfuse
