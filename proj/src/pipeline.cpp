#include "foodfuse/pipeline.hpp"

#include <fmt/format.h>

#include <cmath>

namespace foodfuse {

InstanceMap instances_for(const SceneBundle& scene, const EnhanceResult& enhanced, const AssemblyParams& params) {
  return assemble_instances(enhanced.kept, scene.categories, scene.dims(), params);
}

PanopticMap panoptic_for(const SceneBundle& scene, const EnhanceResult& enhanced, const InstanceMap& instances,
                         const AssemblyParams& params, std::vector<BackgroundMatch>* matches) {
  const CategoryId background = scene.categories.background_id();
  std::vector<const MaskRecord*> bg_masks;
  for (const auto& k : enhanced.kept) {
    if (k.label == background) bg_masks.push_back(k.record);
  }
  std::vector<BackgroundMatch> found;
  if (scene.detections) found = match_background_masks(bg_masks, *scene.detections, scene.categories, params);

  std::vector<LabeledMask> nonfood;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].category_id != background) nonfood.push_back({bg_masks[i], found[i].category_id});
  }
  auto out = assemble_panoptic(instances, nonfood, scene.categories, params);
  if (matches) *matches = std::move(found);
  return out;
}

SceneOutputs run_pipeline(const SceneBundle& scene, const PipelineParams& params) {
  params.assembly.validate();
  SceneOutputs out;
  out.enhanced = enhance(scene, params.fusion);
  out.instances = instances_for(scene, out.enhanced, params.assembly);
  out.panoptic = panoptic_for(scene, out.enhanced, out.instances, params.assembly, &out.matches);
  return out;
}

Json matches_to_json(std::span<const BackgroundMatch> matches, const CategoryTable& categories) {
  Json arr = Json::array();
  for (const auto& m : matches) {
    arr.push_back({{"mask_id", m.mask_id},
                   {"category_id", m.category_id},
                   {"category_name", categories.name(m.category_id)},
                   {"box_index", m.box_index ? Json(*m.box_index) : Json(nullptr)},
                   {"iou", m.iou}});
  }
  return arr;
}

std::string_view to_string(SweepParam param) {
  switch (param) {
    case SweepParam::kTau: return "tau";
    case SweepParam::kTopK: return "topk";
    case SweepParam::kSort: return "sort";
  }
  return "tau";
}

SweepParam parse_sweep_param(std::string_view text) {
  if (text == "tau") return SweepParam::kTau;
  if (text == "topk") return SweepParam::kTopK;
  if (text == "sort") return SweepParam::kSort;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown sweep parameter '{}'", text));
}

FusionParams apply_sweep_value(FusionParams base, SweepParam param, const std::string& value) {
  try {
    std::size_t used = 0;
    switch (param) {
      case SweepParam::kTau:
        base.tau = std::stod(value, &used);
        break;
      case SweepParam::kTopK:
        base.top_k = std::stoi(value, &used);
        break;
      case SweepParam::kSort:
        base.sort_order = parse_sort_order(value);
        used = value.size();
        break;
    }
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("bad {} value '{}'", to_string(param), value));
  }
  base.validate();
  return base;
}

std::vector<SweepRow> run_sweep(SweepParam param, std::span<const std::string> values,
                                std::span<const SweepScene> scenes, const FusionParams& base,
                                const CategoryTable& categories, const EvalOptions& eval) {
  std::vector<FusionParams> configs;
  for (const auto& v : values) configs.push_back(apply_sweep_value(base, param, v));

  std::vector<std::vector<VoteOutcome>> ledgers(scenes.size());
  parallel::for_each_index(0, static_cast<std::ptrdiff_t>(scenes.size()), [&](std::ptrdiff_t i) {
    ledgers[i] = vote_masks(scenes[i].scene.masks, scenes[i].scene.semantic);
  });

  std::vector<SweepRow> rows;
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::vector<ConfusionMatrix> per_scene(scenes.size());
    parallel::for_each_index(0, static_cast<std::ptrdiff_t>(scenes.size()), [&](std::ptrdiff_t i) {
      const auto result = enhance_with_votes(scenes[i].scene, ledgers[i], configs[v]);
      per_scene[i] = confusion_matrix(result.enhanced, scenes[i].ground_truth, categories.class_count(),
                                      eval.ignore_ids);
    });
    ConfusionMatrix total(categories.class_count());
    for (const auto& cm : per_scene) total += cm;
    rows.push_back({values[v], make_report(total, categories, eval.strict_n)});
  }
  return rows;
}

std::string sweep_csv(SweepParam param, std::span<const SweepRow> rows) {
  std::string out = "param,value,miou,macc,aacc\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", to_string(param), r.value, r.report.miou, r.report.macc, r.report.aacc);
  }
  return out;
}

}  // namespace foodfuse
