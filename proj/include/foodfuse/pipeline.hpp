#pragma once

#include <span>
#include <string>
#include <vector>

#include "foodfuse/assembly.hpp"
#include "foodfuse/fusion.hpp"
#include "foodfuse/metrics.hpp"

namespace foodfuse {

struct PipelineParams {
  FusionParams fusion;
  AssemblyParams assembly;
};

struct SceneOutputs {
  EnhanceResult enhanced;
  InstanceMap instances;
  PanopticMap panoptic;
  std::vector<BackgroundMatch> matches;
};

InstanceMap instances_for(const SceneBundle& scene, const EnhanceResult& enhanced, const AssemblyParams& params);

/// Matches the kept background-voted masks against the scene detections and
/// layers the matched ones beneath `instances`.
PanopticMap panoptic_for(const SceneBundle& scene, const EnhanceResult& enhanced, const InstanceMap& instances,
                         const AssemblyParams& params, std::vector<BackgroundMatch>* matches = nullptr);

/// enhance -> instances -> panoptic for one scene.
SceneOutputs run_pipeline(const SceneBundle& scene, const PipelineParams& params);

Json matches_to_json(std::span<const BackgroundMatch> matches, const CategoryTable& categories);

// --- ablation sweeps ----------------------------------------------------------

enum class SweepParam { kTau, kTopK, kSort };

std::string_view to_string(SweepParam param);
SweepParam parse_sweep_param(std::string_view text);

struct SweepScene {
  SceneBundle scene;
  LabelMap ground_truth;
};

struct SweepRow {
  std::string value;
  MetricReport report;
};

/// Applies `value` for `param` on top of `base`. Throws kInvalidArgument
/// on a malformed value.
FusionParams apply_sweep_value(FusionParams base, SweepParam param, const std::string& value);

/// One row per value, in the given order. Each scene is voted once and the
/// ledger reused for every value.
std::vector<SweepRow> run_sweep(SweepParam param, std::span<const std::string> values,
                                std::span<const SweepScene> scenes, const FusionParams& base,
                                const CategoryTable& categories, const EvalOptions& eval = {});

/// "param,value,miou,macc,aacc" header plus one row per value; ratios in
/// shortest round-trip form.
std::string sweep_csv(SweepParam param, std::span<const SweepRow> rows);

}  // namespace foodfuse
