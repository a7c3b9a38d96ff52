#include "foodfuse/cli.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "foodfuse/error.hpp"
#include "foodfuse/log.hpp"
#include "foodfuse/mask_io.hpp"
#include "foodfuse/metrics.hpp"
#include "foodfuse/parallel.hpp"
#include "foodfuse/pipeline.hpp"
#include "foodfuse/prompt.hpp"
#include "foodfuse/serve.hpp"
#include "foodfuse/synthetic.hpp"

namespace fs = std::filesystem;

namespace foodfuse::cli {
namespace {

// Raised for flag combinations CLI11 cannot express; reported with the
// subcommand's usage text.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  // scene inputs
  std::string semantic, sam_dir, detections, image, categories, data_root, scene;
  bool trust_metadata = false;
  // fusion
  double tau = 0.5;
  int topk = -1;
  std::string sort = "area_desc";
  bool no_filter = false;
  bool skip_background_paint = false;
  // assembly
  double min_area = 0.005;
  double merge_dist = 0.1;
  double iou_thresh = 0.5;
  bool pixel_iou = false;
  // prompt
  std::string mode;
  std::string point, box, mask;
  int samples = kDefaultMaskSamples;
  // eval / sweep
  std::string pred, gt, layout = "flat";
  bool strict_n = false;
  std::vector<int> ignore;
  bool json = false;
  std::string param;
  std::vector<std::string> values;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  bool preload = false;
  // demo / replay
  int n_scenes = 4;
  std::string manifest;
  // common
  std::string out;
  int jobs = 1;
  std::uint32_t seed = 0;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kOutOfBounds: return kValidationError;
    default: return kIoError;
  }
}

// --- flag groups ---------------------------------------------------------------

void add_scene_flags(CLI::App* sub, Options& o) {
  sub->add_option("--semantic", o.semantic, "Coarse semantic label map (8-bit PNG)");
  sub->add_option("--sam-dir", o.sam_dir, "Mask proposal directory (metadata.csv + {id}.png)");
  sub->add_option("--detections", o.detections, "Detector boxes (JSON)");
  sub->add_option("--image", o.image, "RGB image used as backdrop for color outputs");
  sub->add_option("--categories", o.categories, "Category table (TSV); defaults to DATA_ROOT/categories.tsv");
  sub->add_option("--data-root", o.data_root, "Directory of scene directories");
  sub->add_option("--scene", o.scene, "Single scene id under --data-root");
  sub->add_flag("--trust-metadata", o.trust_metadata, "Fail when metadata.csv disagrees with the mask pixels");
}

void add_fusion_flags(CLI::App* sub, Options& o) {
  sub->add_option("--tau", o.tau, "Confused-degree threshold")->capture_default_str();
  sub->add_option("--topk", o.topk, "Keep the k largest masks")->check(CLI::PositiveNumber);
  sub->add_option("--sort", o.sort, "Paint order")
      ->check(CLI::IsMember({"area_desc", "area_asc", "iou_desc", "iou_asc"}))
      ->capture_default_str();
  sub->add_flag("--no-filter", o.no_filter, "Disable the confused-degree filter");
  sub->add_flag("--skip-background-paint", o.skip_background_paint, "Do not paint background-voted masks");
}

void add_assembly_flags(CLI::App* sub, Options& o) {
  sub->add_option("--min-area", o.min_area, "Small-mask area ratio")->capture_default_str();
  sub->add_option("--merge-dist", o.merge_dist, "Small-mask merge distance (fraction of diagonal)")
      ->capture_default_str();
  sub->add_option("--iou-thresh", o.iou_thresh, "Background mask to detector box IoU threshold")
      ->capture_default_str();
  sub->add_flag("--pixel-iou", o.pixel_iou, "Exact pixel-vs-box IoU");
}

void add_common_flags(CLI::App* sub, Options& o, bool out_required) {
  auto* out = sub->add_option("--out", o.out, "Output directory");
  if (out_required) out->required();
  sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--seed", o.seed, "Seed for sampled prompts")->capture_default_str();
}

// --- configuration ---------------------------------------------------------------

PipelineParams pipeline_params(const Options& o) {
  PipelineParams p;
  p.fusion.tau = o.tau;
  if (o.topk > 0) p.fusion.top_k = o.topk;
  p.fusion.sort_order = parse_sort_order(o.sort);
  p.fusion.filter_confused = !o.no_filter;
  p.fusion.skip_background_paint = o.skip_background_paint;
  p.assembly.min_area_ratio = o.min_area;
  p.assembly.merge_distance = o.merge_dist;
  p.assembly.panoptic_iou_thresh = o.iou_thresh;
  p.assembly.pixel_iou = o.pixel_iou;
  p.fusion.validate();
  p.assembly.validate();
  return p;
}

Json params_json(const PipelineParams& p) {
  return {{"tau", p.fusion.tau},
          {"topk", p.fusion.top_k ? Json(*p.fusion.top_k) : Json(nullptr)},
          {"sort", std::string(to_string(p.fusion.sort_order))},
          {"filter", p.fusion.filter_confused},
          {"skip_background_paint", p.fusion.skip_background_paint},
          {"min_area", p.assembly.min_area_ratio},
          {"merge_dist", p.assembly.merge_distance},
          {"iou_thresh", p.assembly.panoptic_iou_thresh},
          {"pixel_iou", p.assembly.pixel_iou}};
}

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const char* flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("{}: '{}' is not a number", flag, part));
    }
  }
  if (values.size() != expected) {
    throw UsageError(fmt::format("{} expects {} comma-separated numbers, got '{}'", flag, expected, text));
  }
  return values;
}

// --- manifest ----------------------------------------------------------------------

class Manifest {
 public:
  void add_input(const std::string& path) {
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) add_file(f.string());
    } else {
      add_file(path);
    }
  }

  Json inputs() const {
    std::lock_guard lock(mutex_);
    return inputs_;
  }

 private:
  void add_file(const std::string& path) {
    auto digest = sha256_file(path);
    std::lock_guard lock(mutex_);
    inputs_[path] = std::move(digest);
  }

  mutable std::mutex mutex_;
  Json inputs_ = Json::object();
};

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                  std::chrono::system_clock::now())));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// Hashes everything under `out` except the manifest itself.
Json output_hashes(const fs::path& out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Json j = Json::object();
  for (const auto& f : files) j[fs::relative(f, out).generic_string()] = sha256_file(f.string());
  return j;
}

void write_manifest(const Options& o, const std::string& command, const std::vector<std::string>& args,
                    const Json& config, const Manifest& manifest) {
  const fs::path out(o.out);
  Json j = {{"tool", std::string(kToolName)},
            {"version", std::string(kVersion)},
            {"command", command},
            {"argv", args},
            {"config", config},
            {"inputs", manifest.inputs()},
            {"outputs", output_hashes(out)},
            {"runtime", {{"created_at", utc_now()}, {"jobs", o.jobs}}}};
  write_json(out / "manifest.json", j);
}

void prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, fmt::format("cannot create {}: {}", dir, ec.message()));
}

// --- scene inputs ----------------------------------------------------------------

struct SceneSource {
  std::string id;
  ScenePaths paths;
  std::string out_dir;
  std::string gt;
};

struct Inputs {
  std::string categories_path;
  std::vector<SceneSource> scenes;
};

// Flag checks only; the one filesystem touch is listing the data root.
Inputs resolve_inputs(const Options& o, bool need_out) {
  Inputs in;
  const bool single = !o.semantic.empty() || !o.sam_dir.empty();
  if (single && !o.data_root.empty()) throw UsageError("--semantic/--sam-dir cannot be combined with --data-root");
  if (!single && o.data_root.empty()) throw UsageError("--semantic and --sam-dir (or --data-root) are required");
  if (single) {
    if (o.semantic.empty()) throw UsageError("--semantic is required");
    if (o.sam_dir.empty()) throw UsageError("--sam-dir is required");
    if (o.categories.empty()) throw UsageError("--categories is required");
    if (!o.scene.empty()) throw UsageError("--scene needs --data-root");
    if (need_out && o.out.empty()) throw UsageError("--out is required");
    in.categories_path = o.categories;
    SceneSource s;
    s.id = fs::path(o.semantic).stem().string();
    s.paths = {o.semantic, o.sam_dir, o.detections, o.image};
    s.out_dir = o.out;
    s.gt = o.gt;
    in.scenes.push_back(std::move(s));
    return in;
  }
  if (!o.detections.empty() || !o.image.empty()) throw UsageError("--detections/--image need --semantic");
  if (need_out && o.out.empty()) throw UsageError("--out is required");
  in.categories_path = o.categories.empty() ? (fs::path(o.data_root) / "categories.tsv").string() : o.categories;
  std::vector<std::string> ids;
  if (!o.scene.empty()) {
    ids.push_back(o.scene);
  } else {
    ids = list_scene_ids(o.data_root);
    if (ids.empty()) throw Error(ErrorCode::kIoError, "no scenes under " + o.data_root);
  }
  for (const auto& id : ids) {
    const fs::path dir = fs::path(o.data_root) / id;
    if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoError, "no scene directory " + dir.string());
    SceneSource s;
    s.id = id;
    s.paths = scene_paths_in(dir.string());
    s.out_dir = o.out.empty() ? std::string() : (fs::path(o.out) / id).string();
    s.gt = o.gt.empty() ? (dir / "gt.png").string() : (fs::path(o.gt) / (id + ".png")).string();
    in.scenes.push_back(std::move(s));
  }
  return in;
}

SceneBundle load_source(const SceneSource& src, const CategoryTable& categories, const Options& o,
                        Manifest& manifest) {
  MaskLoadOptions mo;
  mo.trust_metadata = o.trust_metadata;
  auto bundle = load_scene(src.paths, categories, mo);
  bundle.scene_id = src.id;
  manifest.add_input(src.paths.semantic);
  manifest.add_input(src.paths.masks);
  if (!src.paths.detections.empty()) manifest.add_input(src.paths.detections);
  if (!src.paths.image.empty()) manifest.add_input(src.paths.image);
  return bundle;
}

std::optional<RgbImage> backdrop_for(const SceneBundle& scene) {
  if (!scene.image_path) return std::nullopt;
  auto img = load_rgb_image(*scene.image_path);
  if (img.dims != scene.dims()) {
    logger()->warn("{}: image is {}x{}, label map is {}x{}; color output without backdrop", scene.scene_id,
                   img.dims.width, img.dims.height, scene.dims().width, scene.dims().height);
    return std::nullopt;
  }
  return img;
}

// Runs `f` over scenes, `jobs` at a time. Kernels inside a scene run
// serially while scene workers are active.
template <class F>
void for_each_scene(const Inputs& in, int jobs, F f) {
  parallel::for_each_index(0, in.scenes.size(), [&](std::size_t i) { f(in.scenes[i]); }, jobs);
}

// --- subcommands -----------------------------------------------------------------

enum class Stage { kEnhance, kInstance, kPanoptic };

Json scene_config(const Options& o, const PipelineParams& params, const Inputs& in) {
  Json scenes = Json::array();
  for (const auto& s : in.scenes) scenes.push_back(s.id);
  return {{"params", params_json(params)},
          {"categories", in.categories_path},
          {"data_root", o.data_root},
          {"scenes", scenes},
          {"trust_metadata", o.trust_metadata},
          {"seed", o.seed}};
}

int cmd_pipeline(Stage stage, const std::string& command, const Options& o, const std::vector<std::string>& args,
                 std::ostream& out) {
  const auto params = pipeline_params(o);
  const Inputs in = resolve_inputs(o, true);
  Manifest manifest;
  const auto categories = CategoryTable::load(in.categories_path);
  manifest.add_input(in.categories_path);
  prepare_out(o.out);

  for_each_scene(in, o.jobs, [&](const SceneSource& src) {
    const auto scene = load_source(src, categories, o, manifest);
    prepare_out(src.out_dir);
    const fs::path dir(src.out_dir);
    const auto enhanced = enhance(scene, params.fusion);
    save_label_map(enhanced.enhanced, (dir / "enhanced.png").string());
    write_json(dir / "votes.json", votes_to_json(enhanced.votes, enhanced.kept));
    if (stage == Stage::kEnhance) return;

    const auto backdrop = backdrop_for(scene);
    const RgbImage* bg = backdrop ? &*backdrop : nullptr;
    const auto instances = instances_for(scene, enhanced, params.assembly);
    save_instance_map(instances, categories, src.out_dir, bg);
    if (stage == Stage::kInstance) return;

    std::vector<BackgroundMatch> matches;
    const auto panoptic = panoptic_for(scene, enhanced, instances, params.assembly, &matches);
    save_panoptic_map(panoptic, categories, src.out_dir, bg);
    write_json(dir / "matches.json", matches_to_json(matches, categories));
  });

  write_manifest(o, command, args, scene_config(o, params, in), manifest);
  out << fmt::format("{}: {} scene(s) -> {}\n", command, in.scenes.size(), o.out);
  return kOk;
}

int cmd_prompt(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto params = pipeline_params(o);
  if (o.samples <= 0) throw UsageError("--samples must be positive");
  const auto kind = parse_prompt_kind(o.mode);
  std::optional<Point> point;
  std::optional<Box> box;
  if (kind == PromptKind::kPoint) {
    if (o.point.empty()) throw UsageError("--mode point needs --point x,y");
    const auto v = parse_numbers(o.point, 2, "--point");
    point = Point{v[0], v[1]};
  } else if (kind == PromptKind::kBox) {
    if (o.box.empty()) throw UsageError("--mode box needs --box x0,y0,x1,y1");
    const auto v = parse_numbers(o.box, 4, "--box");
    box = Box{v[0], v[1], v[2], v[3]};
  } else if (kind == PromptKind::kMask && o.mask.empty()) {
    throw UsageError("--mode mask needs --mask m.png");
  }
  const Inputs in = resolve_inputs(o, false);
  if (in.scenes.size() != 1) throw UsageError("prompt needs one scene: use --scene with --data-root");

  Manifest manifest;
  const auto categories = CategoryTable::load(in.categories_path);
  manifest.add_input(in.categories_path);
  const auto scene = load_source(in.scenes.front(), categories, o, manifest);

  Prompt prompt;
  if (point) prompt = Prompt::at(*point);
  if (box) prompt = Prompt::in_box(*box);
  if (kind == PromptKind::kMask) {
    prompt = Prompt::with_mask(load_binary_mask(o.mask));
    manifest.add_input(o.mask);
  }

  const auto outputs = run_pipeline(scene, params);
  const auto result =
      promptable_segment(scene, outputs.enhanced.enhanced, outputs.panoptic, prompt, o.samples, o.seed);
  const Json j = prompt_result_to_json(result, scene);
  if (!o.out.empty()) {
    prepare_out(o.out);
    write_json(fs::path(o.out) / "prompt.json", j);
    Json config = scene_config(o, params, in);
    config["prompt"] = {{"mode", o.mode}, {"point", o.point}, {"box", o.box}, {"mask", o.mask},
                        {"samples", o.samples}};
    write_manifest(o, "prompt", args, config, manifest);
  }
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_eval(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  if (o.categories.empty()) throw UsageError("--categories is required");
  std::vector<CategoryId> ignore;
  for (int v : o.ignore) {
    if (v < 0 || v > 255) throw UsageError(fmt::format("--ignore {} is not a label value", v));
    ignore.push_back(static_cast<CategoryId>(v));
  }
  const EvalOptions eval{o.strict_n, ignore};

  Manifest manifest;
  const auto categories = CategoryTable::load(o.categories);
  manifest.add_input(o.categories);
  MetricReport report;
  if (o.layout == "scenes") {
    // pred/{id}/enhanced.png against gt/{id}/gt.png
    const auto ids = list_scene_ids(o.gt);
    std::vector<std::string> pred_ids;
    for (const auto& e : fs::directory_iterator(o.pred)) {
      if (e.is_directory() && fs::exists(e.path() / "enhanced.png")) pred_ids.push_back(e.path().filename().string());
    }
    std::sort(pred_ids.begin(), pred_ids.end());
    if (ids.empty()) throw Error(ErrorCode::kMissingPair, "no scenes under " + o.gt);
    if (pred_ids != ids) throw Error(ErrorCode::kMissingPair, "prediction and ground-truth scene sets differ");
    std::vector<LabelMap> preds, gts;
    for (const auto& id : ids) {
      const auto p = (fs::path(o.pred) / id / "enhanced.png").string();
      const auto g = (fs::path(o.gt) / id / "gt.png").string();
      preds.push_back(load_label_map(p));
      gts.push_back(load_label_map(g));
      manifest.add_input(p);
      manifest.add_input(g);
    }
    report = make_report(accumulate_pairs(preds, gts, categories.class_count(), ignore), categories, o.strict_n);
  } else if (fs::is_directory(o.pred) && fs::is_directory(o.gt)) {
    report = evaluate_dir(o.pred, o.gt, categories, eval);
    manifest.add_input(o.pred);
    manifest.add_input(o.gt);
  } else {
    const auto pred = load_label_map(o.pred);
    const auto gt = load_label_map(o.gt);
    manifest.add_input(o.pred);
    manifest.add_input(o.gt);
    report = make_report(confusion_matrix(pred, gt, categories.class_count(), ignore, o.jobs), categories,
                         o.strict_n);
  }
  const Json j = report_to_json(report, categories);
  if (!o.out.empty()) {
    prepare_out(o.out);
    write_json(fs::path(o.out) / "report.json", j);
    write_text(fs::path(o.out) / "report.txt", report_table(report, categories));
    Json ignore_json = Json::array();
    for (auto v : ignore) ignore_json.push_back(v);
    write_manifest(o, "eval", args,
                   {{"pred", o.pred}, {"gt", o.gt}, {"layout", o.layout}, {"strict_n", o.strict_n},
                    {"ignore", ignore_json}},
                   manifest);
  }
  if (o.json) {
    out << j.dump(2) << '\n';
  } else {
    out << report_table(report, categories);
  }
  return kOk;
}

int cmd_sweep(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto params = pipeline_params(o);
  const auto param = parse_sweep_param(o.param);
  for (const auto& v : o.values) (void)apply_sweep_value(params.fusion, param, v);
  Inputs in = resolve_inputs(o, false);
  if (!o.semantic.empty() && o.gt.empty()) throw UsageError("--gt is required with --semantic");
  std::vector<CategoryId> ignore;
  for (int v : o.ignore) {
    if (v < 0 || v > 255) throw UsageError(fmt::format("--ignore {} is not a label value", v));
    ignore.push_back(static_cast<CategoryId>(v));
  }

  Manifest manifest;
  const auto categories = CategoryTable::load(in.categories_path);
  manifest.add_input(in.categories_path);
  std::vector<SweepScene> scenes(in.scenes.size());
  parallel::for_each_index(
      0, in.scenes.size(),
      [&](std::size_t i) {
        const auto& src = in.scenes[i];
        scenes[i].scene = load_source(src, categories, o, manifest);
        scenes[i].ground_truth = load_label_map(src.gt);
        manifest.add_input(src.gt);
      },
      o.jobs);
  const auto rows = run_sweep(param, o.values, scenes, params.fusion, categories, {o.strict_n, ignore});
  const auto csv = sweep_csv(param, rows);
  if (!o.out.empty()) {
    prepare_out(o.out);
    write_text(fs::path(o.out) / "sweep.csv", csv);
    Json config = scene_config(o, params, in);
    config["sweep"] = {{"param", o.param}, {"values", o.values}, {"strict_n", o.strict_n}};
    write_manifest(o, "sweep", args, config, manifest);
  }
  out << csv;
  return kOk;
}

int cmd_serve(const Options& o, std::ostream& err) {
  if (o.data_root.empty()) throw UsageError("--data-root is required");
  if (o.port < 0 || o.port > 65535) throw UsageError("--port must be in 0..65535");
  ServeOptions so;
  so.data_root = o.data_root;
  so.categories_path = o.categories;
  so.preload = o.preload;
  so.defaults = pipeline_params(o);
  so.mask_options.trust_metadata = o.trust_metadata;
  SceneService service(std::move(so));
  HttpServer server(service);
  const bool ok = server.listen(o.host, o.port, [&](int port) {
    err << fmt::format("serving {} scene(s) on http://{}:{}\n", service.scene_ids().size(), o.host, port)
        << std::flush;
  });
  if (!ok) throw Error(ErrorCode::kIoError, fmt::format("cannot listen on {}:{}", o.host, o.port));
  return kOk;
}

int cmd_demo(const Options& o, std::ostream& out) {
  if (o.n_scenes <= 0 || o.n_scenes > 99) throw UsageError("--scenes must be in 1..99");
  prepare_out(o.out);
  synthetic::write_corpus(o.out, o.n_scenes);
  out << fmt::format("wrote {} synthetic scene(s) to {}\n", o.n_scenes, o.out);
  return kOk;
}

int cmd_replay(const Options& o, std::ostream& out, std::ostream& err) {
  std::ifstream f(o.manifest);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + o.manifest);
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaError, fmt::format("{}: {}", o.manifest, e.what()));
  }
  if (!j.contains("argv") || !j["argv"].is_array()) throw Error(ErrorCode::kSchemaError, "manifest has no argv");
  auto argv = j["argv"].get<std::vector<std::string>>();
  if (argv.empty() || argv.front() == "replay") throw Error(ErrorCode::kSchemaError, "manifest argv is not replayable");
  if (!o.out.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (argv[i] == "--out" && i + 1 < argv.size()) {
        argv[i + 1] = o.out;
        replaced = true;
      } else if (argv[i].rfind("--out=", 0) == 0) {
        argv[i] = "--out=" + o.out;
        replaced = true;
      }
    }
    if (!replaced) {
      argv.push_back("--out");
      argv.push_back(o.out);
    }
  }
  return run(argv, out, err);
}

}  // namespace

std::string sha256_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "sha256 init failed");
  }
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (f.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Fuses coarse semantic maps with class-agnostic mask proposals.", std::string(kToolName)};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  auto* enhance_cmd = app.add_subcommand("enhance", "Vote mask labels and merge them into the semantic map");
  auto* instance_cmd = app.add_subcommand("instance", "Enhance, then assemble food instances");
  auto* panoptic_cmd = app.add_subcommand("panoptic", "Enhance, assemble instances, and label non-food masks");
  for (auto* sub : {enhance_cmd, instance_cmd, panoptic_cmd}) {
    add_scene_flags(sub, o);
    add_fusion_flags(sub, o);
    if (sub != enhance_cmd) add_assembly_flags(sub, o);
    add_common_flags(sub, o, false);
  }

  auto* prompt_cmd = app.add_subcommand("prompt", "Promptable segmentation over one scene");
  add_scene_flags(prompt_cmd, o);
  add_fusion_flags(prompt_cmd, o);
  add_assembly_flags(prompt_cmd, o);
  add_common_flags(prompt_cmd, o, false);
  prompt_cmd->add_option("--mode", o.mode, "Prompt kind")
      ->required()
      ->check(CLI::IsMember({"point", "box", "mask", "regular"}));
  prompt_cmd->add_option("--point", o.point, "x,y");
  prompt_cmd->add_option("--box", o.box, "x0,y0,x1,y1");
  prompt_cmd->add_option("--mask", o.mask, "Binary mask PNG");
  prompt_cmd->add_option("--samples", o.samples, "Samples drawn from a mask prompt")->capture_default_str();

  auto* eval_cmd = app.add_subcommand("eval", "mIoU / mAcc / aAcc of predicted label maps");
  eval_cmd->add_option("--pred", o.pred, "Prediction PNG or directory")->required();
  eval_cmd->add_option("--gt", o.gt, "Ground-truth PNG or directory")->required();
  eval_cmd->add_option("--categories", o.categories, "Category table (TSV)");
  eval_cmd->add_option("--layout", o.layout, "flat: same-named PNGs; scenes: PRED/{id}/enhanced.png vs GT/{id}/gt.png")
      ->check(CLI::IsMember({"flat", "scenes"}))
      ->capture_default_str();
  eval_cmd->add_flag("--strict-n", o.strict_n, "Average over every class, empty ones included");
  eval_cmd->add_option("--ignore", o.ignore, "Ground-truth label ids to skip")->delimiter(',');
  eval_cmd->add_flag("--json", o.json, "Print JSON instead of the table");
  add_common_flags(eval_cmd, o, false);

  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate one fusion parameter over several values");
  add_scene_flags(sweep_cmd, o);
  add_fusion_flags(sweep_cmd, o);
  add_common_flags(sweep_cmd, o, false);
  sweep_cmd->add_option("--param", o.param, "Parameter to vary")
      ->required()
      ->check(CLI::IsMember({"tau", "topk", "sort"}));
  sweep_cmd->add_option("--values", o.values, "Comma-separated values")->required()->delimiter(',');
  sweep_cmd->add_option("--gt", o.gt, "Ground truth: a PNG with --semantic, a directory of {id}.png otherwise");
  sweep_cmd->add_flag("--strict-n", o.strict_n, "Average over every class, empty ones included");
  sweep_cmd->add_option("--ignore", o.ignore, "Ground-truth label ids to skip")->delimiter(',');

  auto* serve_cmd = app.add_subcommand("serve", "HTTP prompt service over a scene directory");
  serve_cmd->add_option("--data-root", o.data_root, "Directory of scene directories");
  serve_cmd->add_option("--categories", o.categories, "Category table; defaults to DATA_ROOT/categories.tsv");
  serve_cmd->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", o.port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_flag("--preload", o.preload, "Compute every scene with default params at startup");
  serve_cmd->add_flag("--trust-metadata", o.trust_metadata, "Fail when metadata.csv disagrees with the mask pixels");
  add_fusion_flags(serve_cmd, o);
  add_assembly_flags(serve_cmd, o);

  auto* demo_cmd = app.add_subcommand("demo", "Write a synthetic scene corpus");
  demo_cmd->add_option("--out", o.out, "Output data root")->required();
  demo_cmd->add_option("--scenes", o.n_scenes, "Number of scenes")->capture_default_str();

  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", o.manifest, "manifest.json")->required();
  replay_cmd->add_option("--out", o.out, "Write to this directory instead");

  CLI::App* active = nullptr;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.back()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolName << ' ' << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.back()->help());
    return kValidationError;
  }
  active = app.get_subcommands().front();
  parallel::set_jobs(o.jobs);

  try {
    const std::string name = active->get_name();
    if (active == enhance_cmd) return cmd_pipeline(Stage::kEnhance, name, o, args, out);
    if (active == instance_cmd) return cmd_pipeline(Stage::kInstance, name, o, args, out);
    if (active == panoptic_cmd) return cmd_pipeline(Stage::kPanoptic, name, o, args, out);
    if (active == prompt_cmd) return cmd_prompt(o, args, out);
    if (active == eval_cmd) return cmd_eval(o, args, out);
    if (active == sweep_cmd) return cmd_sweep(o, args, out);
    if (active == serve_cmd) return cmd_serve(o, err);
    if (active == demo_cmd) return cmd_demo(o, out);
    if (active == replay_cmd) return cmd_replay(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return kValidationError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kValidationError;
}

}  // namespace foodfuse::cli
