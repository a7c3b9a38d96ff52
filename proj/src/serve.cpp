#include "foodfuse/serve.hpp"

#include <fmt/format.h>

#include <filesystem>

#include "httplib.h"
#include "foodfuse/log.hpp"
#include "foodfuse/png.hpp"

namespace fs = std::filesystem;

namespace foodfuse {

struct SceneService::SceneEntry {
  std::string id;
  ScenePaths paths;
  Dims dims;
  mutable std::once_flag loaded;
  mutable std::unique_ptr<SceneBundle> scene;
};

struct SceneService::ResultEntry {
  std::once_flag computed;
  std::shared_ptr<const SceneOutputs> outputs;
};

namespace {

HttpResponse json_response(int status, const Json& body) { return {status, "application/json", body.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

HttpResponse png_response(std::vector<std::uint8_t> bytes) {
  return {200, "image/png", std::string(bytes.begin(), bytes.end())};
}

// Cache key: every parameter that changes the pipeline outputs.
std::string params_key(const PipelineParams& p) {
  const Json j = {{"tau", p.fusion.tau},
          {"topk", p.fusion.top_k ? Json(*p.fusion.top_k) : Json(nullptr)},
          {"sort", std::string(to_string(p.fusion.sort_order))},
          {"filter", p.fusion.filter_confused},
          {"skip_background_paint", p.fusion.skip_background_paint},
          {"min_area", p.assembly.min_area_ratio},
          {"merge_dist", p.assembly.merge_distance},
          {"iou_thresh", p.assembly.panoptic_iou_thresh},
          {"pixel_iou", p.assembly.pixel_iou}};
  return j.dump();
}

Prompt prompt_from_json(const Json& body, Dims dims) {
  const auto kind = parse_prompt_kind(body.at("kind").get<std::string>());
  switch (kind) {
    case PromptKind::kPoint: {
      const auto g = body.at("geometry").get<std::vector<double>>();
      if (g.size() != 2) throw Error(ErrorCode::kInvalidArgument, "point geometry must be [x, y]");
      return Prompt::at({g[0], g[1]});
    }
    case PromptKind::kBox: {
      const auto g = body.at("geometry").get<std::vector<double>>();
      if (g.size() != 4) throw Error(ErrorCode::kInvalidArgument, "box geometry must be [x0, y0, x1, y1]");
      return Prompt::in_box({g[0], g[1], g[2], g[3]});
    }
    case PromptKind::kMask: {
      auto mask = rle_from_json(body.at("geometry"));
      if (mask.dims() != dims) {
        throw Error(ErrorCode::kOutOfBounds, fmt::format("mask prompt is {}x{}, scene is {}x{}", mask.width(),
                                                         mask.height(), dims.width, dims.height));
      }
      return Prompt::with_mask(std::move(mask));
    }
    case PromptKind::kRegular: return Prompt::regular();
  }
  return Prompt::regular();
}

}  // namespace

PipelineParams params_from_json(const Json& params, PipelineParams base, int* n_samples) {
  if (params.is_null()) return base;
  if (!params.is_object()) throw Error(ErrorCode::kInvalidArgument, "params must be an object");
  for (const auto& [key, value] : params.items()) {
    if (key == "tau") {
      base.fusion.tau = value.get<double>();
    } else if (key == "topk") {
      base.fusion.top_k = value.is_null() ? std::nullopt : std::optional<int>(value.get<int>());
    } else if (key == "sort") {
      base.fusion.sort_order = parse_sort_order(value.get<std::string>());
    } else if (key == "filter") {
      base.fusion.filter_confused = value.get<bool>();
    } else if (key == "skip_background_paint") {
      base.fusion.skip_background_paint = value.get<bool>();
    } else if (key == "min_area") {
      base.assembly.min_area_ratio = value.get<double>();
    } else if (key == "merge_dist") {
      base.assembly.merge_distance = value.get<double>();
    } else if (key == "iou_thresh") {
      base.assembly.panoptic_iou_thresh = value.get<double>();
    } else if (key == "pixel_iou") {
      base.assembly.pixel_iou = value.get<bool>();
    } else if (key == "samples" && n_samples) {
      *n_samples = value.get<int>();
      if (*n_samples <= 0) throw Error(ErrorCode::kInvalidArgument, "samples must be positive");
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown parameter '" + key + "'");
    }
  }
  base.fusion.validate();
  base.assembly.validate();
  return base;
}

SceneService::SceneService(ServeOptions options) : options_(std::move(options)) {
  const fs::path root(options_.data_root);
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIoError, "data root " + options_.data_root + " not found");
  const std::string cats =
      options_.categories_path.empty() ? (root / "categories.tsv").string() : options_.categories_path;
  categories_ = CategoryTable::load(cats);

  for (const auto& id : list_scene_ids(options_.data_root)) {
    auto entry = std::make_unique<SceneEntry>();
    entry->id = id;
    entry->paths = scene_paths_in((root / id).string());
    if (!fs::exists(fs::path(entry->paths.masks) / "metadata.csv")) {
      throw Error(ErrorCode::kIoError, "scene " + id + " has no masks/metadata.csv");
    }
    entry->dims = load_label_map(entry->paths.semantic).dims();
    ids_.push_back(id);
    scenes_.emplace(id, std::move(entry));
  }
  if (options_.preload) {
    for (const auto& id : ids_) outputs(*scenes_.at(id), options_.defaults, params_key(options_.defaults));
  }
  logger()->info("serving {} scene(s) from {}", ids_.size(), options_.data_root);
}

SceneService::~SceneService() = default;

const SceneService::SceneEntry* SceneService::find_scene(const std::string& scene_id) const {
  auto it = scenes_.find(scene_id);
  return it == scenes_.end() ? nullptr : it->second.get();
}

const SceneBundle& SceneService::bundle(const SceneEntry& entry) const {
  std::call_once(entry.loaded, [&] {
    auto scene = std::make_unique<SceneBundle>(load_scene(entry.paths, categories_, options_.mask_options));
    scene->scene_id = entry.id;
    entry.scene = std::move(scene);
  });
  return *entry.scene;
}

std::shared_ptr<const SceneOutputs> SceneService::outputs(const SceneEntry& entry, const PipelineParams& params,
                                                          const std::string& key_suffix) const {
  const std::string key = entry.id + "\n" + key_suffix;
  std::shared_ptr<ResultEntry> slot;
  {
    std::lock_guard lock(cache_mutex_);
    auto& s = cache_[key];
    if (!s) s = std::make_shared<ResultEntry>();
    slot = s;
  }
  std::call_once(slot->computed, [&] {
    slot->outputs = std::make_shared<const SceneOutputs>(run_pipeline(bundle(entry), params));
  });
  return slot->outputs;
}

HttpResponse SceneService::list_scenes() const {
  Json arr = Json::array();
  for (const auto& id : ids_) {
    const auto& e = *scenes_.at(id);
    arr.push_back({{"id", id}, {"width", e.dims.width}, {"height", e.dims.height}});
  }
  return json_response(200, arr);
}

HttpResponse SceneService::layer(const std::string& scene_id, const std::string& layer,
                                 const std::string& format) const {
  const auto* entry = find_scene(scene_id);
  if (!entry) return error_response(404, "unknown scene '" + scene_id + "'");
  try {
    if (layer == "semantic") return png_response(png::read_file(entry->paths.semantic));
    if (layer != "enhanced" && layer != "instance" && layer != "panoptic") {
      return error_response(400, "unknown layer '" + layer + "'");
    }
    const auto out = outputs(*entry, options_.defaults, params_key(options_.defaults));
    if (layer == "enhanced") return png_response(encode_label_map(out->enhanced.enhanced));
    const auto& map = layer == "instance" ? out->instances : out->panoptic;
    if (format == "color") {
      const auto& scene = bundle(*entry);
      if (scene.image_path) {
        const auto backdrop = load_rgb_image(*scene.image_path);
        if (backdrop.dims == scene.dims()) return png_response(encode_segment_colors(map, &backdrop));
      }
      return png_response(encode_segment_colors(map));
    }
    return png_response(encode_id_grid(map.id_grid));
  } catch (const Error& e) {
    logger()->error("layer {}/{}: {}", scene_id, layer, e.what());
    return error_response(500, e.what());
  }
}

HttpResponse SceneService::prompt(const std::string& scene_id, const std::string& body) const {
  const auto* entry = find_scene(scene_id);
  if (!entry) return error_response(404, "unknown scene '" + scene_id + "'");
  Prompt prompt;
  PipelineParams params;
  int samples = kDefaultMaskSamples;
  try {
    const Json request = Json::parse(body);
    if (!request.is_object()) return error_response(400, "request body must be a JSON object");
    prompt = prompt_from_json(request, entry->dims);
    params = params_from_json(request.value("params", Json(nullptr)), options_.defaults, &samples);
  } catch (const Json::exception& e) {
    return error_response(400, std::string("malformed request: ") + e.what());
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  try {
    const auto out = outputs(*entry, params, params_key(params));
    const auto& scene = bundle(*entry);
    const auto result = promptable_segment(scene, out->enhanced.enhanced, out->panoptic, prompt, samples);
    Json response = prompt_result_to_json(result, scene);
    response["scene_id"] = scene_id;
    return json_response(200, response);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kOutOfBounds:
      case ErrorCode::kEmptyMask:
      case ErrorCode::kInvalidArgument: return error_response(400, e.what());
      default:
        logger()->error("prompt {}: {}", scene_id, e.what());
        return error_response(500, e.what());
    }
  }
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  const SceneService& service;
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(const SceneService& service) : impl_(new Impl{service, {}}) {
  auto& srv = impl_->server;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Get("/scenes", [this](const httplib::Request&, httplib::Response& res) {
    send(res, impl_->service.list_scenes());
  });
  srv.Get(R"(/scenes/([^/]+)/layers)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string layer = req.has_param("layer") ? req.get_param_value("layer") : "semantic";
    const std::string format = req.has_param("format") ? req.get_param_value("format") : "";
    send(res, impl_->service.layer(req.matches[1], layer, format));
  });
  srv.Post(R"(/scenes/([^/]+)/prompt)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, impl_->service.prompt(req.matches[1], req.body));
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port, const std::function<void(int)>& on_ready) {
  auto& srv = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
    if (bound < 0) return false;
  } else if (!srv.bind_to_port(host, port)) {
    return false;
  }
  if (on_ready) on_ready(bound);
  return srv.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace foodfuse
