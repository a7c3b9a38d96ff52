#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "foodfuse/pipeline.hpp"
#include "foodfuse/prompt.hpp"

namespace foodfuse {

struct ServeOptions {
  std::string data_root;
  /// Defaults to data_root/categories.tsv.
  std::string categories_path;
  bool preload = false;
  PipelineParams defaults;
  MaskLoadOptions mask_options;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Scene registry plus per-(scene, params) result cache. Handlers are
/// thread-safe; first-touch computation is serialized per cache key only.
class SceneService {
 public:
  explicit SceneService(ServeOptions options);
  ~SceneService();

  SceneService(const SceneService&) = delete;
  SceneService& operator=(const SceneService&) = delete;

  const std::vector<std::string>& scene_ids() const { return ids_; }

  HttpResponse list_scenes() const;
  /// layer: semantic | enhanced | instance | panoptic; format "color" gives
  /// the colorized instance/panoptic view.
  HttpResponse layer(const std::string& scene_id, const std::string& layer, const std::string& format = "") const;
  /// Body: {"kind": ..., "geometry": ..., "params": {...}}.
  HttpResponse prompt(const std::string& scene_id, const std::string& body) const;

 private:
  struct SceneEntry;
  struct ResultEntry;

  const SceneEntry* find_scene(const std::string& scene_id) const;
  const SceneBundle& bundle(const SceneEntry& entry) const;
  std::shared_ptr<const SceneOutputs> outputs(const SceneEntry& entry, const PipelineParams& params,
                                              const std::string& key_suffix) const;

  ServeOptions options_;
  CategoryTable categories_;
  std::vector<std::string> ids_;
  std::map<std::string, std::unique_ptr<SceneEntry>> scenes_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, std::shared_ptr<ResultEntry>> cache_;
};

/// Parses the "params" object of a prompt request on top of `base`.
PipelineParams params_from_json(const Json& params, PipelineParams base, int* n_samples = nullptr);

/// Blocking HTTP front end. `on_ready` receives the bound port (useful with
/// port 0) once the socket is listening.
class HttpServer {
 public:
  explicit HttpServer(const SceneService& service);
  ~HttpServer();

  /// Binds and serves until stop(); returns false if binding failed.
  bool listen(const std::string& host, int port, const std::function<void(int)>& on_ready = {});
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace foodfuse
