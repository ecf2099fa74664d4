#ifndef XQMAP_SERVICE_HPP_
#define XQMAP_SERVICE_HPP_

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xqmap/explainer.hpp"
#include "xqmap/llm_bridge.hpp"
#include "xqmap/trainer.hpp"

namespace httplib {
class Server;
}

namespace xqmap {

struct HttpResponse {
  int status = 200;
  std::string body;  // always a JSON document
};

using QMapProvider = std::function<QMapSet(const GridScene&)>;

// Q-Maps from a trained model; the checkpoint is shared read-only.
QMapProvider checkpoint_provider(std::shared_ptr<const Checkpoint> ckpt);
// The same maps for every scene of matching size (inspection of hand-made values).
QMapProvider fixed_provider(QMapSet q);

struct ServiceOptions {
  ScenarioConfig scenario;  // POST /scene generates from this unless the request names another scenario
  ChatClientConfig chat;
  nlohmann::json model_info = nlohmann::json::object();  // echoed by GET /health
};

// Single-session HTTP API over one model and one current scene.
//   GET  /health  GET /scene  POST /scene  GET /qmaps  POST /act  POST /explain  POST /chat
// Mutations are serialized; reads work on the snapshot published by the last mutation.
class Service {
 public:
  Service(QMapProvider provider, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Dispatch without a socket; the HTTP server routes every request through here.
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

  // Blocks until stop(). Port 0 picks a free port (see bound_port()).
  bool listen(const std::string& host, int port);
  // Binds and returns the port; call serve() afterwards (usually on another thread).
  int bind(const std::string& host, int port);
  bool serve();
  void stop();
  int bound_port() const { return port_; }

 private:
  struct Snapshot {
    std::optional<GridScene> scene;
    std::string scene_id;
    QMapSet qmaps;
    std::vector<nlohmann::json> history;
    std::optional<PromptBundle> conversation;
  };

  std::shared_ptr<const Snapshot> snapshot() const;
  void publish(std::shared_ptr<const Snapshot> next);
  std::shared_ptr<Snapshot> with_scene(GridScene scene) const;

  nlohmann::json scene_payload(const Snapshot& s) const;
  ExplanationBundle bundle_for(const Snapshot& s, const nlohmann::json& request) const;

  HttpResponse get_health();
  HttpResponse get_scene();
  HttpResponse post_scene(const nlohmann::json& req);
  HttpResponse get_qmaps();
  HttpResponse post_act(const nlohmann::json& req);
  HttpResponse post_explain(const nlohmann::json& req);
  HttpResponse post_chat(const nlohmann::json& req);

  QMapProvider provider_;
  ServiceOptions options_;

  std::mutex writer_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, std::string> explain_cache_;

  std::unique_ptr<httplib::Server> server_;
  int port_ = -1;
};

}  // namespace xqmap

#endif  // XQMAP_SERVICE_HPP_
