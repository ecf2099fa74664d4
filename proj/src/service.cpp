#include "xqmap/service.hpp"

#include <httplib.h>

#include "xqmap/persistence.hpp"

namespace xqmap {

namespace {

using json = nlohmann::json;

HttpResponse reply(int status, const json& body) { return {status, canonical_dump(body)}; }

HttpResponse error_reply(int status, const std::string& kind, const std::string& message) {
  return reply(status, {{"error", kind}, {"message", message}});
}

struct NoScene {};

int status_for(const Error& e) {
  const std::string kind = e.kind();
  if (kind == "episode_finished") return 409;
  if (dynamic_cast<const CredentialError*>(&e) || dynamic_cast<const NetworkError*>(&e) ||
      dynamic_cast<const HttpStatusError*>(&e) || dynamic_cast<const MalformedResponseError*>(&e)) {
    return 502;
  }
  if (kind == "nan_loss" || kind == "io") return 500;
  return 400;
}

Pixel pixel_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("pixel must be [u, v]");
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

QMapProvider checkpoint_provider(std::shared_ptr<const Checkpoint> ckpt) {
  if (!ckpt || !ckpt->approximator) throw ContractError("service needs a loaded checkpoint");
  return [ckpt](const GridScene& scene) {
    const Observation obs = observe(scene);
    return ckpt->approximator->predict(obs);
  };
}

QMapProvider fixed_provider(QMapSet q) {
  q.validate();
  return [q](const GridScene& scene) {
    if (scene.width != q.width() || scene.height != q.height()) {
      throw DimensionError("fixed Q-Maps do not match the scene size");
    }
    return q;
  };
}

Service::Service(QMapProvider provider, ServiceOptions options)
    : provider_(std::move(provider)), options_(std::move(options)), snapshot_(std::make_shared<Snapshot>()) {
  options_.scenario.validate();
  options_.chat.validate();
}

Service::~Service() { stop(); }

std::shared_ptr<const Service::Snapshot> Service::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void Service::publish(std::shared_ptr<const Snapshot> next) {
  const bool scene_changed = next->scene_id != snapshot()->scene_id;
  {
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(next);
  }
  if (scene_changed) {
    std::lock_guard lock(cache_mutex_);
    explain_cache_.clear();
  }
}

std::shared_ptr<Service::Snapshot> Service::with_scene(GridScene scene) const {
  auto s = std::make_shared<Snapshot>();
  s->qmaps = provider_(scene);
  s->qmaps.validate();
  if (s->qmaps.width() != scene.width || s->qmaps.height() != scene.height) {
    throw DimensionError("model output does not match the scene size");
  }
  s->scene_id = to_hex(scene.digest());
  s->scene = std::move(scene);
  return s;
}

json Service::scene_payload(const Snapshot& s) const {
  return {{"scene_id", s.scene_id},
          {"scene", scene_to_json(*s.scene)},
          {"done", s.scene->done},
          {"history", s.history}};
}

ExplanationBundle Service::bundle_for(const Snapshot& s, const json& request) const {
  ExplainOptions opts;
  if (request.contains("pixels")) {
    for (const auto& p : request.at("pixels")) opts.extra_pixels.push_back(pixel_from(p));
  }
  if (request.contains("pairs")) {
    for (const auto& p : request.at("pairs")) {
      if (!p.is_array() || p.size() != 2) throw FormatError("pair must be [first, second]");
      opts.extra_pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
  }
  return explain(s.qmaps, *s.scene, opts);
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    json req = json::object();
    if (method == "POST" && !body.empty()) {
      try {
        req = json::parse(body);
      } catch (const json::exception& e) {
        return error_reply(400, "malformed_request", std::string("request body is not JSON: ") + e.what());
      }
      if (!req.is_object()) return error_reply(400, "malformed_request", "request body must be a JSON object");
    }
    auto route = [&](const char* m, const char* p) { return method == m && path == p; };
    if (route("GET", "/health")) return get_health();
    if (route("GET", "/scene")) return get_scene();
    if (route("POST", "/scene")) return post_scene(req);
    if (route("GET", "/qmaps")) return get_qmaps();
    if (route("POST", "/act")) return post_act(req);
    if (route("POST", "/explain")) return post_explain(req);
    if (route("POST", "/chat")) return post_chat(req);
    for (const char* p : {"/health", "/scene", "/qmaps", "/act", "/explain", "/chat"}) {
      if (path == p) return error_reply(405, "method_not_allowed", method + " is not supported on " + path);
    }
    return error_reply(404, "not_found", "no route " + path);
  } catch (const NoScene&) {
    return error_reply(404, "no_scene", "no scene is loaded; POST /scene first");
  } catch (const Error& e) {
    return error_reply(status_for(e), e.kind(), e.what());
  } catch (const json::exception& e) {
    return error_reply(400, "malformed_request", e.what());
  }
}

HttpResponse Service::get_health() {
  auto s = snapshot();
  return reply(200, {{"status", "ok"},
                     {"scene_loaded", s->scene.has_value()},
                     {"model", options_.model_info},
                     {"chat_mode", options_.chat.mode == ChatMode::Stub ? "stub" : "remote"}});
}

HttpResponse Service::get_scene() {
  auto s = snapshot();
  if (!s->scene) throw NoScene{};
  return reply(200, scene_payload(*s));
}

HttpResponse Service::post_scene(const json& req) {
  std::lock_guard lock(writer_);
  GridScene scene;
  if (req.contains("scene")) {
    if (req.contains("seed") || req.contains("scenario")) throw FormatError("give either a scene or a seed");
    scene = scene_from_json(req.at("scene"));
  } else {
    if (!req.contains("seed")) throw FormatError("POST /scene needs a seed or a scene");
    ScenarioConfig cfg = options_.scenario;
    if (req.contains("scenario")) {
      const Scenario wanted = scenario_from_string(req.at("scenario").get<std::string>());
      if (wanted != cfg.scenario) cfg = ScenarioConfig::defaults_for(wanted);
    }
    scene = generate_scene(req.at("seed").get<std::uint64_t>(), cfg);
  }
  auto next = with_scene(std::move(scene));
  json payload = scene_payload(*next);
  publish(std::move(next));
  return reply(200, payload);
}

HttpResponse Service::get_qmaps() {
  auto s = snapshot();
  if (!s->scene) throw NoScene{};
  json payload = qmaps_to_json(s->qmaps, primitive_for(s->scene->scenario));
  payload["scene_id"] = s->scene_id;
  return reply(200, payload);
}

HttpResponse Service::post_act(const json& req) {
  std::lock_guard lock(writer_);
  auto current = snapshot();
  if (!current->scene) throw NoScene{};
  if (current->scene->done) throw EpisodeFinishedError("episode finished; POST /scene to start another");
  const Primitive prim = primitive_for(current->scene->scenario);
  Action action = req.contains("pixel") ? Action{prim, pixel_from(req.at("pixel"))} : select_global(current->qmaps, prim);
  GridScene scene = *current->scene;
  const StepOutcome out = step(scene, action);
  json record = step_outcome_to_json(action, out);
  record["greedy"] = !req.contains("pixel");

  auto next = with_scene(std::move(scene));
  next->history = current->history;
  next->history.push_back(record);
  json payload = record;
  payload["scene_id"] = next->scene_id;
  publish(std::move(next));
  return reply(200, payload);
}

HttpResponse Service::post_explain(const json& req) {
  auto s = snapshot();
  if (!s->scene) throw NoScene{};
  const std::string key = s->scene_id + "|" + req.dump();
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = explain_cache_.find(key); it != explain_cache_.end()) return {200, it->second};
  }
  HttpResponse out = reply(200, bundle_to_json(bundle_for(*s, req)));
  std::lock_guard lock(cache_mutex_);
  explain_cache_.emplace(key, out.body);
  return out;
}

HttpResponse Service::post_chat(const json& req) {
  std::lock_guard lock(writer_);
  auto current = snapshot();
  if (!current->scene) throw NoScene{};
  if (!req.contains("question") || !req.at("question").is_string()) throw FormatError("POST /chat needs a question");
  const std::string question = req.at("question").get<std::string>();
  if (question.empty()) throw FormatError("question is empty");

  const ExplanationBundle bundle = bundle_for(*current, json::object());
  const PromptBundle conversation =
      current->conversation ? *current->conversation : build_prompt(current->scene->scenario, bundle);
  ChatReply r = chat(options_.chat, conversation, question, bundle);

  auto next = std::make_shared<Snapshot>(*current);
  next->conversation = r.conversation;
  json payload = {{"answer", r.answer},
                  {"kind", to_string(classify_question(question))},
                  {"scene_id", current->scene_id},
                  {"conversation", to_json(r.conversation)}};
  publish(std::move(next));
  return reply(200, payload);
}

int Service::bind(const std::string& host, int port) {
  if (server_) throw ContractError("service already bound");
  server_ = std::make_unique<httplib::Server>();
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    HttpResponse r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  for (const char* p : {"/health", "/scene", "/qmaps", "/act", "/explain", "/chat"}) {
    server_->Get(p, forward);
    server_->Post(p, forward);
  }
  server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(canonical_dump({{"error", "not_found"}, {"message", "no route " + req.path}}),
                      "application/json");
    }
  });
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

bool Service::serve() {
  if (!server_) throw ContractError("bind() before serve()");
  return server_->listen_after_bind();
}

bool Service::listen(const std::string& host, int port) {
  bind(host, port);
  return serve();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace xqmap
