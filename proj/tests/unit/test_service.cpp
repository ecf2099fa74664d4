#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "oracles.hpp"
#include "xqmap/config.hpp"
#include "xqmap/persistence.hpp"
#include "xqmap/service.hpp"

using namespace xqmap;
using json = nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("xqmap_test_" + name)).string();
}

Checkpoint small_checkpoint(Scenario scenario, ApproximatorKind kind, std::int64_t steps) {
  ScenarioConfig sc = ScenarioConfig::defaults_for(scenario);
  sc.width = sc.height = 12;
  TrainConfig cfg;
  cfg.approximator = kind;
  cfg.total_steps = steps;
  cfg.hidden1 = 4;
  cfg.hidden2 = 4;
  cfg.batch_size = 4;
  cfg.target_copy_period = 10;
  cfg.seed = 5;
  if (kind == ApproximatorKind::Tabular) cfg.learning_rate = 0.5;
  return train(scene_env_factory(sc), cfg);
}

json body(const HttpResponse& r) { return json::parse(r.body); }

Service worked_service(ChatClientConfig chat = {}) {
  ServiceOptions o;
  o.chat = chat;
  return Service(fixed_provider(oracle::worked_example().qmaps), o);
}

std::string worked_scene_request() { return json{{"scene", scene_to_json(oracle::worked_example().scene)}}.dump(); }

}  // namespace

TEST_CASE("repository config") {
  const RepoConfig defaults = repo_config_from_json(json::object());
  CHECK(defaults.service.port == 8080);
  CHECK(defaults.train.gamma == 0.9);
  CHECK(defaults.chat.mode == ChatMode::Stub);
  const RepoConfig back = repo_config_from_json(to_json(defaults));
  CHECK(to_json(back) == to_json(defaults));

  CHECK_THROWS_AS(repo_config_from_json(json{{"trian", json::object()}}), ConfigError);
  CHECK_THROWS_AS(repo_config_from_json(json{{"train", {{"gama", 0.5}}}}), ConfigError);
  CHECK_THROWS_AS(repo_config_from_json(json{{"train", {{"weights", {1.0, 2.0, 3.0}}}}}), ConfigError);
  CHECK_THROWS_AS(repo_config_from_json(json{{"eval", {{"runs", 0}}}}), ConfigError);
  CHECK_THROWS_AS(repo_config_from_json(json{{"service", {{"port", 70000}}}}), ConfigError);
  CHECK_THROWS_AS(repo_config_from_json(json{{"train", {{"gamma", "high"}}}}), ConfigError);
  CHECK_THROWS_AS(load_repo_config(temp_path("does_not_exist.json")), IoError);

  const RepoConfig land = repo_config_from_json(json{{"scenario", {{"scenario", "land"}}}});
  CHECK(land.scenario.scenario == Scenario::Land);
  CHECK(land.scenario.properties[0].name == "flat");
}

TEST_CASE("checkpoint round trip") {
  for (auto kind : {ApproximatorKind::Conv, ApproximatorKind::Tabular}) {
    const Checkpoint c = small_checkpoint(Scenario::Grasp, kind, 40);
    const std::string path = temp_path(kind == ApproximatorKind::Conv ? "conv.ckpt.json" : "tab.ckpt.json");
    save_checkpoint(c, path);
    const Checkpoint back = load_checkpoint(path);
    std::remove(path.c_str());
    CHECK(back.step == c.step);
    CHECK(back.reward_components == c.reward_components);
    CHECK(checkpoint_to_json(back) == checkpoint_to_json(c));
    ScenarioConfig sc = *c.scenario;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Observation o = observe(generate_scene(seed, sc));
      CHECK(back.approximator->predict(o).maps == c.approximator->predict(o).maps);
    }
  }
}

TEST_CASE("checkpoint loading rejects bad input") {
  const Checkpoint c = small_checkpoint(Scenario::Land, ApproximatorKind::Conv, 0);
  json j = checkpoint_to_json(c);
  CHECK(j.at("manifest").at("K") == 2);
  CHECK(j.at("manifest").at("layer_shapes").size() > 0);

  json v = j;
  v["manifest"]["format_version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(v), FormatError);
  json p = j;
  p["payload"].erase(p["payload"].size() - 1);
  CHECK_THROWS_AS(checkpoint_from_json(p), FormatError);
  json m = j;
  m["manifest"]["mode"] = "monolithic";
  CHECK_THROWS_AS(checkpoint_from_json(m), FormatError);
  json b = j;
  b["payload"][0] = "@@@@";
  CHECK_THROWS_AS(checkpoint_from_json(b), FormatError);

  const std::string path = temp_path("garbage.json");
  write_file(path, "{not json");
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.json")), IoError);
}

TEST_CASE("Q-Map JSON round trip") {
  const auto t = oracle::worked_example();
  const json j = qmaps_to_json(t.qmaps, Primitive::PickUp);
  CHECK(j.at("width") == 5);
  CHECK(j.at("height") == 4);
  CHECK(j.at("selected").at("pixel") == json{t.selected.u, t.selected.v});
  const QMapSet back = qmaps_from_json(j);
  CHECK(back.maps == t.qmaps.maps);
  json bad = j;
  bad["maps"][0].erase(0);
  CHECK_THROWS_AS(qmaps_from_json(bad), FormatError);
}

TEST_CASE("service without a scene") {
  Service s = worked_service();
  CHECK(s.handle("GET", "/health", "").status == 200);
  CHECK(body(s.handle("GET", "/health", "")).at("scene_loaded") == false);
  for (auto [m, p] : std::vector<std::pair<std::string, std::string>>{
           {"GET", "/scene"}, {"GET", "/qmaps"}, {"POST", "/act"}, {"POST", "/explain"}}) {
    const auto r = s.handle(m, p, "{}");
    CHECK(r.status == 404);
    CHECK(body(r).at("error") == "no_scene");
  }
  CHECK(s.handle("GET", "/nowhere", "").status == 404);
  CHECK(s.handle("DELETE", "/scene", "").status == 405);
  CHECK(s.handle("POST", "/scene", "{oops").status == 400);
  CHECK(s.handle("POST", "/scene", "[1,2]").status == 400);
  CHECK(s.handle("POST", "/scene", "{}").status == 400);
}

TEST_CASE("service explains the loaded scene like the library does") {
  Service s = worked_service();
  const auto t = oracle::worked_example();
  const auto loaded = s.handle("POST", "/scene", worked_scene_request());
  REQUIRE(loaded.status == 200);
  const std::string scene_id = body(loaded).at("scene_id");
  CHECK(scene_id == to_hex(t.scene.digest()));

  const auto q = s.handle("GET", "/qmaps", "");
  REQUIRE(q.status == 200);
  CHECK(body(q).at("width") == 5);
  CHECK(body(q).at("height") == 4);
  CHECK(body(q).at("maps").size() == 2);
  CHECK(body(q).at("scene_id") == scene_id);

  const auto e = s.handle("POST", "/explain", "{}");
  REQUIRE(e.status == 200);
  CHECK(e.body == canonical_dump(bundle_to_json(explain(t.qmaps, t.scene))));
  CHECK(s.handle("POST", "/explain", "{}").body == e.body);

  const auto extra = s.handle("POST", "/explain", R"({"pixels": [[4, 3]], "pairs": [["B", "P1"]]})");
  REQUIRE(extra.status == 200);
  CHECK(body(extra).at("candidates").size() == 3);
  CHECK(s.handle("POST", "/explain", R"({"pairs": [["B", "Nope"]]})").status == 400);
  CHECK(body(s.handle("POST", "/explain", R"({"pixels": [[40, 3]]})")).at("error") == "bounds");
}

TEST_CASE("service acts greedily and by pixel") {
  Service s = worked_service();
  REQUIRE(s.handle("POST", "/scene", worked_scene_request()).status == 200);
  const auto t = oracle::worked_example();

  const auto a = s.handle("POST", "/act", "{}");
  REQUIRE(a.status == 200);
  const json out = body(a);
  CHECK(out.at("greedy") == true);
  CHECK(out.at("action").at("pixel") == json{t.selected.u, t.selected.v});
  CHECK(out.at("reward").at("names") == json{"color", "shape"});
  CHECK(out.at("scene_id") != to_hex(t.scene.digest()));
  const json scene = body(s.handle("GET", "/scene", ""));
  CHECK(scene.at("history").size() == 1);

  const auto miss = s.handle("POST", "/act", R"({"pixel": [4, 0]})");
  REQUIRE(miss.status == 200);
  CHECK(body(miss).at("greedy") == false);
  CHECK(body(miss).at("reward").at("total") == 0.0);
  CHECK(s.handle("POST", "/act", R"({"pixel": [9, 9]})").status == 400);
  CHECK(s.handle("POST", "/act", R"({"pixel": "x"})").status == 400);
}

TEST_CASE("landing ends the episode") {
  auto ckpt = std::make_shared<const Checkpoint>(small_checkpoint(Scenario::Land, ApproximatorKind::Conv, 0));
  ServiceOptions o;
  o.scenario = *ckpt->scenario;
  Service s(checkpoint_provider(ckpt), o);
  REQUIRE(s.handle("POST", "/scene", R"({"seed": 3})").status == 200);
  const auto first = s.handle("POST", "/act", "{}");
  REQUIRE(first.status == 200);
  CHECK(body(first).at("done") == true);
  const auto again = s.handle("POST", "/act", "{}");
  CHECK(again.status == 409);
  CHECK(body(again).at("error") == "episode_finished");
  CHECK(body(s.handle("GET", "/scene", "")).at("done") == true);

  // A fresh scene restarts the episode.
  REQUIRE(s.handle("POST", "/scene", R"({"seed": 4})").status == 200);
  CHECK(s.handle("POST", "/act", "{}").status == 200);
  // Grasp observations carry more channels than this land model reads.
  CHECK(s.handle("POST", "/scene", R"({"seed": 1, "scenario": "grasp"})").status == 400);
}

TEST_CASE("service chat keeps one conversation per scene") {
  Service s = worked_service();
  CHECK(s.handle("POST", "/chat", R"({"question": "why?"})").status == 404);
  REQUIRE(s.handle("POST", "/scene", worked_scene_request()).status == 200);
  CHECK(s.handle("POST", "/chat", "{}").status == 400);

  const auto r1 = s.handle("POST", "/chat", R"({"question": "why is pixel Selected chosen to pick up?"})");
  REQUIRE(r1.status == 200);
  const json j1 = body(r1);
  CHECK(j1.at("kind") == "shallow");
  CHECK(j1.at("answer").get<std::string>().find("highest Q-value overall") != std::string::npos);
  CHECK(j1.at("conversation").at("messages").size() == 3);

  const json j2 = body(s.handle("POST", "/chat", R"({"question": "why is pixel Selected preferred over pixel B?"})"));
  CHECK(j2.at("kind") == "contrastive");
  CHECK(j2.at("conversation").at("messages").size() == 5);
  CHECK(j2.at("conversation").at("messages")[2] == j1.at("conversation").at("messages")[2]);

  REQUIRE(s.handle("POST", "/scene", worked_scene_request()).status == 200);
  CHECK(body(s.handle("POST", "/chat", R"({"question": "why is pixel A chosen?"})")).at("conversation").at("messages").size() == 3);
}

TEST_CASE("remote chat without a credential is a gateway error") {
  ChatClientConfig c;
  c.mode = ChatMode::Remote;
  c.endpoint = "http://127.0.0.1:9/v1/chat/completions";
  c.credential_env = "XQMAP_TEST_UNSET_KEY";
  ::unsetenv("XQMAP_TEST_UNSET_KEY");
  Service s = worked_service(c);
  REQUIRE(s.handle("POST", "/scene", worked_scene_request()).status == 200);
  const auto r = s.handle("POST", "/chat", R"({"question": "why is pixel Selected chosen?"})");
  CHECK(r.status == 502);
  CHECK(body(r).at("error") == "missing_credential");
}

TEST_CASE("service over a real socket") {
  Service s = worked_service();
  const int port = s.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  CHECK(s.bound_port() == port);
  std::thread server([&] { s.serve(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5, 0);
  auto health = client.Get("/health");
  for (int i = 0; i < 50 && !health; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    health = client.Get("/health");
  }
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body).at("status") == "ok");

  auto loaded = client.Post("/scene", worked_scene_request(), "application/json");
  REQUIRE(loaded);
  CHECK(loaded->status == 200);
  auto explained = client.Post("/explain", "{}", "application/json");
  REQUIRE(explained);
  CHECK(explained->body == s.handle("POST", "/explain", "{}").body);
  auto missing = client.Get("/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body).at("error") == "not_found");

  s.stop();
  server.join();
}
