#ifndef XQMAP_CONFIG_HPP_
#define XQMAP_CONFIG_HPP_

#include <string>

#include <nlohmann/json.hpp>

#include "xqmap/llm_bridge.hpp"
#include "xqmap/scene.hpp"
#include "xqmap/trainer.hpp"

namespace xqmap {

struct PathsConfig {
  std::string checkpoints = "checkpoints";
  std::string logs = "logs";
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// Everything one command needs. Every section is optional in the file; unknown keys anywhere are rejected.
struct RepoConfig {
  ScenarioConfig scenario;
  TrainConfig train;
  EvalConfig eval;
  ChatClientConfig chat;
  PathsConfig paths;
  ServiceConfig service;

  // Also rejects combinations the trainer would fail on later (e.g. a weight list of the wrong length).
  void validate() const;
};

nlohmann::json to_json(const EvalConfig& c);
EvalConfig eval_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RepoConfig& c);
RepoConfig repo_config_from_json(const nlohmann::json& j);
RepoConfig load_repo_config(const std::string& path);

}  // namespace xqmap

#endif  // XQMAP_CONFIG_HPP_
