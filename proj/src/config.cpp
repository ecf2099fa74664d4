#include "xqmap/config.hpp"

#include "xqmap/json_util.hpp"

namespace xqmap {

using json = nlohmann::json;
using jsonutil::read_opt;
using jsonutil::reject_unknown_keys;

void RepoConfig::validate() const {
  scenario.validate();
  train.validate();
  chat.validate();
  if (eval.runs < 1) throw ConfigError("eval.runs must be >= 1");
  if (eval.decisions_per_run < 1) throw ConfigError("eval.decisions_per_run must be >= 1");
  if (service.port < 0 || service.port > 65535) throw ConfigError("service.port must be in [0, 65535]");
  if (train.mode == TrainMode::Decomposed && !train.weights.empty() &&
      train.weights.size() != scenario.properties.size()) {
    throw ConfigError("train.weights has " + std::to_string(train.weights.size()) + " entries but the scenario has " +
                      std::to_string(scenario.properties.size()) + " reward components");
  }
}

json to_json(const EvalConfig& c) {
  return {{"runs", c.runs}, {"decisions_per_run", c.decisions_per_run}, {"seed", c.seed}};
}

EvalConfig eval_config_from_json(const json& j) {
  reject_unknown_keys(j, {"runs", "decisions_per_run", "seed"}, "eval config");
  EvalConfig c;
  read_opt(j, "runs", c.runs);
  read_opt(j, "decisions_per_run", c.decisions_per_run);
  read_opt(j, "seed", c.seed);
  return c;
}

json to_json(const RepoConfig& c) {
  return {{"scenario", to_json(c.scenario)},
          {"train", to_json(c.train)},
          {"eval", to_json(c.eval)},
          {"chat", to_json(c.chat)},
          {"paths", {{"checkpoints", c.paths.checkpoints}, {"logs", c.paths.logs}}},
          {"service", {{"host", c.service.host}, {"port", c.service.port}}}};
}

RepoConfig repo_config_from_json(const json& j) {
  reject_unknown_keys(j, {"scenario", "train", "eval", "chat", "paths", "service"}, "config");
  RepoConfig c;
  if (j.contains("scenario")) c.scenario = scenario_config_from_json(j.at("scenario"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("eval")) c.eval = eval_config_from_json(j.at("eval"));
  if (j.contains("chat")) c.chat = chat_config_from_json(j.at("chat"));
  if (j.contains("paths")) {
    reject_unknown_keys(j.at("paths"), {"checkpoints", "logs"}, "paths");
    read_opt(j.at("paths"), "checkpoints", c.paths.checkpoints);
    read_opt(j.at("paths"), "logs", c.paths.logs);
  }
  if (j.contains("service")) {
    reject_unknown_keys(j.at("service"), {"host", "port"}, "service");
    read_opt(j.at("service"), "host", c.service.host);
    read_opt(j.at("service"), "port", c.service.port);
  }
  c.validate();
  return c;
}

RepoConfig load_repo_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return repo_config_from_json(j);
}

}  // namespace xqmap
