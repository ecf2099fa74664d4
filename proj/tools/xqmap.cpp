#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xqmap/config.hpp"
#include "xqmap/explainer.hpp"
#include "xqmap/llm_bridge.hpp"
#include "xqmap/persistence.hpp"
#include "xqmap/service.hpp"
#include "xqmap/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace xqmap;

namespace {

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path + " is not valid JSON: " + e.what());
  }
}

void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
  } else {
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_file(path, text);
  }
}

RepoConfig config_or_default(const std::string& path) { return path.empty() ? RepoConfig{} : load_repo_config(path); }

ScenarioConfig pick_scenario(const RepoConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.scenario;
  const Scenario s = scenario_from_string(name);
  return s == cfg.scenario.scenario ? cfg.scenario : ScenarioConfig::defaults_for(s);
}

Pixel parse_pixel(const std::string& text) {
  int u = 0, v = 0;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> u >> comma >> v) || comma != ',' || !in.eof()) throw FormatError("pixel must look like u,v: " + text);
  return {u, v};
}

std::pair<std::string, std::string> parse_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == text.size()) {
    throw FormatError("pair must look like Selected,A: " + text);
  }
  return {text.substr(0, comma), text.substr(comma + 1)};
}

std::string rate_line(const std::string& name, const EvalReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s: %.2f%% +/- %.2f%% over %zu runs (%lld/%lld correct)\n", name.c_str(),
                100.0 * r.mean, 100.0 * r.stddev, r.run_rates.size(), static_cast<long long>(r.correct),
                static_cast<long long>(r.decisions));
  return buf;
}

QMapProvider provider_from(const std::string& checkpoint, const std::string& qmaps, json& info,
                           std::optional<ScenarioConfig>& scenario) {
  if (!qmaps.empty()) {
    QMapSet q = qmaps_from_json(parse_json_file(qmaps));
    info = {{"source", "qmaps"}, {"components", q.names}, {"weights", q.weights}};
    return fixed_provider(std::move(q));
  }
  auto ckpt = std::make_shared<const Checkpoint>(load_checkpoint(checkpoint));
  info = {{"source", "checkpoint"},
          {"mode", to_string(ckpt->config.mode)},
          {"components", ckpt->approximator->component_names()},
          {"weights", ckpt->approximator->weights()},
          {"step", ckpt->step}};
  scenario = ckpt->scenario;
  return checkpoint_provider(ckpt);
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decomposed Q-Map training, evaluation and explanation"};
  app.require_subcommand(1);

  // gen-scene
  std::string gen_scenario, gen_out = "-", gen_config;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen-scene", "Generate a scene file");
  gen->add_option("--scenario", gen_scenario, "grasp or land (default: the config scenario)")->check(CLI::IsMember({"grasp", "land"}));
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output path, - for stdout");
  gen->add_option("--config", gen_config, "Config file with scenario settings")->check(CLI::ExistingFile);

  // train
  std::string train_config, train_mode, train_out, train_metrics, train_scenario;
  std::optional<std::int64_t> train_steps;
  std::optional<std::uint64_t> train_seed, train_toy_seed;
  auto* tr = app.add_subcommand("train", "Train a Q-Map model and write a checkpoint");
  tr->add_option("--config", train_config, "Config file")->check(CLI::ExistingFile);
  tr->add_option("--mode", train_mode, "decomposed or monolithic")
      ->check(CLI::IsMember({"decomposed", "monolithic"}));
  tr->add_option("--out", train_out, "Checkpoint path")->required();
  tr->add_option("--metrics", train_metrics, "Per-episode metrics (JSON lines); default <out>.metrics.jsonl");
  tr->add_option("--scenario", train_scenario, "Override the config scenario")
      ->check(CLI::IsMember({"grasp", "land"}));
  tr->add_option("--steps", train_steps, "Override train.total_steps");
  tr->add_option("--seed", train_seed, "Override train.seed");
  tr->add_option("--toy-seed", train_toy_seed, "Train on a random 12-state, 4-action, 2-component toy MDP");

  // eval
  std::string eval_checkpoint, eval_report, eval_policy = "greedy", eval_config;
  std::optional<int> eval_runs, eval_decisions;
  std::optional<std::uint64_t> eval_seed;
  auto* ev = app.add_subcommand("eval", "Correct-choice rate of a checkpoint");
  ev->add_option("--checkpoint", eval_checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  ev->add_option("--runs", eval_runs, "Evaluation runs (default 10)");
  ev->add_option("--decisions", eval_decisions, "Decisions per run (default 20)");
  ev->add_option("--seed", eval_seed, "Evaluation seed");
  ev->add_option("--policy", eval_policy, "greedy, oracle or random")
      ->check(CLI::IsMember({"greedy", "oracle", "random"}));
  ev->add_option("--report", eval_report, "JSON report path");
  ev->add_option("--config", eval_config, "Config file (eval section)")->check(CLI::ExistingFile);

  // explain
  std::string ex_checkpoint, ex_qmaps, ex_scene, ex_out_dir = "explanation";
  std::vector<std::string> ex_pairs, ex_pixels;
  auto* ex = app.add_subcommand("explain", "Explain the greedy choice in a scene");
  auto* ex_ck = ex->add_option("--checkpoint", ex_checkpoint, "Checkpoint path")->check(CLI::ExistingFile);
  auto* ex_q = ex->add_option("--qmaps", ex_qmaps, "Q-Map set JSON instead of a checkpoint")->check(CLI::ExistingFile);
  ex_ck->excludes(ex_q);
  ex->add_option("--scene", ex_scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  ex->add_option("--pair", ex_pairs, "Extra contrast pair, e.g. A,Selected");
  ex->add_option("--pixel", ex_pixels, "Extra candidate pixel u,v (labelled P1, P2, ...)");
  ex->add_option("--out-dir", ex_out_dir, "Output directory");

  // chat
  std::string chat_bundle, chat_question, chat_transcript, chat_config, chat_endpoint, chat_model, chat_cred;
  std::optional<double> chat_timeout;
  bool chat_stub = false, chat_remote = false;
  auto* ch = app.add_subcommand("chat", "Ask a question about an explanation bundle");
  ch->add_option("--bundle", chat_bundle, "Explanation bundle JSON")->required()->check(CLI::ExistingFile);
  ch->add_option("--question", chat_question, "Question text")->required();
  auto* ch_stub = ch->add_flag("--stub", chat_stub, "Offline deterministic answers (default)");
  auto* ch_remote = ch->add_flag("--remote", chat_remote, "Use the configured chat-completion endpoint");
  ch_stub->excludes(ch_remote);
  ch->add_option("--transcript", chat_transcript, "Transcript JSON to continue and update");
  ch->add_option("--config", chat_config, "Config file (chat section)")->check(CLI::ExistingFile);
  ch->add_option("--endpoint", chat_endpoint, "Chat-completion URL");
  ch->add_option("--model", chat_model, "Model identifier");
  ch->add_option("--credential-env", chat_cred, "Name of the environment variable holding the API key");
  ch->add_option("--timeout", chat_timeout, "Request timeout in seconds");

  // serve
  std::string sv_checkpoint, sv_qmaps, sv_config, sv_host, sv_scene;
  std::optional<int> sv_port;
  std::optional<std::uint64_t> sv_seed;
  bool sv_remote = false;
  auto* sv = app.add_subcommand("serve", "Run the HTTP API");
  auto* sv_ck = sv->add_option("--checkpoint", sv_checkpoint, "Checkpoint path")->check(CLI::ExistingFile);
  auto* sv_q = sv->add_option("--qmaps", sv_qmaps, "Serve a fixed Q-Map set")->check(CLI::ExistingFile);
  sv_ck->excludes(sv_q);
  sv->add_option("--config", sv_config, "Config file")->check(CLI::ExistingFile);
  sv->add_option("--host", sv_host, "Bind address");
  sv->add_option("--port", sv_port, "Port (0 picks a free one)");
  sv->add_option("--seed", sv_seed, "Generate an initial scene with this seed");
  sv->add_option("--scene", sv_scene, "Initial scene JSON")->check(CLI::ExistingFile);
  sv->add_flag("--remote", sv_remote, "Answer /chat with the remote endpoint instead of the stub");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    if (*gen) {
      const RepoConfig cfg = config_or_default(gen_config);
      const GridScene scene = generate_scene(gen_seed, pick_scenario(cfg, gen_scenario));
      emit(gen_out, canonical_dump(scene_to_json(scene)));
      if (gen_out != "-") std::cout << json{{"scene", gen_out}, {"scene_id", to_hex(scene.digest())}}.dump() << "\n";
      return 0;
    }

    if (*tr) {
      RepoConfig cfg = config_or_default(train_config);
      if (!train_mode.empty()) cfg.train.mode = train_mode_from_string(train_mode);
      if (train_steps) cfg.train.total_steps = *train_steps;
      if (train_seed) cfg.train.seed = *train_seed;
      if (!train_scenario.empty()) cfg.scenario = pick_scenario(cfg, train_scenario);
      cfg.validate();

      EnvFactory factory;
      if (train_toy_seed) {
        ToyMdp mdp = ToyMdp::random(*train_toy_seed, 12, 4, 2, 0.3);
        factory = [mdp] { return std::make_unique<ToyMdpEnvironment>(mdp); };
      } else {
        factory = scene_env_factory(cfg.scenario);
      }
      const std::string metrics_path = train_metrics.empty() ? train_out + ".metrics.jsonl" : train_metrics;
      if (auto parent = fs::path(metrics_path).parent_path(); !parent.empty()) fs::create_directories(parent);
      std::ofstream metrics(metrics_path, std::ios::trunc);
      if (!metrics) throw IoError("cannot write " + metrics_path);
      auto sink = [&metrics](const EpisodeMetrics& m) { metrics << to_json(m).dump() << "\n"; };
      Checkpoint ckpt = train(factory, cfg.train, sink);
      emit(train_out, canonical_dump(checkpoint_to_json(ckpt)));
      std::cout << json{{"checkpoint", train_out},
                        {"metrics", metrics_path},
                        {"mode", to_string(cfg.train.mode)},
                        {"steps", ckpt.step},
                        {"episodes", ckpt.metrics.size()}}
                       .dump()
                << "\n";
      return 0;
    }

    if (*ev) {
      const Checkpoint ckpt = load_checkpoint(eval_checkpoint);
      EvalConfig ecfg = config_or_default(eval_config).eval;
      if (eval_runs) ecfg.runs = *eval_runs;
      if (eval_decisions) ecfg.decisions_per_run = *eval_decisions;
      if (eval_seed) ecfg.seed = *eval_seed;
      if (!ckpt.scenario) throw FormatError("checkpoint was not trained on a scene scenario");
      const EnvFactory factory = scene_env_factory(*ckpt.scenario);
      EvalReport report;
      if (eval_policy == "oracle") {
        report = evaluate_policy(oracle_policy(), factory, ecfg);
      } else if (eval_policy == "random") {
        report = evaluate_policy(random_policy(mix_seed(ecfg.seed, 99)), factory, ecfg);
      } else {
        report = evaluate(ckpt, factory, ecfg);
      }
      std::cout << rate_line(eval_policy + " (" + to_string(ckpt.config.mode) + ", " +
                                 to_string(ckpt.scenario->scenario) + ")",
                             report);
      if (!eval_report.empty()) {
        json j = to_json(report);
        j["policy"] = eval_policy;
        j["mode"] = to_string(ckpt.config.mode);
        j["scenario"] = to_string(ckpt.scenario->scenario);
        j["eval"] = to_json(ecfg);
        emit(eval_report, canonical_dump(j));
      }
      return 0;
    }

    if (*ex) {
      if (ex_checkpoint.empty() && ex_qmaps.empty()) throw ConfigError("explain needs --checkpoint or --qmaps");
      json info;
      std::optional<ScenarioConfig> unused;
      const QMapProvider provider = provider_from(ex_checkpoint, ex_qmaps, info, unused);
      const GridScene scene = scene_from_json(parse_json_file(ex_scene));
      ExplainOptions opts;
      for (const auto& p : ex_pixels) opts.extra_pixels.push_back(parse_pixel(p));
      for (const auto& p : ex_pairs) opts.extra_pairs.push_back(parse_pair(p));
      const QMapSet q = provider(scene);
      const ExplanationBundle bundle = explain(q, scene, opts);
      const ChartRender chart = render_chart(bundle.candidates, bundle.rdx);

      fs::create_directories(ex_out_dir);
      const fs::path dir(ex_out_dir);
      write_file((dir / "bundle.json").string(), canonical_dump(bundle_to_json(bundle)));
      write_file((dir / "values.svg").string(), chart.values_svg);
      write_file((dir / "rdx.svg").string(), chart.rdx_svg);
      json rdx = json::array();
      for (const auto& r : bundle.rdx) {
        json d = json::object();
        for (std::size_t k = 0; k < r.deltas.size(); ++k) d[bundle.candidates.component_names[k]] = r.deltas[k];
        rdx.push_back({{"pair", {r.first, r.second}}, {"deltas", d}});
      }
      write_file((dir / "rdx.json").string(), canonical_dump(rdx));
      std::string texts = bundle.shallow_text + "\n";
      for (const auto& t : bundle.contrastive_texts) texts += "(" + t.first + ", " + t.second + ") " + t.text + "\n";
      write_file((dir / "texts.txt").string(), texts);
      std::cout << bundle.shallow_text << "\n";
      for (const auto& [first, second] : opts.extra_pairs) std::cout << template_contrastive(bundle, first, second) << "\n";
      return 0;
    }

    if (*ch) {
      ChatClientConfig ccfg = config_or_default(chat_config).chat;
      if (chat_remote) ccfg.mode = ChatMode::Remote;
      if (chat_stub) ccfg.mode = ChatMode::Stub;
      if (!chat_endpoint.empty()) ccfg.endpoint = chat_endpoint;
      if (!chat_model.empty()) ccfg.model = chat_model;
      if (!chat_cred.empty()) ccfg.credential_env = chat_cred;
      if (chat_timeout) ccfg.timeout_seconds = *chat_timeout;
      ccfg.validate();

      const ExplanationBundle bundle = bundle_from_json(parse_json_file(chat_bundle));
      const std::string transcript_path =
          chat_transcript.empty() ? (fs::path(chat_bundle).parent_path() / "transcript.json").string()
                                  : chat_transcript;
      PromptBundle conversation = build_prompt(bundle.scenario, bundle);
      if (fs::exists(transcript_path)) {
        Transcript old = transcript_from_json(parse_json_file(transcript_path));
        if (old.scene_id == bundle.scene_id && !old.conversation.messages.empty() &&
            old.conversation.system_text == conversation.system_text) {
          conversation = std::move(old.conversation);
        }
      }
      ChatReply r = chat(ccfg, conversation, chat_question, bundle);
      const Transcript t{bundle.scene_id, ccfg.mode == ChatMode::Stub ? "stub" : "remote", r.conversation};
      emit(transcript_path, canonical_dump(to_json(t)));
      std::cout << r.answer << "\n";
      return 0;
    }

    if (*sv) {
      RepoConfig cfg = config_or_default(sv_config);
      if (sv_remote) cfg.chat.mode = ChatMode::Remote;
      if (!sv_host.empty()) cfg.service.host = sv_host;
      if (sv_port) cfg.service.port = *sv_port;
      if (sv_checkpoint.empty() && sv_qmaps.empty()) throw ConfigError("serve needs --checkpoint or --qmaps");
      ServiceOptions opts;
      std::optional<ScenarioConfig> trained;
      QMapProvider provider = provider_from(sv_checkpoint, sv_qmaps, opts.model_info, trained);
      opts.scenario = trained ? *trained : cfg.scenario;
      opts.chat = cfg.chat;
      Service service(std::move(provider), opts);
      auto boot = [&](const json& req) {
        HttpResponse r = service.handle("POST", "/scene", req.dump());
        if (r.status != 200) throw ConfigError("initial scene rejected: " + r.body);
      };
      if (!sv_scene.empty()) {
        boot({{"scene", parse_json_file(sv_scene)}});
      } else if (sv_seed) {
        boot({{"seed", *sv_seed}});
      }
      const int port = service.bind(cfg.service.host, cfg.service.port);
      std::cout << json{{"listening", cfg.service.host}, {"port", port}}.dump() << std::endl;
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.serve();
      g_service = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
