#include "xqmap/environment.hpp"

#include <algorithm>
#include <random>

namespace xqmap {

double Environment::best_immediate_total() const {
  auto totals = immediate_totals();
  return totals.empty() ? 0.0 : *std::max_element(totals.begin(), totals.end());
}

SceneEnvironment::SceneEnvironment(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  cfg_->validate();
  scene_ = generate_scene(0, *cfg_);
}

SceneEnvironment::SceneEnvironment(GridScene fixed) : fixed_(std::move(fixed)), scene_(*fixed_) {}

Observation SceneEnvironment::reset(std::uint64_t seed) {
  scene_ = fixed_ ? *fixed_ : generate_scene(seed, *cfg_);
  return observe(scene_);
}

EnvStep SceneEnvironment::step(const Action& action) {
  StepOutcome out = xqmap::step(scene_, action);
  return {std::move(out.reward), std::move(out.next_observation), out.done};
}

std::vector<double> SceneEnvironment::immediate_totals() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(scene_.width) * scene_.height);
  Primitive prim = primitive();
  for (int v = 0; v < scene_.height; ++v)
    for (int u = 0; u < scene_.width; ++u) out.push_back(sub_rewards(scene_, {prim, {u, v}}).total());
  return out;
}

std::vector<std::string> SceneEnvironment::component_names() const { return scene_.component_names(); }

Primitive SceneEnvironment::primitive() const { return primitive_for(scene_.scenario); }

EnvFactory scene_env_factory(const ScenarioConfig& cfg) {
  cfg.validate();
  return [cfg] { return std::make_unique<SceneEnvironment>(cfg); };
}

EnvFactory fixed_scene_factory(const GridScene& scene) {
  return [scene] { return std::make_unique<SceneEnvironment>(scene); };
}

Observation ToyMdp::observation(int s) const {
  Observation obs;
  obs.width = actions;
  obs.height = 1;
  obs.channels = 1;
  obs.data.assign(static_cast<std::size_t>(actions), static_cast<double>(s + 1));
  return obs;
}

std::vector<std::string> ToyMdp::component_names() const {
  std::vector<std::string> out;
  for (int k = 0; k < components; ++k) out.push_back("r" + std::to_string(k));
  return out;
}

ToyMdp ToyMdp::random(std::uint64_t seed, int states, int actions, int components, double terminal_probability) {
  if (states < 1 || actions < 1 || components < 1) throw ConfigError("toy MDP sizes must be positive");
  ToyMdp mdp;
  mdp.states = states;
  mdp.actions = actions;
  mdp.components = components;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  std::uniform_int_distribution<int> state(0, states - 1);
  std::bernoulli_distribution terminal(terminal_probability);
  std::uniform_int_distribution<int> action(0, actions - 1);
  for (int s = 0; s < states; ++s) {
    bool any_terminal = false;
    for (int a = 0; a < actions; ++a) {
      for (int k = 0; k < components; ++k) mdp.rewards.push_back(reward(rng));
      bool term = terminal(rng);
      any_terminal |= term;
      mdp.next.push_back(term ? -1 : state(rng));
    }
    if (!any_terminal) mdp.next[static_cast<std::size_t>(s) * actions + action(rng)] = -1;
  }
  return mdp;
}

Observation ToyMdpEnvironment::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  state_ = std::uniform_int_distribution<int>(0, mdp_.states - 1)(rng);
  done_ = false;
  return mdp_.observation(state_);
}

EnvStep ToyMdpEnvironment::step(const Action& action) {
  if (done_) throw EpisodeFinishedError("episode already finished");
  if (action.pixel.v != 0 || action.pixel.u < 0 || action.pixel.u >= mdp_.actions) {
    throw BoundsError("toy MDP action outside 1 x " + std::to_string(mdp_.actions) + " grid");
  }
  const int a = action.pixel.u;
  EnvStep out;
  out.reward.names = mdp_.component_names();
  for (int k = 0; k < mdp_.components; ++k) out.reward.values.push_back(mdp_.reward(state_, a, k));
  const int next = mdp_.next_state(state_, a);
  out.done = next < 0;
  done_ = out.done;
  if (!out.done) state_ = next;
  out.observation = mdp_.observation(out.done ? state_ : next);
  return out;
}

std::vector<double> ToyMdpEnvironment::immediate_totals() const {
  std::vector<double> out;
  for (int a = 0; a < mdp_.actions; ++a) {
    double sum = 0.0;
    for (int k = 0; k < mdp_.components; ++k) sum += mdp_.reward(state_, a, k);
    out.push_back(sum);
  }
  return out;
}

}  // namespace xqmap
