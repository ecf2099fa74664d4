#ifndef XQMAP_ENVIRONMENT_HPP_
#define XQMAP_ENVIRONMENT_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xqmap/scene.hpp"

namespace xqmap {

struct EnvStep {
  RewardVector reward;
  Observation observation;
  bool done = false;
};

// Episodic environment over a pixel action space.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual Observation reset(std::uint64_t seed) = 0;
  virtual EnvStep step(const Action& action) = 0;

  // Total immediate reward of every pixel in the current state, row-major.
  virtual std::vector<double> immediate_totals() const = 0;
  double best_immediate_total() const;

  virtual std::vector<std::string> component_names() const = 0;
  virtual Primitive primitive() const = 0;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual int channels() const = 0;
  virtual std::optional<ScenarioConfig> scenario_config() const { return std::nullopt; }
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

// Grid scenes: either freshly generated from the reset seed, or a fixed scene restored on every reset.
class SceneEnvironment final : public Environment {
 public:
  explicit SceneEnvironment(ScenarioConfig cfg);
  explicit SceneEnvironment(GridScene fixed);

  Observation reset(std::uint64_t seed) override;
  EnvStep step(const Action& action) override;
  std::vector<double> immediate_totals() const override;
  std::vector<std::string> component_names() const override;
  Primitive primitive() const override;
  int width() const override { return scene_.width; }
  int height() const override { return scene_.height; }
  int channels() const override { return scene_.observation_channels(); }
  std::optional<ScenarioConfig> scenario_config() const override { return cfg_; }

  const GridScene& scene() const { return scene_; }

 private:
  std::optional<ScenarioConfig> cfg_;
  std::optional<GridScene> fixed_;
  GridScene scene_;
};

EnvFactory scene_env_factory(const ScenarioConfig& cfg);
EnvFactory fixed_scene_factory(const GridScene& scene);

// Finite deterministic MDP with K reward components, used for exact equivalence checks.
// Each state is rendered as a 1 x actions observation whose single channel holds state + 1.
struct ToyMdp {
  int states = 0;
  int actions = 0;
  int components = 0;
  std::vector<double> rewards;  // [state][action][component]
  std::vector<int> next;        // [state][action], -1 means terminal

  double reward(int s, int a, int k) const { return rewards[(static_cast<std::size_t>(s) * actions + a) * components + k]; }
  int next_state(int s, int a) const { return next[static_cast<std::size_t>(s) * actions + a]; }
  Observation observation(int s) const;
  std::vector<std::string> component_names() const;

  // Rewards uniform in [0, 1); every state keeps at least one terminal action.
  static ToyMdp random(std::uint64_t seed, int states, int actions, int components, double terminal_probability);
};

class ToyMdpEnvironment final : public Environment {
 public:
  explicit ToyMdpEnvironment(ToyMdp mdp) : mdp_(std::move(mdp)) {}

  // Starts in a uniformly drawn state so every state gets visited.
  Observation reset(std::uint64_t seed) override;
  EnvStep step(const Action& action) override;
  std::vector<double> immediate_totals() const override;
  std::vector<std::string> component_names() const override { return mdp_.component_names(); }
  Primitive primitive() const override { return Primitive::PickUp; }
  int width() const override { return mdp_.actions; }
  int height() const override { return 1; }
  int channels() const override { return 1; }

  int state() const { return state_; }

 private:
  ToyMdp mdp_;
  int state_ = 0;
  bool done_ = true;
};

}  // namespace xqmap

#endif  // XQMAP_ENVIRONMENT_HPP_
