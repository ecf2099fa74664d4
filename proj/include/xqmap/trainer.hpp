#ifndef XQMAP_TRAINER_HPP_
#define XQMAP_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xqmap/approximator.hpp"
#include "xqmap/environment.hpp"

namespace xqmap {

enum class TrainMode { Decomposed, Monolithic };
enum class ApproximatorKind { Conv, Tabular };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::int64_t decay_steps = 1;
};

// Linear from start to end over decay_steps, then held at end.
double epsilon_at(const EpsilonSchedule& schedule, std::int64_t step);

struct TrainConfig {
  double gamma = 0.9;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Negative means 60% of total_steps.
  std::int64_t epsilon_decay_steps = -1;
  int batch_size = 32;
  int replay_capacity = 10000;
  int warmup_steps = 0;
  int train_every = 1;
  int target_copy_period = 250;
  std::int64_t total_steps = 5000;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::Decomposed;
  ApproximatorKind approximator = ApproximatorKind::Conv;
  int hidden1 = 16;
  int hidden2 = 16;
  // Selection weights per component; empty means all ones.
  std::vector<double> weights;

  EpsilonSchedule epsilon_schedule() const;
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Transition {
  std::shared_ptr<const Observation> observation;
  Action action;
  RewardVector reward;
  std::shared_ptr<const Observation> next_observation;
  bool done = false;
};

// Fixed-capacity ring; once full, each push evicts the oldest transition.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // Uniform draw with replacement.
  std::vector<const Transition*> sample(std::size_t n);
  // Index 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
  std::mt19937_64 rng_;
};

// y_k = r_k + gamma * Q_target_k(s', a*) with a* = argmax of the online composite at s';
// y_k = r_k for terminal transitions.
std::vector<std::vector<double>> td_targets(std::span<const Transition* const> batch, const Approximator& online,
                                            const Approximator& target, double gamma);

struct EpisodeMetrics {
  std::int64_t episode = 0;
  int steps = 0;
  double total_reward = 0.0;
  std::vector<double> per_component_reward;
  double epsilon = 0.0;
  double loss_mean = 0.0;
};

nlohmann::json to_json(const EpisodeMetrics& m);

struct Checkpoint {
  TrainConfig config;
  std::optional<ScenarioConfig> scenario;
  std::vector<std::string> reward_components;
  std::unique_ptr<Approximator> approximator;
  Primitive primitive = Primitive::PickUp;
  std::int64_t step = 0;
  std::vector<EpisodeMetrics> metrics;

  Checkpoint() = default;
  Checkpoint(Checkpoint&&) = default;
  Checkpoint& operator=(Checkpoint&&) = default;
  Checkpoint clone() const;
};

std::unique_ptr<Approximator> make_approximator(const TrainConfig& cfg, int input_channels,
                                                std::vector<std::string> component_names);

using MetricsSink = std::function<void(const EpisodeMetrics&)>;

// Off-policy Q-learning with replay and a periodically synced target network.
// Decomposed mode learns one map per reward component; monolithic mode learns a single
// "total" map on the summed reward. Deterministic for a fixed cfg.seed.
Checkpoint train(const EnvFactory& make_env, const TrainConfig& cfg, const MetricsSink& sink = {});
Checkpoint train_monolithic(const EnvFactory& make_env, TrainConfig cfg, const MetricsSink& sink = {});

struct EvalConfig {
  int runs = 10;
  int decisions_per_run = 20;
  std::uint64_t seed = 1000003;
};

struct EvalReport {
  std::vector<double> run_rates;
  double mean = 0.0;
  double stddev = 0.0;
  std::int64_t correct = 0;
  std::int64_t decisions = 0;
};

nlohmann::json to_json(const EvalReport& r);

using Policy = std::function<Action(const Observation&, const Environment&)>;

// A decision is correct when its immediate total reward equals the best available in that state.
EvalReport evaluate_policy(const Policy& policy, const EnvFactory& make_env, const EvalConfig& cfg);
// Greedy (epsilon = 0) rollouts of the checkpoint's composite map.
EvalReport evaluate(const Checkpoint& checkpoint, const EnvFactory& make_env, const EvalConfig& cfg);

Policy greedy_policy(const Approximator& approx, Primitive primitive);
Policy oracle_policy();
Policy random_policy(std::uint64_t seed);

}  // namespace xqmap

#endif  // XQMAP_TRAINER_HPP_
