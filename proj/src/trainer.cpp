#include "xqmap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xqmap/conv_approximator.hpp"

namespace xqmap {

namespace {

using json = nlohmann::json;

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

std::string to_string(ApproximatorKind k) { return k == ApproximatorKind::Conv ? "conv" : "tabular"; }

ApproximatorKind approximator_kind_from(const std::string& s) {
  if (s == "conv") return ApproximatorKind::Conv;
  if (s == "tabular") return ApproximatorKind::Tabular;
  throw ConfigError("unknown approximator '" + s + "' (expected conv or tabular)");
}

RewardVector learning_reward(const RewardVector& raw, TrainMode mode) {
  if (mode == TrainMode::Decomposed) return raw;
  return {{"total"}, {raw.total()}};
}

}  // namespace

std::string to_string(TrainMode m) { return m == TrainMode::Decomposed ? "decomposed" : "monolithic"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "decomposed") return TrainMode::Decomposed;
  if (s == "monolithic") return TrainMode::Monolithic;
  throw ConfigError("unknown mode '" + s + "' (expected decomposed or monolithic)");
}

double epsilon_at(const EpsilonSchedule& schedule, std::int64_t step) {
  if (step < 0) throw ContractError("epsilon schedule step must be non-negative");
  if (schedule.decay_steps <= 0 || step >= schedule.decay_steps) return schedule.end;
  double frac = static_cast<double>(step) / static_cast<double>(schedule.decay_steps);
  return schedule.start + (schedule.end - schedule.start) * frac;
}

EpsilonSchedule TrainConfig::epsilon_schedule() const {
  std::int64_t decay = epsilon_decay_steps >= 0 ? epsilon_decay_steps
                                                : static_cast<std::int64_t>(std::llround(0.6 * total_steps));
  return {epsilon_start, epsilon_end, decay};
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
  if (!(learning_rate > 0.0 && std::isfinite(learning_rate))) throw ConfigError("learning_rate must be positive");
  if (approximator == ApproximatorKind::Tabular && learning_rate > 1.0) {
    throw ConfigError("tabular learning_rate must be at most 1");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw ConfigError("epsilon values must be in [0, 1]");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (replay_capacity < batch_size) throw ConfigError("replay_capacity must be >= batch_size");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
  if (train_every < 1) throw ConfigError("train_every must be >= 1");
  if (target_copy_period < 1) throw ConfigError("target_copy_period must be >= 1");
  if (total_steps < 0) throw ConfigError("total_steps must be >= 0");
  if (hidden1 < 1 || hidden2 < 1) throw ConfigError("hidden widths must be >= 1");
  for (double w : weights)
    if (!(std::isfinite(w) && w >= 0.0)) throw ConfigError("weights must be finite and non-negative");
}

json to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"epsilon_decay_steps", c.epsilon_decay_steps},
          {"batch_size", c.batch_size},
          {"replay_capacity", c.replay_capacity},
          {"warmup_steps", c.warmup_steps},
          {"train_every", c.train_every},
          {"target_copy_period", c.target_copy_period},
          {"total_steps", c.total_steps},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"approximator", to_string(c.approximator)},
          {"hidden", {c.hidden1, c.hidden2}},
          {"weights", c.weights}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const char* kAllowed[] = {"gamma",      "learning_rate", "momentum",    "epsilon_start", "epsilon_end",
                                   "epsilon_decay_steps", "batch_size", "replay_capacity", "warmup_steps",
                                   "train_every", "target_copy_period", "total_steps", "seed", "mode",
                                   "approximator", "hidden", "weights"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kAllowed), std::end(kAllowed), key) == std::end(kAllowed)) {
      throw ConfigError("unknown key '" + key + "' in train config");
    }
  }
  TrainConfig c;
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "momentum", c.momentum);
  read_opt(j, "epsilon_start", c.epsilon_start);
  read_opt(j, "epsilon_end", c.epsilon_end);
  read_opt(j, "epsilon_decay_steps", c.epsilon_decay_steps);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "replay_capacity", c.replay_capacity);
  read_opt(j, "warmup_steps", c.warmup_steps);
  read_opt(j, "train_every", c.train_every);
  read_opt(j, "target_copy_period", c.target_copy_period);
  read_opt(j, "total_steps", c.total_steps);
  read_opt(j, "seed", c.seed);
  std::string mode = to_string(c.mode);
  read_opt(j, "mode", mode);
  c.mode = train_mode_from_string(mode);
  std::string approx = to_string(c.approximator);
  read_opt(j, "approximator", approx);
  c.approximator = approximator_kind_from(approx);
  if (j.contains("hidden")) {
    std::vector<int> hidden;
    read_opt(j, "hidden", hidden);
    if (hidden.size() != 2) throw ConfigError("hidden must list two widths");
    c.hidden1 = hidden[0];
    c.hidden2 = hidden[1];
  }
  read_opt(j, "weights", c.weights);
  c.validate();
  return c;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n) {
  if (items_.empty()) throw ContractError("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[pick(rng_)]);
  return out;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw BoundsError("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::vector<double>> td_targets(std::span<const Transition* const> batch, const Approximator& online,
                                            const Approximator& target, double gamma) {
  if (batch.empty()) throw ContractError("td_targets needs a non-empty batch");
  const std::size_t k_count = online.num_components();
  if (target.num_components() != k_count) throw DimensionError("online and target networks differ in K");
  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (const Transition* t : batch) {
    if (t->reward.size() != k_count) {
      throw DimensionError("reward has " + std::to_string(t->reward.size()) + " components, approximator has " +
                           std::to_string(k_count));
    }
    std::vector<double> y = t->reward.values;
    if (!t->done) {
      // Global action from the online composite; its values come from the target network.
      Action best = select_global(online.predict(*t->next_observation), t->action.primitive);
      for (std::size_t k = 0; k < k_count; ++k) y[k] += gamma * target.value_at(*t->next_observation, best.pixel, k);
    }
    out.push_back(std::move(y));
  }
  return out;
}

json to_json(const EpisodeMetrics& m) {
  return {{"episode", m.episode},
          {"steps", m.steps},
          {"total_reward", m.total_reward},
          {"per_component_reward", m.per_component_reward},
          {"epsilon", m.epsilon},
          {"loss_mean", m.loss_mean}};
}

Checkpoint Checkpoint::clone() const {
  Checkpoint c;
  c.config = config;
  c.scenario = scenario;
  c.reward_components = reward_components;
  c.approximator = approximator ? approximator->clone() : nullptr;
  c.primitive = primitive;
  c.step = step;
  c.metrics = metrics;
  return c;
}

std::unique_ptr<Approximator> make_approximator(const TrainConfig& cfg, int input_channels,
                                                std::vector<std::string> component_names) {
  std::vector<double> weights = cfg.weights;
  if (weights.empty()) weights.assign(component_names.size(), 1.0);
  if (weights.size() != component_names.size()) {
    throw ConfigError("weights list has " + std::to_string(weights.size()) + " entries for " +
                      std::to_string(component_names.size()) + " components");
  }
  if (cfg.approximator == ApproximatorKind::Tabular) {
    return std::make_unique<TabularApproximator>(std::move(component_names), std::move(weights), cfg.learning_rate);
  }
  ConvConfig conv;
  conv.input_channels = input_channels;
  conv.hidden1 = cfg.hidden1;
  conv.hidden2 = cfg.hidden2;
  conv.learning_rate = cfg.learning_rate;
  conv.momentum = cfg.momentum;
  conv.seed = mix_seed(cfg.seed, 7);
  return std::make_unique<ConvApproximator>(std::move(component_names), std::move(weights), conv);
}

Checkpoint train(const EnvFactory& make_env, const TrainConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  auto env = make_env();
  const auto reward_names = env->component_names();
  std::vector<std::string> learn_names = cfg.mode == TrainMode::Decomposed ? reward_names
                                                                          : std::vector<std::string>{"total"};
  TrainConfig effective = cfg;
  if (cfg.mode == TrainMode::Monolithic && !cfg.weights.empty()) effective.weights = {1.0};

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.scenario = env->scenario_config();
  ckpt.reward_components = reward_names;
  ckpt.primitive = env->primitive();
  ckpt.approximator = make_approximator(effective, env->channels(), learn_names);
  Approximator& online = *ckpt.approximator;
  auto target = online.clone();

  ReplayBuffer buffer(static_cast<std::size_t>(cfg.replay_capacity), mix_seed(cfg.seed, 2));
  std::mt19937_64 rng(mix_seed(cfg.seed, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pixel_pick(0, env->width() * env->height() - 1);
  const EpsilonSchedule schedule = cfg.epsilon_schedule();
  const std::size_t min_fill = std::max<std::size_t>(cfg.batch_size, cfg.warmup_steps);

  std::int64_t episode = 0;
  auto obs = std::make_shared<const Observation>(env->reset(mix_seed(cfg.seed, 1000 + episode)));
  EpisodeMetrics current;
  current.per_component_reward.assign(reward_names.size(), 0.0);
  double loss_sum = 0.0;
  int loss_count = 0;

  for (std::int64_t t = 0; t < cfg.total_steps; ++t) {
    const double eps = epsilon_at(schedule, t);
    // Both draws happen every step so the random stream does not depend on the greedy choice.
    const double draw = unit(rng);
    const int random_index = pixel_pick(rng);
    Action action;
    if (draw < eps) {
      action = {env->primitive(), {random_index % env->width(), random_index / env->width()}};
    } else {
      action = select_global(online.predict(*obs), env->primitive());
    }
    EnvStep result = env->step(action);
    auto next = std::make_shared<const Observation>(std::move(result.observation));

    current.steps += 1;
    current.epsilon = eps;
    current.total_reward += result.reward.total();
    for (std::size_t k = 0; k < reward_names.size(); ++k) current.per_component_reward[k] += result.reward.values[k];

    buffer.push({obs, action, learning_reward(result.reward, cfg.mode), next, result.done});

    if (buffer.size() >= min_fill && t % cfg.train_every == 0) {
      auto batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size));
      auto targets = td_targets(batch, online, *target, cfg.gamma);
      std::vector<FitSample> samples;
      samples.reserve(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        samples.push_back({batch[i]->observation.get(), batch[i]->action.pixel, std::move(targets[i])});
      }
      const double loss = online.fit(samples);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << t << " (episode " << episode << ", epsilon " << eps
            << "); lower learning_rate or check rewards";
        throw DivergenceError(msg.str());
      }
      loss_sum += loss;
      ++loss_count;
    }
    if ((t + 1) % cfg.target_copy_period == 0) target->copy_parameters_from(online);

    if (result.done) {
      current.episode = episode;
      current.loss_mean = loss_count > 0 ? loss_sum / loss_count : 0.0;
      if (sink) sink(current);
      ckpt.metrics.push_back(current);
      current = EpisodeMetrics{};
      current.per_component_reward.assign(reward_names.size(), 0.0);
      loss_sum = 0.0;
      loss_count = 0;
      ++episode;
      obs = std::make_shared<const Observation>(env->reset(mix_seed(cfg.seed, 1000 + episode)));
    } else {
      obs = std::move(next);
    }
  }
  ckpt.step = cfg.total_steps;
  return ckpt;
}

Checkpoint train_monolithic(const EnvFactory& make_env, TrainConfig cfg, const MetricsSink& sink) {
  cfg.mode = TrainMode::Monolithic;
  return train(make_env, cfg, sink);
}

json to_json(const EvalReport& r) {
  return {{"run_rates", r.run_rates},
          {"mean", r.mean},
          {"stddev", r.stddev},
          {"correct", r.correct},
          {"decisions", r.decisions}};
}

EvalReport evaluate_policy(const Policy& policy, const EnvFactory& make_env, const EvalConfig& cfg) {
  if (cfg.runs < 1) throw ConfigError("evaluation needs at least one run");
  if (cfg.decisions_per_run < 1) throw ConfigError("evaluation needs at least one decision per run");
  EvalReport report;
  for (int run = 0; run < cfg.runs; ++run) {
    auto env = make_env();
    const std::uint64_t run_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(run));
    std::uint64_t episode = 0;
    Observation obs = env->reset(mix_seed(run_seed, episode));
    int correct = 0;
    for (int d = 0; d < cfg.decisions_per_run; ++d) {
      const double best = env->best_immediate_total();
      EnvStep result = env->step(policy(obs, *env));
      if (std::abs(result.reward.total() - best) <= 1e-12) ++correct;
      obs = result.done ? env->reset(mix_seed(run_seed, ++episode)) : std::move(result.observation);
    }
    report.correct += correct;
    report.decisions += cfg.decisions_per_run;
    report.run_rates.push_back(static_cast<double>(correct) / cfg.decisions_per_run);
  }
  const double n = static_cast<double>(report.run_rates.size());
  report.mean = std::accumulate(report.run_rates.begin(), report.run_rates.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : report.run_rates) ss += (r - report.mean) * (r - report.mean);
  report.stddev = report.run_rates.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return report;
}

Policy greedy_policy(const Approximator& approx, Primitive primitive) {
  return [&approx, primitive](const Observation& obs, const Environment&) {
    return select_global(approx.predict(obs), primitive);
  };
}

Policy oracle_policy() {
  return [](const Observation&, const Environment& env) {
    auto totals = env.immediate_totals();
    auto best = static_cast<int>(std::max_element(totals.begin(), totals.end()) - totals.begin());
    return Action{env.primitive(), {best % env.width(), best / env.width()}};
  };
}

Policy random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng](const Observation&, const Environment& env) {
    int idx = std::uniform_int_distribution<int>(0, env.width() * env.height() - 1)(*rng);
    return Action{env.primitive(), {idx % env.width(), idx / env.width()}};
  };
}

EvalReport evaluate(const Checkpoint& checkpoint, const EnvFactory& make_env, const EvalConfig& cfg) {
  if (!checkpoint.approximator) throw ContractError("checkpoint has no approximator");
  return evaluate_policy(greedy_policy(*checkpoint.approximator, checkpoint.primitive), make_env, cfg);
}

}  // namespace xqmap
