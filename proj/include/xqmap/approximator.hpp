#ifndef XQMAP_APPROXIMATOR_HPP_
#define XQMAP_APPROXIMATOR_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "xqmap/qmap.hpp"

namespace xqmap {

// One regression sample: drive Q_k(observation, pixel) toward targets[k].
struct FitSample {
  const Observation* observation = nullptr;
  Pixel pixel{};
  std::vector<double> targets;
};

// Serialized parameters: a JSON manifest plus raw 64-bit float arrays.
struct ParameterBlob {
  nlohmann::json manifest;
  std::vector<std::vector<double>> arrays;
};

inline constexpr int kParameterFormatVersion = 1;

// Maps an observation to K component Q-Maps. predict() is const and safe to
// call concurrently; fit() needs exclusive access.
class Approximator {
 public:
  Approximator(std::vector<std::string> names, std::vector<double> weights);
  virtual ~Approximator() = default;

  virtual std::string kind() const = 0;
  virtual QMapSet predict(const Observation& obs) const = 0;
  virtual double value_at(const Observation& obs, Pixel p, std::size_t component) const = 0;
  // One update step; returns the mean squared error over samples and components before the update.
  virtual double fit(std::span<const FitSample> batch) = 0;
  virtual std::unique_ptr<Approximator> clone() const = 0;
  // Target-network sync: copy parameters (not optimiser state) from a peer of the same kind.
  virtual void copy_parameters_from(const Approximator& other) = 0;
  virtual ParameterBlob save_parameters() const = 0;

  std::size_t num_components() const { return names_.size(); }
  const std::vector<std::string>& component_names() const { return names_; }
  const std::vector<double>& weights() const { return weights_; }
  void set_weights(std::vector<double> weights);

 protected:
  nlohmann::json base_manifest() const;
  void check_batch(std::span<const FitSample> batch) const;

  std::vector<std::string> names_;
  std::vector<double> weights_;
};

std::unique_ptr<Approximator> load_approximator(const ParameterBlob& blob);

// Exact lookup table keyed by (observation digest, pixel, component); unseen entries read as 0.
class TabularApproximator final : public Approximator {
 public:
  TabularApproximator(std::vector<std::string> names, std::vector<double> weights, double learning_rate);

  std::string kind() const override { return "tabular"; }
  QMapSet predict(const Observation& obs) const override;
  double value_at(const Observation& obs, Pixel p, std::size_t component) const override;
  // value += learning_rate * (target - value), applied sample by sample.
  double fit(std::span<const FitSample> batch) override;
  std::unique_ptr<Approximator> clone() const override;
  void copy_parameters_from(const Approximator& other) override;
  ParameterBlob save_parameters() const override;

  static std::unique_ptr<TabularApproximator> load(const ParameterBlob& blob);

  double learning_rate() const { return learning_rate_; }
  std::size_t entries() const { return table_.size(); }

 private:
  struct Key {
    std::uint64_t digest;
    std::int64_t pixel;
    std::int64_t component;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };

  double lookup(std::uint64_t digest, std::int64_t pixel, std::size_t component) const;

  double learning_rate_;
  std::unordered_map<Key, double, KeyHash> table_;
};

}  // namespace xqmap

#endif  // XQMAP_APPROXIMATOR_HPP_
