#ifndef XQMAP_CONV_APPROXIMATOR_HPP_
#define XQMAP_CONV_APPROXIMATOR_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xqmap/approximator.hpp"

namespace xqmap {

struct ConvConfig {
  int input_channels = 0;
  int hidden1 = 16;
  int hidden2 = 16;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

// One small fully convolutional network per component:
//   F -> conv3x3(hidden1) -> ReLU -> conv3x3(hidden2) -> ReLU -> conv1x1(1)
// Same padding and stride 1 throughout, so the output map matches the input grid.
// Trained by SGD with momentum on the squared error at the sampled pixel only;
// the gradient is back-propagated through that pixel's 5x5 receptive field.
class ConvApproximator final : public Approximator {
 public:
  ConvApproximator(std::vector<std::string> names, std::vector<double> weights, const ConvConfig& cfg);

  std::string kind() const override { return "conv"; }
  QMapSet predict(const Observation& obs) const override;
  double value_at(const Observation& obs, Pixel p, std::size_t component) const override;
  double fit(std::span<const FitSample> batch) override;
  std::unique_ptr<Approximator> clone() const override;
  void copy_parameters_from(const Approximator& other) override;
  ParameterBlob save_parameters() const override;

  static std::unique_ptr<ConvApproximator> load(const ParameterBlob& blob);

  const ConvConfig& config() const { return cfg_; }

  // Flat parameter vector of component k: w1, b1, w2, b2, w3, b3.
  std::span<double> parameters(std::size_t k) { return params_.at(k); }
  std::span<const double> parameters(std::size_t k) const { return params_.at(k); }
  std::size_t parameter_count() const { return layout_.total; }

  // (1/B) * sum (Q_k(s, p) - y_k)^2 over the batch.
  double batch_loss(std::span<const FitSample> batch, std::size_t k) const;
  // Analytic gradient of batch_loss with respect to parameters(k).
  std::vector<double> batch_gradient(std::span<const FitSample> batch, std::size_t k) const;

 private:
  struct Layout {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, w3 = 0, b3 = 0, total = 0;
  };
  struct LocalPass;

  void check_observation(const Observation& obs) const;
  LocalPass forward_local(const Observation& obs, Pixel p, std::size_t k) const;
  void accumulate_gradient(const Observation& obs, Pixel p, const LocalPass& pass, std::size_t k, double upstream,
                           std::vector<double>& grad) const;
  std::vector<std::vector<std::size_t>> layer_shapes() const;

  ConvConfig cfg_;
  Layout layout_;
  std::vector<std::vector<double>> params_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace xqmap

#endif  // XQMAP_CONV_APPROXIMATOR_HPP_
