#include "xqmap/approximator.hpp"

#include <algorithm>
#include <cmath>

#include "xqmap/conv_approximator.hpp"

namespace xqmap {

Approximator::Approximator(std::vector<std::string> names, std::vector<double> weights)
    : names_(std::move(names)), weights_(std::move(weights)) {
  if (names_.empty()) throw ContractError("an approximator needs at least one component");
  if (weights_.empty()) weights_.assign(names_.size(), 1.0);
  set_weights(weights_);
}

void Approximator::set_weights(std::vector<double> weights) {
  if (weights.size() != names_.size()) throw DimensionError("weights must match the number of components");
  for (double w : weights)
    if (!(std::isfinite(w) && w >= 0.0)) throw ContractError("component weights must be finite and non-negative");
  weights_ = std::move(weights);
}

nlohmann::json Approximator::base_manifest() const {
  return {{"format_version", kParameterFormatVersion},
          {"kind", kind()},
          {"component_names", names_},
          {"weights", weights_}};
}

void Approximator::check_batch(std::span<const FitSample> batch) const {
  for (const auto& s : batch) {
    if (s.observation == nullptr) throw ContractError("fit sample without observation");
    if (s.targets.size() != names_.size()) {
      throw DimensionError("fit targets have " + std::to_string(s.targets.size()) + " components, expected " +
                           std::to_string(names_.size()));
    }
    if (s.pixel.u < 0 || s.pixel.v < 0 || s.pixel.u >= s.observation->width || s.pixel.v >= s.observation->height) {
      throw BoundsError("fit sample pixel outside observation");
    }
  }
}

std::unique_ptr<Approximator> load_approximator(const ParameterBlob& blob) {
  const auto& m = blob.manifest;
  if (!m.is_object() || !m.contains("format_version") || m.at("format_version") != kParameterFormatVersion) {
    throw FormatError("unsupported parameter format_version");
  }
  std::string kind = m.value("kind", "");
  if (kind == "tabular") return TabularApproximator::load(blob);
  if (kind == "conv") return ConvApproximator::load(blob);
  throw FormatError("unknown approximator kind '" + kind + "'");
}

std::size_t TabularApproximator::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = mix_seed(k.digest, static_cast<std::uint64_t>(k.pixel));
  return static_cast<std::size_t>(mix_seed(h, static_cast<std::uint64_t>(k.component)));
}

TabularApproximator::TabularApproximator(std::vector<std::string> names, std::vector<double> weights,
                                         double learning_rate)
    : Approximator(std::move(names), std::move(weights)), learning_rate_(learning_rate) {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("tabular learning rate must be in (0, 1]");
}

double TabularApproximator::lookup(std::uint64_t digest, std::int64_t pixel, std::size_t component) const {
  auto it = table_.find({digest, pixel, static_cast<std::int64_t>(component)});
  return it == table_.end() ? 0.0 : it->second;
}

QMapSet TabularApproximator::predict(const Observation& obs) const {
  QMapSet q = QMapSet::zeros(obs.width, obs.height, names_, weights_);
  std::uint64_t digest = obs.digest();
  for (std::size_t k = 0; k < names_.size(); ++k) {
    auto vals = q.maps[k].values();
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = lookup(digest, static_cast<std::int64_t>(i), k);
  }
  return q;
}

double TabularApproximator::value_at(const Observation& obs, Pixel p, std::size_t component) const {
  if (component >= names_.size()) throw BoundsError("component index out of range");
  if (p.u < 0 || p.v < 0 || p.u >= obs.width || p.v >= obs.height) throw BoundsError("pixel outside observation");
  return lookup(obs.digest(), static_cast<std::int64_t>(p.v) * obs.width + p.u, component);
}

double TabularApproximator::fit(std::span<const FitSample> batch) {
  check_batch(batch);
  if (batch.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& s : batch) {
    std::uint64_t digest = s.observation->digest();
    std::int64_t pixel = static_cast<std::int64_t>(s.pixel.v) * s.observation->width + s.pixel.u;
    for (std::size_t k = 0; k < names_.size(); ++k) {
      double& value = table_[{digest, pixel, static_cast<std::int64_t>(k)}];
      double err = s.targets[k] - value;
      loss += err * err;
      // alpha == 1 writes the target exactly instead of value + (target - value).
      value = learning_rate_ == 1.0 ? s.targets[k] : value + learning_rate_ * err;
    }
  }
  return loss / static_cast<double>(batch.size() * names_.size());
}

std::unique_ptr<Approximator> TabularApproximator::clone() const {
  return std::make_unique<TabularApproximator>(*this);
}

void TabularApproximator::copy_parameters_from(const Approximator& other) {
  const auto* peer = dynamic_cast<const TabularApproximator*>(&other);
  if (peer == nullptr) throw ContractError("cannot copy parameters across approximator kinds");
  if (peer->names_ != names_) throw DimensionError("component names differ");
  table_ = peer->table_;
}

ParameterBlob TabularApproximator::save_parameters() const {
  std::vector<std::pair<Key, double>> entries(table_.begin(), table_.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    const Key& x = a.first;
    const Key& y = b.first;
    if (x.digest != y.digest) return x.digest < y.digest;
    if (x.pixel != y.pixel) return x.pixel < y.pixel;
    return x.component < y.component;
  });
  ParameterBlob blob;
  blob.manifest = base_manifest();
  blob.manifest["learning_rate"] = learning_rate_;
  nlohmann::json keys = nlohmann::json::array();
  std::vector<double> values;
  for (const auto& [key, value] : entries) {
    keys.push_back({to_hex(key.digest), key.pixel, key.component});
    values.push_back(value);
  }
  blob.manifest["keys"] = std::move(keys);
  blob.manifest["layer_shapes"] = nlohmann::json::array({nlohmann::json::array({values.size()})});
  blob.arrays.push_back(std::move(values));
  return blob;
}

std::unique_ptr<TabularApproximator> TabularApproximator::load(const ParameterBlob& blob) {
  try {
    const auto& m = blob.manifest;
    auto out = std::make_unique<TabularApproximator>(m.at("component_names").get<std::vector<std::string>>(),
                                                     m.at("weights").get<std::vector<double>>(),
                                                     m.at("learning_rate").get<double>());
    const auto& keys = m.at("keys");
    if (blob.arrays.size() != 1 || blob.arrays[0].size() != keys.size()) {
      throw FormatError("tabular payload does not match its key list");
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      Key key{from_hex(keys[i].at(0).get<std::string>()), keys[i].at(1).get<std::int64_t>(),
              keys[i].at(2).get<std::int64_t>()};
      out->table_[key] = blob.arrays[0][i];
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed tabular manifest: ") + e.what());
  }
}

}  // namespace xqmap
