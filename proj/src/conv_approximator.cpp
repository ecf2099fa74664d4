#include "xqmap/conv_approximator.hpp"

#include <array>
#include <cmath>
#include <random>

namespace xqmap {

namespace {

using Taps = std::array<const double*, 9>;

// Pre-activations of a 3x3 convolution at one output position. taps[d] points at the
// input feature vector for offset (d / 3 - 1, d % 3 - 1), or is null outside the grid.
// Full-map and single-pixel evaluation both go through here, so they agree bit for bit.
void conv3x3(const Taps& taps, int cin, const double* w, const double* b, int cout, double* out) {
  for (int o = 0; o < cout; ++o) {
    double acc = b[o];
    const double* wo = w + static_cast<std::size_t>(o) * 9 * cin;
    for (int d = 0; d < 9; ++d) {
      const double* px = taps[d];
      if (px == nullptr) continue;
      const double* wk = wo + static_cast<std::size_t>(d) * cin;
      for (int c = 0; c < cin; ++c) acc += wk[c] * px[c];
    }
    out[o] = acc;
  }
}

Taps grid_taps(const double* grid, int width, int height, int channels, int v, int u) {
  Taps taps{};
  for (int d = 0; d < 9; ++d) {
    int y = v + d / 3 - 1;
    int x = u + d % 3 - 1;
    taps[d] = (y < 0 || x < 0 || y >= height || x >= width)
                  ? nullptr
                  : grid + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  return taps;
}

double relu(double z) { return z > 0.0 ? z : 0.0; }

double output_unit(const double* h2, const double* w3, double b3, int hidden) {
  double acc = b3;
  for (int o = 0; o < hidden; ++o) acc += w3[o] * h2[o];
  return acc;
}

}  // namespace

struct ConvApproximator::LocalPass {
  std::array<bool, 9> valid{};
  std::vector<double> z1;
  std::vector<double> h1;
  std::vector<double> z2;
  std::vector<double> h2;
  double out = 0.0;
};

ConvApproximator::ConvApproximator(std::vector<std::string> names, std::vector<double> weights,
                                   const ConvConfig& cfg)
    : Approximator(std::move(names), std::move(weights)), cfg_(cfg) {
  if (cfg.input_channels <= 0 || cfg.hidden1 <= 0 || cfg.hidden2 <= 0) {
    throw ConfigError("conv approximator needs positive channel counts");
  }
  if (!(cfg.learning_rate > 0.0) || !(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ConfigError("conv approximator needs learning_rate > 0 and momentum in [0, 1)");
  }
  const std::size_t f = cfg.input_channels, h1 = cfg.hidden1, h2 = cfg.hidden2;
  layout_.w1 = 0;
  layout_.b1 = layout_.w1 + h1 * 9 * f;
  layout_.w2 = layout_.b1 + h1;
  layout_.b2 = layout_.w2 + h2 * 9 * h1;
  layout_.w3 = layout_.b2 + h2;
  layout_.b3 = layout_.w3 + h2;
  layout_.total = layout_.b3 + 1;

  for (std::size_t k = 0; k < names_.size(); ++k) {
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x5eed0000 + k));
    std::vector<double> p(layout_.total, 0.0);
    std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / (9.0 * f)));
    std::normal_distribution<double> n2(0.0, std::sqrt(2.0 / (9.0 * h1)));
    std::normal_distribution<double> n3(0.0, std::sqrt(1.0 / h2));
    for (std::size_t i = layout_.w1; i < layout_.b1; ++i) p[i] = n1(rng);
    for (std::size_t i = layout_.w2; i < layout_.b2; ++i) p[i] = n2(rng);
    for (std::size_t i = layout_.w3; i < layout_.b3; ++i) p[i] = n3(rng);
    params_.push_back(std::move(p));
    velocity_.emplace_back(layout_.total, 0.0);
  }
}

void ConvApproximator::check_observation(const Observation& obs) const {
  if (obs.channels != cfg_.input_channels) {
    throw DimensionError("observation has " + std::to_string(obs.channels) + " channels, network expects " +
                         std::to_string(cfg_.input_channels));
  }
  if (obs.data.size() != static_cast<std::size_t>(obs.width) * obs.height * obs.channels) {
    throw DimensionError("observation buffer size does not match its dimensions");
  }
}

QMapSet ConvApproximator::predict(const Observation& obs) const {
  check_observation(obs);
  const int w = obs.width, h = obs.height, f = obs.channels, c1 = cfg_.hidden1, c2 = cfg_.hidden2;
  QMapSet q = QMapSet::zeros(w, h, names_, weights_);
  std::vector<double> h1(static_cast<std::size_t>(w) * h * c1);
  std::vector<double> h2(static_cast<std::size_t>(w) * h * c2);
  for (std::size_t k = 0; k < names_.size(); ++k) {
    const double* p = params_[k].data();
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        double* dst = h1.data() + (static_cast<std::size_t>(v) * w + u) * c1;
        conv3x3(grid_taps(obs.data.data(), w, h, f, v, u), f, p + layout_.w1, p + layout_.b1, c1, dst);
        for (int o = 0; o < c1; ++o) dst[o] = relu(dst[o]);
      }
    }
    auto out = q.maps[k].values();
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        double* dst = h2.data() + (static_cast<std::size_t>(v) * w + u) * c2;
        conv3x3(grid_taps(h1.data(), w, h, c1, v, u), c1, p + layout_.w2, p + layout_.b2, c2, dst);
        for (int o = 0; o < c2; ++o) dst[o] = relu(dst[o]);
        out[static_cast<std::size_t>(v) * w + u] = output_unit(dst, p + layout_.w3, p[layout_.b3], c2);
      }
    }
  }
  return q;
}

ConvApproximator::LocalPass ConvApproximator::forward_local(const Observation& obs, Pixel px, std::size_t k) const {
  const int w = obs.width, h = obs.height, f = obs.channels, c1 = cfg_.hidden1, c2 = cfg_.hidden2;
  const double* p = params_[k].data();
  LocalPass pass;
  pass.z1.assign(9 * static_cast<std::size_t>(c1), 0.0);
  pass.h1.assign(9 * static_cast<std::size_t>(c1), 0.0);
  pass.z2.assign(c2, 0.0);
  pass.h2.assign(c2, 0.0);
  Taps hidden_taps{};
  for (int q = 0; q < 9; ++q) {
    int y = px.v + q / 3 - 1;
    int x = px.u + q % 3 - 1;
    pass.valid[q] = y >= 0 && x >= 0 && y < h && x < w;
    if (!pass.valid[q]) continue;
    double* z = pass.z1.data() + static_cast<std::size_t>(q) * c1;
    conv3x3(grid_taps(obs.data.data(), w, h, f, y, x), f, p + layout_.w1, p + layout_.b1, c1, z);
    double* a = pass.h1.data() + static_cast<std::size_t>(q) * c1;
    for (int o = 0; o < c1; ++o) a[o] = relu(z[o]);
    hidden_taps[q] = a;
  }
  conv3x3(hidden_taps, c1, p + layout_.w2, p + layout_.b2, c2, pass.z2.data());
  for (int o = 0; o < c2; ++o) pass.h2[o] = relu(pass.z2[o]);
  pass.out = output_unit(pass.h2.data(), p + layout_.w3, p[layout_.b3], c2);
  return pass;
}

double ConvApproximator::value_at(const Observation& obs, Pixel p, std::size_t component) const {
  check_observation(obs);
  if (component >= names_.size()) throw BoundsError("component index out of range");
  if (p.u < 0 || p.v < 0 || p.u >= obs.width || p.v >= obs.height) throw BoundsError("pixel outside observation");
  return forward_local(obs, p, component).out;
}

void ConvApproximator::accumulate_gradient(const Observation& obs, Pixel px, const LocalPass& pass, std::size_t k,
                                           double upstream, std::vector<double>& grad) const {
  const int w = obs.width, h = obs.height, f = obs.channels, c1 = cfg_.hidden1, c2 = cfg_.hidden2;
  const double* p = params_[k].data();
  double* g = grad.data();

  g[layout_.b3] += upstream;
  std::vector<double> dz2(c2, 0.0);
  for (int o = 0; o < c2; ++o) {
    g[layout_.w3 + o] += upstream * pass.h2[o];
    dz2[o] = pass.z2[o] > 0.0 ? upstream * p[layout_.w3 + o] : 0.0;
    g[layout_.b2 + o] += dz2[o];
  }

  std::vector<double> dh1(9 * static_cast<std::size_t>(c1), 0.0);
  for (int o = 0; o < c2; ++o) {
    if (dz2[o] == 0.0) continue;
    for (int d = 0; d < 9; ++d) {
      if (!pass.valid[d]) continue;
      const std::size_t wbase = layout_.w2 + (static_cast<std::size_t>(o) * 9 + d) * c1;
      const double* a = pass.h1.data() + static_cast<std::size_t>(d) * c1;
      double* da = dh1.data() + static_cast<std::size_t>(d) * c1;
      for (int c = 0; c < c1; ++c) {
        g[wbase + c] += dz2[o] * a[c];
        da[c] += dz2[o] * p[wbase + c];
      }
    }
  }

  for (int q = 0; q < 9; ++q) {
    if (!pass.valid[q]) continue;
    const int y = px.v + q / 3 - 1;
    const int x = px.u + q % 3 - 1;
    const Taps taps = grid_taps(obs.data.data(), w, h, f, y, x);
    for (int c = 0; c < c1; ++c) {
      const std::size_t qi = static_cast<std::size_t>(q) * c1 + c;
      if (!(pass.z1[qi] > 0.0)) continue;
      const double dz = dh1[qi];
      if (dz == 0.0) continue;
      g[layout_.b1 + c] += dz;
      for (int e = 0; e < 9; ++e) {
        const double* in = taps[e];
        if (in == nullptr) continue;
        const std::size_t wbase = layout_.w1 + (static_cast<std::size_t>(c) * 9 + e) * f;
        for (int ci = 0; ci < f; ++ci) g[wbase + ci] += dz * in[ci];
      }
    }
  }
}

double ConvApproximator::batch_loss(std::span<const FitSample> batch, std::size_t k) const {
  check_batch(batch);
  if (batch.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& s : batch) {
    check_observation(*s.observation);
    double err = forward_local(*s.observation, s.pixel, k).out - s.targets[k];
    loss += err * err;
  }
  return loss / static_cast<double>(batch.size());
}

std::vector<double> ConvApproximator::batch_gradient(std::span<const FitSample> batch, std::size_t k) const {
  check_batch(batch);
  std::vector<double> grad(layout_.total, 0.0);
  const double scale = batch.empty() ? 0.0 : 2.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    check_observation(*s.observation);
    LocalPass pass = forward_local(*s.observation, s.pixel, k);
    accumulate_gradient(*s.observation, s.pixel, pass, k, scale * (pass.out - s.targets[k]), grad);
  }
  return grad;
}

double ConvApproximator::fit(std::span<const FitSample> batch) {
  check_batch(batch);
  if (batch.empty()) return 0.0;
  const double scale = 2.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < names_.size(); ++k) {
    std::vector<double> grad(layout_.total, 0.0);
    for (const auto& s : batch) {
      check_observation(*s.observation);
      LocalPass pass = forward_local(*s.observation, s.pixel, k);
      double err = pass.out - s.targets[k];
      loss += err * err;
      accumulate_gradient(*s.observation, s.pixel, pass, k, scale * err, grad);
    }
    auto& vel = velocity_[k];
    auto& par = params_[k];
    for (std::size_t i = 0; i < par.size(); ++i) {
      vel[i] = cfg_.momentum * vel[i] + grad[i];
      par[i] -= cfg_.learning_rate * vel[i];
    }
  }
  return loss / static_cast<double>(batch.size() * names_.size());
}

std::unique_ptr<Approximator> ConvApproximator::clone() const { return std::make_unique<ConvApproximator>(*this); }

void ConvApproximator::copy_parameters_from(const Approximator& other) {
  const auto* peer = dynamic_cast<const ConvApproximator*>(&other);
  if (peer == nullptr) throw ContractError("cannot copy parameters across approximator kinds");
  if (peer->names_ != names_ || peer->layout_.total != layout_.total) {
    throw DimensionError("conv approximators have different shapes");
  }
  params_ = peer->params_;
}

std::vector<std::vector<std::size_t>> ConvApproximator::layer_shapes() const {
  const std::size_t f = cfg_.input_channels, h1 = cfg_.hidden1, h2 = cfg_.hidden2;
  return {{h1, 3, 3, f}, {h1}, {h2, 3, 3, h1}, {h2}, {1, h2}, {1}};
}

ParameterBlob ConvApproximator::save_parameters() const {
  ParameterBlob blob;
  blob.manifest = base_manifest();
  blob.manifest["input_channels"] = cfg_.input_channels;
  blob.manifest["hidden"] = {cfg_.hidden1, cfg_.hidden2};
  blob.manifest["learning_rate"] = cfg_.learning_rate;
  blob.manifest["momentum"] = cfg_.momentum;
  blob.manifest["seed"] = cfg_.seed;
  blob.manifest["layer_shapes"] = layer_shapes();
  const std::size_t bounds[] = {layout_.w1, layout_.b1, layout_.w2, layout_.b2, layout_.w3, layout_.b3, layout_.total};
  for (const auto& p : params_) {
    for (int layer = 0; layer < 6; ++layer) {
      blob.arrays.emplace_back(p.begin() + static_cast<std::ptrdiff_t>(bounds[layer]),
                               p.begin() + static_cast<std::ptrdiff_t>(bounds[layer + 1]));
    }
  }
  return blob;
}

std::unique_ptr<ConvApproximator> ConvApproximator::load(const ParameterBlob& blob) {
  try {
    const auto& m = blob.manifest;
    ConvConfig cfg;
    cfg.input_channels = m.at("input_channels").get<int>();
    auto hidden = m.at("hidden").get<std::vector<int>>();
    if (hidden.size() != 2) throw FormatError("conv manifest needs two hidden widths");
    cfg.hidden1 = hidden[0];
    cfg.hidden2 = hidden[1];
    cfg.learning_rate = m.at("learning_rate").get<double>();
    cfg.momentum = m.at("momentum").get<double>();
    cfg.seed = m.value("seed", std::uint64_t{0});
    auto out = std::make_unique<ConvApproximator>(m.at("component_names").get<std::vector<std::string>>(),
                                                  m.at("weights").get<std::vector<double>>(), cfg);
    if (m.at("layer_shapes") != nlohmann::json(out->layer_shapes())) throw FormatError("conv layer shapes mismatch");
    if (blob.arrays.size() != 6 * out->names_.size()) throw FormatError("conv payload has the wrong number of arrays");
    for (std::size_t k = 0; k < out->names_.size(); ++k) {
      std::vector<double> flat;
      for (int layer = 0; layer < 6; ++layer) {
        const auto& arr = blob.arrays[k * 6 + layer];
        flat.insert(flat.end(), arr.begin(), arr.end());
      }
      if (flat.size() != out->layout_.total) throw FormatError("conv payload size mismatch");
      out->params_[k] = std::move(flat);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed conv manifest: ") + e.what());
  }
}

}  // namespace xqmap
