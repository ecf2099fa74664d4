#include "xqmap/qmap.hpp"

#include <cmath>

namespace xqmap {

namespace {

void require_pixel(const QMap& m, Pixel p) {
  if (!m.in_bounds(p)) {
    throw BoundsError("pixel (" + std::to_string(p.u) + ", " + std::to_string(p.v) + ") outside Q-Map");
  }
}

Action argmax_all(const QMap& m, Primitive primitive) {
  auto vals = m.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < vals.size(); ++i)
    if (vals[i] > vals[best]) best = i;
  return {primitive, {static_cast<int>(best % m.width()), static_cast<int>(best / m.width())}};
}

Action argmax_masked(const QMap& m, Primitive primitive, std::span<const Pixel> mask) {
  if (mask.empty()) throw SelectionError("selection mask is empty");
  bool found = false;
  std::size_t best = 0;
  for (Pixel p : mask) {
    require_pixel(m, p);
    std::size_t i = m.index(p);
    double val = m.values()[i];
    if (!found || val > m.values()[best] || (val == m.values()[best] && i < best)) {
      best = i;
      found = true;
    }
  }
  return {primitive, {static_cast<int>(best % m.width()), static_cast<int>(best / m.width())}};
}

const QMap& component_map(const QMapSet& q, std::size_t k) {
  q.validate();
  if (k >= q.size()) throw BoundsError("component index " + std::to_string(k) + " out of range");
  return q.maps[k];
}

}  // namespace

QMap::QMap(int width, int height, double fill)
    : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, fill) {
  if (width <= 0 || height <= 0) throw DimensionError("Q-Map dimensions must be positive");
}

double QMap::at(Pixel p) const {
  require_pixel(*this, p);
  return values_[index(p)];
}

double& QMap::at(Pixel p) {
  require_pixel(*this, p);
  return values_[index(p)];
}

void QMapSet::validate() const {
  if (maps.empty()) throw ContractError("a QMapSet needs at least one component");
  if (names.size() != maps.size() || weights.size() != maps.size()) {
    throw DimensionError("QMapSet names/weights do not match the number of maps");
  }
  for (const auto& m : maps) {
    if (m.width() != maps.front().width() || m.height() != maps.front().height()) {
      throw DimensionError("QMapSet maps differ in dimensions");
    }
  }
  for (double w : weights)
    if (!(std::isfinite(w) && w >= 0.0)) throw ContractError("component weights must be finite and non-negative");
}

QMapSet QMapSet::zeros(int width, int height, std::vector<std::string> names, std::vector<double> weights) {
  QMapSet q;
  if (weights.empty()) weights.assign(names.size(), 1.0);
  for (std::size_t k = 0; k < names.size(); ++k) q.maps.emplace_back(width, height, 0.0);
  q.names = std::move(names);
  q.weights = std::move(weights);
  q.validate();
  return q;
}

QMap composite(const QMapSet& q) {
  q.validate();
  QMap out(q.width(), q.height(), 0.0);
  auto dst = out.values();
  for (std::size_t k = 0; k < q.size(); ++k) {
    auto src = q.maps[k].values();
    double w = q.weights[k];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
  }
  return out;
}

Action select_global(const QMapSet& q, Primitive primitive) { return argmax_all(composite(q), primitive); }

Action select_global(const QMapSet& q, Primitive primitive, std::span<const Pixel> mask) {
  return argmax_masked(composite(q), primitive, mask);
}

Action select_component(const QMapSet& q, std::size_t k, Primitive primitive) {
  return argmax_all(component_map(q, k), primitive);
}

Action select_component(const QMapSet& q, std::size_t k, Primitive primitive, std::span<const Pixel> mask) {
  return argmax_masked(component_map(q, k), primitive, mask);
}

std::vector<double> q_at(const QMapSet& q, const Action& a) {
  q.validate();
  std::vector<double> out;
  out.reserve(q.size());
  for (const auto& m : q.maps) out.push_back(m.at(a.pixel));
  return out;
}

}  // namespace xqmap
