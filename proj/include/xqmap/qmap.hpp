#ifndef XQMAP_QMAP_HPP_
#define XQMAP_QMAP_HPP_

#include <span>
#include <string>
#include <vector>

#include "xqmap/scene.hpp"

namespace xqmap {

// Dense per-pixel value grid for one reward component, row-major.
class QMap {
 public:
  QMap() = default;
  QMap(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(Pixel p) const { return p.u >= 0 && p.v >= 0 && p.u < width_ && p.v < height_; }
  std::size_t index(Pixel p) const { return static_cast<std::size_t>(p.v) * width_ + p.u; }

  double at(Pixel p) const;
  double& at(Pixel p);
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  friend bool operator==(const QMap&, const QMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// K aligned component maps plus the names and selection weights that go with them.
struct QMapSet {
  std::vector<QMap> maps;
  std::vector<std::string> names;
  std::vector<double> weights;

  std::size_t size() const { return maps.size(); }
  int width() const { return maps.empty() ? 0 : maps.front().width(); }
  int height() const { return maps.empty() ? 0 : maps.front().height(); }
  // Throws DimensionError/ContractError on an inconsistent set.
  void validate() const;

  static QMapSet zeros(int width, int height, std::vector<std::string> names, std::vector<double> weights = {});
};

// Elementwise sum of weights[k] * maps[k].
QMap composite(const QMapSet& q);

// Argmax of the composite. Ties go to the lowest row-major index.
Action select_global(const QMapSet& q, Primitive primitive);
// Same, restricted to the given pixels; an empty mask is a SelectionError.
Action select_global(const QMapSet& q, Primitive primitive, std::span<const Pixel> mask);

Action select_component(const QMapSet& q, std::size_t k, Primitive primitive);
Action select_component(const QMapSet& q, std::size_t k, Primitive primitive, std::span<const Pixel> mask);

// Unweighted per-component values at the action's pixel.
std::vector<double> q_at(const QMapSet& q, const Action& a);

}  // namespace xqmap

#endif  // XQMAP_QMAP_HPP_
