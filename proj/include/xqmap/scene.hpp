#ifndef XQMAP_SCENE_HPP_
#define XQMAP_SCENE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xqmap/common.hpp"

namespace xqmap {

enum class Scenario { Grasp, Land };
enum class Shape { Cube, Bowl };
enum class Primitive { PickUp, Land };
enum class RewardKind { Binary, Continuous };

std::string to_string(Scenario s);
std::string to_string(Shape s);
std::string to_string(Primitive p);
Scenario scenario_from_string(const std::string& name);
Primitive primitive_for(Scenario s);

// One reward channel. Continuous channels emit values in [0, 1] before weighting.
struct PropertySpec {
  std::string name;
  RewardKind kind = RewardKind::Binary;
  double weight = 1.0;
  friend bool operator==(const PropertySpec&, const PropertySpec&) = default;
};

// Component order is fixed per scenario: Grasp = {color, shape}, Land = {flat, colored}.
std::vector<PropertySpec> default_properties(Scenario s);

struct ColorId {
  int rank = -1;
  bool grey = true;

  static ColorId grey_surface() { return {}; }
  static ColorId of_rank(int r) { return {r, false}; }
  friend bool operator==(const ColorId&, const ColorId&) = default;
};

// red < orange < yellow < green < blue < purple, extended with "color<i>" past six.
std::vector<std::string> palette_names(int palette_size);

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct SurfaceCell {
  double height = 0.0;
  Vec3 normal{};
  ColorId color{};
  friend bool operator==(const SurfaceCell&, const SurfaceCell&) = default;
};

struct SceneObject {
  int id = 0;
  Shape shape = Shape::Cube;
  ColorId color{};
  std::vector<Pixel> footprint;
  bool removed = false;
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Action {
  Primitive primitive = Primitive::PickUp;
  Pixel pixel{};
  friend bool operator==(const Action&, const Action&) = default;
};

// Feature grid in row-major (v, u, channel) order.
//   0          height
//   1          grey flag
//   2..2+C-1   one-hot colour rank
//   2+C        live-cube flag (Grasp only)
struct Observation {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  double at(int v, int u, int c) const {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + c];
  }
  std::uint64_t digest() const;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct RewardVector {
  std::vector<std::string> names;
  std::vector<double> values;

  double total() const;
  std::size_t size() const { return values.size(); }
};

struct ScenarioConfig {
  Scenario scenario = Scenario::Grasp;
  int width = 16;
  int height = 16;
  int palette_size = 6;
  std::vector<PropertySpec> properties = default_properties(Scenario::Grasp);

  // Grasp
  int num_objects = 7;
  int step_limit = 50;
  double cube_probability = 0.5;

  // Land
  int num_blocks = 5;
  double incline_angle_deg = 30.0;
  double grey_fraction = 0.25;
  double inclined_fraction = 0.6;

  void validate() const;
  static ScenarioConfig defaults_for(Scenario s);
};

nlohmann::json to_json(const ScenarioConfig& cfg);
// Unknown keys are rejected.
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);

struct GridScene {
  Scenario scenario = Scenario::Grasp;
  int width = 0;
  int height = 0;
  std::vector<std::string> palette;
  std::vector<PropertySpec> properties;
  std::vector<SurfaceCell> cells;
  std::vector<SceneObject> objects;
  int steps_elapsed = 0;
  int step_limit = 1;
  bool done = false;

  bool in_bounds(Pixel p) const { return p.u >= 0 && p.v >= 0 && p.u < width && p.v < height; }
  const SurfaceCell& cell(Pixel p) const;
  SurfaceCell& cell(Pixel p);
  // Live object covering p, or nullptr.
  const SceneObject* object_at(Pixel p) const;
  int live_cubes() const;
  int palette_size() const { return static_cast<int>(palette.size()); }
  std::vector<std::string> component_names() const;
  int observation_channels() const;
  std::uint64_t digest() const;
  friend bool operator==(const GridScene&, const GridScene&) = default;
};

struct StepOutcome {
  RewardVector reward;
  Observation next_observation;
  bool done = false;
  std::optional<int> grasped_object;
  std::string verdict;
};

GridScene generate_grasp_scene(std::uint64_t seed, const ScenarioConfig& cfg);
GridScene generate_land_scene(std::uint64_t seed, const ScenarioConfig& cfg);
GridScene generate_scene(std::uint64_t seed, const ScenarioConfig& cfg);

Observation observe(const GridScene& scene);

// Angle in degrees between the upward vertical and a unit surface normal.
double flatness_angle(const Vec3& normal);
inline constexpr double kFlatThresholdDeg = 5.0;
bool is_flat(const Vec3& normal);
Vec3 inclined_normal(double angle_deg, int dx, int dy);

RewardVector sub_rewards(const GridScene& scene, const Action& action);
// Largest total immediate reward available over every pixel.
double best_immediate_total(const GridScene& scene);
StepOutcome step(GridScene& scene, const Action& action);

// Human-readable label for what sits at a pixel ("blue cube", "empty cell", ...).
std::string describe_pixel(const GridScene& scene, Pixel p);

inline constexpr int kSceneFormatVersion = 1;
nlohmann::json scene_to_json(const GridScene& scene);
GridScene scene_from_json(const nlohmann::json& j);

}  // namespace xqmap

#endif  // XQMAP_SCENE_HPP_
