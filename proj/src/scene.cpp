#include "xqmap/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace xqmap {

namespace {

constexpr int kSceneAttempts = 32;
constexpr int kPlacementTries = 200;
constexpr double kCubeHeight = 1.0;
constexpr double kBowlHeight = 0.5;

using json = nlohmann::json;

std::vector<std::string> canonical_names(Scenario s) {
  if (s == Scenario::Grasp) return {"color", "shape"};
  return {"flat", "colored"};
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ConfigError(std::string("unknown key '") + key + "' in " + where);
    }
  }
}

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

std::string kind_name(RewardKind k) { return k == RewardKind::Binary ? "binary" : "continuous"; }

RewardKind kind_from(const std::string& s) {
  if (s == "binary") return RewardKind::Binary;
  if (s == "continuous") return RewardKind::Continuous;
  throw ConfigError("unknown reward kind '" + s + "'");
}

json properties_to_json(const std::vector<PropertySpec>& props) {
  json arr = json::array();
  for (const auto& p : props) arr.push_back({{"name", p.name}, {"kind", kind_name(p.kind)}, {"weight", p.weight}});
  return arr;
}

std::vector<PropertySpec> properties_from_json(const json& arr) {
  if (!arr.is_array()) throw ConfigError("properties must be an array");
  std::vector<PropertySpec> out;
  for (const auto& p : arr) {
    reject_unknown_keys(p, {"name", "kind", "weight"}, "property");
    PropertySpec spec;
    read_opt(p, "name", spec.name);
    std::string kind = "binary";
    read_opt(p, "kind", kind);
    spec.kind = kind_from(kind);
    read_opt(p, "weight", spec.weight);
    out.push_back(std::move(spec));
  }
  return out;
}

GridScene blank_scene(const ScenarioConfig& cfg) {
  GridScene s;
  s.scenario = cfg.scenario;
  s.width = cfg.width;
  s.height = cfg.height;
  s.palette = palette_names(cfg.palette_size);
  s.properties = cfg.properties;
  s.cells.assign(static_cast<std::size_t>(cfg.width) * cfg.height, SurfaceCell{});
  s.step_limit = cfg.scenario == Scenario::Grasp ? cfg.step_limit : 1;
  return s;
}

std::size_t cell_index(const GridScene& s, Pixel p) { return static_cast<std::size_t>(p.v) * s.width + p.u; }

void require_in_bounds(const GridScene& s, Pixel p) {
  if (!s.in_bounds(p)) {
    throw BoundsError("pixel (" + std::to_string(p.u) + ", " + std::to_string(p.v) + ") outside " +
                      std::to_string(s.width) + "x" + std::to_string(s.height) + " grid");
  }
}

}  // namespace

std::string to_string(Scenario s) { return s == Scenario::Grasp ? "grasp" : "land"; }
std::string to_string(Shape s) { return s == Shape::Cube ? "cube" : "bowl"; }
std::string to_string(Primitive p) { return p == Primitive::PickUp ? "pick_up" : "land"; }

Scenario scenario_from_string(const std::string& name) {
  if (name == "grasp") return Scenario::Grasp;
  if (name == "land") return Scenario::Land;
  throw ConfigError("unknown scenario '" + name + "' (expected grasp or land)");
}

Primitive primitive_for(Scenario s) { return s == Scenario::Grasp ? Primitive::PickUp : Primitive::Land; }

std::vector<PropertySpec> default_properties(Scenario s) {
  if (s == Scenario::Grasp) {
    return {{"color", RewardKind::Continuous, 1.0}, {"shape", RewardKind::Binary, 1.0}};
  }
  return {{"flat", RewardKind::Binary, 1.0}, {"colored", RewardKind::Binary, 1.0}};
}

std::vector<std::string> palette_names(int palette_size) {
  static const char* kRainbow[] = {"red", "orange", "yellow", "green", "blue", "purple"};
  std::vector<std::string> out;
  for (int i = 0; i < palette_size; ++i) out.push_back(i < 6 ? kRainbow[i] : "color" + std::to_string(i));
  return out;
}

std::uint64_t Observation::digest() const {
  int dims[3] = {width, height, channels};
  std::uint64_t h = fnv1a64(std::as_bytes(std::span(dims)));
  return fnv1a64(std::as_bytes(std::span(data)), h);
}

double RewardVector::total() const {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

ScenarioConfig ScenarioConfig::defaults_for(Scenario s) {
  ScenarioConfig cfg;
  cfg.scenario = s;
  cfg.properties = default_properties(s);
  return cfg;
}

void ScenarioConfig::validate() const {
  if (width < 12 || height < 12) throw ConfigError("grid must be at least 12x12");
  if (palette_size < 2) throw ConfigError("palette_size must be >= 2");
  if (num_objects < 1) throw ConfigError("num_objects must be >= 1");
  if (step_limit < 1) throw ConfigError("step_limit must be >= 1");
  if (!(cube_probability > 0.0 && cube_probability <= 1.0)) throw ConfigError("cube_probability must be in (0, 1]");
  if (num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
  if (!(incline_angle_deg > kFlatThresholdDeg && incline_angle_deg < 90.0)) {
    throw ConfigError("incline_angle_deg must be in (5, 90)");
  }
  if (!(grey_fraction >= 0.0 && grey_fraction <= 1.0)) throw ConfigError("grey_fraction must be in [0, 1]");
  if (!(inclined_fraction >= 0.0 && inclined_fraction <= 1.0)) throw ConfigError("inclined_fraction must be in [0, 1]");
  auto names = canonical_names(scenario);
  if (properties.size() != names.size()) throw ConfigError("scenario expects " + std::to_string(names.size()) + " properties");
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (properties[k].name != names[k]) {
      throw ConfigError("property " + std::to_string(k) + " must be '" + names[k] + "', got '" + properties[k].name + "'");
    }
    if (!(std::isfinite(properties[k].weight) && properties[k].weight >= 0.0)) {
      throw ConfigError("property weight must be finite and non-negative");
    }
  }
}

json to_json(const ScenarioConfig& cfg) {
  return {{"scenario", to_string(cfg.scenario)},
          {"width", cfg.width},
          {"height", cfg.height},
          {"palette_size", cfg.palette_size},
          {"properties", properties_to_json(cfg.properties)},
          {"num_objects", cfg.num_objects},
          {"step_limit", cfg.step_limit},
          {"cube_probability", cfg.cube_probability},
          {"num_blocks", cfg.num_blocks},
          {"incline_angle_deg", cfg.incline_angle_deg},
          {"grey_fraction", cfg.grey_fraction},
          {"inclined_fraction", cfg.inclined_fraction}};
}

ScenarioConfig scenario_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"scenario", "width", "height", "palette_size", "properties", "num_objects", "step_limit",
                       "cube_probability", "num_blocks", "incline_angle_deg", "grey_fraction", "inclined_fraction"},
                      "scenario config");
  std::string name = "grasp";
  read_opt(j, "scenario", name);
  ScenarioConfig cfg = ScenarioConfig::defaults_for(scenario_from_string(name));
  read_opt(j, "width", cfg.width);
  read_opt(j, "height", cfg.height);
  read_opt(j, "palette_size", cfg.palette_size);
  if (j.contains("properties")) cfg.properties = properties_from_json(j.at("properties"));
  read_opt(j, "num_objects", cfg.num_objects);
  read_opt(j, "step_limit", cfg.step_limit);
  read_opt(j, "cube_probability", cfg.cube_probability);
  read_opt(j, "num_blocks", cfg.num_blocks);
  read_opt(j, "incline_angle_deg", cfg.incline_angle_deg);
  read_opt(j, "grey_fraction", cfg.grey_fraction);
  read_opt(j, "inclined_fraction", cfg.inclined_fraction);
  cfg.validate();
  return cfg;
}

const SurfaceCell& GridScene::cell(Pixel p) const {
  require_in_bounds(*this, p);
  return cells[cell_index(*this, p)];
}

SurfaceCell& GridScene::cell(Pixel p) {
  require_in_bounds(*this, p);
  return cells[cell_index(*this, p)];
}

const SceneObject* GridScene::object_at(Pixel p) const {
  for (const auto& obj : objects) {
    if (obj.removed) continue;
    if (std::find(obj.footprint.begin(), obj.footprint.end(), p) != obj.footprint.end()) return &obj;
  }
  return nullptr;
}

int GridScene::live_cubes() const {
  return static_cast<int>(std::count_if(objects.begin(), objects.end(),
                                        [](const SceneObject& o) { return !o.removed && o.shape == Shape::Cube; }));
}

std::vector<std::string> GridScene::component_names() const {
  std::vector<std::string> out;
  for (const auto& p : properties) out.push_back(p.name);
  return out;
}

int GridScene::observation_channels() const {
  return 2 + palette_size() + (scenario == Scenario::Grasp ? 1 : 0);
}

std::uint64_t GridScene::digest() const { return fnv1a64(scene_to_json(*this).dump()); }

GridScene generate_grasp_scene(std::uint64_t seed, const ScenarioConfig& cfg) {
  if (cfg.scenario != Scenario::Grasp) throw ConfigError("generate_grasp_scene needs a grasp config");
  cfg.validate();
  if (cfg.num_objects > cfg.width * cfg.height) {
    throw PlacementError("cannot place " + std::to_string(cfg.num_objects) + " disjoint objects on " +
                         std::to_string(cfg.width * cfg.height) + " cells");
  }
  for (int attempt = 0; attempt < kSceneAttempts; ++attempt) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    GridScene scene = blank_scene(cfg);
    std::vector<char> occupied(scene.cells.size(), 0);
    std::uniform_int_distribution<int> side(1, 2);
    std::uniform_int_distribution<int> rank(0, cfg.palette_size - 1);
    std::bernoulli_distribution is_cube(cfg.cube_probability);
    bool ok = true;
    for (int i = 0; i < cfg.num_objects && ok; ++i) {
      bool placed = false;
      for (int t = 0; t < kPlacementTries && !placed; ++t) {
        int w = side(rng);
        int h = side(rng);
        int u0 = std::uniform_int_distribution<int>(0, cfg.width - w)(rng);
        int v0 = std::uniform_int_distribution<int>(0, cfg.height - h)(rng);
        bool free = true;
        for (int v = v0; v < v0 + h && free; ++v)
          for (int u = u0; u < u0 + w && free; ++u) free = !occupied[cell_index(scene, {u, v})];
        if (!free) continue;
        SceneObject obj;
        obj.id = i;
        for (int v = v0; v < v0 + h; ++v) {
          for (int u = u0; u < u0 + w; ++u) {
            occupied[cell_index(scene, {u, v})] = 1;
            obj.footprint.push_back({u, v});
          }
        }
        obj.shape = is_cube(rng) ? Shape::Cube : Shape::Bowl;
        obj.color = ColorId::of_rank(rank(rng));
        scene.objects.push_back(std::move(obj));
        placed = true;
      }
      ok = placed;
    }
    // Scenes without a cube are discarded, like bad initialisations.
    if (ok && scene.live_cubes() > 0) return scene;
  }
  throw PlacementError("could not generate a grasp scene with " + std::to_string(cfg.num_objects) + " objects after " +
                       std::to_string(kSceneAttempts) + " attempts");
}

Vec3 inclined_normal(double angle_deg, int dx, int dy) {
  double rad = angle_deg * std::numbers::pi / 180.0;
  double s = std::sin(rad);
  double len = std::hypot(static_cast<double>(dx), static_cast<double>(dy));
  if (len == 0.0) return {0.0, 0.0, 1.0};
  return {s * dx / len, s * dy / len, std::cos(rad)};
}

GridScene generate_land_scene(std::uint64_t seed, const ScenarioConfig& cfg) {
  if (cfg.scenario != Scenario::Land) throw ConfigError("generate_land_scene needs a land config");
  cfg.validate();
  static constexpr int kDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (int attempt = 0; attempt < kSceneAttempts; ++attempt) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    GridScene scene = blank_scene(cfg);
    // Reserved cells: block, ramp and a one-cell moat so ground stays visible between blocks.
    std::vector<char> reserved(scene.cells.size(), 0);
    std::uniform_int_distribution<int> side(2, 4);
    std::uniform_int_distribution<int> top_height(1, 3);
    std::uniform_int_distribution<int> rank(0, cfg.palette_size - 1);
    std::uniform_int_distribution<int> dir_pick(0, 3);
    std::bernoulli_distribution grey(cfg.grey_fraction);
    std::bernoulli_distribution ramped(cfg.inclined_fraction);
    bool ok = true;
    for (int b = 0; b < cfg.num_blocks && ok; ++b) {
      bool placed = false;
      for (int t = 0; t < kPlacementTries && !placed; ++t) {
        int w = side(rng);
        int h = side(rng);
        bool has_ramp = ramped(rng);
        int d = dir_pick(rng);
        int u0 = std::uniform_int_distribution<int>(0, cfg.width - w)(rng);
        int v0 = std::uniform_int_distribution<int>(0, cfg.height - h)(rng);
        int top = top_height(rng);
        ColorId color = grey(rng) ? ColorId::grey_surface() : ColorId::of_rank(rank(rng));
        int dx = kDirs[d][0];
        int dy = kDirs[d][1];
        // Bounding box of block plus optional ramp strip.
        int bu0 = u0, bv0 = v0, bu1 = u0 + w - 1, bv1 = v0 + h - 1;
        if (has_ramp) {
          if (dx > 0) bu1 += 1;
          if (dx < 0) bu0 -= 1;
          if (dy > 0) bv1 += 1;
          if (dy < 0) bv0 -= 1;
        }
        if (bu0 < 0 || bv0 < 0 || bu1 >= cfg.width || bv1 >= cfg.height) continue;
        bool free = true;
        for (int v = bv0; v <= bv1 && free; ++v)
          for (int u = bu0; u <= bu1 && free; ++u) free = !reserved[cell_index(scene, {u, v})];
        if (!free) continue;
        for (int v = std::max(0, bv0 - 1); v <= std::min(cfg.height - 1, bv1 + 1); ++v)
          for (int u = std::max(0, bu0 - 1); u <= std::min(cfg.width - 1, bu1 + 1); ++u)
            reserved[cell_index(scene, {u, v})] = 1;
        for (int v = v0; v < v0 + h; ++v) {
          for (int u = u0; u < u0 + w; ++u) {
            auto& c = scene.cell({u, v});
            c.height = top;
            c.normal = {0.0, 0.0, 1.0};
            c.color = color;
          }
        }
        if (has_ramp) {
          Vec3 n = inclined_normal(cfg.incline_angle_deg, dx, dy);
          for (int v = bv0; v <= bv1; ++v) {
            for (int u = bu0; u <= bu1; ++u) {
              bool in_block = u >= u0 && u < u0 + w && v >= v0 && v < v0 + h;
              if (in_block) continue;
              auto& c = scene.cell({u, v});
              c.height = top / 2.0;
              c.normal = n;
              c.color = color;
            }
          }
        }
        placed = true;
      }
      ok = placed;
    }
    if (!ok) continue;
    bool flat_colored = false, flat_grey = false, inclined = false;
    for (const auto& c : scene.cells) {
      bool flat = is_flat(c.normal);
      flat_colored |= flat && !c.color.grey;
      flat_grey |= flat && c.color.grey;
      inclined |= !flat;
    }
    if (flat_colored && flat_grey && inclined) return scene;
  }
  throw PlacementError("could not generate a land scene with " + std::to_string(cfg.num_blocks) + " blocks after " +
                       std::to_string(kSceneAttempts) + " attempts");
}

GridScene generate_scene(std::uint64_t seed, const ScenarioConfig& cfg) {
  return cfg.scenario == Scenario::Grasp ? generate_grasp_scene(seed, cfg) : generate_land_scene(seed, cfg);
}

Observation observe(const GridScene& scene) {
  Observation obs;
  obs.width = scene.width;
  obs.height = scene.height;
  obs.channels = scene.observation_channels();
  const int palette = scene.palette_size();
  obs.data.assign(static_cast<std::size_t>(obs.width) * obs.height * obs.channels, 0.0);
  auto at = [&](Pixel p, int c) -> double& {
    return obs.data[(static_cast<std::size_t>(p.v) * obs.width + p.u) * obs.channels + c];
  };
  for (int v = 0; v < scene.height; ++v) {
    for (int u = 0; u < scene.width; ++u) {
      const auto& c = scene.cells[cell_index(scene, {u, v})];
      at({u, v}, 0) = c.height;
      if (c.color.grey) at({u, v}, 1) = 1.0;
      else at({u, v}, 2 + c.color.rank) = 1.0;
    }
  }
  for (const auto& obj : scene.objects) {
    if (obj.removed) continue;
    for (Pixel p : obj.footprint) {
      at(p, 0) = scene.cell(p).height + (obj.shape == Shape::Cube ? kCubeHeight : kBowlHeight);
      for (int c = 1; c < 2 + palette; ++c) at(p, c) = 0.0;
      if (obj.color.grey) at(p, 1) = 1.0;
      else at(p, 2 + obj.color.rank) = 1.0;
      if (scene.scenario == Scenario::Grasp && obj.shape == Shape::Cube) at(p, 2 + palette) = 1.0;
    }
  }
  return obs;
}

double flatness_angle(const Vec3& n) {
  double norm = std::sqrt(n.x * n.x + n.y * n.y + n.z * n.z);
  if (!(std::abs(norm - 1.0) <= 1e-6)) throw ContractError("surface normal is not unit length");
  if (n.z < 0.0) throw ContractError("surface normal must face upwards");
  // Dot product with the vertical (0, 0, 1) is the z component.
  double cosine = std::clamp(n.z, -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

bool is_flat(const Vec3& normal) { return flatness_angle(normal) <= kFlatThresholdDeg; }

RewardVector sub_rewards(const GridScene& scene, const Action& action) {
  require_in_bounds(scene, action.pixel);
  RewardVector r;
  r.names = scene.component_names();
  r.values.assign(r.names.size(), 0.0);
  if (scene.scenario == Scenario::Grasp) {
    const SceneObject* obj = scene.object_at(action.pixel);
    // Bowls and empty cells are failed grasps: every component is zero.
    if (obj != nullptr && obj->shape == Shape::Cube) {
      double rank = obj->color.grey ? 0.0 : static_cast<double>(obj->color.rank);
      r.values[0] = rank / static_cast<double>(scene.palette_size() - 1) * scene.properties[0].weight;
      r.values[1] = 1.0 * scene.properties[1].weight;
    }
  } else {
    const auto& c = scene.cell(action.pixel);
    if (is_flat(c.normal)) r.values[0] = scene.properties[0].weight;
    if (!c.color.grey) r.values[1] = scene.properties[1].weight;
  }
  return r;
}

double best_immediate_total(const GridScene& scene) {
  double best = 0.0;
  Primitive prim = primitive_for(scene.scenario);
  for (int v = 0; v < scene.height; ++v)
    for (int u = 0; u < scene.width; ++u) best = std::max(best, sub_rewards(scene, {prim, {u, v}}).total());
  return best;
}

StepOutcome step(GridScene& scene, const Action& action) {
  if (scene.done) throw EpisodeFinishedError("episode already finished");
  require_in_bounds(scene, action.pixel);
  StepOutcome out;
  out.reward = sub_rewards(scene, action);
  ++scene.steps_elapsed;
  if (scene.scenario == Scenario::Grasp) {
    const SceneObject* hit = scene.object_at(action.pixel);
    if (hit != nullptr && hit->shape == Shape::Cube) {
      int id = hit->id;
      for (auto& obj : scene.objects)
        if (obj.id == id) obj.removed = true;
      out.grasped_object = id;
      out.verdict = "grasped";
    } else {
      out.verdict = hit == nullptr ? "missed" : "failed";
    }
    scene.done = scene.live_cubes() == 0 || scene.steps_elapsed >= scene.step_limit;
  } else {
    const auto& c = scene.cell(action.pixel);
    out.verdict = std::string(is_flat(c.normal) ? "flat" : "inclined") + (c.color.grey ? "+grey" : "+colored");
    scene.done = true;
  }
  out.done = scene.done;
  out.next_observation = observe(scene);
  return out;
}

std::string describe_pixel(const GridScene& scene, Pixel p) {
  require_in_bounds(scene, p);
  if (scene.scenario == Scenario::Grasp) {
    const SceneObject* obj = scene.object_at(p);
    if (obj == nullptr) return "empty cell";
    std::string color = obj->color.grey ? "grey" : scene.palette[obj->color.rank];
    return color + " " + to_string(obj->shape);
  }
  const auto& c = scene.cell(p);
  std::string color = c.color.grey ? "grey" : scene.palette[c.color.rank];
  return std::string(is_flat(c.normal) ? "flat " : "inclined ") + color + " surface";
}

json scene_to_json(const GridScene& scene) {
  json cells = json::array();
  for (const auto& c : scene.cells) {
    cells.push_back({{"height", c.height},
                     {"normal", {c.normal.x, c.normal.y, c.normal.z}},
                     {"color", c.color.grey ? json(nullptr) : json(c.color.rank)}});
  }
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json fp = json::array();
    for (Pixel p : o.footprint) fp.push_back({p.u, p.v});
    objects.push_back({{"id", o.id},
                       {"shape", to_string(o.shape)},
                       {"color_rank", o.color.grey ? json(nullptr) : json(o.color.rank)},
                       {"footprint", fp},
                       {"removed", o.removed}});
  }
  return {{"format_version", kSceneFormatVersion},
          {"scenario", to_string(scene.scenario)},
          {"width", scene.width},
          {"height", scene.height},
          {"palette", scene.palette},
          {"properties", properties_to_json(scene.properties)},
          {"steps_elapsed", scene.steps_elapsed},
          {"step_limit", scene.step_limit},
          {"done", scene.done},
          {"cells", cells},
          {"objects", objects}};
}

GridScene scene_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kSceneFormatVersion) {
      throw FormatError("unsupported scene format_version " + j.at("format_version").dump());
    }
    GridScene s;
    s.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.palette = j.at("palette").get<std::vector<std::string>>();
    s.properties = j.contains("properties") ? properties_from_json(j.at("properties")) : default_properties(s.scenario);
    s.steps_elapsed = j.value("steps_elapsed", 0);
    s.step_limit = j.value("step_limit", s.scenario == Scenario::Grasp ? 50 : 1);
    s.done = j.value("done", false);
    if (s.width <= 0 || s.height <= 0) throw FormatError("scene dimensions must be positive");
    const auto& cells = j.at("cells");
    if (cells.size() != static_cast<std::size_t>(s.width) * s.height) throw FormatError("cell count does not match dimensions");
    for (const auto& c : cells) {
      SurfaceCell cell;
      cell.height = c.at("height").get<double>();
      auto n = c.at("normal").get<std::vector<double>>();
      if (n.size() != 3) throw FormatError("normal must have 3 components");
      cell.normal = {n[0], n[1], n[2]};
      cell.color = c.at("color").is_null() ? ColorId::grey_surface() : ColorId::of_rank(c.at("color").get<int>());
      if (!cell.color.grey && (cell.color.rank < 0 || cell.color.rank >= s.palette_size())) {
        throw FormatError("cell colour rank out of palette");
      }
      s.cells.push_back(cell);
    }
    for (const auto& o : j.at("objects")) {
      SceneObject obj;
      obj.id = o.at("id").get<int>();
      std::string shape = o.at("shape").get<std::string>();
      if (shape != "cube" && shape != "bowl") throw FormatError("unknown shape '" + shape + "'");
      obj.shape = shape == "cube" ? Shape::Cube : Shape::Bowl;
      obj.color = o.at("color_rank").is_null() ? ColorId::grey_surface() : ColorId::of_rank(o.at("color_rank").get<int>());
      for (const auto& p : o.at("footprint")) {
        Pixel px{p.at(0).get<int>(), p.at(1).get<int>()};
        if (!s.in_bounds(px)) throw FormatError("object footprint outside grid");
        obj.footprint.push_back(px);
      }
      obj.removed = o.value("removed", false);
      s.objects.push_back(std::move(obj));
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed scene document: ") + e.what());
  }
}

}  // namespace xqmap
