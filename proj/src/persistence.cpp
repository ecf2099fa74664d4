#include "xqmap/persistence.hpp"

namespace xqmap {

namespace {

using json = nlohmann::json;

json grid_json(const QMap& m) {
  json rows = json::array();
  for (int v = 0; v < m.height(); ++v) {
    json row = json::array();
    for (int u = 0; u < m.width(); ++u) row.push_back(m.at({u, v}));
    rows.push_back(std::move(row));
  }
  return rows;
}

QMap grid_from_json(const json& rows, int width, int height) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != height) throw FormatError("Q-Map grid has wrong row count");
  QMap m(width, height);
  for (int v = 0; v < height; ++v) {
    const auto& row = rows[static_cast<std::size_t>(v)];
    if (!row.is_array() || static_cast<int>(row.size()) != width) throw FormatError("Q-Map row has wrong width");
    for (int u = 0; u < width; ++u) m.at({u, v}) = row[static_cast<std::size_t>(u)].get<double>();
  }
  return m;
}

Primitive primitive_from_string(const std::string& s) {
  if (s == to_string(Primitive::PickUp)) return Primitive::PickUp;
  if (s == to_string(Primitive::Land)) return Primitive::Land;
  throw FormatError("unknown primitive '" + s + "'");
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  if (!ckpt.approximator) throw ContractError("checkpoint has no approximator");
  const ParameterBlob blob = ckpt.approximator->save_parameters();
  json manifest = {{"format_version", kCheckpointFormatVersion},
                   {"mode", to_string(ckpt.config.mode)},
                   {"K", ckpt.approximator->num_components()},
                   {"components", ckpt.approximator->component_names()},
                   {"weights", ckpt.approximator->weights()},
                   {"reward_components", ckpt.reward_components},
                   {"primitive", to_string(ckpt.primitive)},
                   {"step", ckpt.step},
                   {"config", to_json(ckpt.config)},
                   {"scenario", ckpt.scenario ? to_json(*ckpt.scenario) : json(nullptr)},
                   {"layer_shapes", blob.manifest.value("layer_shapes", json::array())},
                   {"approximator", blob.manifest}};
  json payload = json::array();
  for (const auto& a : blob.arrays) payload.push_back(encode_doubles(a));
  return {{"manifest", std::move(manifest)}, {"payload", std::move(payload)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    const json& m = j.at("manifest");
    const int version = m.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError("checkpoint format_version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointFormatVersion) + ")");
    }
    Checkpoint c;
    c.config = train_config_from_json(m.at("config"));
    if (!m.at("scenario").is_null()) c.scenario = scenario_config_from_json(m.at("scenario"));
    c.reward_components = m.at("reward_components").get<std::vector<std::string>>();
    c.primitive = primitive_from_string(m.at("primitive").get<std::string>());
    c.step = m.at("step").get<std::int64_t>();
    if (m.at("mode").get<std::string>() != to_string(c.config.mode)) {
      throw FormatError("checkpoint mode disagrees with its config echo");
    }

    ParameterBlob blob;
    blob.manifest = m.at("approximator");
    for (const auto& p : j.at("payload")) blob.arrays.push_back(decode_doubles(p.get<std::string>()));
    c.approximator = load_approximator(blob);
    if (c.approximator->num_components() != m.at("K").get<std::size_t>() ||
        c.approximator->component_names() != m.at("components").get<std::vector<std::string>>()) {
      throw FormatError("checkpoint component list disagrees with its parameters");
    }
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config echo rejected: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file(path, canonical_dump(checkpoint_to_json(ckpt)));
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

json qmaps_to_json(const QMapSet& q, Primitive primitive) {
  q.validate();
  json maps = json::array();
  for (const auto& m : q.maps) maps.push_back(grid_json(m));
  return {{"width", q.width()},
          {"height", q.height()},
          {"components", q.names},
          {"weights", q.weights},
          {"maps", std::move(maps)},
          {"composite", grid_json(composite(q))},
          {"selected", action_to_json(select_global(q, primitive))}};
}

QMapSet qmaps_from_json(const json& j) {
  try {
    QMapSet q;
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    q.names = j.at("components").get<std::vector<std::string>>();
    q.weights = j.contains("weights") ? j.at("weights").get<std::vector<double>>()
                                      : std::vector<double>(q.names.size(), 1.0);
    const auto& maps = j.at("maps");
    if (!maps.is_array() || maps.size() != q.names.size()) throw FormatError("one grid per component expected");
    for (const auto& g : maps) q.maps.push_back(grid_from_json(g, width, height));
    q.validate();
    return q;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed Q-Map set: ") + e.what());
  }
}

json action_to_json(const Action& a) {
  return {{"primitive", to_string(a.primitive)}, {"pixel", {a.pixel.u, a.pixel.v}}};
}

json reward_to_json(const RewardVector& r) {
  return {{"names", r.names}, {"values", r.values}, {"total", r.total()}};
}

json step_outcome_to_json(const Action& action, const StepOutcome& out) {
  return {{"action", action_to_json(action)},
          {"reward", reward_to_json(out.reward)},
          {"done", out.done},
          {"grasped_object", out.grasped_object ? json(*out.grasped_object) : json(nullptr)},
          {"verdict", out.verdict}};
}

std::string canonical_dump(const json& j) { return j.dump() + "\n"; }

}  // namespace xqmap
