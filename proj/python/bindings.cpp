// JSON-in, JSON-out bindings; python/xqmap/__init__.py converts to dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xqmap/config.hpp"
#include "xqmap/explainer.hpp"
#include "xqmap/llm_bridge.hpp"
#include "xqmap/persistence.hpp"
#include "xqmap/trainer.hpp"

namespace py = pybind11;
using json = nlohmann::json;

namespace {

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw xqmap::FormatError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(); }

xqmap::ScenarioConfig scenario_config(const std::string& text) {
  return xqmap::scenario_config_from_json(parse(text, "scenario config"));
}

std::string generate(std::uint64_t seed, const std::string& cfg) {
  return dump(xqmap::scene_to_json(xqmap::generate_scene(seed, scenario_config(cfg))));
}

std::string default_scenario(const std::string& name) {
  return dump(xqmap::to_json(xqmap::ScenarioConfig::defaults_for(xqmap::scenario_from_string(name))));
}

std::string step_scene(const std::string& scene_json, int u, int v) {
  xqmap::GridScene scene = xqmap::scene_from_json(parse(scene_json, "scene"));
  const xqmap::Action a{xqmap::primitive_for(scene.scenario), {u, v}};
  const xqmap::StepOutcome out = xqmap::step(scene, a);
  return dump({{"scene", xqmap::scene_to_json(scene)}, {"outcome", xqmap::step_outcome_to_json(a, out)}});
}

std::string explain(const std::string& qmaps, const std::string& scene, const std::vector<std::pair<int, int>>& pixels,
                    const std::vector<std::pair<std::string, std::string>>& pairs) {
  xqmap::ExplainOptions opts;
  for (auto [u, v] : pixels) opts.extra_pixels.push_back({u, v});
  opts.extra_pairs = pairs;
  return dump(xqmap::bundle_to_json(xqmap::explain(xqmap::qmaps_from_json(parse(qmaps, "Q-Maps")),
                                                   xqmap::scene_from_json(parse(scene, "scene")), opts)));
}

xqmap::ExplanationBundle bundle(const std::string& text) { return xqmap::bundle_from_json(parse(text, "bundle")); }

std::string prompt(const std::string& bundle_json) {
  const auto b = bundle(bundle_json);
  return dump(xqmap::to_json(xqmap::build_prompt(b.scenario, b)));
}

std::string train(const std::string& repo_config, const std::string& mode) {
  xqmap::RepoConfig rc = xqmap::repo_config_from_json(parse(repo_config, "config"));
  rc.train.mode = xqmap::train_mode_from_string(mode);
  py::gil_scoped_release release;
  return dump(xqmap::checkpoint_to_json(xqmap::train(xqmap::scene_env_factory(rc.scenario), rc.train)));
}

std::string evaluate(const std::string& checkpoint, const std::string& repo_config) {
  const xqmap::RepoConfig rc = xqmap::repo_config_from_json(parse(repo_config, "config"));
  const xqmap::Checkpoint c = xqmap::checkpoint_from_json(parse(checkpoint, "checkpoint"));
  const xqmap::ScenarioConfig sc = c.scenario ? *c.scenario : rc.scenario;
  py::gil_scoped_release release;
  return dump(xqmap::to_json(xqmap::evaluate(c, xqmap::scene_env_factory(sc), rc.eval)));
}

std::string predict(const std::string& checkpoint, const std::string& scene_json) {
  const xqmap::Checkpoint c = xqmap::checkpoint_from_json(parse(checkpoint, "checkpoint"));
  const xqmap::GridScene scene = xqmap::scene_from_json(parse(scene_json, "scene"));
  return dump(xqmap::qmaps_to_json(c.approximator->predict(xqmap::observe(scene)), c.primitive));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<xqmap::Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const xqmap::Error& e) {
      py::object args = py::make_tuple(e.kind(), e.what());
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  m.def("default_scenario", &default_scenario, py::arg("scenario"));
  m.def("generate_scene", &generate, py::arg("seed"), py::arg("scenario_config"));
  m.def("step", &step_scene, py::arg("scene"), py::arg("u"), py::arg("v"));
  m.def("explain", &explain, py::arg("qmaps"), py::arg("scene"), py::arg("pixels") = std::vector<std::pair<int, int>>{},
        py::arg("pairs") = std::vector<std::pair<std::string, std::string>>{});
  m.def("describe_scene_values", [](const std::string& b) { return xqmap::describe_scene_values(bundle(b)); });
  m.def("build_prompt", &prompt);
  m.def("stub_answer", [](const std::string& b, const std::string& q) { return xqmap::stub_answer(bundle(b), q); });
  m.def("classify_question", [](const std::string& q) { return xqmap::to_string(xqmap::classify_question(q)); });
  m.def("train", &train, py::arg("config"), py::arg("mode") = "decomposed");
  m.def("evaluate", &evaluate, py::arg("checkpoint"), py::arg("config"));
  m.def("predict", &predict, py::arg("checkpoint"), py::arg("scene"));
  m.def("format3", &xqmap::format3);
}
