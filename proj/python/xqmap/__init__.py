"""Python access to the xqmap core: scenes, explanations, the chat stub and training."""

import json

from . import _core

__all__ = [
    "Error",
    "build_prompt",
    "classify_question",
    "default_scenario",
    "describe_scene_values",
    "evaluate",
    "explain",
    "format3",
    "generate_scene",
    "predict",
    "step",
    "stub_answer",
    "train",
]


class Error(Exception):
    """A core error; ``kind`` is the stable tag (e.g. "bounds", "missing_pair")."""

    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.message = message


def _call(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except _core.Error as e:
        kind, message = e.args
        raise Error(kind, message) from None


def _dumps(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def default_scenario(name):
    return json.loads(_call(_core.default_scenario, name))


def generate_scene(seed, scenario="grasp"):
    cfg = default_scenario(scenario) if isinstance(scenario, str) else scenario
    return json.loads(_call(_core.generate_scene, seed, _dumps(cfg)))


def step(scene, pixel):
    """Apply the scenario's primitive at pixel (u, v); returns (next_scene, outcome)."""
    out = json.loads(_call(_core.step, _dumps(scene), int(pixel[0]), int(pixel[1])))
    return out["scene"], out["outcome"]


def explain(qmaps, scene, pixels=(), pairs=()):
    pixels = [(int(u), int(v)) for u, v in pixels]
    pairs = [(str(a), str(b)) for a, b in pairs]
    return json.loads(_call(_core.explain, _dumps(qmaps), _dumps(scene), pixels, pairs))


def describe_scene_values(bundle):
    return _call(_core.describe_scene_values, _dumps(bundle))


def build_prompt(bundle):
    return json.loads(_call(_core.build_prompt, _dumps(bundle)))


def stub_answer(bundle, question):
    return _call(_core.stub_answer, _dumps(bundle), question)


def classify_question(question):
    return _core.classify_question(question)


def train(config, mode="decomposed"):
    return json.loads(_call(_core.train, _dumps(config), mode))


def evaluate(checkpoint, config=None):
    return json.loads(_call(_core.evaluate, _dumps(checkpoint), _dumps(config or {})))


def predict(checkpoint, scene):
    return json.loads(_call(_core.predict, _dumps(checkpoint), _dumps(scene)))


def format3(value):
    return _core.format3(float(value))
