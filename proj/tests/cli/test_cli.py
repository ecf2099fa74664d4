"""End-to-end runs of the xqmap command-line tool. XQMAP_CLI points at the binary."""

import json
import os
import signal
import subprocess
import urllib.request

import pytest

CLI = os.environ.get("XQMAP_CLI", "xqmap")


def run(*args, env=None, check=True):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, env=env, timeout=300)
    if check and proc.returncode != 0:
        raise AssertionError(f"{args} exited {proc.returncode}: {proc.stderr}")
    return proc


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = {"scenario": {"scenario": "land", "width": 12, "height": 12},
           "train": {"total_steps": 200, "hidden": [4, 4], "batch_size": 8, "seed": 4},
           "eval": {"runs": 2, "decisions_per_run": 5}}
    (d / "config.json").write_text(json.dumps(cfg))
    run("train", "--config", d / "config.json", "--out", d / "model.json")
    run("gen-scene", "--config", d / "config.json", "--seed", 7, "--out", d / "scene.json")
    return d


def test_gen_scene_is_deterministic():
    a = run("gen-scene", "--scenario", "grasp", "--seed", 5, "--out", "-").stdout
    b = run("gen-scene", "--scenario", "grasp", "--seed", 5, "--out", "-").stdout
    assert a == b
    assert json.loads(a)["scenario"] == "grasp"


def test_usage_errors_exit_2():
    proc = run("gen-scene", "--scenario", "underwater", check=False)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"] == "usage"


def test_train_writes_checkpoint_and_metrics(workdir):
    ckpt = json.loads((workdir / "model.json").read_text())
    assert ckpt["manifest"]["format_version"] == 1
    assert ckpt["manifest"]["components"] == ["flat", "colored"]
    lines = (workdir / "model.json.metrics.jsonl").read_text().splitlines()
    assert lines
    for line in lines:
        m = json.loads(line)
        assert m["total_reward"] == pytest.approx(sum(m["per_component_reward"]), abs=1e-12)


def test_eval_prints_rate_and_report(workdir):
    out = run("eval", "--checkpoint", workdir / "model.json", "--config", workdir / "config.json",
              "--policy", "oracle", "--report", workdir / "report.json").stdout
    assert out.startswith("oracle (decomposed, land): 100.00% +/- 0.00% over 2 runs (10/10 correct)")
    assert json.loads((workdir / "report.json").read_text())["mean"] == 1.0


def test_explain_then_chat(workdir):
    out_dir = workdir / "explain"
    run("explain", "--checkpoint", workdir / "model.json", "--scene", workdir / "scene.json",
        "--pixel", "0,0", "--out-dir", out_dir)
    for name in ("bundle.json", "values.svg", "rdx.svg", "rdx.json", "texts.txt"):
        assert (out_dir / name).exists()
    bundle = json.loads((out_dir / "bundle.json").read_text())
    assert bundle["candidates"][-1]["label"] == "P1"

    first = run("chat", "--bundle", out_dir / "bundle.json", "--question", "why is pixel Selected chosen?").stdout
    assert "highest Q-value overall" in first
    run("chat", "--bundle", out_dir / "bundle.json", "--question", "why is pixel Selected preferred over pixel A?")
    transcript = json.loads((out_dir / "transcript.json").read_text())
    roles = [m["role"] for m in transcript["conversation"]["messages"]]
    assert roles == ["system", "human", "ai", "human", "ai"]


def test_remote_chat_needs_credential(workdir):
    env = {k: v for k, v in os.environ.items() if k != "XQMAP_CLI_TEST_KEY"}
    run("explain", "--checkpoint", workdir / "model.json", "--scene", workdir / "scene.json", "--out-dir",
        workdir / "remote")
    proc = run("chat", "--bundle", workdir / "remote" / "bundle.json", "--question", "why?", "--remote",
               "--endpoint", "http://127.0.0.1:9/v1/chat/completions", "--credential-env", "XQMAP_CLI_TEST_KEY",
               env=env, check=False)
    assert proc.returncode == 1
    assert json.loads(proc.stderr)["error"] == "missing_credential"


def test_serve_answers_http(workdir):
    proc = subprocess.Popen([CLI, "serve", "--checkpoint", str(workdir / "model.json"), "--port", "0", "--seed", "3"],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        port = json.loads(proc.stdout.readline())["port"]
        base = f"http://127.0.0.1:{port}"
        health = json.loads(urllib.request.urlopen(base + "/health", timeout=10).read())
        assert health["scene_loaded"] is True
        req = urllib.request.Request(base + "/act", data=b"{}", method="POST")
        step = json.loads(urllib.request.urlopen(req, timeout=10).read())
        assert step["done"] is True
    finally:
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=20) == 0
