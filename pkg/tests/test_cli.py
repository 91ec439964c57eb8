import csv
import json

import numpy as np
import pytest

from empsn import complex as cx
from empsn.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    return dict(line.split(",", 1) for line in text.strip().splitlines()[1:])


@pytest.fixture
def points(tmp_path):
    p = tmp_path / "pts.json"
    p.write_text(json.dumps(np.random.default_rng(0).standard_normal((6, 3)).tolist()))
    return p


def test_lift_fully_connected(capsys, tmp_path, points):
    out = tmp_path / "K.json"
    code, text, _ = run(capsys, "lift", "--input", points, "--max-dim", 3, "--output", out)
    assert code == 0 and table(text) == {"0": "6", "1": "15", "2": "20", "3": "15"}
    cx.SimplicialComplex.from_json(out.read_text()).validate()


def test_lift_radius_and_invariants(capsys, tmp_path, points):
    K = tmp_path / "K.json"
    code, text, _ = run(capsys, "lift", "--input", points, "--delta", 1.5, "--output", K)
    ref = cx.vietoris_rips(json.loads(points.read_text()), 1.5, 2).counts()
    assert code == 0 and [int(v) for v in table(text).values()] == ref
    inv = tmp_path / "inv.csv"
    code, text, _ = run(capsys, "invariants", "--input", K, "--output", inv)
    with open(inv) as fh:
        rows = list(csv.DictReader(fh))
    assert code == 0 and int(table(text)["pairs"]) == len(rows)
    assert {r["kind"] for r in rows} <= {"boundary", "coboundary", "upper"}


def test_missing_input_is_error(capsys, tmp_path):
    code, _, err = run(capsys, "lift", "--input", tmp_path / "nope.json", "--output", tmp_path / "o")
    assert code == 2 and err.startswith("error:")


def test_bad_delta_is_error(capsys, tmp_path, points):
    code, _, err = run(capsys, "lift", "--input", points, "--delta", -1, "--output", tmp_path / "o")
    assert code == 2 and "error" in err


def test_simulate_train_eval_check(capsys, tmp_path):
    data = tmp_path / "nb.jsonl"
    code, text, _ = run(capsys, "simulate", "--train", 12, "--val", 4, "--test", 4, "--steps", 50,
                        "--seed", 3, "--out", data)
    assert code == 0 and table(text) == {"train": "12", "val": "4", "test": "4"}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": {"hidden_dim": 6, "num_layers": 2}, "train": {"batch_size": 4}}))
    out = tmp_path / "run"
    code, text, _ = run(capsys, "train", "--task", "nbody", "--config", cfg, "--data", data, "--out", out,
                        "--epochs", 2)
    assert code == 0
    for name in ("config.json", "metrics.csv", "metrics.png", "best.ckpt"):
        assert (out / name).exists()
    summary = table(text)
    code, text, _ = run(capsys, "eval", "--model", out / "best.ckpt", "--data", data, "--metric", "mse")
    assert code == 0 and float(table(text)["mse"]) == float(summary["test_mse"])
    code, text, _ = run(capsys, "check-equivariance", "--model", out / "best.ckpt", "--data", data,
                        "--trials", 3)
    assert code == 0 and text.strip().endswith("result: PASS")
    code, text, _ = run(capsys, "params-count", "--config", out / "config.json")
    assert code == 0 and text.strip() == summary["parameters"]


def test_graph_training(capsys, tmp_path):
    from empsn.harness import GeometricSample, save_pointcloud
    r = np.random.default_rng(1)
    samples = [GeometricSample(r.standard_normal((5, 3)), r.standard_normal((5, 2)), r.standard_normal(2),
                               split=split) for split in ["train"] * 6 + ["val"] * 2 + ["test"] * 2]
    data = tmp_path / "g.jsonl"
    save_pointcloud(data, samples)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hidden_dim": 4, "num_layers": 1, "update_positions": False}))
    code, text, _ = run(capsys, "train", "--task", "graph", "--config", cfg, "--data", data,
                        "--out", tmp_path / "g", "--epochs", 2)
    assert code == 0 and "test_mae" in table(text)
    code, text, _ = run(capsys, "eval", "--model", tmp_path / "g" / "best.ckpt", "--data", data,
                        "--metric", "mae", "--split", "all")
    assert code == 0 and float(table(text)["mae"]) > 0


def test_seed_env_override(capsys, tmp_path, monkeypatch):
    a, b, c = tmp_path / "a.jsonl", tmp_path / "b.jsonl", tmp_path / "c.jsonl"
    args = ["simulate", "--train", 2, "--val", 0, "--test", 0, "--steps", 5]
    monkeypatch.setenv("EMPSN_SEED", "9")
    run(capsys, *args, "--seed", 1, "--out", a)
    run(capsys, *args, "--seed", 2, "--out", b)
    monkeypatch.delenv("EMPSN_SEED")
    run(capsys, *args, "--seed", 1, "--out", c)
    assert a.read_text() == b.read_text() != c.read_text()
    monkeypatch.setenv("EMPSN_SEED", "x")
    code, _, err = run(capsys, *args, "--out", a)
    assert code == 2 and "EMPSN_SEED" in err


def test_bench_and_plot(capsys, tmp_path):
    out = tmp_path / "bench.csv"
    code, text, _ = run(capsys, "bench", "--deltas", "2,4", "--repeats", 10, "--num-clouds", 3, "--out", out)
    assert code == 0 and out.exists() and out.with_suffix(".png").exists()
    assert text.splitlines()[0].startswith("delta,rg_mean_ms")
    code, text, _ = run(capsys, "plot", "--kind", "bench", "--csv", out, "--out", tmp_path / "b.png")
    assert code == 0 and (tmp_path / "b.png").exists()
    code, _, err = run(capsys, "bench", "--repeats", 2, "--num-clouds", 1, "--out", out)
    assert code == 2
    code, _, err = run(capsys, "bench", "--points", "uniform", "--out", out)
    assert code == 2 and "uniform" in err
