import csv

import numpy as np
import pytest

from empsn.harness import (GeometricSample, ModelPredictor, NBodyConfig, TrainConfig, TrainingDivergedError,
                           evaluate, load_model, simulate_nbody, train)
from empsn.harness.data import Normalization
from empsn.model import EmpsnConfig, EmpsnModel


def graph_samples(seed, count=10, n=4):
    r = np.random.default_rng(seed)
    return [GeometricSample(r.standard_normal((n, 3)), r.standard_normal((n, 1)), r.standard_normal(1) * 3 + 5)
            for _ in range(count)]


def small_graph_model(seed=0, **kw):
    return EmpsnModel(EmpsnConfig(hidden_dim=8, num_layers=2, update_positions=False, seed=seed, **kw))


@pytest.fixture(scope="module")
def nbody_data():
    cfg = NBodyConfig(counts={"train": 30, "val": 10, "test": 10}, seed=4)
    data = simulate_nbody(cfg)
    return ([s for s in data if s.split == "train"], [s for s in data if s.split == "val"],
            [s for s in data if s.split == "test"])


def small_nbody_model(seed=0):
    return EmpsnModel(EmpsnConfig(task="nbody", hidden_dim=6, num_layers=2, use_velocity=True, seed=seed))


def test_zero_learning_rate_keeps_parameters():
    m = small_graph_model()
    before = {k: v.copy() for k, v in m.state().items()}
    train(m, graph_samples(1), [], TrainConfig(epochs=1, batch_size=4, lr=0.0, weight_decay=1e-3))
    assert all(np.array_equal(before[k], v) for k, v in m.state().items())


def test_overfits_ten_samples():
    m = small_graph_model(hidden_dim=16) if False else EmpsnModel(
        EmpsnConfig(hidden_dim=16, num_layers=2, update_positions=False))
    res = train(m, graph_samples(0), [], TrainConfig(epochs=150, batch_size=10, lr=3e-3,
                                                     schedule="cosine", loss="mse"))
    losses = [row["train_loss"] for row in res.log]
    assert min(losses) < 0.01 * losses[0]


def test_same_seed_same_log(nbody_data):
    tr, va, _ = nbody_data
    logs = []
    for _ in range(2):
        res = train(small_nbody_model(), tr, va, TrainConfig.nbody(epochs=3, batch_size=8, seed=11))
        logs.append([{k: v for k, v in row.items() if k != "wall_seconds"} for row in res.log])
    assert logs[0] == logs[1]


def test_shuffle_seed_matters(nbody_data):
    tr, va, _ = nbody_data
    a = train(small_nbody_model(), tr, va, TrainConfig.nbody(epochs=2, batch_size=8, seed=1)).log
    b = train(small_nbody_model(), tr, va, TrainConfig.nbody(epochs=2, batch_size=8, seed=2)).log
    assert a[-1]["train_loss"] != b[-1]["train_loss"]


def test_outputs_and_best_checkpoint(tmp_path, nbody_data):
    tr, va, te = nbody_data
    res = train(small_nbody_model(), tr, va, TrainConfig.nbody(epochs=4, batch_size=10, lr=1e-3), out_dir=tmp_path)
    with open(tmp_path / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["epoch", "lr", "train_loss", "val_loss", "wall_seconds"]
    assert len(rows) == 4
    assert res.best_val == min(float(r["val_loss"]) for r in rows)
    loaded, norm, meta = load_model(tmp_path / "best.ckpt")
    assert norm is None and meta["epoch"] == res.best_epoch
    assert evaluate(loaded, te) == evaluate(res.model, te)


def test_graph_task_normalization_saved(tmp_path):
    samples = graph_samples(3, count=12)
    res = train(small_graph_model(), samples[:8], samples[8:], TrainConfig.graph(epochs=2, batch_size=4),
                out_dir=tmp_path)
    loaded, norm, _ = load_model(tmp_path / "best.ckpt")
    assert np.allclose(norm.mean, res.normalization.mean)
    assert evaluate(loaded, samples, "mae", norm) == evaluate(res.model, samples, "mae", res.normalization)


def test_nan_loss_aborts(nbody_data):
    tr, va, _ = nbody_data
    with pytest.raises(TrainingDivergedError, match="epoch"):
        with np.errstate(all="ignore"):
            train(small_nbody_model(), tr, va, TrainConfig.nbody(epochs=5, batch_size=10, lr=1e300))


def test_rejects_mismatched_features():
    m = EmpsnModel(EmpsnConfig(node_feature_dim=3, update_positions=False))
    with pytest.raises(ValueError):
        train(m, graph_samples(0), [], TrainConfig(epochs=1))


# evaluation ---------------------------------------------------------------------------------

class Oracle:
    def predict(self, samples):
        return [s.target for s in samples]


class Zero:
    def predict(self, samples):
        return [np.zeros_like(s.target) for s in samples]


def test_evaluate_closed_forms():
    samples = graph_samples(5, count=7)
    assert evaluate(Oracle(), samples, "mae") == 0.0
    assert evaluate(Oracle(), samples, "mse") == 0.0
    ys = np.concatenate([s.target for s in samples])
    assert evaluate(Zero(), samples, "mae") == pytest.approx(np.mean(np.abs(ys)), rel=1e-15)
    with pytest.raises(ValueError):
        evaluate(Zero(), [], "mae")
    with pytest.raises(ValueError):
        evaluate(Zero(), samples, "rmse")


def test_evaluate_matches_sample_loop(nbody_data):
    _, _, te = nbody_data
    m = small_nbody_model(seed=3)
    total = []
    for s in te:
        out = m.forward(m.prepare([s.positions], [s.node_features], [s.velocities]))["positions"].data
        total.append(np.mean((out - s.target) ** 2))
    assert evaluate(m, te, "mse") == pytest.approx(np.mean(total), rel=1e-12, abs=1e-15)


def test_graph_predictions_are_denormalized():
    samples = graph_samples(2, count=5)
    m = small_graph_model()
    norm = Normalization(np.array([100.0]), np.array([2.0]))
    raw = ModelPredictor(m).predict(samples)
    scaled = ModelPredictor(m, norm).predict(samples)
    assert np.allclose(np.array(scaled), np.array(raw) * 2.0 + 100.0, atol=1e-12)
