"""Training and evaluation loops.

Two profiles: graph regression (MAE on mean/MAD normalized targets, cosine
schedule) and trajectory prediction (MSE on final positions, constant rate).
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError, UsageError
from ..model import EmpsnConfig, EmpsnModel, collate, lift
from ..nn import Tape, adam_step, cosine_lr, load_checkpoint, save_checkpoint
from ..nn import autodiff as ad
from .data import GeometricSample, Normalization, fit_normalization

METRIC_COLUMNS = ("epoch", "lr", "train_loss", "val_loss", "wall_seconds")


class TrainingDivergedError(ArithmeticError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 100
    lr: float = 5e-4
    weight_decay: float = 1e-12
    schedule: str = "constant"      # "constant" or "cosine"
    loss: str = "mse"               # "mse" or "mae"
    seed: int = 0
    eval_batch_size: int = 500

    def __post_init__(self):
        if self.schedule not in ("constant", "cosine"):
            raise InvalidInputError(f"unknown schedule {self.schedule!r}")
        if self.loss not in ("mse", "mae"):
            raise InvalidInputError(f"unknown loss {self.loss!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise InvalidInputError("need epochs >= 0, batch_size >= 1 and lr >= 0")

    @classmethod
    def nbody(cls, **kw) -> "TrainConfig":
        base = dict(batch_size=100, lr=5e-4, weight_decay=1e-12, schedule="constant", loss="mse")
        return cls(**{**base, **kw})

    @classmethod
    def graph(cls, **kw) -> "TrainConfig":
        base = dict(batch_size=128, lr=5e-4, weight_decay=1e-16, schedule="cosine", loss="mae")
        return cls(**{**base, **kw})

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown training keys {sorted(unknown)}")
        return cls(**doc)


@dataclass
class TrainResult:
    model: EmpsnModel
    log: list[dict]
    best_epoch: int
    best_val: float
    normalization: Normalization | None


class Prepared:
    """Samples with their complexes lifted once."""

    def __init__(self, model: EmpsnModel, samples, normalization: Normalization | None = None):
        self.samples = list(samples)
        self.config = model.config
        self.relations = model.relations
        self.complexes = [lift(s.positions, model.config) for s in self.samples]
        targets = [s.target for s in self.samples]
        if normalization is not None:
            targets = [normalization.apply(t) for t in targets]
        self.targets = targets

    def __len__(self) -> int:
        return len(self.samples)

    def batch(self, index):
        c = self.config
        vel = [self.samples[i].velocities for i in index] if c.use_velocity else None
        if c.use_velocity and any(v is None for v in vel):
            raise InvalidInputError("model uses velocities but a sample has none")
        b = collate([self.complexes[i] for i in index], [self.samples[i].node_features for i in index],
                    self.relations, vel)
        if c.task == "nbody":
            y = np.concatenate([self.targets[i] for i in index])
        else:
            y = np.stack([self.targets[i] for i in index])
        return b, y


def _check_compatible(model: EmpsnModel, samples) -> None:
    c = model.config
    for s in samples:
        if s.node_features.shape[1] != c.node_feature_dim:
            raise InvalidInputError(f"samples have {s.node_features.shape[1]} node features, "
                                    f"model expects {c.node_feature_dim}")
        if c.task == "nbody" and s.target.shape != s.positions.shape:
            raise InvalidInputError("trajectory targets must have the shape of the positions")
        if c.task == "graph" and s.target.size != c.out_dim:
            raise InvalidInputError(f"targets have width {s.target.size}, model predicts {c.out_dim}")


def _output(model: EmpsnModel, out: dict) -> ad.Tensor:
    return out["positions"] if model.config.task == "nbody" else out["prediction"]


def _loss(pred: ad.Tensor, y: np.ndarray, kind: str) -> ad.Tensor:
    err = pred - ad.Tensor(y)
    if kind == "mse":
        return ad.mean(err * err)
    return ad.mean(ad.tabs(err))


def _batches(n: int, size: int, order: np.ndarray | None = None):
    idx = np.arange(n) if order is None else order
    for start in range(0, n, size):
        yield idx[start:start + size]


def dataset_loss(model: EmpsnModel, data: Prepared, kind: str, batch_size: int) -> float:
    """Mean per-entry loss over a prepared set (eval mode, no tape)."""
    total, count = 0.0, 0
    for index in _batches(len(data), batch_size):
        b, y = data.batch(index)
        pred = _output(model, model.forward(b)).data
        err = pred - y
        total += float(np.sum(err * err) if kind == "mse" else np.sum(np.abs(err)))
        count += err.size
    return total / count


def train(model: EmpsnModel, train_set, val_set, cfg: TrainConfig, out_dir=None,
          log_every=None) -> TrainResult:
    """Adam with fixed-seed shuffling; keeps (and restores) the best validation state.

    With `out_dir`, writes metrics.csv after every epoch and best.ckpt whenever
    validation improves.
    """
    train_set, val_set = list(train_set), list(val_set)
    if not train_set:
        raise InvalidInputError("empty training set")
    _check_compatible(model, train_set + val_set)
    norm = fit_normalization(train_set) if model.config.task == "graph" else None
    tr = Prepared(model, train_set, norm)
    va = Prepared(model, val_set, norm) if val_set else None
    rng = np.random.default_rng(cfg.seed)
    steps_per_epoch = math.ceil(len(tr) / cfg.batch_size)
    total_steps = max(cfg.epochs * steps_per_epoch, 1)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "metrics.csv", "w", newline="") as fh:
            csv.writer(fh).writerow(METRIC_COLUMNS)
    log: list[dict] = []
    best_val, best_epoch, best_state = math.inf, -1, model.state()
    start = time.perf_counter()
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(tr))
        total, count = 0.0, 0
        for index in _batches(len(tr), cfg.batch_size, order):
            lr = cfg.lr if cfg.schedule == "constant" else cosine_lr(step, total_steps, cfg.lr)
            b, y = tr.batch(index)
            with Tape() as tape:
                loss = _loss(_output(model, model.forward(b, train=True)), y, cfg.loss)
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDivergedError(
                        f"non-finite loss {value} at epoch {epoch}, step {step} (lr={lr:g}); "
                        f"last finite train loss {log[-1]['train_loss'] if log else 'n/a'}")
                tape.backward(loss, model.store)
            adam_step(model.store, lr, weight_decay=cfg.weight_decay)
            total += value * len(index)
            count += len(index)
            step += 1
        train_loss = total / count
        val_loss = dataset_loss(model, va, cfg.loss, cfg.eval_batch_size) if va else train_loss
        row = {"epoch": epoch, "lr": lr, "train_loss": train_loss, "val_loss": val_loss,
               "wall_seconds": time.perf_counter() - start}
        log.append(row)
        if val_loss < best_val:
            best_val, best_epoch, best_state = val_loss, epoch, model.state()
            if out is not None:
                save_model(out / "best.ckpt", model, norm, {"epoch": epoch, "val_loss": val_loss})
        if out is not None:
            with open(out / "metrics.csv", "a", newline="") as fh:
                csv.writer(fh).writerow([row[k] if k != "lr" else repr(row[k]) for k in METRIC_COLUMNS])
        if log_every and epoch % log_every == 0:
            print(f"epoch {epoch}: train {train_loss:.6g} val {val_loss:.6g} "
                  f"({row['wall_seconds']:.1f}s)", flush=True)
    model.load_state(best_state)
    if out is not None and best_epoch < 0:
        save_model(out / "best.ckpt", model, norm, {"epoch": 0, "val_loss": None})
    return TrainResult(model, log, best_epoch, best_val, norm)


# persistence -------------------------------------------------------------------

def save_model(path, model: EmpsnModel, normalization: Normalization | None = None,
               extra: dict | None = None) -> None:
    meta = {"config": json.loads(model.config.to_json()),
            "normalization": normalization.to_dict() if normalization is not None else None}
    if extra:
        meta.update(extra)
    save_checkpoint(path, model.state(), meta)


def load_model(path) -> tuple[EmpsnModel, Normalization | None, dict]:
    arrays, meta = load_checkpoint(path)
    if "config" not in meta:
        raise InvalidInputError(f"{path}: checkpoint has no model config")
    model = EmpsnModel(EmpsnConfig.from_dict(meta["config"]))
    model.load_state(arrays)
    norm = meta.get("normalization")
    return model, (Normalization.from_dict(norm) if norm else None), meta


# evaluation --------------------------------------------------------------------

class ModelPredictor:
    """Adapts a model to `predict(samples)`, undoing target normalization."""

    def __init__(self, model: EmpsnModel, normalization: Normalization | None = None,
                 batch_size: int = 500):
        if model.config.task == "graph" and normalization is None:
            normalization = Normalization(np.zeros(model.config.out_dim), np.ones(model.config.out_dim))
        self.model = model
        self.normalization = normalization
        self.batch_size = batch_size

    def predict(self, samples) -> list[np.ndarray]:
        samples = list(samples)
        data = Prepared(self.model, samples)
        out = []
        for index in _batches(len(data), self.batch_size):
            b, _ = data.batch(index)
            pred = _output(self.model, self.model.forward(b)).data
            if self.model.config.task == "nbody":
                out.extend(np.split(pred, b.node_offsets[1:-1]))
            else:
                out.extend(self.normalization.invert(pred))
        return out


def evaluate(predictor, samples, metric: str = "mse", normalization: Normalization | None = None) -> float:
    """Mean absolute or squared error over every target entry of every sample."""
    if metric not in ("mae", "mse"):
        raise InvalidInputError(f"unknown metric {metric!r}")
    samples = list(samples)
    if not samples:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    if isinstance(predictor, EmpsnModel):
        predictor = ModelPredictor(predictor, normalization)
    if not hasattr(predictor, "predict"):
        raise UsageError("predictor needs a predict(samples) method")
    preds = predictor.predict(samples)
    err = np.concatenate([(np.asarray(p, dtype=np.float64) - s.target).ravel()
                          for p, s in zip(preds, samples)])
    return float(np.mean(err * err) if metric == "mse" else np.mean(np.abs(err)))
