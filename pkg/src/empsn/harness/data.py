"""Samples, JSON-lines ingestion and target normalization."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError


class DatasetError(InvalidInputError):
    pass


@dataclass
class GeometricSample:
    positions: np.ndarray             # (N, n)
    node_features: np.ndarray         # (N, F)
    target: np.ndarray                # (T,) for graph targets, (N, n) for trajectories
    velocities: np.ndarray | None = None
    split: str | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.node_features = np.asarray(self.node_features, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=np.float64)
        if self.velocities is not None:
            self.velocities = np.asarray(self.velocities, dtype=np.float64)
        self.validate()

    @property
    def num_nodes(self) -> int:
        return self.positions.shape[0]

    def validate(self) -> None:
        p, f = self.positions, self.node_features
        if p.ndim != 2 or p.shape[1] < 1:
            raise DatasetError(f"positions must be (N, n), got shape {p.shape}")
        if f.ndim != 2:
            raise DatasetError(f"node features must be (N, F), got shape {f.shape}")
        if f.shape[0] != p.shape[0]:
            raise DatasetError(f"{p.shape[0]} positions but {f.shape[0]} feature rows")
        if self.velocities is not None and self.velocities.shape != p.shape:
            raise DatasetError(f"velocities {self.velocities.shape} do not match positions {p.shape}")
        if self.target.ndim == 0:
            self.target = self.target.reshape(1)
        for name, arr in (("positions", p), ("features", f), ("target", self.target),
                          ("velocities", self.velocities)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise DatasetError(f"non-finite {name}")

    def to_record(self) -> dict:
        rec = {"pos": self.positions.tolist(), "feat": self.node_features.tolist(),
               "target": self.target.tolist()}
        if self.velocities is not None:
            rec["vel"] = self.velocities.tolist()
        if self.split is not None:
            rec["split"] = self.split
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "GeometricSample":
        if not isinstance(rec, dict):
            raise DatasetError("record is not a JSON object")
        missing = {"pos", "feat", "target"} - set(rec)
        if missing:
            raise DatasetError(f"missing keys {sorted(missing)}")
        pos = np.asarray(rec["pos"], dtype=np.float64)
        if pos.ndim == 2 and pos.shape[0] == 0:
            raise DatasetError("sample has no nodes")
        return cls(pos, rec["feat"], rec["target"], rec.get("vel"), rec.get("split"))


def load_pointcloud(path) -> list[GeometricSample]:
    """Read one sample per line; blank lines are skipped."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(GeometricSample.from_record(json.loads(line)))
            except (ValueError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return out


def save_pointcloud(path, samples) -> None:
    # json writes floats with repr, which round-trips float64 exactly
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record()) + "\n")


def split_samples(samples) -> dict[str, list[GeometricSample]]:
    out: dict[str, list[GeometricSample]] = {}
    for s in samples:
        out.setdefault(s.split or "train", []).append(s)
    return out


# target normalization -------------------------------------------------------

@dataclass(frozen=True)
class Normalization:
    mean: np.ndarray
    mad: np.ndarray

    def apply(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.mean) / self.mad

    def invert(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.mad + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "mad": self.mad.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Normalization":
        return cls(np.asarray(doc["mean"], dtype=np.float64), np.asarray(doc["mad"], dtype=np.float64))


def normalize_targets(targets) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center on the mean, scale by the mean absolute deviation (per column)."""
    y = np.asarray(targets, dtype=np.float64)
    if y.size == 0:
        raise InvalidInputError("need at least one target")
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    mean = y.mean(axis=0)
    mad = np.abs(y - mean).mean(axis=0)
    flat = mad == 0
    if flat.any():
        warnings.warn(f"zero mean absolute deviation in target columns {np.nonzero(flat)[0].tolist()}; "
                      "scaling by 1 instead", RuntimeWarning, stacklevel=2)
        mad = np.where(flat, 1.0, mad)
    z = (y - mean) / mad
    if squeeze:
        return mean[0], mad[0], z[:, 0]
    return mean, mad, z


def denormalize(z, mean, mad) -> np.ndarray:
    return np.asarray(z, dtype=np.float64) * mad + mean


def fit_normalization(samples) -> Normalization:
    mean, mad, _ = normalize_targets(np.stack([s.target for s in samples]))
    return Normalization(np.atleast_1d(mean), np.atleast_1d(mad))
