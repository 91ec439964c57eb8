"""Timing radius-graph construction against the full Vietoris-Rips lift."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import complex as cx
from .errors import InvalidInputError

BOND_LENGTH = 1.45      # typical heavy-atom bond, Angstrom
MIN_ATOMS, MAX_ATOMS = 9, 29


def qm9like_clouds(num_clouds: int, seed: int = 0) -> list[np.ndarray]:
    """Molecule-sized random walks in R^3, 9 to 29 points with bond-length steps."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(num_clouds):
        n = int(rng.integers(MIN_ATOMS, MAX_ATOMS + 1))
        steps = rng.normal(size=(n, 3))
        steps *= BOND_LENGTH / np.linalg.norm(steps, axis=1, keepdims=True)
        x = np.cumsum(steps, axis=0)
        out.append(x - x.mean(axis=0))
    return out


GENERATORS = {"qm9like": qm9like_clouds}


@dataclass
class BenchRow:
    delta: float
    rg_mean_ms: float
    rg_std_ms: float
    rg_median_ms: float
    vr_mean_ms: float
    vr_std_ms: float
    vr_median_ms: float
    counts: list[int]          # total simplices per dimension over all clouds

    @property
    def ratio(self) -> float:
        return self.vr_mean_ms / self.rg_mean_ms if self.rg_mean_ms > 0 else float("inf")


@dataclass
class BenchReport:
    rows: list[BenchRow]
    num_clouds: int
    repeats: int
    max_dim: int

    def header(self) -> list[str]:
        return (["delta", "rg_mean_ms", "rg_std_ms", "rg_median_ms", "vr_mean_ms", "vr_std_ms",
                 "vr_median_ms", "ratio"] + [f"count_dim{d}" for d in range(self.max_dim + 1)])

    def records(self) -> list[list]:
        out = []
        for r in self.rows:
            counts = list(r.counts) + [0] * (self.max_dim + 1 - len(r.counts))
            out.append([r.delta, r.rg_mean_ms, r.rg_std_ms, r.rg_median_ms, r.vr_mean_ms,
                        r.vr_std_ms, r.vr_median_ms, r.ratio] + counts)
        return out

    def write_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            w.writerows(self.records())


def _time_per_cloud(fn, clouds) -> float:
    start = time.perf_counter_ns()
    for x in clouds:
        fn(x)
    return (time.perf_counter_ns() - start) / len(clouds) / 1e6


def _stats(samples: list[float]) -> tuple[float, float, float]:
    a = np.asarray(samples)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0, float(np.median(a))


def run_bench(clouds, deltas, repeats: int = 10, max_dim: int = 2) -> BenchReport:
    """Per delta, `repeats` passes over all clouds for each builder; the first pass is warm-up.

    Times are per cloud in ms. Runs with BLAS and OpenMP pools pinned to one thread.
    """
    if repeats < 10:
        raise InvalidInputError("need at least 10 repeats")
    clouds = [np.asarray(c, dtype=np.float64) for c in clouds]
    if not clouds:
        raise InvalidInputError("need at least one point cloud")
    rows = []
    with threadpool_limits(limits=1):
        for delta in deltas:
            delta = float(delta)
            rg, vr = [], []
            for _ in range(repeats):
                rg.append(_time_per_cloud(lambda x: cx.radius_graph(x, delta), clouds))
                vr.append(_time_per_cloud(lambda x: cx.vietoris_rips(x, delta, max_dim), clouds))
            counts = np.zeros(max_dim + 1, dtype=np.int64)
            for x in clouds:
                c = cx.vietoris_rips(x, delta, max_dim).counts()
                counts[:len(c)] += c
            rows.append(BenchRow(delta, *_stats(rg[1:]), *_stats(vr[1:]), counts.tolist()))
    return BenchReport(rows, len(clouds), repeats, max_dim)
