"""Charged-particle N-body trajectories with softened Coulomb forces.

Positions start N(0, 1) per coordinate, every body gets a random direction
scaled to a fixed speed, and charges are +-1 with equal probability.
Integration is velocity Verlet (kick-drift-kick leapfrog) with unit masses.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidInputError
from .data import GeometricSample

SPLITS = ("train", "val", "test")


@dataclass
class NBodyConfig:
    num_bodies: int = 5
    dim: int = 3
    dt: float = 1e-3
    num_steps: int = 1000
    softening: float = 0.1
    loc_std: float = 1.0
    speed: float = 0.5
    seed: int = 0
    counts: dict = field(default_factory=lambda: {"train": 3000, "val": 2000, "test": 2000})
    scale: float = 1.0

    def __post_init__(self):
        if self.dt <= 0 or self.softening <= 0:
            raise InvalidInputError("dt and softening must be positive")
        if self.num_bodies < 1 or self.num_steps < 0 or self.dim < 1:
            raise InvalidInputError("need num_bodies >= 1, dim >= 1 and num_steps >= 0")
        if set(self.counts) - set(SPLITS):
            raise InvalidInputError(f"unknown splits {sorted(set(self.counts) - set(SPLITS))}")
        if self.scale <= 0:
            raise InvalidInputError("scale must be positive")

    @property
    def horizon(self) -> float:
        return self.dt * self.num_steps

    def split_sizes(self) -> dict[str, int]:
        return {s: int(round(self.counts.get(s, 0) * self.scale)) for s in SPLITS}

    def to_dict(self) -> dict:
        return asdict(self)


def coulomb_accelerations(x: np.ndarray, charges: np.ndarray, softening: float) -> np.ndarray:
    """x: (..., N, n), charges: (..., N). Unit masses."""
    diff = x[..., :, None, :] - x[..., None, :, :]
    r2 = np.sum(diff * diff, axis=-1) + softening ** 2
    qq = charges[..., :, None] * charges[..., None, :]
    w = qq / (r2 * np.sqrt(r2))
    # the diagonal has diff = 0, so self-interaction drops out
    return np.sum(w[..., None] * diff, axis=-2)


def integrate(x0, v0, charges, dt: float, num_steps: int, softening: float,
              keep_every: int | None = None):
    """Leapfrog; returns final (x, v), or the stacked states every `keep_every` steps."""
    x = np.array(x0, dtype=np.float64)
    v = np.array(v0, dtype=np.float64)
    q = np.asarray(charges, dtype=np.float64)
    a = coulomb_accelerations(x, q, softening)
    frames = [(x.copy(), v.copy())] if keep_every else None
    for step in range(1, num_steps + 1):
        v += 0.5 * dt * a
        x += dt * v
        a = coulomb_accelerations(x, q, softening)
        v += 0.5 * dt * a
        if keep_every and step % keep_every == 0:
            frames.append((x.copy(), v.copy()))
    if keep_every:
        return np.stack([f[0] for f in frames]), np.stack([f[1] for f in frames])
    return x, v


def initial_conditions(rng: np.random.Generator, cfg: NBodyConfig):
    charges = rng.choice(np.array([-1.0, 1.0]), size=cfg.num_bodies)
    x = rng.normal(0.0, cfg.loc_std, size=(cfg.num_bodies, cfg.dim))
    v = rng.normal(size=(cfg.num_bodies, cfg.dim))
    v *= cfg.speed / np.linalg.norm(v, axis=1, keepdims=True)
    return x, v, charges


def simulate_nbody(cfg: NBodyConfig) -> list[GeometricSample]:
    """All splits in one list (train, then val, then test); each sample carries its split."""
    sizes = cfg.split_sizes()
    total = sum(sizes.values())
    # one child seed per trajectory, so trajectory i does not depend on the split sizes before it
    children = np.random.SeedSequence(cfg.seed).spawn(total)
    init = [initial_conditions(np.random.default_rng(s), cfg) for s in children]
    if not init:
        return []
    x0 = np.stack([i[0] for i in init])
    v0 = np.stack([i[1] for i in init])
    q = np.stack([i[2] for i in init])
    xT, _ = integrate(x0, v0, q, cfg.dt, cfg.num_steps, cfg.softening)
    labels = [s for s in SPLITS for _ in range(sizes[s])]
    return [GeometricSample(x0[i], q[i][:, None], xT[i], v0[i], labels[i]) for i in range(total)]


# baselines ---------------------------------------------------------------------

class InitialPositionBaseline:
    """Predicts that nothing moves."""

    def predict(self, samples) -> list[np.ndarray]:
        return [s.positions.copy() for s in samples]


class VelocityBaseline:
    """Straight-line extrapolation x + v T."""

    def __init__(self, horizon: float):
        self.horizon = float(horizon)

    def predict(self, samples) -> list[np.ndarray]:
        return [s.positions + self.horizon * s.velocities for s in samples]
