"""Empirical symmetry check of a model under sampled rigid motions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import RigidMotion, apply_motion
from ..model import EmpsnModel

THRESHOLD = 1e-8


@dataclass
class EquivarianceReport:
    trials: int
    invariant_residual: float       # graph outputs and hidden features, should not move
    equivariant_residual: float     # output positions, should follow g
    threshold: float = THRESHOLD

    @property
    def residual(self) -> float:
        return max(self.invariant_residual, self.equivariant_residual)

    @property
    def passed(self) -> bool:
        return self.residual < self.threshold

    def lines(self) -> list[str]:
        status = "PASS" if self.passed else "FAIL"
        return [f"trials: {self.trials}",
                f"invariant residual: {self.invariant_residual:.3e}",
                f"equivariant residual: {self.equivariant_residual:.3e}",
                f"threshold: {self.threshold:.1e}",
                f"result: {status}"]


def _run(model: EmpsnModel, positions, samples):
    vel = [s.velocities for s in samples] if model.config.use_velocity else None
    batch = model.prepare(positions, [s.node_features for s in samples], vel)
    return batch, model.forward(batch)


def check_equivariance(model: EmpsnModel, samples, num_transforms: int = 10, seed: int = 0,
                       threshold: float = THRESHOLD) -> EquivarianceReport:
    """Max over g of |f(g x) - f(x)| for invariant outputs and |X(g x) - g X(x)| for positions.

    Reflections and rotations alternate so both components of E(n) are tried.
    """
    samples = list(samples)
    if not samples or num_transforms < 1:
        return EquivarianceReport(0, 0.0, 0.0, threshold)
    rng = np.random.default_rng(seed)
    n = samples[0].positions.shape[1]
    _, base = _run(model, [s.positions for s in samples], samples)
    inv_res = equi_res = 0.0
    for t in range(num_transforms):
        g = RigidMotion.random(rng, n, reflect=bool(t % 2))
        moved = []
        for s in samples:
            m = type(s)(apply_motion(g, s.positions), s.node_features, s.target,
                        None if s.velocities is None else g.apply_vectors(s.velocities), s.split)
            moved.append(m)
        _, out = _run(model, [m.positions for m in moved], moved)
        if base["prediction"] is not None:
            inv_res = max(inv_res, float(np.max(np.abs(out["prediction"].data - base["prediction"].data))))
        for d, h in base["features"].items():
            if h.data.size:
                inv_res = max(inv_res, float(np.max(np.abs(out["features"][d].data - h.data))))
        expected = apply_motion(g, base["positions"].data)
        equi_res = max(equi_res, float(np.max(np.abs(out["positions"].data - expected))))
    return EquivarianceReport(num_transforms, inv_res, equi_res, threshold)
