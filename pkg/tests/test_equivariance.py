import numpy as np

from empsn.harness import NBodyConfig, check_equivariance, simulate_nbody
from empsn.model import EmpsnConfig, EmpsnModel
from empsn.nn import Tensor


class CoordinateLeak(EmpsnModel):
    """Broken on purpose: raw coordinates enter the node embedding."""

    def embed_features(self, batch):
        h = super().embed_features(batch)
        leak = np.zeros((batch.count(0), self.config.hidden_dim))
        leak[:, :3] = batch.positions
        h[0] = h[0] + Tensor(leak)
        return h


def data():
    return simulate_nbody(NBodyConfig(counts={"train": 6, "val": 0, "test": 0}, seed=8))


def test_impsn_passes():
    m = EmpsnModel(EmpsnConfig(update_positions=False, hidden_dim=8, num_layers=2))
    rep = check_equivariance(m, data(), 6)
    assert rep.passed and rep.invariant_residual < 1e-8


def test_empsn_passes():
    m = EmpsnModel(EmpsnConfig(task="nbody", use_velocity=True, hidden_dim=8, num_layers=3, fourier=True))
    rep = check_equivariance(m, data(), 6)
    assert rep.passed and rep.equivariant_residual < 1e-8
    assert rep.lines()[-1] == "result: PASS"


def test_coordinate_leak_fails():
    m = CoordinateLeak(EmpsnConfig(task="nbody", use_velocity=True, hidden_dim=8, num_layers=2))
    rep = check_equivariance(m, data(), 4)
    assert not rep.passed and rep.residual > 1e-3
    assert rep.lines()[-1] == "result: FAIL"


def test_empty_inputs():
    m = EmpsnModel(EmpsnConfig(update_positions=False, hidden_dim=4, num_layers=1))
    assert check_equivariance(m, [], 3).trials == 0
