"""Parameter storage and the small dense blocks the model is assembled from."""
from __future__ import annotations

import math

import numpy as np

from ..errors import UsageError
from . import autodiff as ad
from .autodiff import Tensor


class ParameterStore:
    """Named trainable tensors, frozen buffers, and Adam state.

    Iteration is always in sorted-name order so that optimisation and
    checkpointing are reproducible.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params or name in self.buffers:
            raise UsageError(f"parameter {name!r} registered twice")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._params or name in self.buffers:
            raise UsageError(f"buffer {name!r} registered twice")
        self.buffers[name] = np.array(value, dtype=np.float64)
        return self.buffers[name]

    def names(self) -> list[str]:
        return sorted(self._params)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __len__(self) -> int:
        return len(self._params)

    def parameters(self) -> list[Tensor]:
        return [self._params[n] for n in self.names()]

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self._params.values()))

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = np.zeros_like(p.data)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"param/{n}": self._params[n].data for n in self.names()}
        out.update({f"buffer/{n}": self.buffers[n] for n in sorted(self.buffers)})
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for n in self.names():
            value = arrays[f"param/{n}"]
            if value.shape != self._params[n].shape:
                raise UsageError(f"shape mismatch for {n}: {value.shape} vs {self._params[n].shape}")
            self._params[n].data = np.array(value, dtype=np.float64)
        for n in self.buffers:
            self.buffers[n][...] = arrays[f"buffer/{n}"]


class Linear:
    """x W + b with uniform(+-1/sqrt(fan_in)) weights and zero bias."""

    def __init__(self, store: ParameterStore, name: str, fan_in: int, fan_out: int,
                 rng: np.random.Generator, bias: bool = True):
        bound = math.sqrt(1.0 / fan_in)
        self.W = store.add(f"{name}.W", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        self.b = store.add(f"{name}.b", np.zeros(fan_out)) if bias else None
        self.fan_in, self.fan_out = fan_in, fan_out

    def __call__(self, x) -> Tensor:
        return ad.linear(x, self.W, self.b)


class BatchNorm:
    def __init__(self, store: ParameterStore, name: str, width: int):
        self.gamma = store.add(f"{name}.gamma", np.ones(width))
        self.beta = store.add(f"{name}.beta", np.zeros(width))
        self.running_mean = store.add_buffer(f"{name}.running_mean", np.zeros(width))
        self.running_var = store.add_buffer(f"{name}.running_var", np.ones(width))

    def __call__(self, x, train: bool) -> Tensor:
        return ad.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var, train)


class Mlp2:
    """Linear -> [BatchNorm] -> Swish -> Linear [-> Swish]."""

    def __init__(self, store: ParameterStore, name: str, fan_in: int, hidden: int, fan_out: int,
                 rng: np.random.Generator, final_activation: bool = False, batch_norm: bool = False):
        self.first = Linear(store, f"{name}.0", fan_in, hidden, rng)
        self.second = Linear(store, f"{name}.1", hidden, fan_out, rng)
        self.norm = BatchNorm(store, f"{name}.bn", hidden) if batch_norm else None
        self.final_activation = final_activation

    def __call__(self, x, train: bool = False) -> Tensor:
        h = self.first(x)
        if self.norm is not None:
            h = self.norm(h, train)
        out = self.second(ad.swish(h))
        return ad.swish(out) if self.final_activation else out


def fourier_features(x, B: np.ndarray) -> Tensor:
    """[cos(2 pi x B), sin(2 pi x B)] row-wise, with B a frozen frequency matrix."""
    proj = ad.matmul(x, 2.0 * math.pi * np.asarray(B))
    return ad.concat([ad.cos(proj), ad.sin(proj)], axis=-1)


def gaussian_frequencies(rng: np.random.Generator, fan_in: int, num_frequencies: int,
                         scale: float = 1.0) -> np.ndarray:
    return scale * rng.standard_normal((fan_in, num_frequencies))
