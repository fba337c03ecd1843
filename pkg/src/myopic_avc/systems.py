"""Ready-made channel systems used by tests, benchmarks and the CLI."""

from __future__ import annotations

import numpy as np

from .prob import Alphabet, make_rng
from .strategy import SystemSpec

BIN = Alphabet(("0", "1"))


def bsc_matrix(q: float) -> np.ndarray:
    return np.array([[1 - q, q], [q, 1 - q]])


def _obs(obs, ns: int) -> np.ndarray:
    """'identity', 'constant' (|Z|=1), a BSC crossover probability, or an explicit matrix."""
    if isinstance(obs, str):
        if obs == "identity":
            return np.eye(ns)
        if obs == "constant":
            return np.ones((ns, 1))
        raise ValueError(f"unknown observation kind {obs!r}")
    if np.isscalar(obs):
        return bsc_matrix(float(obs))
    return np.asarray(obs, float)


def xor_spec(obs="identity") -> SystemSpec:
    """Binary additive channel Y = X xor S."""
    W = np.zeros((2, 2, 2))
    for x in range(2):
        for s in range(2):
            W[x, s, x ^ s] = 1.0
    o = _obs(obs, 2)
    return SystemSpec(BIN, BIN, BIN, Alphabet.of_size(o.shape[1]), W, o, name="xor")


def dmc_spec(p: float, obs="identity", ns: int = 2) -> SystemSpec:
    """BSC(p) from X to Y; the state has no effect."""
    W = np.repeat(bsc_matrix(p)[:, None, :], ns, axis=1)
    o = _obs(obs, ns)
    return SystemSpec(BIN, Alphabet.of_size(ns), BIN, Alphabet.of_size(o.shape[1]), W, o, name=f"bsc{p}")


def noiseless_spec(obs="identity") -> SystemSpec:
    """Y = X regardless of the state."""
    return dmc_spec(0.0, obs)


def constant_output_spec(obs="identity") -> SystemSpec:
    W = np.zeros((2, 2, 2))
    W[:, :, 0] = 1.0
    o = _obs(obs, 2)
    return SystemSpec(BIN, BIN, BIN, Alphabet.of_size(o.shape[1]), W, o, name="constant")


def random_spec(seed, nx=2, ns=2, ny=2, nz=2, obs=None) -> SystemSpec:
    """Random channel and observation rows drawn from flat Dirichlet laws."""
    rng = make_rng(seed, "random_spec")
    W = rng.dirichlet(np.ones(ny), size=(nx, ns))
    o = rng.dirichlet(np.ones(nz), size=ns) if obs is None else _obs(obs, ns)
    return SystemSpec(Alphabet.of_size(nx), Alphabet.of_size(ns), Alphabet.of_size(ny),
                      Alphabet.of_size(o.shape[1]), W, o, name=f"random{seed}")
