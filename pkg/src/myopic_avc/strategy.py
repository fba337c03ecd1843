"""Shannon strategies and the joint law over (S, Z, U, X, Y).

The auxiliary alphabet is always the canonical set of all maps z -> x,
enumerated lexicographically, so ``|U| = |X| ** |Z|``.  Strategy ``i`` is the
i-th tuple ``(x(z=0), x(z=1), ...)`` in ``itertools.product`` order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapacityLimitError, InvalidArgumentError, ValidationError
from .prob import TAU_DIST, Alphabet, Channel, Dist, JointDist, mi_from_matrix

MAX_STRATEGIES = 4096
MAX_JOINT_CELLS = 10**7


@dataclass(frozen=True, eq=False)
class StrategyTable:
    u_alphabet: Alphabet
    z_alphabet: Alphabet
    x_alphabet: Alphabet
    table: np.ndarray  # (|U|, |Z|) -> x index

    def __post_init__(self):
        t = np.array(self.table, dtype=np.int64, copy=True)
        if t.shape != (self.u_alphabet.size, self.z_alphabet.size):
            raise ValidationError("strategy table must be |U| x |Z|")
        if t.min() < 0 or t.max() >= self.x_alphabet.size:
            raise ValidationError("strategy table maps outside the X alphabet")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def __call__(self, u, z):
        return self.table[u, z]

    def apply(self, u_seq: np.ndarray, z_seq: np.ndarray) -> np.ndarray:
        """Componentwise x_i = x(u_i, z_i)."""
        return self.table[np.asarray(u_seq), np.asarray(z_seq)]

    @property
    def size(self) -> int:
        return self.u_alphabet.size


def canonical_strategies(x_alphabet: Alphabet, z_alphabet: Alphabet) -> StrategyTable:
    nx, nz = x_alphabet.size, z_alphabet.size
    if nx**nz > MAX_STRATEGIES:
        raise CapacityLimitError(
            f"|X|^|Z| = {nx}^{nz} exceeds the strategy limit {MAX_STRATEGIES}"
        )
    funcs = list(itertools.product(range(nx), repeat=nz))
    table = np.array(funcs, dtype=np.int64).reshape(len(funcs), nz)
    labels = tuple("".join(x_alphabet.labels[x] for x in f) if all(
        len(lbl) == 1 for lbl in x_alphabet.labels) else "|".join(x_alphabet.labels[x] for x in f)
        for f in funcs)
    return StrategyTable(Alphabet(labels), z_alphabet, x_alphabet, table)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """State-dependent channel W[x, s, y] plus the state observation channel obs[s, z]."""

    x: Alphabet
    s: Alphabet
    y: Alphabet
    z: Alphabet
    W: np.ndarray
    obs: np.ndarray
    name: str = ""

    def __post_init__(self):
        W = np.array(self.W, dtype=float, copy=True)
        obs = np.array(self.obs, dtype=float, copy=True)
        if W.shape != (self.x.size, self.s.size, self.y.size):
            raise ValidationError(
                f"W must have shape (|X|,|S|,|Y|) = {(self.x.size, self.s.size, self.y.size)}, got {W.shape}"
            )
        if obs.shape != (self.s.size, self.z.size):
            raise ValidationError(f"obs must have shape (|S|,|Z|), got {obs.shape}")
        for arr, what in ((W, "W"), (obs, "obs")):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValidationError(f"{what} has negative or non-finite entries")
        bad = np.argwhere(np.abs(W.sum(axis=2) - 1) > TAU_DIST)
        if bad.size:
            xi, si = bad[0]
            raise ValidationError(
                f"W row (x={self.x.labels[xi]}, s={self.s.labels[si]}) sums to {W[xi, si].sum()!r}"
            )
        bad = np.flatnonzero(np.abs(obs.sum(axis=1) - 1) > TAU_DIST)
        if bad.size:
            raise ValidationError(f"obs row s={self.s.labels[bad[0]]} sums to {obs[bad[0]].sum()!r}")
        W.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "obs", obs)

    @property
    def w_channel(self) -> Channel:
        return Channel(self.x.product(self.s), self.y, self.W.reshape(-1, self.y.size))

    @property
    def obs_channel(self) -> Channel:
        return Channel(self.s, self.z, self.obs)

    def with_obs(self, obs: np.ndarray, z: Alphabet | None = None) -> "SystemSpec":
        obs = np.asarray(obs, float)
        z = z or (self.z if obs.shape[1] == self.z.size else Alphabet.of_size(obs.shape[1]))
        return SystemSpec(self.x, self.s, self.y, z, self.W, obs, self.name)

    def omniscient(self) -> "SystemSpec":
        """Same channel with the encoder seeing the state exactly (Z := S)."""
        return SystemSpec(self.x, self.s, self.y, self.s, self.W, np.eye(self.s.size), self.name)

    def permuted(self, px=None, ps=None, py=None, pz=None) -> "SystemSpec":
        """Relabel alphabets: new symbol i is old symbol perm[i]."""
        px = np.arange(self.x.size) if px is None else np.asarray(px)
        ps = np.arange(self.s.size) if ps is None else np.asarray(ps)
        py = np.arange(self.y.size) if py is None else np.asarray(py)
        pz = np.arange(self.z.size) if pz is None else np.asarray(pz)
        W = self.W[px][:, ps][:, :, py]
        obs = self.obs[ps][:, pz]
        relabel = lambda a, p: Alphabet(tuple(a.labels[i] for i in p))  # noqa: E731
        return SystemSpec(relabel(self.x, px), relabel(self.s, ps), relabel(self.y, py),
                          relabel(self.z, pz), W, obs, self.name)

    def cells(self) -> int:
        nu = self.x.size ** self.z.size
        return self.s.size * self.z.size * nu * self.x.size * self.y.size


def _as_array(p) -> np.ndarray:
    if isinstance(p, Dist):
        return p.mass
    if isinstance(p, Channel):
        return p.matrix
    return np.asarray(p, float)


def _check_consistency(spec: SystemSpec, q_s, p_u_given_z, strat: StrategyTable):
    if isinstance(q_s, Dist) and q_s.alphabet.size != spec.s.size:
        raise InvalidArgumentError("q_s alphabet does not match S")
    if strat.z_alphabet.size != spec.z.size or strat.x_alphabet.size != spec.x.size:
        raise InvalidArgumentError("strategy table alphabets do not match the system")
    p = _as_array(p_u_given_z)
    if p.shape != (spec.z.size, strat.size):
        raise InvalidArgumentError(f"P(U|Z) must have shape {(spec.z.size, strat.size)}, got {p.shape}")
    if _as_array(q_s).shape != (spec.s.size,):
        raise InvalidArgumentError("q_s has the wrong length")


def assemble_joint(spec: SystemSpec, q_s, p_u_given_z, strat: StrategyTable) -> JointDist:
    """Dense joint mass over (S, Z, U, X, Y)."""
    _check_consistency(spec, q_s, p_u_given_z, strat)
    cells = spec.s.size * spec.z.size * strat.size * spec.x.size * spec.y.size
    if cells > MAX_JOINT_CELLS:
        raise CapacityLimitError(f"joint tensor would have {cells} cells (limit {MAX_JOINT_CELLS})")
    q = _as_array(q_s)
    p = _as_array(p_u_given_z)
    ind = np.zeros((strat.size, spec.z.size, spec.x.size))
    u_idx, z_idx = np.meshgrid(np.arange(strat.size), np.arange(spec.z.size), indexing="ij")
    ind[u_idx, z_idx, strat.table] = 1.0
    # mass[s,z,u,x,y] = q(s) obs(z|s) P(u|z) 1{x = x(u,z)} W(y|x,s)
    mass = np.einsum("s,sz,zu,uzx,xsy->szuxy", q, spec.obs, p, ind, spec.W)
    axes = (spec.s, spec.z, strat.u_alphabet, spec.x, spec.y)
    return JointDist(axes, mass)


class ObjectiveModel:
    """Precomputed tensors for fast evaluation of I(U;Y) - I(U;Z).

    ``B[s, z, u, y] = obs(z|s) W(y | x(u,z), s)``, so that
    ``P(u, y) = sum_{s,z} q(s) P(u|z) B[s,z,u,y]``.
    """

    def __init__(self, spec: SystemSpec, strat: StrategyTable | None = None):
        self.spec = spec
        self.strat = strat or canonical_strategies(spec.x, spec.z)
        ns, nz, nu, ny = spec.s.size, spec.z.size, self.strat.size, spec.y.size
        if ns * nz * nu * ny > MAX_JOINT_CELLS:
            raise CapacityLimitError(
                f"objective tensor would have {ns * nz * nu * ny} cells (limit {MAX_JOINT_CELLS})"
            )
        # Wu[z, u, s, y] = W(y | x(u,z), s)
        Wu = spec.W[self.strat.table.T]  # (z, u, s, y)
        self.B = np.ascontiguousarray(np.einsum("sz,zusy->szuy", spec.obs, Wu))
        self.nu = nu

    # --- joint pieces -----------------------------------------------------
    def p_uy(self, q: np.ndarray, P: np.ndarray) -> np.ndarray:
        return np.einsum("s,zu,szuy->uy", q, P, self.B)

    def p_z(self, q: np.ndarray) -> np.ndarray:
        return q @ self.spec.obs

    def i_uz(self, pz: np.ndarray, P: np.ndarray) -> float:
        return mi_from_matrix(pz[:, None] * P)

    def value(self, q: np.ndarray, P: np.ndarray) -> float:
        return mi_from_matrix(self.p_uy(q, P)) - self.i_uz(self.p_z(q), P)

    # --- partial contractions ----------------------------------------------
    def c_tensor(self, P: np.ndarray) -> np.ndarray:
        """C[s,u,y] = sum_z P(u|z) B[s,z,u,y]; then P(u,y) = q @ C (linear in q)."""
        return np.einsum("zu,szuy->suy", P, self.B)

    def a_tensor(self, q: np.ndarray) -> np.ndarray:
        """A[z,u,y] = sum_s q(s) B[s,z,u,y]; then P(u,y) = sum_z P(u|z) A[z,u,y]."""
        return np.einsum("s,szuy->zuy", q, self.B)


def objective(spec: SystemSpec, q_s, p_u_given_z, strat: StrategyTable) -> float:
    """I(U;Y) - I(U;Z) in bits under the assembled joint law."""
    _check_consistency(spec, q_s, p_u_given_z, strat)
    model = ObjectiveModel(spec, strat)
    return model.value(_as_array(q_s), _as_array(p_u_given_z))
