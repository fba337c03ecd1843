"""Finite-alphabet probability machinery.

Distributions, channels, joint laws, empirical types and the l-infinity
typicality test used by the encoder and decoder.  All logarithms are base 2.

Symbol sequences are integer index arrays (``0 .. size-1``) into an
:class:`Alphabet`.  Every object is immutable after construction: the numpy
buffers are copied and flagged read-only.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, ValidationError

TAU_DIST = 1e-9
TAU_MI = 1e-12
# slack for floating comparisons against a typicality radius
TYPICALITY_FUZZ = 1e-12


def _frozen(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _seed_word(k) -> int:
    if isinstance(k, str):
        return int.from_bytes(hashlib.blake2b(k.encode(), digest_size=8).digest(), "little")
    k = int(k)
    if k < 0:
        raise InvalidArgumentError(f"seed keys must be non-negative, got {k}")
    return k


def make_rng(*keys) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by non-negative ints and strings.

    The same keys always give the same stream, independent of call order or
    thread scheduling.
    """
    flat: list[int] = []
    for k in keys:
        if isinstance(k, (tuple, list)):
            flat.extend(_seed_word(v) for v in k)
        else:
            flat.append(_seed_word(k))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(flat)))


@dataclass(frozen=True)
class Alphabet:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        if not labels:
            raise ValidationError("alphabet must have at least one symbol")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"alphabet labels must be distinct: {labels}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of_size(cls, size: int, prefix: str = "") -> "Alphabet":
        if size < 1:
            raise InvalidArgumentError("alphabet size must be >= 1")
        return cls(tuple(f"{prefix}{i}" for i in range(size)))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise InvalidArgumentError(f"unknown symbol {label!r}") from None

    def __len__(self) -> int:
        return len(self.labels)

    def product(self, other: "Alphabet") -> "Alphabet":
        return Alphabet(tuple(f"{a},{b}" for a in self.labels for b in other.labels))


def _check_mass(mass: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(mass)):
        raise ValidationError(f"{what}: non-finite probability")
    if np.any(mass < 0):
        raise ValidationError(f"{what}: negative probability {mass.min()}")
    total = float(mass.sum())
    if abs(total - 1.0) > TAU_DIST:
        raise ValidationError(f"{what}: probabilities sum to {total!r}, not 1")


@dataclass(frozen=True, eq=False)
class Dist:
    alphabet: Alphabet
    mass: np.ndarray

    def __post_init__(self):
        mass = _frozen(self.mass)
        if mass.ndim != 1 or mass.shape[0] != self.alphabet.size:
            raise ValidationError(
                f"distribution needs {self.alphabet.size} entries, got shape {mass.shape}"
            )
        _check_mass(mass, "Dist")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def uniform(cls, alphabet: Alphabet) -> "Dist":
        return cls(alphabet, np.full(alphabet.size, 1.0 / alphabet.size))

    @classmethod
    def point(cls, alphabet: Alphabet, index: int) -> "Dist":
        mass = np.zeros(alphabet.size)
        mass[index] = 1.0
        return cls(alphabet, mass)

    def __getitem__(self, label) -> float:
        return float(self.mass[self.alphabet.index(label)])

    def __repr__(self) -> str:
        body = ", ".join(f"{a}: {p:.6g}" for a, p in zip(self.alphabet.labels, self.mass))
        return f"Dist({{{body}}})"


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic conditional law; ``matrix[i, j] = P(out=j | in=i)``."""

    input_alphabet: Alphabet
    output_alphabet: Alphabet
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        expected = (self.input_alphabet.size, self.output_alphabet.size)
        if m.shape != expected:
            raise ValidationError(f"channel matrix must have shape {expected}, got {m.shape}")
        for i, label in enumerate(self.input_alphabet.labels):
            _check_mass(m[i], f"channel row {label!r}")
        object.__setattr__(self, "matrix", m)

    def row(self, i: int) -> Dist:
        return Dist(self.output_alphabet, self.matrix[i])

    @property
    def rows(self) -> list[Dist]:
        return [self.row(i) for i in range(self.input_alphabet.size)]

    @classmethod
    def identity(cls, alphabet: Alphabet, output: Alphabet | None = None) -> "Channel":
        return cls(alphabet, output or alphabet, np.eye(alphabet.size))

    @classmethod
    def bsc(cls, p: float, inp: Alphabet | None = None, out: Alphabet | None = None) -> "Channel":
        inp = inp or Alphabet.of_size(2)
        out = out or inp
        return cls(inp, out, np.array([[1 - p, p], [p, 1 - p]]))

    @classmethod
    def symmetric(cls, alphabet: Alphabet, q: float, output: Alphabet | None = None) -> "Channel":
        """q-ary symmetric channel: keep the symbol w.p. 1-q, else uniform on the others."""
        k = alphabet.size
        if k == 1:
            return cls.identity(alphabet, output)
        m = np.full((k, k), q / (k - 1))
        np.fill_diagonal(m, 1 - q)
        return cls(alphabet, output or alphabet, m)

    @classmethod
    def constant(cls, inp: Alphabet, out: Alphabet, row: Sequence[float] | None = None) -> "Channel":
        row = np.full(out.size, 1.0 / out.size) if row is None else np.asarray(row, float)
        return cls(inp, out, np.tile(row, (inp.size, 1)))


@dataclass(frozen=True, eq=False)
class JointDist:
    axes: tuple[Alphabet, ...]
    mass: np.ndarray

    def __post_init__(self):
        axes = tuple(self.axes)
        mass = _frozen(self.mass)
        if mass.shape != tuple(a.size for a in axes):
            raise ValidationError(f"joint mass shape {mass.shape} does not match axes")
        _check_mass(mass, "JointDist")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "mass", mass)

    @property
    def ndim(self) -> int:
        return len(self.axes)


@dataclass(frozen=True, eq=False)
class EmpiricalType:
    """Integer counts over one or more alphabets, with denominator ``n``."""

    alphabets: tuple[Alphabet, ...]
    counts: np.ndarray

    def __post_init__(self):
        alphabets = tuple(self.alphabets)
        counts = _frozen(self.counts, dtype=np.int64)
        if counts.shape != tuple(a.size for a in alphabets):
            raise ValidationError("type counts do not match the alphabets")
        if np.any(counts < 0) or counts.sum() < 1:
            raise ValidationError("type counts must be non-negative with a positive total")
        object.__setattr__(self, "alphabets", alphabets)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def freqs(self) -> np.ndarray:
        return self.counts / self.n

    def to_dist(self) -> Dist | JointDist:
        if len(self.alphabets) == 1:
            return Dist(self.alphabets[0], self.freqs)
        return JointDist(self.alphabets, self.freqs)

    def key(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.counts.ravel())

    def __repr__(self) -> str:
        return f"EmpiricalType(counts={self.counts.tolist()}, n={self.n})"


# ---------------------------------------------------------------------------
# information measures


def entropy_bits(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def entropy(p: Dist | np.ndarray) -> float:
    """Shannon entropy in bits with 0 log 0 = 0."""
    mass = p.mass if isinstance(p, Dist) else p
    return max(entropy_bits(mass), 0.0)


def mi_from_matrix(pab: np.ndarray) -> float:
    """I(A;B) in bits for a 2-D joint mass array (unnormalised input is not rescaled)."""
    pa = pab.sum(axis=1)
    pb = pab.sum(axis=0)
    value = entropy_bits(pa) + entropy_bits(pb) - entropy_bits(pab)
    return 0.0 if value < 0 else value


def mutual_information(j: JointDist | np.ndarray) -> float:
    mass = j.mass if isinstance(j, JointDist) else np.asarray(j, float)
    if mass.ndim != 2:
        raise InvalidArgumentError("mutual_information needs a two-axis joint")
    value = mi_from_matrix(mass)
    if value < -TAU_MI:
        raise ArithmeticError(f"negative mutual information {value}")
    return value


def marginal(j: JointDist, axes_to_keep: int | Iterable[int]) -> Dist | JointDist:
    keep = (axes_to_keep,) if isinstance(axes_to_keep, (int, np.integer)) else tuple(axes_to_keep)
    for a in keep:
        if not 0 <= a < j.ndim:
            raise InvalidArgumentError(f"axis {a} out of range for a {j.ndim}-axis joint")
    if len(set(keep)) != len(keep):
        raise InvalidArgumentError("repeated axis")
    drop = tuple(a for a in range(j.ndim) if a not in keep)
    mass = j.mass.sum(axis=drop) if drop else j.mass
    # reorder to the requested order
    order = np.argsort(np.argsort(keep))
    mass = np.transpose(mass, order) if len(keep) > 1 else mass
    if len(keep) == 1:
        return Dist(j.axes[keep[0]], mass)
    return JointDist(tuple(j.axes[a] for a in keep), mass)


def compose(p: Dist, ch: Channel) -> JointDist:
    if p.alphabet != ch.input_alphabet:
        raise InvalidArgumentError("distribution alphabet does not match channel input")
    return JointDist((ch.input_alphabet, ch.output_alphabet), p.mass[:, None] * ch.matrix)


# ---------------------------------------------------------------------------
# types


def type_of(seq, alphabet: Alphabet | None = None) -> EmpiricalType:
    seq = np.asarray(seq, dtype=np.int64)
    if seq.ndim != 1 or seq.size == 0:
        raise InvalidArgumentError("type_of needs a non-empty 1-D sequence")
    if alphabet is None:
        alphabet = Alphabet.of_size(int(seq.max()) + 1)
    if seq.min() < 0 or seq.max() >= alphabet.size:
        raise InvalidArgumentError("sequence symbol outside the alphabet")
    return EmpiricalType((alphabet,), np.bincount(seq, minlength=alphabet.size))


def joint_type_of(seq_a, seq_b, alphabets: tuple[Alphabet, Alphabet] | None = None) -> EmpiricalType:
    a = np.asarray(seq_a, dtype=np.int64)
    b = np.asarray(seq_b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("joint_type_of needs non-empty sequences")
    if a.shape != b.shape:
        raise InvalidArgumentError(f"length mismatch: {a.size} vs {b.size}")
    if alphabets is None:
        alphabets = (Alphabet.of_size(int(a.max()) + 1), Alphabet.of_size(int(b.max()) + 1))
    ka, kb = alphabets[0].size, alphabets[1].size
    counts = np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb)
    return EmpiricalType(alphabets, counts)


def is_typical(t: EmpiricalType | np.ndarray, p: Dist | JointDist | np.ndarray, eps: float) -> bool:
    """True iff the largest cell deviation between ``t`` and ``p`` is at most ``eps``."""
    if eps < 0:
        raise InvalidArgumentError("eps must be non-negative")
    tf = t.freqs if isinstance(t, EmpiricalType) else np.asarray(t, float)
    pm = p.mass if isinstance(p, (Dist, JointDist)) else np.asarray(p, float)
    if tf.shape != pm.shape:
        raise InvalidArgumentError(f"shape mismatch {tf.shape} vs {pm.shape}")
    return bool(np.max(np.abs(tf - pm)) <= eps + TYPICALITY_FUZZ)


def compositions(n: int, k: int) -> np.ndarray:
    """All ways to write n as an ordered sum of k non-negative integers, shape (C(n+k-1,k-1), k)."""
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    bars = np.array(list(itertools.combinations(range(n + k - 1), k - 1)), dtype=np.int64)
    bars = bars.reshape(-1, k - 1)
    m = bars.shape[0]
    padded = np.hstack([np.full((m, 1), -1), bars, np.full((m, 1), n + k - 1)])
    return np.diff(padded, axis=1) - 1


def enumerate_types(alphabet: Alphabet, n: int) -> list[EmpiricalType]:
    if n < 1:
        raise InvalidArgumentError("block length must be >= 1")
    return [EmpiricalType((alphabet,), c) for c in compositions(n, alphabet.size)]


def count_types(alphabet_size: int, n: int) -> int:
    return math.comb(n + alphabet_size - 1, alphabet_size - 1)


# ---------------------------------------------------------------------------
# sampling


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(seed)


def sample_iid(p: Dist | np.ndarray, n: int, seed) -> np.ndarray:
    mass = p.mass if isinstance(p, Dist) else np.asarray(p, float)
    return _rng(seed).choice(mass.size, size=n, p=mass).astype(np.int64)


def sample_rows(matrix: np.ndarray, inputs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one output per input symbol from the rows of a stochastic matrix."""
    inputs = np.asarray(inputs, dtype=np.int64)
    cdf = np.cumsum(matrix, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(inputs.size)
    rows = cdf[inputs]
    return (u[:, None] >= rows).sum(axis=1).astype(np.int64)


def sample_channel(ch: Channel | np.ndarray, inputs, seed) -> np.ndarray:
    matrix = ch.matrix if isinstance(ch, Channel) else np.asarray(ch, float)
    return sample_rows(matrix, np.asarray(inputs), _rng(seed))
