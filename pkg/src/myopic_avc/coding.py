"""Monte Carlo simulation of the binned random-coding scheme.

Scheme, per observation type ``t_z``:

* a design ``P(U|Z)`` is picked by the capacity solver at ``P_Z = t_z``;
* the codebook has ``floor(2^{nR})`` bins of ``floor(2^{n R~})`` codewords,
  each drawn i.i.d. from ``P_U = [t_z P(U|Z)]_U`` with ``R~ = I(U;Z) + eps``;
* the encoder looks in bin ``m`` for a codeword whose joint type with ``z``
  is within ``delta2`` of ``P(U|Z) t_z`` and transmits ``x_i = x(u_i, z_i)``;
  if none exists it falls back to the first codeword of the first bin;
* the decoder lists every codeword whose joint type with ``y`` is within
  ``gamma`` of ``[T_S obs P(U|Z) 1 W]_{UY}`` for some state type ``T_S``
  whose Z-image is within ``f_eps`` of ``t_z``, and outputs the bin index if
  the list is nonempty and confined to one bin, else 0.

Messages are 1-based; 0 is the decoder's error output.

When the codebook is large (more than ``MATERIALIZE_LIMIT`` words; explicit
codebooks are capped at ``MAX_CODEWORDS``) only the transmitted bin is
materialized.  The number of list members in the
remaining bins is then drawn from its exact law: every such codeword is
independent of ``y``, so the count is Binomial(N', p(y)) with ``p(y)`` the
probability that one i.i.d. ``P_U`` word passes the list test against ``y``,
computed exactly by the method of types.  The draw is seeded by the code seed
and ``y`` so a fixed code gives a deterministic decoder.
"""

from __future__ import annotations

import csv
import hashlib
import importlib.util
import io
import logging
import math
import os
import threading
import warnings
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.special import gammaln
from scipy.stats import binom

from . import kernels
from .errors import CapacityLimitError, InfeasibleTypeError, InvalidArgumentError
from .prob import (Channel, Dist, EmpiricalType, compositions, make_rng, mi_from_matrix,
                   sample_rows, type_of)
from .solver import DEFAULT_RESTARTS, MarginalPolytope, _inner_solve, middle_max_detail, project_rows
from .strategy import ObjectiveModel, StrategyTable, SystemSpec

log = logging.getLogger(__name__)

MAX_CODEWORDS = 10**6
MATERIALIZE_LIMIT = 2**16  # larger codebooks are generated bin by bin unless materialize=True
MAX_LOG2_MESSAGES = 62
MAX_ENUM = 5 * 10**6
TIE_TOL = 1e-3

EVENTS = ("E_enc", "E_dec1", "E_dec2", "none")


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

def default_slacks(n: int) -> tuple[float, float, float]:
    """(delta2, gamma, f_eps) for block length n."""
    r = math.sqrt(n)
    return 0.25 / r, 0.5 / r, 2.0 / r


@dataclass(frozen=True)
class CodeParams:
    """Block length, operating rate and slacks.

    ``seed`` is the shared randomness selecting the code; ``None`` draws a
    fresh code for every trial (the fully randomized code).  Slacks left as
    ``None`` follow :func:`default_slacks`.
    """

    n: int
    rate_R: float
    delta2: float | None = None
    gamma: float | None = None
    f_eps: float | None = None
    eps_rate: float = 0.1
    seed: int | None = None
    explicit_type: bool = False
    restarts: int = DEFAULT_RESTARTS

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError("n must be a positive integer")
        if not self.rate_R >= 0:
            raise InvalidArgumentError("rate_R must be >= 0")
        if self.n * self.rate_R > MAX_LOG2_MESSAGES:
            raise CapacityLimitError(f"n*R = {self.n * self.rate_R:g} exceeds {MAX_LOG2_MESSAGES} bits")
        d2, g, f = default_slacks(self.n)
        object.__setattr__(self, "delta2", d2 if self.delta2 is None else float(self.delta2))
        object.__setattr__(self, "gamma", g if self.gamma is None else float(self.gamma))
        object.__setattr__(self, "f_eps", f if self.f_eps is None else float(self.f_eps))
        for name in ("delta2", "gamma", "f_eps", "eps_rate"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0")

    @property
    def messages(self) -> int:
        return int(math.floor(2.0 ** (self.n * self.rate_R) + 1e-9))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("n", "rate_R", "delta2", "gamma", "f_eps", "eps_rate",
                                                "seed", "explicit_type", "restarts")}


# ---------------------------------------------------------------------------
# design per observation type
# ---------------------------------------------------------------------------

def candidate_state_types(t_z, obs, n: int, f_eps: float) -> list[EmpiricalType]:
    """State types of denominator n whose Z-image is within f_eps of t_z."""
    ch_in = obs.input_alphabet if isinstance(obs, Channel) else None
    obs = obs.matrix if isinstance(obs, Channel) else np.asarray(obs, float)
    tz = t_z.freqs if isinstance(t_z, EmpiricalType) else np.asarray(t_z, float)
    comps = compositions(n, obs.shape[0])
    imgs = comps @ obs / n
    keep = np.max(np.abs(imgs - tz[None, :]), axis=1) <= f_eps + 1e-12
    from .prob import Alphabet
    alpha = ch_in or Alphabet.of_size(obs.shape[0])
    return [EmpiricalType((alpha,), c) for c in comps[keep]]


@dataclass(eq=False)
class Design:
    """Code design for one observation type."""

    t_z: np.ndarray  # frequencies
    p_z: np.ndarray  # nearest feasible Z-marginal used by the solver
    P: np.ndarray  # P(U|Z), (nz, nu)
    strat: StrategyTable
    p_u: np.ndarray
    i_uz: float
    solver_value: float
    state_types: np.ndarray  # (k, ns) frequencies of candidate state types
    targets: np.ndarray  # (T, nu, ny) distinct decoder targets
    i_uy_min: float
    rate_tilde: float
    rate_U: float
    key: tuple = ()

    @property
    def rate_design(self) -> float:
        return max(self.rate_U - self.rate_tilde, 0.0)

    @property
    def enc_target(self) -> np.ndarray:
        """Joint (u, z) target P(u|z) t_z(z), indexed [u, z]."""
        return (self.t_z[:, None] * self.P).T


def nearest_feasible(obs: np.ndarray, tz: np.ndarray) -> np.ndarray:
    ns = obs.shape[0]
    A = np.vstack([obs.T, 1e3 * np.ones((1, ns))])
    b = np.concatenate([tz, [1e3]])
    q, _ = nnls(A, b)
    q = q / q.sum()
    pz = q @ obs
    return pz / pz.sum()


def _targets_for(spec: SystemSpec, model: ObjectiveModel, P: np.ndarray, state_freqs: np.ndarray):
    out = []
    for q in state_freqs:
        puy = model.p_uy(q, P)
        if not any(np.max(np.abs(puy - t)) <= 1e-12 for t in out):
            out.append(puy)
    return np.array(out)


class Designer:
    """Caches one design per observation type; thread-safe."""

    def __init__(self, spec: SystemSpec, n: int, f_eps: float, eps_rate: float,
                 restarts: int = DEFAULT_RESTARTS, tie_tol: float = TIE_TOL, solver_seed=0):
        self.spec = spec
        self.n = n
        self.f_eps = f_eps
        self.eps_rate = eps_rate
        self.restarts = restarts
        self.tie_tol = tie_tol
        self.solver_seed = solver_seed
        self.model = ObjectiveModel(spec)
        self._cache: dict[tuple, Design] = {}
        self._lock = threading.Lock()

    @classmethod
    def for_params(cls, spec: SystemSpec, params: CodeParams) -> "Designer":
        return cls(spec, params.n, params.f_eps, params.eps_rate, params.restarts)

    def design(self, t_z: EmpiricalType | np.ndarray, P: np.ndarray | None = None) -> Design:
        tz = t_z.freqs if isinstance(t_z, EmpiricalType) else np.asarray(t_z, float)
        key = tuple(np.round(tz * self.n).astype(np.int64).tolist())
        if P is None:
            with self._lock:
                hit = self._cache.get(key)
            if hit is not None:
                return hit
        d = self._build(tz, key, P)
        if P is None:
            with self._lock:
                self._cache.setdefault(key, d)
                d = self._cache[key]
        return d

    def _build(self, tz: np.ndarray, key: tuple, P_override) -> Design:
        spec, model = self.spec, self.model
        pz = nearest_feasible(spec.obs, tz)
        if np.max(np.abs(pz - tz)) > self.f_eps + 1e-12:
            raise InfeasibleTypeError(
                f"observation type {np.round(tz, 4).tolist()} is farther than f_eps={self.f_eps:.4g} "
                "from every achievable Z-marginal"
            )
        states = candidate_state_types(tz, spec.obs, self.n, self.f_eps)
        sf = np.array([t.freqs for t in states]).reshape(-1, spec.s.size)
        if P_override is not None:
            P = project_rows(np.asarray(P_override, float))
            poly = MarginalPolytope.build(spec.obs, pz)
            r = _inner_solve(model, poly, P)
            value = r.value
        else:
            res = middle_max_detail(spec, pz, restarts=self.restarts, seed=self.solver_seed, model=model)
            best = max(v for v, *_ in res.restarts)
            pool = []
            for v, P_r, *_ in res.restarts:
                if v < best - self.tie_tol:
                    continue
                P_r = project_rows(P_r)
                t = _targets_for(spec, model, P_r, sf)
                iuz = mi_from_matrix(tz[:, None] * P_r)
                robust = min((mi_from_matrix(m) for m in t), default=0.0) - iuz
                pool.append((robust, iuz, v, P_r))
            # near-optimal designs can differ on the finite-n candidate state types (and on rows
            # of unobserved symbols); prefer the best worst case there, then the smallest I(U;Z)
            top = max(r[0] for r in pool)
            _, _, value, P = min((r for r in pool if r[0] >= top - self.tie_tol), key=lambda r: (r[1], -r[2]))
        targets = _targets_for(spec, model, P, sf)
        i_uy_min = min((mi_from_matrix(t) for t in targets), default=0.0)
        p_u = tz @ P
        i_uz_t = mi_from_matrix(tz[:, None] * P)
        rate_tilde = i_uz_t + self.eps_rate
        rate_U = i_uy_min - self.eps_rate
        return Design(tz, pz, P, model.strat, p_u / p_u.sum(), i_uz_t, value, sf, targets,
                      i_uy_min, rate_tilde, rate_U, key)


# ---------------------------------------------------------------------------
# codebook
# ---------------------------------------------------------------------------

def _count(rate: float, n: int) -> int:
    return max(1, int(math.floor(2.0 ** (n * rate) + 1e-9)))


@dataclass(eq=False)
class Codebook:
    """Binned codebook for one observation type.

    Bins are numbered 1..bins and words within a bin 1..per_bin.  ``words`` is
    the full (bins, per_bin, n) array when it fits in memory, else ``None``
    and bins are generated on demand from the code seed.
    """

    t_z: EmpiricalType
    p_u_given_z: Channel
    strat: StrategyTable
    n: int
    bins: int
    per_bin: int
    rate_R: float
    rate_tilde: float
    rate_U: float
    p_u: np.ndarray
    code_seed: int
    design: Design
    words: np.ndarray | None = None
    _bin_cache: dict = field(default_factory=dict, repr=False)

    @property
    def explicit(self) -> bool:
        return self.words is not None

    @property
    def total(self) -> int:
        return self.bins * self.per_bin

    def bin_words(self, m: int) -> np.ndarray:
        if not 1 <= m <= self.bins:
            raise InvalidArgumentError(f"bin {m} out of range 1..{self.bins}")
        if self.words is not None:
            return self.words[m - 1]
        w = self._bin_cache.get(m)
        if w is None:
            rng = make_rng(self.code_seed, "bin", self.design.key, m)
            w = _draw_words(rng, self.p_u, (self.per_bin, self.n))
            if len(self._bin_cache) > 64:
                self._bin_cache.clear()
            self._bin_cache[m] = w
        return w

    def all_words(self) -> np.ndarray:
        if self.words is None:
            raise CapacityLimitError("codebook is not materialized")
        return self.words.reshape(-1, self.n)


def _draw_words(rng: np.random.Generator, p_u: np.ndarray, shape) -> np.ndarray:
    cdf = np.cumsum(p_u)
    cdf[-1] = 1.0
    u = rng.random(shape)
    return np.searchsorted(cdf, u, side="right").astype(np.int16)


def build_codebook(spec: SystemSpec, t_z: EmpiricalType, params: CodeParams, seed=None,
                   designer: Designer | None = None, p_u_given_z=None,
                   rate_tilde: float | None = None, materialize: bool | None = None) -> Codebook:
    """Draw the binned codebook for observation type ``t_z``.

    ``seed`` (default ``params.seed``) is the shared code seed.  The design
    may be forced through ``p_u_given_z``, and ``rate_tilde`` overrides the
    per-bin rate I(U;Z) + eps_rate.
    """
    seed = params.seed if seed is None else seed
    if seed is None:
        raise InvalidArgumentError("a code seed is required")
    designer = designer or Designer.for_params(spec, params)
    P = None
    if p_u_given_z is not None:
        P = p_u_given_z.matrix if isinstance(p_u_given_z, Channel) else np.asarray(p_u_given_z, float)
    design = designer.design(t_z, P)
    r_tilde = design.rate_tilde if rate_tilde is None else float(rate_tilde)
    if params.rate_R > design.rate_design + 1e-12:
        warnings.warn(
            f"rate {params.rate_R:g} exceeds the design rate {design.rate_design:.4f} for type "
            f"{design.key}; decoding errors are expected", RuntimeWarning, stacklevel=2)
    n = params.n
    bins = _count(params.rate_R, n)
    per_bin = _count(r_tilde, n)
    if per_bin > MAX_CODEWORDS:
        raise CapacityLimitError(f"{per_bin} codewords per bin exceeds {MAX_CODEWORDS}")
    if materialize is None:
        materialize = bins * per_bin <= MATERIALIZE_LIMIT
    words = None
    if materialize:
        if bins * per_bin > MAX_CODEWORDS:
            raise CapacityLimitError(f"{bins * per_bin} codewords exceeds {MAX_CODEWORDS}")
        rng = make_rng(seed, "codebook", design.key)
        words = _draw_words(rng, design.p_u, (bins, per_bin, n))
        words.setflags(write=False)
    tz_type = t_z if isinstance(t_z, EmpiricalType) else EmpiricalType((spec.z,), np.array(design.key))
    return Codebook(tz_type, Channel(spec.z, design.strat.u_alphabet, design.P), design.strat, n,
                    bins, per_bin, params.rate_R, r_tilde, params.rate_R + r_tilde, design.p_u,
                    int(seed), design, words)


class CodebookCache:
    """LRU cache keyed by (observation type, code seed) with a codeword budget."""

    def __init__(self, budget: int = MAX_CODEWORDS):
        self.budget = budget
        self._data: OrderedDict = OrderedDict()
        self._held = 0
        self._lock = threading.Lock()

    def get(self, key, build: Callable[[], Codebook]) -> Codebook:
        with self._lock:
            cb = self._data.get(key)
            if cb is not None:
                self._data.move_to_end(key)
                return cb
        cb = build()  # idempotent: same key always builds the same codebook
        size = cb.total if cb.explicit else 0
        with self._lock:
            if key in self._data:
                return self._data[key]
            while self._data and self._held + size > self.budget:
                _, old = self._data.popitem(last=False)
                self._held -= old.total if old.explicit else 0
            self._data[key] = cb
            self._held += size
        return cb


# ---------------------------------------------------------------------------
# encoder
# ---------------------------------------------------------------------------

@dataclass
class EncodeResult:
    x: np.ndarray
    u: np.ndarray
    t_z: EmpiricalType
    index: tuple[int, int] | None  # (bin, word), 1-based
    fallback: bool
    candidates: int


def encode(m: int, z, cb: Codebook, params: CodeParams, seed=0) -> EncodeResult:
    """Pick a codeword in bin m jointly typical with z and map it through the strategies."""
    z = np.asarray(z, dtype=np.int64)
    if z.shape != (cb.n,):
        raise InvalidArgumentError(f"observation must have length {cb.n}")
    if not 1 <= int(m) <= cb.bins:
        raise InvalidArgumentError(f"message {m} out of range 1..{cb.bins}")
    words = cb.bin_words(int(m))
    nu, nz = cb.strat.size, cb.strat.z_alphabet.size
    mask = kernels.typical_mask(words, z, nu, nz, cb.design.enc_target[None], params.delta2)
    hits = np.flatnonzero(mask)
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, "encode")
    if hits.size:
        j = int(hits[rng.integers(hits.size)])
        u = np.asarray(words[j], dtype=np.int64)
        index, fallback = (int(m), j + 1), False
    else:
        u = np.asarray(cb.bin_words(1)[0], dtype=np.int64)
        index, fallback = None, True
    x = cb.strat.apply(u, z)
    return EncodeResult(x, u, type_of(z, cb.strat.z_alphabet), index, fallback, int(hits.size))


# ---------------------------------------------------------------------------
# decoder
# ---------------------------------------------------------------------------

def _block_mask_probs(p_u, nb, col_targets, gamma, n):
    """Law of the target-pass pattern contributed by one output-symbol block.

    ``col_targets`` has shape (T, nu): the targets' column for this output
    symbol.  Returns {pattern bytes: probability} where pattern[t] says the
    block's composition is within gamma of target t in every cell.
    """
    T, nu = col_targets.shape
    supp = np.flatnonzero(p_u > 0)
    off = np.setdiff1d(np.arange(nu), supp)
    # cells outside the support always have count 0
    base_ok = np.all(np.abs(col_targets[:, off]) <= gamma + 1e-12, axis=1) if off.size else np.ones(T, bool)
    k = supp.size
    if math.comb(nb + k - 1, k - 1) > MAX_ENUM:
        return None
    comps = compositions(nb, k) if nb > 0 else np.zeros((1, k), dtype=np.int64)
    logp = gammaln(nb + 1) - gammaln(comps + 1).sum(axis=1) + comps @ np.log(p_u[supp])
    freqs = comps / n
    ok = np.all(np.abs(freqs[:, None, :] - col_targets[None, :, supp]) <= gamma + 1e-12, axis=2)
    ok &= base_ok[None, :]
    pat, inv = np.unique(ok, axis=0, return_inverse=True)
    prob = np.bincount(inv.ravel(), weights=np.exp(logp), minlength=len(pat))
    return {p.tobytes(): float(w) for p, w in zip(pat, prob) if w > 0}


def _block_pass_upper(p_u, nb, col, gamma, n):
    # P(every cell in range) <= min over cells of P(that cell in range)
    best = 1.0
    for u in range(p_u.size):
        lo = math.ceil((col[u] - gamma) * n - 1e-9)
        hi = math.floor((col[u] + gamma) * n + 1e-9)
        lo, hi = max(lo, 0), min(hi, nb)
        pr = 0.0 if lo > hi else float(binom.cdf(hi, nb, p_u[u]) - binom.cdf(lo - 1, nb, p_u[u]))
        best = min(best, pr)
    return best


def list_pass_probability(p_u: np.ndarray, y_counts: Sequence[int], targets: np.ndarray,
                          gamma: float) -> float:
    """Probability that one word drawn i.i.d. from p_u, independent of y, enters the list.

    Exact (method of types) when the compositions are enumerable; otherwise a
    union-bound over targets with a per-cell upper bound, which errs on the
    side of more decoding errors.
    """
    p_u = np.asarray(p_u, float)
    y_counts = [int(c) for c in y_counts]
    n = sum(y_counts)
    T = targets.shape[0]
    combined: dict[bytes, float] | None = {np.ones(T, bool).tobytes(): 1.0}
    for b, nb in enumerate(y_counts):
        blk = _block_mask_probs(p_u, nb, targets[:, :, b], gamma, n)
        if blk is None:
            combined = None
            break
        nxt: dict[bytes, float] = {}
        for ka, pa in combined.items():
            a = np.frombuffer(ka, dtype=bool)
            for kb, pb in blk.items():
                key = (a & np.frombuffer(kb, dtype=bool)).tobytes()
                nxt[key] = nxt.get(key, 0.0) + pa * pb
        combined = nxt
    if combined is not None:
        return float(min(1.0, sum(p for k, p in combined.items() if any(k))))
    total = 0.0
    for t in range(T):
        pr = 1.0
        for b, nb in enumerate(y_counts):
            pr *= _block_pass_upper(p_u, nb, targets[t, :, b], gamma, n)
        total += pr
    return min(1.0, total)


@dataclass
class DecodeResult:
    m_hat: int
    list_bins: tuple[int, ...]  # distinct bins with list members (implicit bins summarized)
    true_in_list: bool | None
    other_bin_members: int


_PASS_CACHE: dict = {}
_PASS_LOCK = threading.Lock()


def _pass_prob(cb: Codebook, y_counts, gamma) -> float:
    key = (id(cb.design), cb.design.key, tuple(y_counts), round(gamma, 15), cb.p_u.tobytes())
    with _PASS_LOCK:
        v = _PASS_CACHE.get(key)
    if v is None:
        v = list_pass_probability(cb.p_u, y_counts, cb.design.targets, gamma)
        with _PASS_LOCK:
            if len(_PASS_CACHE) > 100_000:
                _PASS_CACHE.clear()
            _PASS_CACHE[key] = v
    return v


def decode(y, t_z, cb: Codebook, params: CodeParams, sent_bin: int | None = None,
           sent_word: np.ndarray | None = None) -> DecodeResult:
    """List decoding.  Returns the unique bin holding list members, or 0.

    For a materialized codebook every word is scanned and ``sent_bin`` is
    ignored.  Otherwise ``sent_bin`` names the bin whose words are scanned
    explicitly (the transmitted one, whose words are correlated with ``y``);
    the remaining bins' list count is drawn from its exact law.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (cb.n,):
        raise InvalidArgumentError(f"output must have length {cb.n}")
    nu, ny = cb.strat.size, cb.design.targets.shape[2]
    targets = cb.design.targets
    gamma = params.gamma
    true_in = None
    if sent_word is not None:
        true_in = bool(kernels.typical_mask(sent_word[None], y, nu, ny, targets, gamma)[0])
    if cb.explicit:
        mask = kernels.typical_mask(cb.all_words(), y, nu, ny, targets, gamma)
        member_bins = np.unique(np.flatnonzero(mask) // cb.per_bin + 1)
        others = 0 if sent_bin is None else int(np.sum(mask) - np.sum(
            mask[(sent_bin - 1) * cb.per_bin: sent_bin * cb.per_bin]))
        m_hat = int(member_bins[0]) if member_bins.size == 1 else 0
        return DecodeResult(m_hat, tuple(int(b) for b in member_bins), true_in, others)
    if sent_bin is None:
        raise InvalidArgumentError("an implicit codebook needs the transmitted bin to simulate decoding")
    own = kernels.typical_mask(cb.bin_words(sent_bin), y, nu, ny, targets, gamma)
    y_counts = np.bincount(y, minlength=ny)
    p = _pass_prob(cb, y_counts, gamma)
    n_other = (cb.bins - 1) * cb.per_bin
    digest = hashlib.blake2b(y.astype(np.int8).tobytes(), digest_size=8).digest()
    rng = make_rng(cb.code_seed, "interference", cb.design.key, int.from_bytes(digest, "little"), sent_bin)
    if p <= 0 or n_other == 0:
        k = 0
    elif n_other * p > 1e15:
        k = 2
    elif n_other < 2**62:
        k = int(rng.binomial(n_other, p))
    else:
        k = int(rng.poisson(n_other * p))
    bins = []
    if own.any():
        bins.append(sent_bin)
    if k == 1:
        other = int(rng.integers(1, cb.bins))
        bins.append(other if other < sent_bin else other + 1)
    elif k >= 2:
        bins.extend([-1, -2])  # members in other bins; identities immaterial
    m_hat = bins[0] if len(bins) == 1 else 0
    return DecodeResult(m_hat, tuple(sorted(b for b in bins if b > 0)), true_in, k)


# ---------------------------------------------------------------------------
# short repetition prefix (type index or code index)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RepetitionPrefix:
    """Repetition code carrying an integer, one bit per block of ``rep`` symbols.

    Bit b is sent with strategy ``f_b`` (a map z -> x applied to the prefix
    observation) and each symbol is demapped by ``demap[y]``; the bit is the
    majority vote.  The pair and demapper minimize the worst per-symbol error
    over pure states, which bounds the error under any state sequence.
    """

    spec: SystemSpec
    bits: int
    rep: int
    f0: np.ndarray  # (|Z|,) -> x
    f1: np.ndarray
    demap: np.ndarray  # (|Y|,) -> bit
    symbol_error: float

    @property
    def length(self) -> int:
        return self.bits * self.rep

    @property
    def size(self) -> int:
        return 2**self.bits

    def encode(self, k: int, z) -> np.ndarray:
        """Symbols for integer k in [0, 2^bits)."""
        if not 0 <= k < 2**self.bits:
            raise InvalidArgumentError(f"prefix index {k} out of range")
        z = np.asarray(z, dtype=np.int64)
        bits = np.array([(k >> (self.bits - 1 - i)) & 1 for i in range(self.bits)], dtype=np.int64)
        b = np.repeat(bits, self.rep)
        return np.where(b == 1, self.f1[z], self.f0[z])

    def decode(self, y) -> int:
        y = np.asarray(y, dtype=np.int64).reshape(self.bits, self.rep)
        votes = self.demap[y].sum(axis=1)
        bits = (2 * votes > self.rep).astype(np.int64)
        k = 0
        for b in bits:
            k = (k << 1) | int(b)
        return k

    def error_bound(self) -> float:
        """Union over bits of the binomial tail P(Bin(rep, symbol_error) >= rep/2).

        Given the states, symbol errors are independent with probability at
        most ``symbol_error`` each, so the count of wrong votes is dominated
        by that binomial whatever the state sequence.
        """
        if self.bits == 0:
            return 0.0
        tail = float(binom.sf(math.ceil(self.rep / 2) - 1, self.rep, self.symbol_error))
        return min(1.0, self.bits * tail)


def best_prefix_symbols(spec: SystemSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Strategy pair and demapper with the smallest worst-case per-symbol error."""
    nx, nz, ny = spec.x.size, spec.z.size, spec.y.size
    if nx**nz > 256 or ny > 16:
        raise CapacityLimitError("prefix search space too large")
    funcs = np.array(np.meshgrid(*[np.arange(nx)] * nz, indexing="ij")).reshape(nz, -1).T
    # out[f, s, y] = P(y | strategy f, state s)
    out = np.einsum("sz,fzsy->fsy", spec.obs, spec.W[funcs])
    maps = np.array(np.meshgrid(*[np.arange(2)] * ny, indexing="ij")).reshape(ny, -1).T
    best = (np.inf, None, None, None)
    for dm in maps:
        # err1[f, s] = P(demap says 0 | f, s); err0 = P(demap says 1 | f, s)
        say1 = out @ dm.astype(float)
        worst0 = say1.max(axis=1)  # bit 0 sent with f
        worst1 = (1 - say1).max(axis=1)
        i0 = int(np.argmin(worst0))
        i1 = int(np.argmin(worst1))
        e = max(worst0[i0], worst1[i1])
        if e < best[0] - 1e-12:
            best = (float(e), funcs[i0], funcs[i1], dm)
    e, f0, f1, dm = best
    return f0.astype(np.int64), f1.astype(np.int64), dm.astype(np.int64), e


def make_prefix(spec: SystemSpec, values: int, rep: int, max_symbol_error: float = 0.45) -> RepetitionPrefix:
    """Repetition prefix able to carry ``values`` distinct indices."""
    if values < 1 or rep < 1:
        raise InvalidArgumentError("prefix needs values >= 1 and rep >= 1")
    f0, f1, dm, e = best_prefix_symbols(spec)
    if e > max_symbol_error:
        raise CapacityLimitError(
            f"no strategy pair separates two inputs under every state (worst symbol error {e:.3f})")
    bits = max(1, math.ceil(math.log2(values))) if values > 1 else 0
    return RepetitionPrefix(spec, bits, rep, f0, f1, dm, e)


# ---------------------------------------------------------------------------
# adversaries
# ---------------------------------------------------------------------------

@dataclass
class CodeContext:
    """What an adversary may know: the system, the parameters and the design map (not the seed)."""

    spec: SystemSpec
    params: CodeParams
    designer: Designer


class Adversary:
    kind = "abstract"

    def states(self, n: int, rng: np.random.Generator, ctx: CodeContext) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind


class IIDAdversary(Adversary):
    kind = "iid"

    def __init__(self, q):
        self.q = np.asarray(q.mass if isinstance(q, Dist) else q, float)
        if np.any(self.q < 0) or abs(self.q.sum() - 1) > 1e-9:
            raise InvalidArgumentError("iid adversary needs a probability vector")

    def states(self, n, rng, ctx):
        if self.q.size != ctx.spec.s.size:
            raise InvalidArgumentError("adversary law does not match the state alphabet")
        return sample_rows(self.q[None, :], np.zeros(n, dtype=np.int64), rng)

    def describe(self):
        return "iid:" + ",".join(f"{v:g}" for v in self.q)


class MemorylessAdversary(Adversary):
    """Independent states with a position-dependent law (cycled if shorter than n)."""

    kind = "memoryless"

    def __init__(self, laws):
        self.laws = np.atleast_2d(np.asarray(laws, float))
        if np.any(self.laws < 0) or np.any(np.abs(self.laws.sum(axis=1) - 1) > 1e-9):
            raise InvalidArgumentError("memoryless adversary needs probability rows")

    def states(self, n, rng, ctx):
        rows = np.arange(n) % len(self.laws)
        return sample_rows(self.laws, rows, rng)


class MarginalConstrainedAdversary(Adversary):
    """i.i.d. states from the worst law consistent with a target Z-marginal.

    The adversary looks up the code design the scheme would use at ``p_z``
    and plays the state law minimizing I(U;Y) for that design.
    """

    kind = "marginal_constrained"

    def __init__(self, p_z):
        self.p_z = np.asarray(p_z, float)
        self._q: dict[int, np.ndarray] = {}

    def law(self, ctx: CodeContext) -> np.ndarray:
        key = id(ctx.designer)
        if key not in self._q:
            d = ctx.designer.design(self.p_z)
            poly = MarginalPolytope.build(ctx.spec.obs, d.p_z)
            r = _inner_solve(ctx.designer.model, poly, d.P)
            q = np.clip(r.q, 0, None)
            self._q[key] = q / q.sum()
        return self._q[key]

    def states(self, n, rng, ctx):
        q = self.law(ctx)
        return sample_rows(q[None, :], np.zeros(n, dtype=np.int64), rng)

    def describe(self):
        return "marginal:" + ",".join(f"{v:g}" for v in self.p_z)


class CustomAdversary(Adversary):
    """Wraps ``fn(ctx, n, rng) -> state vector``."""

    kind = "custom"

    def __init__(self, fn: Callable, name: str = "custom"):
        if not callable(fn):
            raise InvalidArgumentError("custom adversary needs a callable")
        self.fn = fn
        self.name = name

    def states(self, n, rng, ctx):
        s = np.asarray(self.fn(ctx, n, rng), dtype=np.int64)
        if s.shape != (n,) or s.min(initial=0) < 0 or s.max(initial=0) >= ctx.spec.s.size:
            raise InvalidArgumentError(f"custom adversary must return {n} state indices")
        return s

    def describe(self):
        return f"custom:{self.name}"


ADVERSARY_KINDS = ("iid", "memoryless", "marginal", "custom")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidArgumentError(f"bad number list {text!r}") from None


def parse_adversary(text: str) -> Adversary:
    """Parse ``KIND[:ARGS]``.

    * ``iid:q0,q1,...``
    * ``memoryless:q0,q1;q0,q1;...`` (one law per position, cycled)
    * ``marginal:p0,p1,...`` (target Z-marginal)
    * ``custom:path/to/file.py[:function]`` (function defaults to ``adversary``)
    """
    kind, _, args = text.partition(":")
    kind = kind.strip().lower()
    if kind == "iid":
        if not args:
            raise InvalidArgumentError("iid adversary needs a law, e.g. iid:0.5,0.5")
        return IIDAdversary(_floats(args))
    if kind == "memoryless":
        if not args:
            raise InvalidArgumentError("memoryless adversary needs laws, e.g. memoryless:1,0;0,1")
        return MemorylessAdversary([_floats(r) for r in args.split(";")])
    if kind in ("marginal", "marginal_constrained"):
        if not args:
            raise InvalidArgumentError("marginal adversary needs a Z-marginal")
        return MarginalConstrainedAdversary(_floats(args))
    if kind == "custom":
        if not args:
            raise InvalidArgumentError("custom adversary needs a plugin path: custom:file.py[:function]")
        path, func = args, "adversary"
        if args.count(":") and not os.path.exists(args):
            path, _, func = args.rpartition(":")
        if not os.path.isfile(path):
            raise InvalidArgumentError(f"custom adversary plugin {path!r} not found")
        mod_spec = importlib.util.spec_from_file_location("avc_custom_adversary", path)
        mod = importlib.util.module_from_spec(mod_spec)
        mod_spec.loader.exec_module(mod)
        fn = getattr(mod, func, None)
        if fn is None:
            raise InvalidArgumentError(f"plugin {path!r} has no function {func!r}")
        return CustomAdversary(fn, name=os.path.basename(path))
    raise InvalidArgumentError(f"unknown adversary kind {kind!r}; valid kinds: {', '.join(ADVERSARY_KINDS)}")


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------

@dataclass
class TrialRecord:
    trial: int
    m: int
    s: np.ndarray
    z: np.ndarray
    t_z: tuple
    index: tuple[int, int] | None
    fallback: bool
    y: np.ndarray
    m_hat: int
    error: bool
    event: str
    enc: bool
    dec1: bool
    dec2: bool
    code_seed: int
    seed: int
    cascade_typical: bool | None = None
    type_error: bool = False
    infeasible: bool = False
    extra: dict = field(default_factory=dict)


def _joint_cascade(spec, design, s, z, u, x, y, tol) -> bool:
    """Is the 5-tuple jointly tol-typical w.r.t. T_s obs P(U|Z) 1 W?"""
    ns, nz, nu, nx, ny = spec.s.size, spec.z.size, design.strat.size, spec.x.size, spec.y.size
    cells = ns * nz * nu * nx * ny
    if cells > 10**6:
        return None
    n = len(s)
    ts = np.bincount(s, minlength=ns) / n
    ind = np.zeros((nu, nz, nx))
    uu, zz = np.meshgrid(np.arange(nu), np.arange(nz), indexing="ij")
    ind[uu, zz, design.strat.table] = 1.0
    target = np.einsum("s,sz,zu,uzx,xsy->szuxy", ts, spec.obs, design.P, ind, spec.W)
    flat = (((s * nz + z) * nu + u) * nx + x) * ny + y
    emp = np.bincount(flat, minlength=cells).reshape(target.shape) / n
    return bool(np.max(np.abs(emp - target)) <= tol + 1e-12)


class Simulator:
    """Runs trials of the scheme on one system with fixed parameters."""

    def __init__(self, spec: SystemSpec, params: CodeParams, designer: Designer | None = None,
                 cache: CodebookCache | None = None):
        self.spec = spec
        self.params = params
        self.designer = designer or Designer.for_params(spec, params)
        self.cache = cache or CodebookCache()
        self.ctx = CodeContext(spec, params, self.designer)
        self._type_prefix = None
        if params.explicit_type:
            count = math.comb(params.n + spec.z.size - 1, spec.z.size - 1)
            rep = max(1, math.ceil(math.log2(params.n + 1)))
            self._type_prefix = make_prefix(spec, count, rep)
            self._types = compositions(params.n, spec.z.size)
            self._type_index = {tuple(t): i for i, t in enumerate(self._types.tolist())}

    @property
    def prefix_length(self) -> int:
        return 0 if self._type_prefix is None else self._type_prefix.length

    def codebook(self, t_z: EmpiricalType, code_seed: int) -> Codebook:
        key = (t_z.key(), code_seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return self.cache.get(key, lambda: build_codebook(
                self.spec, t_z, self.params, seed=code_seed, designer=self.designer))

    def code_seed_for(self, trial_seed, trial: int) -> int:
        if self.params.seed is not None:
            return int(self.params.seed)
        return int(make_rng(trial_seed, trial, "theta").integers(2**62))

    def run(self, m: int, seed, trial: int = 0, code_seed: int | None = None,
            s: np.ndarray | None = None, adversary: Adversary | None = None,
            s_prefix: np.ndarray | None = None) -> TrialRecord:
        spec, params = self.spec, self.params
        n = params.n
        theta = self.code_seed_for(seed, trial) if code_seed is None else int(code_seed)
        L = self.prefix_length
        if s is None:
            full = adversary.states(n + L, make_rng(seed, trial, "adversary"), self.ctx)
            s_prefix, s = full[:L], full[L:]
        s = np.asarray(s, dtype=np.int64)
        z = sample_rows(spec.obs, s, make_rng(seed, trial, "obs"))
        t_z = type_of(z, spec.z)
        try:
            cb = self.codebook(t_z, theta)
        except InfeasibleTypeError:
            y = np.zeros(n, dtype=np.int64)
            return TrialRecord(trial, m, s, z, t_z.key(), None, True, y, 0, True, "E_enc",
                               True, False, False, theta, _seed_int(seed), None, False, True)
        if not 1 <= m <= cb.bins:
            raise InvalidArgumentError(f"message {m} out of range 1..{cb.bins}")
        enc = encode(m, z, cb, params, make_rng(seed, trial, "encode"))
        y = sample_rows(spec.W.reshape(-1, spec.y.size), enc.x * spec.s.size + s,
                        make_rng(seed, trial, "channel"))
        # the decoder's view of the observation type
        dec_cb, type_error = cb, False
        if self._type_prefix is not None:
            zp = sample_rows(spec.obs, s_prefix, make_rng(seed, trial, "obs_prefix"))
            xp = self._type_prefix.encode(self._type_index[tuple(t_z.counts.tolist())], zp)
            yp = sample_rows(spec.W.reshape(-1, spec.y.size), xp * spec.s.size + s_prefix,
                             make_rng(seed, trial, "channel_prefix"))
            k = self._type_prefix.decode(yp)
            if k >= len(self._types) or k != self._type_index[tuple(t_z.counts.tolist())]:
                type_error = True
                if k < len(self._types):
                    try:
                        dec_cb = self.codebook(EmpiricalType((spec.z,), self._types[k]), theta)
                    except InfeasibleTypeError:
                        dec_cb = None
                else:
                    dec_cb = None
        sent_bin = enc.index[0] if not enc.fallback else 1
        if dec_cb is None:
            dres = DecodeResult(0, (), None, 0)
        elif dec_cb is cb:
            dres = decode(y, t_z, cb, params, sent_bin=sent_bin, sent_word=enc.u)
        else:
            # wrong type: the decoder searches a codebook unrelated to the transmission
            dres = decode(y, dec_cb.t_z, dec_cb, params, sent_bin=1 if not dec_cb.explicit else None)
        error = dres.m_hat != m
        ev_enc = enc.fallback
        dec1 = (not ev_enc) and not bool(dres.true_in_list)
        dec2 = dres.other_bin_members > 0
        if type_error:
            dec1 = True
        event = "E_enc" if ev_enc else "E_dec1" if dec1 else "E_dec2" if dec2 else "none"
        cascade = None
        if not ev_enc:
            cascade = _joint_cascade(spec, cb.design, s, z, enc.u, enc.x, y, 9 * params.delta2)
        return TrialRecord(trial, m, s, z, t_z.key(), enc.index, enc.fallback, y, dres.m_hat, error,
                           event, ev_enc, dec1, dec2, theta, _seed_int(seed), cascade, type_error)


def _seed_int(seed) -> int:
    return int(seed) if isinstance(seed, (int, np.integer)) else -1


def run_trial(spec: SystemSpec, params: CodeParams, adversary: Adversary, m: int, seed,
              trial: int = 0, simulator: Simulator | None = None) -> TrialRecord:
    sim = simulator or Simulator(spec, params)
    return sim.run(int(m), seed, trial=trial, adversary=adversary)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _ci(k: int, n: int) -> tuple[float, float]:
    """Wilson 95% interval."""
    if n == 0:
        return (0.0, 1.0)
    z = 1.959963984540054
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


@dataclass
class MonteCarloResult:
    trials: int
    errors: int
    p_error: float
    ci: tuple[float, float]
    p_enc: float
    p_dec1: float  # conditional on no encoding failure
    p_dec2: float
    p_cascade: float | None
    per_message: dict
    max_error: float
    records: list = field(default_factory=list, repr=False)
    params: CodeParams | None = None
    adversary: str = ""

    @property
    def sigma(self) -> float:
        p = self.p_error
        return math.sqrt(max(p * (1 - p), 1e-12) / self.trials)

    def union_bound_holds(self, k: float = 3.0) -> bool:
        return self.p_error <= self.p_enc + self.p_dec1 + self.p_dec2 + k * self.sigma

    def summary(self) -> dict:
        return {
            "trials": self.trials, "errors": self.errors, "p_error": self.p_error,
            "ci95": list(self.ci), "p_enc": self.p_enc, "p_dec1_given_no_enc": self.p_dec1,
            "p_dec2_given_no_enc": self.p_dec2, "p_cascade_typical": self.p_cascade,
            "max_error_over_messages": self.max_error, "adversary": self.adversary,
        }


def summarize(records: list[TrialRecord], params=None, adversary: str = "") -> MonteCarloResult:
    T = len(records)
    errs = sum(r.error for r in records)
    enc = sum(r.enc for r in records)
    ok = [r for r in records if not r.enc]
    d1 = sum(r.dec1 for r in ok) / len(ok) if ok else 0.0
    d2 = sum(r.dec2 for r in ok) / len(ok) if ok else 0.0
    casc = [r.cascade_typical for r in ok if r.cascade_typical is not None]
    per: dict[int, list[int]] = {}
    for r in records:
        e = per.setdefault(r.m, [0, 0])
        e[0] += r.error
        e[1] += 1
    per_rate = {m: a / b for m, (a, b) in per.items()}
    return MonteCarloResult(T, errs, errs / T, _ci(errs, T), enc / T, d1, d2,
                            (sum(casc) / len(casc)) if casc else None, per_rate,
                            max(per_rate.values()), records, params, adversary)


def _workers() -> int:
    raw = os.environ.get("AVC_THREADS")
    if not raw:
        return 1
    k = int(raw)
    if k < 1:
        raise InvalidArgumentError("AVC_THREADS must be >= 1")
    return k


def choose_messages(bins: int, trials: int, rng: np.random.Generator, mode: str = "uniform") -> np.ndarray:
    if mode == "uniform":
        return rng.integers(1, bins + 1, size=trials)
    if mode == "max":
        if bins <= 256:
            pool = np.arange(1, bins + 1)
        else:
            picked: set[int] = set()
            while len(picked) < 256:
                picked.update(int(v) for v in rng.integers(1, bins + 1, size=256 - len(picked)))
            pool = np.array(sorted(picked))
        return np.resize(pool, trials)
    raise InvalidArgumentError(f"unknown message mode {mode!r}")


def monte_carlo(spec: SystemSpec, params: CodeParams, adversary: Adversary, trials: int, seed=0,
                messages: str = "uniform", simulator: Simulator | None = None,
                workers: int | None = None) -> MonteCarloResult:
    """Estimate the error probability and its breakdown by error event."""
    if int(trials) != trials or trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    sim = simulator or Simulator(spec, params)
    bins = params.messages
    ms = choose_messages(bins, trials, make_rng(seed, "messages"), messages)
    workers = workers or _workers()

    def one(i):
        return sim.run(int(ms[i]), seed, trial=i, adversary=adversary)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(one, range(trials)))
    else:
        records = [one(i) for i in range(trials)]
    return summarize(records, params, adversary.describe())


CSV_COLUMNS = ("trial", "m", "event", "error", "n", "rate", "adversary_kind", "seed")


def write_trials_csv(records: list[TrialRecord], params: CodeParams, adversary_kind: str, stream,
                     extra_columns: Sequence[str] = ()) -> None:
    w = csv.writer(stream)
    w.writerow(list(CSV_COLUMNS) + list(extra_columns))
    for r in records:
        row = [r.trial, r.m, r.event, int(r.error), params.n, params.rate_R, adversary_kind, r.seed]
        row += [r.extra.get(c, "") for c in extra_columns]
        w.writerow(row)


def trials_csv(records, params, adversary_kind, extra_columns=()) -> str:
    buf = io.StringIO()
    write_trials_csv(records, params, adversary_kind, buf, extra_columns)
    return buf.getvalue()
