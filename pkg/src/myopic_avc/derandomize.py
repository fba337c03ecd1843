"""Reducing the shared randomness to a small family of codes.

* :class:`MultiCode`: K = n^2 deterministic codes (fixed code seeds) drawn
  from the randomized scheme; shared randomness only picks the index k.
* :class:`ConcatenatedCode`: the encoder draws k privately, sends it over a
  short repetition prefix, then sends the message with code k.  The decoder
  reads k from the prefix and applies code k, so no shared randomness
  remains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coding import (Adversary, CodeParams, Codebook, MonteCarloResult, RepetitionPrefix, Simulator,
                     TrialRecord, decode, encode, make_prefix, summarize, choose_messages)
from .errors import CapacityLimitError, InfeasibleTypeError, InvalidArgumentError
from .prob import EmpiricalType, make_rng, sample_rows, type_of
from .strategy import SystemSpec

MIN_CAPACITY = 0.02


@dataclass(frozen=True, eq=False)
class MultiCode:
    spec: SystemSpec
    params: CodeParams
    codes: tuple[int, ...]  # code seeds, one deterministic code each

    @property
    def K(self) -> int:
        return len(self.codes)

    @property
    def n(self) -> int:
        return self.params.n


def sample_multicode(spec: SystemSpec, params: CodeParams, seed, K: int | None = None) -> MultiCode:
    """Draw K (default n^2) independent codes from the randomized scheme."""
    n = params.n
    if n < 2:
        raise InvalidArgumentError("n must be >= 2")
    K = n * n if K is None else int(K)
    if K < 1:
        raise InvalidArgumentError("K must be >= 1")
    rng = make_rng(seed, "multicode")
    codes: list[int] = []
    seen: set[int] = set()
    while len(codes) < K:
        for c in rng.integers(0, 2**62, size=K - len(codes)).tolist():
            if c not in seen:
                seen.add(c)
                codes.append(int(c))
    return MultiCode(spec, params, tuple(codes))


@dataclass
class MultiCodeEvaluation:
    results: list[MonteCarloResult]
    K: int

    @property
    def error(self) -> float:
        return float(np.mean([r.p_error for r in self.results]))

    @property
    def max_error(self) -> float:
        """Max over the evaluated adversaries and messages."""
        return max(max(r.p_error, r.max_error) for r in self.results)


def evaluate_multicode(mc: MultiCode, spec: SystemSpec, adversary, trials: int, seed,
                       messages: str = "uniform", simulator: Simulator | None = None) -> MultiCodeEvaluation:
    """Error of the K-code family with the code index drawn uniformly per trial."""
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    advs = list(adversary) if isinstance(adversary, (list, tuple)) else [adversary]
    sim = simulator or Simulator(spec, mc.params)
    results = []
    for a_i, adv in enumerate(advs):
        ms = choose_messages(mc.params.messages, trials, make_rng(seed, a_i, "messages"), messages)
        recs = []
        for t in range(trials):
            k = int(make_rng(seed, a_i, t, "pick").integers(mc.K))
            r = sim.run(int(ms[t]), (int(seed), a_i), trial=t, code_seed=mc.codes[k], adversary=adv)
            r.extra.update({"K": mc.K, "k": k + 1})
            recs.append(r)
        results.append(summarize(recs, mc.params, adv.describe()))
    return MultiCodeEvaluation(results, mc.K)


# ---------------------------------------------------------------------------
# concatenation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConcatenatedCode:
    prefix: RepetitionPrefix
    main: MultiCode
    simulator: Simulator = field(repr=False, default=None)

    @property
    def prefix_length(self) -> int:
        return self.prefix.length

    @property
    def total_length(self) -> int:
        return self.main.n + self.prefix.length

    @property
    def K(self) -> int:
        return self.main.K

    def codebook(self, k: int, t_z: EmpiricalType) -> Codebook:
        return self.simulator.codebook(t_z, self.main.codes[k])


def default_prefix_rep(n: int) -> int:
    return math.ceil(math.sqrt(n))


def concatenate(prefix: RepetitionPrefix, mc: MultiCode, simulator: Simulator | None = None) -> ConcatenatedCode:
    if prefix.size < mc.K or (mc.K > 1 and prefix.size >= 2 * mc.K):
        raise InvalidArgumentError(
            f"prefix carries {prefix.size} indices but the family has K={mc.K} codes")
    sim = simulator or Simulator(mc.spec, mc.params)
    return ConcatenatedCode(prefix, mc, sim)


def build_concatenated(spec: SystemSpec, mc: MultiCode, rep: int | None = None,
                       capacity_value: float | None = None) -> ConcatenatedCode:
    """Prefix + family, refusing channels without positive capacity or a usable prefix."""
    if capacity_value is None:
        from .solver import capacity
        capacity_value = capacity(spec, grid_k=8).value
    if capacity_value <= MIN_CAPACITY:
        raise InvalidArgumentError(
            f"concatenation needs positive capacity (computed {capacity_value:.4f} <= {MIN_CAPACITY})")
    rep = default_prefix_rep(mc.n) if rep is None else int(rep)
    try:
        prefix = make_prefix(spec, mc.K, rep)
    except CapacityLimitError as exc:
        raise InvalidArgumentError(f"no usable prefix code: {exc}") from None
    return concatenate(prefix, mc)


@dataclass
class ConcatTransmission:
    x: np.ndarray
    k: int  # 0-based code index
    main_bin: int | None
    main_word: np.ndarray
    fallback: bool
    t_z: EmpiricalType


def encode_concat(cc: ConcatenatedCode, m: int, z_tilde, private_seed) -> ConcatTransmission:
    """Stochastic encoder: only ``private_seed`` supplies randomness."""
    z_tilde = np.asarray(z_tilde, dtype=np.int64)
    L = cc.prefix_length
    if z_tilde.shape != (cc.total_length,):
        raise InvalidArgumentError(f"observation must have length {cc.total_length}")
    rng = make_rng(private_seed, "concat-encoder")
    k = int(rng.integers(cc.K))
    xp = cc.prefix.encode(k, z_tilde[:L])
    z = z_tilde[L:]
    t_z = type_of(z, cc.main.spec.z)
    cb = cc.codebook(k, t_z)
    enc = encode(m, z, cb, cc.main.params, rng)
    return ConcatTransmission(np.concatenate([xp, enc.x]), k, None if enc.fallback else enc.index[0],
                              enc.u, enc.fallback, t_z)


@dataclass
class ConcatDecode:
    m_hat: int
    k_hat: int
    other_bin_members: int
    true_in_list: bool | None


def decode_concat(cc: ConcatenatedCode, y_tilde, t_z: EmpiricalType, sent_bin: int | None = None,
                  sent_word=None, k_true: int | None = None) -> ConcatDecode:
    """Read k from the prefix, then decode the main block with code k.

    ``sent_bin``/``sent_word``/``k_true`` only steer the simulation of
    non-materialized codebooks (see :func:`myopic_avc.coding.decode`).
    """
    y_tilde = np.asarray(y_tilde, dtype=np.int64)
    L = cc.prefix_length
    k_hat = cc.prefix.decode(y_tilde[:L])
    if k_hat >= cc.K:
        return ConcatDecode(0, k_hat, 0, None)
    try:
        cb = cc.codebook(k_hat, t_z)
    except InfeasibleTypeError:
        return ConcatDecode(0, k_hat, 0, None)
    y = y_tilde[L:]
    if k_true is not None and k_hat != k_true:
        # the transmitted word belongs to another code; nothing in this one is correlated with y
        d = decode(y, t_z, cb, cc.main.params, sent_bin=None if cb.explicit else 1)
        return ConcatDecode(d.m_hat, k_hat, d.other_bin_members, False)
    d = decode(y, t_z, cb, cc.main.params, sent_bin=sent_bin if sent_bin is not None else 1,
               sent_word=sent_word)
    return ConcatDecode(d.m_hat, k_hat, d.other_bin_members, d.true_in_list)


@dataclass
class ConcatEvaluation:
    result: MonteCarloResult
    prefix_error: float
    prefix_error_bound: float
    prefix_length: int
    total_length: int


def evaluate_concat(cc: ConcatenatedCode, spec: SystemSpec, adversary: Adversary, trials: int, seed,
                    messages: str = "uniform") -> ConcatEvaluation:
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    params = cc.main.params
    L, n = cc.prefix_length, cc.main.n
    ms = choose_messages(params.messages, trials, make_rng(seed, "messages"), messages)
    recs: list[TrialRecord] = []
    prefix_errors = 0
    ctx = cc.simulator.ctx
    Wf = spec.W.reshape(-1, spec.y.size)
    for t in range(trials):
        m = int(ms[t])
        s = adversary.states(L + n, make_rng(seed, t, "adversary"), ctx)
        z = sample_rows(spec.obs, s, make_rng(seed, t, "obs"))
        private = int(make_rng(seed, t, "private").integers(2**62))
        tx = encode_concat(cc, m, z, private)
        y = sample_rows(Wf, tx.x * spec.s.size + s, make_rng(seed, t, "channel"))
        sent_bin = tx.main_bin if tx.main_bin is not None else 1
        d = decode_concat(cc, y, tx.t_z, sent_bin=sent_bin, sent_word=tx.main_word, k_true=tx.k)
        pe = d.k_hat != tx.k
        prefix_errors += pe
        enc = tx.fallback
        dec1 = (not enc) and not bool(d.true_in_list)
        dec2 = d.other_bin_members > 0
        event = "E_enc" if enc else "E_dec1" if dec1 else "E_dec2" if dec2 else "none"
        r = TrialRecord(t, m, s[L:], z[L:], tx.t_z.key(), None if enc else (tx.main_bin, 0), enc,
                        y[L:], d.m_hat, d.m_hat != m, event, enc, dec1, dec2, cc.main.codes[tx.k],
                        int(seed) if isinstance(seed, (int, np.integer)) else -1)
        r.extra.update({"K": cc.K, "prefix_len": L, "k": tx.k + 1, "k_hat": d.k_hat + 1})
        recs.append(r)
    res = summarize(recs, params, adversary.describe())
    return ConcatEvaluation(res, prefix_errors / trials, cc.prefix.error_bound(), L, L + n)
