"""Hot loops with a numba implementation and a pure-numpy fallback.

Set ``AVC_NUMBA=0`` in the environment (before import) to force the numpy
path.  Both paths return identical results; ``benchmarks/bench_kernels.py``
compares their speed.

Kernels:

* ``typical_mask``: for every row of a word matrix, test whether its joint
  type with a fixed reference sequence lies within ``tol`` (l-infinity) of at
  least one target joint distribution.  This is the inner loop of both the
  encoder search and the list decoder.
* ``oracle_group_max``: exhaustive grid enumeration for the capacity oracle.
"""

from __future__ import annotations

import os

import numpy as np

from .prob import TYPICALITY_FUZZ

try:
    import numba
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("AVC_NUMBA", "1").strip() not in ("0", "false", "no")


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def configure_threads() -> int:
    """Apply the AVC_THREADS cap (integer >= 1) to numba; returns the cap in effect."""
    raw = os.environ.get("AVC_THREADS")
    if not raw:
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"AVC_THREADS must be an integer >= 1, got {raw!r}") from None
    if k < 1:
        raise ValueError(f"AVC_THREADS must be an integer >= 1, got {raw!r}")
    if USE_NUMBA:
        numba.set_num_threads(min(k, numba.config.NUMBA_NUM_THREADS))
    return k


# ---------------------------------------------------------------------------
# typicality scan
# ---------------------------------------------------------------------------

def _typical_mask_np(words, seq, na, nb, targets, tol, chunk=4096):
    N, n = words.shape
    T = targets.shape[0]
    cells = na * nb
    out = np.zeros(N, dtype=bool)
    for lo in range(0, N, chunk):
        w = words[lo:lo + chunk]
        m = w.shape[0]
        idx = w.astype(np.int64) * nb + seq[None, :] + (np.arange(m) * cells)[:, None]
        counts = np.bincount(idx.ravel(), minlength=m * cells).reshape(m, cells) / n
        hit = np.zeros(m, dtype=bool)
        for t in range(T):
            hit |= np.max(np.abs(counts - targets[t]), axis=1) <= tol
        out[lo:lo + m] = hit
    return out


if numba is not None:

    @njit(cache=True, nogil=True)
    def _typical_mask_nb(words, seq, na, nb, targets, tol):
        N, n = words.shape
        T = targets.shape[0]
        cells = na * nb
        out = np.zeros(N, dtype=np.bool_)
        counts = np.zeros(cells)
        inv = 1.0 / n
        for i in range(N):
            counts[:] = 0.0
            for j in range(n):
                counts[words[i, j] * nb + seq[j]] += 1.0
            for t in range(T):
                ok = True
                for c in range(cells):
                    if abs(counts[c] * inv - targets[t, c]) > tol:
                        ok = False
                        break
                if ok:
                    out[i] = True
                    break
        return out


def typical_mask(words: np.ndarray, seq: np.ndarray, na: int, nb: int,
                 targets: np.ndarray, tol: float, use_numba: bool | None = None) -> np.ndarray:
    """Boolean mask: row i of ``words`` has joint type with ``seq`` within ``tol`` of some target.

    ``targets`` has shape (T, na, nb) or (T, na*nb); joint types are indexed
    ``[a, b]`` with ``a`` from ``words`` and ``b`` from ``seq``.
    """
    words = np.ascontiguousarray(np.atleast_2d(words), dtype=np.int64)
    seq = np.ascontiguousarray(seq, dtype=np.int64)
    targets = np.ascontiguousarray(np.asarray(targets, float).reshape(-1, na * nb))
    if words.shape[0] == 0 or targets.shape[0] == 0:
        return np.zeros(words.shape[0], dtype=bool)
    tol = float(tol) + TYPICALITY_FUZZ
    use = USE_NUMBA if use_numba is None else (use_numba and numba is not None)
    if use:
        return _typical_mask_nb(words, seq, na, nb, targets, tol)
    return _typical_mask_np(words, seq, na, nb, targets, tol)


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------
#
# Inputs:
#   B      (ns, nz, nu, ny)  B[s,z,u,y] = obs(z|s) W(y|x(u,z),s)
#   rows   (nr, nu)          grid of candidate rows of P(U|Z)
#   qgrid  (nq, ns)          grid of state distributions
#   group  (nq,)             index of the Z-marginal each q maps to
#   pz     (ng, nz)          the distinct Z-marginals
# Output:
#   best   (ng,)             max over P(U|Z) in the row grid of min over q in
#                            the group of I(U;Y) - I(U;Z)


def _mi2(m):
    # mutual information (bits) of 2-D joint arrays stacked on leading axes
    pa = m.sum(axis=-1, keepdims=True)
    pb = m.sum(axis=-2, keepdims=True)
    den = pa * pb
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(m > 0, m * np.log2(np.where(m > 0, m, 1.0) / np.where(den > 0, den, 1.0)), 0.0)
    return t.sum(axis=(-2, -1))


def _oracle_np(B, rows, qgrid, group, pz, chunk=2048):
    ns, nz, nu, ny = B.shape
    nr = rows.shape[0]
    ng = pz.shape[0]
    total = nr**nz
    best = np.full(ng, -np.inf)
    radix = nr ** np.arange(nz - 1, -1, -1)
    order = np.argsort(group, kind="stable")
    bounds = np.searchsorted(group[order], np.arange(ng + 1))
    for lo in range(0, total, chunk):
        flat = np.arange(lo, min(lo + chunk, total))
        digits = (flat[:, None] // radix[None, :]) % nr  # (c, nz)
        P = rows[digits]  # (c, nz, nu)
        C = np.einsum("czu,szuy->csuy", P, B)
        puy = np.einsum("qs,csuy->cquy", qgrid, C)
        iuy = _mi2(puy)  # (c, nq)
        iuz = _mi2(pz[None, :, :, None] * P[:, None, :, :])  # (c, ng)
        vals = iuy - iuz[:, group]
        vals = vals[:, order]
        for g in range(ng):
            gmin = vals[:, bounds[g]:bounds[g + 1]].min(axis=1)
            best[g] = max(best[g], gmin.max())
    return best


if numba is not None:

    @njit(cache=True, nogil=True)
    def _oracle_nb(B, rows, qgrid, group, pz):
        ns, nz, nu, ny = B.shape
        nr = rows.shape[0]
        nq = qgrid.shape[0]
        ng = pz.shape[0]
        total = 1
        for _ in range(nz):
            total *= nr
        best = np.full(ng, -np.inf)
        gmin = np.empty(ng)
        iuz = np.empty(ng)
        P = np.empty((nz, nu))
        C = np.empty((ns, nu, ny))
        puy = np.empty((nu, ny))
        pu = np.empty(nu)
        py = np.empty(ny)
        puz = np.empty((nz, nu))
        ln2 = np.log(2.0)
        for flat in range(total):
            rem = flat
            for z in range(nz - 1, -1, -1):
                r = rem % nr
                rem //= nr
                for u in range(nu):
                    P[z, u] = rows[r, u]
            for s in range(ns):
                for u in range(nu):
                    for y in range(ny):
                        acc = 0.0
                        for z in range(nz):
                            acc += P[z, u] * B[s, z, u, y]
                        C[s, u, y] = acc
            for g in range(ng):
                for u in range(nu):
                    pu[u] = 0.0
                for z in range(nz):
                    for u in range(nu):
                        puz[z, u] = pz[g, z] * P[z, u]
                        pu[u] += puz[z, u]
                acc = 0.0
                for z in range(nz):
                    for u in range(nu):
                        m = puz[z, u]
                        if m > 0.0:
                            acc += m * np.log(m / (pz[g, z] * pu[u]))
                iuz[g] = acc / ln2
                gmin[g] = np.inf
            for qi in range(nq):
                for u in range(nu):
                    pu[u] = 0.0
                for y in range(ny):
                    py[y] = 0.0
                for u in range(nu):
                    for y in range(ny):
                        acc = 0.0
                        for s in range(ns):
                            acc += qgrid[qi, s] * C[s, u, y]
                        puy[u, y] = acc
                        pu[u] += acc
                        py[y] += acc
                acc = 0.0
                for u in range(nu):
                    for y in range(ny):
                        m = puy[u, y]
                        if m > 0.0:
                            acc += m * np.log(m / (pu[u] * py[y]))
                g = group[qi]
                v = acc / ln2 - iuz[g]
                if v < gmin[g]:
                    gmin[g] = v
            for g in range(ng):
                if gmin[g] > best[g]:
                    best[g] = gmin[g]
        return best


def oracle_group_max(B, rows, qgrid, group, pz, use_numba: bool | None = None) -> np.ndarray:
    B = np.ascontiguousarray(B, dtype=float)
    rows = np.ascontiguousarray(rows, dtype=float)
    qgrid = np.ascontiguousarray(qgrid, dtype=float)
    group = np.ascontiguousarray(group, dtype=np.int64)
    pz = np.ascontiguousarray(pz, dtype=float)
    use = USE_NUMBA if use_numba is None else (use_numba and numba is not None)
    if use:
        return _oracle_nb(B, rows, qgrid, group, pz)
    return _oracle_np(B, rows, qgrid, group, pz)
