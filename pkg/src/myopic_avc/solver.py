"""Min-max-min capacity solver.

The capacity of the channel with a state-myopic encoder is

    min over P_Z in the image of the state simplex under obs
      max over P(U|Z) (U = Shannon strategies)
        min over Q_S with Q_S obs = P_Z  of  I(U;Y) - I(U;Z).

For fixed (P_Z, P(U|Z)) the inner problem is a convex minimization of
I(U;Y) over a polytope (P_U is fixed and P(Y|U) is affine in Q_S), solved
here by away-step Frank-Wolfe over the polytope's vertices.  The middle
problem is non-concave and is attacked by multi-start projected gradient
ascent; the outer problem by grid search over P_Z with one refinement level.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize_scalar, nnls

from . import kernels
from .errors import CapacityLimitError, InfeasibleMarginalError, InvalidArgumentError
from .prob import Channel, Dist, compositions, make_rng, mi_from_matrix
from .strategy import ObjectiveModel, StrategyTable, SystemSpec, canonical_strategies

log = logging.getLogger(__name__)

TAU_FEAS = 1e-8
LOG_FLOOR = -40.0  # log2 ratios are clipped here so zero cells keep finite gradients
ORACLE_MAX_POINTS = 10**7
DEFAULT_RESTARTS = 8


def _arr(x) -> np.ndarray:
    if isinstance(x, Dist):
        return x.mass
    if isinstance(x, Channel):
        return x.matrix
    return np.asarray(x, dtype=float)


def _clamp(v: float) -> float:
    return 0.0 if -1e-12 <= v < 0 else float(v)


# ---------------------------------------------------------------------------
# the constraint polytope {Q_S : Q_S obs = P_Z}
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MarginalPolytope:
    """Affine slice ``{q in simplex : q @ obs = p_z}`` of the state simplex."""

    obs: np.ndarray
    p_z: np.ndarray
    point: np.ndarray  # one feasible q
    basis: np.ndarray  # (ns, d) null-space basis of the equality constraints
    vertices: np.ndarray  # (k, ns)

    @classmethod
    def build(cls, obs, p_z) -> "MarginalPolytope":
        obs = _arr(obs)
        p_z = _arr(p_z)
        ns, nz = obs.shape
        if p_z.shape != (nz,):
            raise InvalidArgumentError(f"P_Z must have length {nz}")
        A = np.vstack([obs.T, np.ones((1, ns))])
        b = np.concatenate([p_z, [1.0]])
        q, resid = nnls(A, b)
        if resid > TAU_FEAS:
            raise InfeasibleMarginalError(
                f"P_Z = {np.round(p_z, 6).tolist()} is not an image of the state simplex (residual {resid:.2e})"
            )
        q = q / q.sum()
        basis = null_space(A)
        verts = _enumerate_vertices(A, b)
        if len(verts) == 0:  # numerically thin slice; fall back to the NNLS point
            verts = q[None, :]
        return cls(obs, p_z, q, basis, verts)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def contains(self, q, tol: float = TAU_FEAS) -> bool:
        q = _arr(q)
        return bool(np.all(q >= -tol) and abs(q.sum() - 1) <= tol
                    and np.max(np.abs(q @ self.obs - self.p_z)) <= tol)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """A random point of the polytope (Dirichlet mixture of vertices)."""
        w = rng.dirichlet(np.ones(len(self.vertices)))
        return w @ self.vertices


def _enumerate_vertices(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Basic feasible solutions of {q >= 0, A q = b}."""
    ns = A.shape[1]
    r = np.linalg.matrix_rank(A)
    found: list[np.ndarray] = []
    for size in range(1, r + 1):
        for supp in itertools.combinations(range(ns), size):
            cols = A[:, supp]
            if np.linalg.matrix_rank(cols) < size:
                continue
            sol, *_ = np.linalg.lstsq(cols, b, rcond=None)
            if np.max(np.abs(cols @ sol - b)) > 1e-10 or np.any(sol < -1e-12):
                continue
            q = np.zeros(ns)
            q[list(supp)] = np.clip(sol, 0, None)
            q /= q.sum()
            if not any(np.max(np.abs(q - v)) <= 1e-10 for v in found):
                found.append(q)
    return np.array(found).reshape(-1, ns)


# ---------------------------------------------------------------------------
# Z-marginal grid
# ---------------------------------------------------------------------------

def simplex_grid(dim: int, k: int) -> np.ndarray:
    return compositions(k, dim) / k


def _dedupe(points: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Unique rows (first occurrence order) and the group index of every row."""
    uniq: list[np.ndarray] = []
    group = np.empty(len(points), dtype=np.int64)
    keys: dict[tuple, int] = {}
    for i, p in enumerate(points):
        key = tuple(np.round(p / tol).astype(np.int64)) if tol > 0 else tuple(p)
        j = keys.get(key)
        if j is None:
            for jj, u in enumerate(uniq):
                if np.max(np.abs(u - p)) <= tol:
                    j = jj
                    break
        if j is None:
            j = len(uniq)
            uniq.append(p)
        keys[key] = j
        group[i] = j
    return np.array(uniq), group


def feasible_z_marginals(obs, grid_k: int) -> list[Dist]:
    """Images q @ obs of the state-simplex grid with denominator grid_k, deduplicated."""
    if grid_k < 1:
        raise InvalidArgumentError("grid_k must be >= 1")
    ch = obs if isinstance(obs, Channel) else None
    obs = _arr(obs)
    imgs, _ = _dedupe(simplex_grid(obs.shape[0], grid_k) @ obs)
    imgs = np.clip(imgs, 0, None)
    imgs /= imgs.sum(axis=1, keepdims=True)
    alpha = ch.output_alphabet if ch is not None else None
    if alpha is None:
        from .prob import Alphabet
        alpha = Alphabet.of_size(obs.shape[1])
    return [Dist(alpha, p) for p in imgs]


# ---------------------------------------------------------------------------
# inner minimization
# ---------------------------------------------------------------------------

@dataclass
class InnerResult:
    value: float
    q: np.ndarray
    gap: float
    iterations: int
    i_uy: float
    i_uz: float


def _mi_and_grad(puy: np.ndarray):
    pu = puy.sum(axis=1, keepdims=True)
    py = puy.sum(axis=0, keepdims=True)
    den = pu * py
    pos = puy > 0
    ratio = np.where(pos, puy, 1.0) / np.where(den > 0, den, 1.0)
    lr = np.log2(ratio)
    mi = float(np.sum(np.where(pos, puy * lr, 0.0)))
    grad = np.where(pos, lr, LOG_FLOOR)
    grad = np.maximum(grad, LOG_FLOOR)
    return max(mi, 0.0), grad


def _inner_solve(model: ObjectiveModel, poly: MarginalPolytope, P: np.ndarray,
                 tol: float = 1e-9, max_iter: int = 500, lam0: np.ndarray | None = None) -> InnerResult:
    V = poly.vertices
    k = len(V)
    C = model.c_tensor(P)  # (ns, nu, ny)
    D = np.einsum("vs,suy->vuy", V, C).reshape(k, -1)
    nu, ny = C.shape[1], C.shape[2]
    iuz = model.i_uz(poly.p_z, P)

    def f_of(lam):
        return _mi_and_grad((lam @ D).reshape(nu, ny))[0]

    if k == 1:
        iuy = f_of(np.ones(1))
        return InnerResult(iuy - iuz, V[0].copy(), 0.0, 0, iuy, iuz)
    if k == 2:
        # one-dimensional: solve directly on the segment
        res = minimize_scalar(lambda t: f_of(np.array([1 - t, t])), bounds=(0.0, 1.0),
                              method="bounded", options={"xatol": 1e-12})
        cands = [(f_of(np.array([1.0, 0.0])), 0.0), (f_of(np.array([0.0, 1.0])), 1.0),
                 (float(res.fun), float(res.x))]
        iuy, t = min(cands)
        lam = np.array([1 - t, t])
        _, g = _mi_and_grad((lam @ D).reshape(nu, ny))
        gv = D @ g.ravel()
        gap = max(0.0, float(gv @ lam - gv.min()))
        return InnerResult(iuy - iuz, lam @ V, gap, 1, iuy, iuz)

    lam = np.full(k, 1.0 / k) if lam0 is None else np.asarray(lam0, float).copy()
    fval, g = _mi_and_grad((lam @ D).reshape(nu, ny))
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        gv = D @ g.ravel()
        s = int(np.argmin(gv))
        active = np.flatnonzero(lam > 1e-15)
        a = active[int(np.argmax(gv[active]))]
        gap = float(gv @ lam - gv[s])
        if gap <= tol:
            break
        fw_gain = gap
        away_gain = float(gv[a] - gv @ lam)
        d = -lam.copy()
        if fw_gain >= away_gain or lam[a] >= 1 - 1e-15:
            d[s] += 1.0
            tmax = 1.0
        else:
            d = lam.copy()
            d[a] -= 1.0
            tmax = lam[a] / (1.0 - lam[a])
        res = minimize_scalar(lambda t: f_of(lam + t * d), bounds=(0.0, tmax),
                              method="bounded", options={"xatol": 1e-12})
        t = float(res.x) if res.fun < fval else 0.0
        if f_of(lam + tmax * d) < min(res.fun, fval):
            t = tmax
        if t <= 0:
            break
        lam = np.clip(lam + t * d, 0, None)
        lam /= lam.sum()
        fnew, g = _mi_and_grad((lam @ D).reshape(nu, ny))
        if fval - fnew < 1e-15:
            fval = min(fval, fnew)
            break
        fval = fnew
    gv = D @ g.ravel()
    gap = max(0.0, float(gv @ lam - gv.min()))
    return InnerResult(fval - iuz, lam @ V, gap, it, fval, iuz)


def inner_min(spec: SystemSpec, p_z, p_u_given_z, strat: StrategyTable | None = None,
              tol: float = 1e-9) -> tuple[float, Dist]:
    """Minimize I(U;Y) - I(U;Z) over state distributions consistent with p_z."""
    model = ObjectiveModel(spec, strat)
    poly = MarginalPolytope.build(spec.obs, p_z)
    P = _arr(p_u_given_z)
    if P.shape != (spec.z.size, model.nu):
        raise InvalidArgumentError(f"P(U|Z) must have shape {(spec.z.size, model.nu)}")
    r = _inner_solve(model, poly, P, tol=tol)
    return _clamp(r.value), Dist(spec.s, np.clip(r.q, 0, None) / np.clip(r.q, 0, None).sum())


# ---------------------------------------------------------------------------
# middle maximization
# ---------------------------------------------------------------------------

def project_rows(M: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row onto the probability simplex."""
    n = M.shape[1]
    srt = -np.sort(-M, axis=1)
    css = np.cumsum(srt, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = srt - css / ind > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(M.shape[0]), rho] / (rho + 1)
    return np.maximum(M - theta[:, None], 0.0)


def _middle_grad(model: ObjectiveModel, q: np.ndarray, P: np.ndarray, p_z: np.ndarray) -> np.ndarray:
    A = model.a_tensor(q)  # (nz, nu, ny)
    puy = np.einsum("zu,zuy->uy", P, A)
    _, lr = _mi_and_grad(puy)
    g_uy = np.einsum("zuy,uy->zu", A, lr)
    pu = p_z @ P
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where((P > 0) & (pu[None, :] > 0), P / np.where(pu > 0, pu, 1.0)[None, :], 0.0)
        lz = np.where(r > 0, np.log2(np.where(r > 0, r, 1.0)), LOG_FLOOR)
    lz = np.maximum(lz, LOG_FLOOR)
    return g_uy - p_z[:, None] * lz


def _starts(model: ObjectiveModel, p_z: np.ndarray, restarts: int, rng: np.random.Generator) -> list[np.ndarray]:
    nz, nu = p_z.size, model.nu
    table = model.strat.table
    const = np.all(table == table[:, :1], axis=1)
    starts = [np.full((nz, nu), 1.0 / nu)]
    row = const / const.sum()
    starts.append(np.tile(row, (nz, 1)))
    if (~const).any():
        row = (~const) / (~const).sum()
        starts.append(np.tile(row, (nz, 1)))
    # dependent start: row z leans on a strategy that varies with z
    dep = np.full((nz, nu), 0.5 / nu)
    for z in range(nz):
        dep[z, (z * max(1, nu // max(nz, 1)) + nu - 1) % nu] += 0.5
    starts.append(dep)
    while len(starts) < restarts:
        starts.append(rng.dirichlet(np.full(nu, 0.5), size=nz))
    return starts[:max(restarts, 1)]


@dataclass
class MiddleResult:
    value: float
    P: np.ndarray
    q: np.ndarray
    gap: float
    iterations: int
    i_uz: float
    restarts: list = field(default_factory=list)  # (value, P, q, i_uz) for every start


def _ascend(model, poly, P0, tol, max_iter):
    P = project_rows(np.asarray(P0, float))
    r = _inner_solve(model, poly, P, tol=tol * 1e-3)
    val = r.value
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad = _middle_grad(model, r.q, P, poly.p_z)
        t = step
        accepted = False
        while t > 1e-10:
            Pn = project_rows(P + t * grad)
            dP = Pn - P
            if np.max(np.abs(dP)) < 1e-13:
                break
            rn = _inner_solve(model, poly, Pn, tol=tol * 1e-3)
            if rn.value >= val + 1e-4 * float(np.sum(grad * dP)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        gain = rn.value - val
        P, r, val = Pn, rn, rn.value
        step = min(t * 2.0, 1e3)
        if gain < tol:
            break
    return val, P, r, it


def _middle(model: ObjectiveModel, poly: MarginalPolytope, tol: float, restarts: int,
            seed, extra_starts=()) -> MiddleResult:
    rng = make_rng(seed, "middle", *np.round(poly.p_z * 1e9).astype(np.int64).tolist())
    results = []
    total_it = 0
    for P0 in list(_starts(model, poly.p_z, restarts, rng)) + list(extra_starts):
        val, P, r, it = _ascend(model, poly, P0, tol, max_iter=200)
        total_it += it
        results.append((val, P, r.q, r.i_uz, r.gap))
    best = 0
    for i, res in enumerate(results):  # first incumbent kept on ties
        if res[0] > results[best][0] + 1e-12:
            best = i
    v, P, q, iuz, gap = results[best]
    return MiddleResult(_clamp(v), P, q, gap, total_it, iuz,
                        [(float(a), b, c, float(d)) for a, b, c, d, _ in results])


def middle_max(spec: SystemSpec, p_z, tol: float = 1e-6, restarts: int = DEFAULT_RESTARTS,
               seed=0, strat: StrategyTable | None = None) -> tuple[float, Channel]:
    """Maximize the inner minimum over P(U|Z); returns (value, P(U|Z))."""
    model = ObjectiveModel(spec, strat)
    poly = MarginalPolytope.build(spec.obs, p_z)
    res = _middle(model, poly, tol, restarts, seed)
    return res.value, Channel(spec.z, model.strat.u_alphabet, res.P)


def middle_max_detail(spec: SystemSpec, p_z, tol: float = 1e-6, restarts: int = DEFAULT_RESTARTS,
                      seed=0, model: ObjectiveModel | None = None) -> MiddleResult:
    model = model or ObjectiveModel(spec)
    poly = MarginalPolytope.build(spec.obs, p_z)
    return _middle(model, poly, tol, restarts, seed)


# ---------------------------------------------------------------------------
# outer minimization
# ---------------------------------------------------------------------------

@dataclass
class CapacityReport:
    value: float
    lower_bound: float
    upper_bound: float
    p_z: Dist
    p_u_given_z: Channel
    q_s: Dist
    grid_resolution: int
    iterations: int
    wall_time: float
    grid_points: int = 0
    restarts: int = DEFAULT_RESTARTS

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "p_z": self.p_z.mass.tolist(),
            "p_u_given_z": self.p_u_given_z.matrix.tolist(),
            "u_labels": list(self.p_u_given_z.output_alphabet.labels),
            "q_s": self.q_s.mass.tolist(),
            "grid_resolution": self.grid_resolution,
            "grid_points": self.grid_points,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
        }


def _check_size(spec: SystemSpec):
    nu = spec.x.size ** spec.z.size
    if spec.s.size * spec.z.size * nu * spec.x.size * spec.y.size > 10**7:
        raise CapacityLimitError("joint tensor exceeds the 10^7 cell limit")


CANONICAL_BUDGET = 5040


def canonical_relabeling(spec: SystemSpec):
    """Permutations (px, ps, py, pz) giving the lexicographically smallest (W, obs).

    Solving on this representative makes every relabeling of a system produce
    bit-identical numbers.  Returns ``None`` when the search space exceeds
    ``CANONICAL_BUDGET`` permutation tuples.
    """
    sizes = (spec.x.size, spec.s.size, spec.y.size, spec.z.size)
    total = 1
    for k in sizes:
        total *= math.factorial(k)
    if total > CANONICAL_BUDGET:
        return None
    best_key, best = None, None
    for px in itertools.permutations(range(sizes[0])):
        Wx = spec.W[list(px)]
        for ps in itertools.permutations(range(sizes[1])):
            Wxs = Wx[:, list(ps)]
            obs_s = spec.obs[list(ps)]
            for py in itertools.permutations(range(sizes[2])):
                w_key = tuple(Wxs[:, :, list(py)].ravel().tolist())
                if best_key is not None and w_key > best_key[0]:
                    continue
                for pz in itertools.permutations(range(sizes[3])):
                    key = (w_key, tuple(obs_s[:, list(pz)].ravel().tolist()))
                    if best_key is None or key < best_key:
                        best_key, best = key, (px, ps, py, pz)
    return tuple(np.array(p) for p in best)


def _map_back(spec: SystemSpec, perms, report: "CapacityReport", cstrat: StrategyTable) -> "CapacityReport":
    px, ps, _, pz = perms
    strat = canonical_strategies(spec.x, spec.z)
    index = {tuple(r): i for i, r in enumerate(strat.table.tolist())}
    Pc = report.p_u_given_z.matrix
    P = np.zeros_like(Pc)
    for uc in range(cstrat.size):
        f = [0] * spec.z.size
        for zc in range(spec.z.size):
            f[pz[zc]] = int(px[cstrat.table[uc, zc]])
        P[pz, index[tuple(f)]] += Pc[:, uc]
    q = np.zeros(spec.s.size)
    q[ps] = report.q_s.mass
    p_z = np.zeros(spec.z.size)
    p_z[pz] = report.p_z.mass
    report.q_s = Dist(spec.s, q)
    report.p_z = Dist(spec.z, p_z)
    report.p_u_given_z = Channel(spec.z, strat.u_alphabet, P)
    return report


def capacity(spec: SystemSpec, grid_k: int = 16, tol: float = 1e-6, restarts: int = DEFAULT_RESTARTS,
             seed=0, refine: bool = True, canonical: bool = True) -> CapacityReport:
    """Grid search over P_Z with one refinement level around the incumbent.

    With ``canonical`` the system is first brought to its canonical
    relabeling so that the result does not depend on symbol order.
    """
    t0 = time.perf_counter()
    if grid_k < 1:
        raise InvalidArgumentError("grid_k must be >= 1")
    _check_size(spec)
    if canonical:
        perms = canonical_relabeling(spec)
        if perms is not None and not all(np.array_equal(p, np.arange(p.size)) for p in perms):
            cspec = spec.permuted(*perms)
            rep = capacity(cspec, grid_k, tol, restarts, seed, refine, canonical=False)
            rep = _map_back(spec, perms, rep, canonical_strategies(cspec.x, cspec.z))
            rep.wall_time = time.perf_counter() - t0
            return rep
    model = ObjectiveModel(spec)
    obs = spec.obs
    evaluated: list[tuple[np.ndarray, MiddleResult]] = []

    def run(points):
        for pz in points:
            if any(np.max(np.abs(pz - e[0])) <= 1e-9 for e in evaluated):
                continue
            poly = MarginalPolytope.build(obs, pz)
            warm = [evaluated[-1][1].P] if evaluated else []
            res = _middle(model, poly, tol, restarts, seed, extra_starts=warm)
            evaluated.append((pz, res))

    coarse, _ = _dedupe(simplex_grid(spec.s.size, grid_k) @ obs)
    run(np.clip(coarse, 0, None))
    if refine and len(evaluated) > 1:
        inc = min(evaluated, key=lambda e: e[1].value)[0]
        fine, _ = _dedupe(simplex_grid(spec.s.size, 2 * grid_k) @ obs)
        near = [p for p in fine if np.max(np.abs(p - inc)) <= 1.0 / grid_k + 1e-12]
        run(np.clip(near, 0, None))

    best_i = 0
    for i, (_, res) in enumerate(evaluated):
        if res.value < evaluated[best_i][1].value - 1e-12:
            best_i = i
    pz, res = evaluated[best_i]
    upper = res.value
    # certify the incumbent triple with a tighter inner solve
    poly = MarginalPolytope.build(obs, pz)
    fine_inner = _inner_solve(model, poly, res.P, tol=tol * 1e-2, max_iter=5000)
    value = _clamp(min(fine_inner.value, upper))
    lower = _clamp(value - fine_inner.gap)
    q = np.clip(fine_inner.q, 0, None)
    iterations = sum(r.iterations for _, r in evaluated)
    pz_d = np.clip(pz, 0, None)
    return CapacityReport(
        value=value,
        lower_bound=min(lower, value),
        upper_bound=max(_clamp(upper), value),
        p_z=Dist(spec.z, pz_d / pz_d.sum()),
        p_u_given_z=Channel(spec.z, model.strat.u_alphabet, project_rows(res.P)),
        q_s=Dist(spec.s, q / q.sum()),
        grid_resolution=grid_k,
        iterations=iterations,
        wall_time=time.perf_counter() - t0,
        grid_points=len(evaluated),
        restarts=restarts,
    )


# ---------------------------------------------------------------------------
# special cases
# ---------------------------------------------------------------------------

def oblivious_spec(spec: SystemSpec) -> SystemSpec:
    """The same channel with an observation carrying no information about the state."""
    from .prob import Alphabet
    return SystemSpec(spec.x, spec.s, spec.y, Alphabet(("*",)), spec.W,
                      np.ones((spec.s.size, 1)), spec.name)


def capacity_oblivious(spec: SystemSpec, grid_k: int = 16, tol: float = 1e-6, seed=0) -> float:
    """max over P_X of min over Q_S of I(X;Y)."""
    ob = oblivious_spec(spec)
    model = ObjectiveModel(ob)  # strategies are the constant maps, i.e. U = X
    poly = MarginalPolytope.build(ob.obs, np.ones(1))
    px_grid = simplex_grid(spec.x.size, grid_k)
    vals = np.array([_inner_solve(model, poly, p[None, :], tol=1e-9).value for p in px_grid])
    order = np.argsort(-vals, kind="stable")[:3]
    res = _middle(model, poly, tol, DEFAULT_RESTARTS, seed, extra_starts=[px_grid[i][None, :] for i in order])
    return _clamp(max(res.value, float(vals.max())))


def capacity_omniscient(spec: SystemSpec, grid_k: int = 16, tol: float = 1e-6, seed=0) -> float:
    """Capacity when the encoder sees the state sequence exactly."""
    return capacity(spec.omniscient(), grid_k=grid_k, tol=tol, seed=seed).value


def oracle_grid_size(spec: SystemSpec, grid_k: int) -> int:
    from math import comb
    nu = spec.x.size ** spec.z.size
    rows = comb(grid_k + nu - 1, nu - 1)
    return rows ** spec.z.size + comb(grid_k + spec.s.size - 1, spec.s.size - 1)


def brute_force_oracle(spec: SystemSpec, grid_k: int = 16, use_numba: bool | None = None) -> float:
    """Exhaustive grid evaluation of all three levels; no local search."""
    if grid_k < 1:
        raise InvalidArgumentError("grid_k must be >= 1")
    size = oracle_grid_size(spec, grid_k)
    if size > ORACLE_MAX_POINTS:
        raise CapacityLimitError(f"oracle grid has {size} points (limit {ORACLE_MAX_POINTS})")
    model = ObjectiveModel(spec)
    qgrid = simplex_grid(spec.s.size, grid_k)
    pz, group = _dedupe(qgrid @ spec.obs)
    rows = simplex_grid(model.nu, grid_k)
    best = kernels.oracle_group_max(model.B, rows, qgrid, group, pz, use_numba=use_numba)
    return _clamp(float(best.min()))


def mutual_information_xy(spec: SystemSpec, p_x, q_s) -> float:
    """I(X;Y) for input p_x and i.i.d. state law q_s (state unknown to the encoder)."""
    p_x, q_s = _arr(p_x), _arr(q_s)
    pxy = np.einsum("x,s,xsy->xy", p_x, q_s, spec.W)
    return mi_from_matrix(pxy)
