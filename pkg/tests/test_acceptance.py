"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines as
they are produced; they are also collected in the terminal summary.
"""

import json
import time

import numpy as np

from myopic_avc import systems
from myopic_avc.cli import ChannelSpecFile, parse_channel_text
from myopic_avc.coding import CodeParams, IIDAdversary, MemorylessAdversary, monte_carlo
from myopic_avc.derandomize import (MultiCode, build_concatenated, concatenate, encode_concat, evaluate_concat,
                                    evaluate_multicode, sample_multicode)
from myopic_avc.prob import entropy_bits, make_rng
from myopic_avc.solver import (MarginalPolytope, brute_force_oracle, capacity, capacity_oblivious,
                               capacity_omniscient)
from myopic_avc.strategy import ObjectiveModel

UNIFORM = IIDAdversary([0.5, 0.5])
XOR_ID = systems.xor_spec("identity")
XOR_CONST = systems.xor_spec("constant")

# every Monte Carlo result produced by this module, for the bookkeeping criterion
MC_RUNS = []
# shared between the de-randomization criteria
STATE = {}


def h2(p):
    return entropy_bits(np.array([p, 1 - p]))


def timed(fn, *a, **kw):
    t = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t


def mc(spec, n, rate, trials, seed, adversary=UNIFORM, **kw):
    res = monte_carlo(spec, CodeParams(n, rate, **kw), adversary, trials, seed=seed)
    MC_RUNS.append((f"{spec.name} n={n} R={rate} {adversary.describe()}", res))
    return res


def test_criterion_01_xor_omniscient_endpoint(acceptance):
    rep, t = timed(capacity, XOR_ID)
    oracle = brute_force_oracle(XOR_ID, 16)
    ok = abs(rep.value - 1.0) <= 0.02 and abs(oracle - 1.0) <= 0.02 and t <= 60
    assert acceptance(1, "XOR, identity observation", ok,
                      f"capacity={rep.value:.6f} oracle={oracle:.6f} time={t:.1f}s")


def test_criterion_02_xor_oblivious_endpoint(acceptance):
    rep, t = timed(capacity, XOR_CONST)
    ok = -1e-9 <= rep.value <= 0.02 and t <= 60
    assert acceptance(2, "XOR, constant observation", ok, f"capacity={rep.value:.6f} time={t:.1f}s")


def test_criterion_03_myopic_interpolation(acceptance):
    qs = (0.0, 0.1, 0.25, 0.5)
    vals = [capacity(systems.xor_spec(q)).value for q in qs]
    mono = all(b <= a + 0.02 for a, b in zip(vals, vals[1:]))
    ends = abs(vals[0] - 1.0) <= 0.02 and vals[-1] <= 0.02
    detail = " ".join(f"q={q}:{v:.4f}" for q, v in zip(qs, vals))
    assert acceptance(3, "BSC(q) observation sweep", mono and ends, detail)


def test_criterion_04_dmc_sanity(acceptance):
    errs = {}
    for p in (0.0, 0.05, 0.1, 0.2):
        errs[p] = abs(capacity(systems.dmc_spec(p)).value - (1 - h2(p)))
    ok = max(errs.values()) <= 0.01
    detail = " ".join(f"p={p}:|err|={e:.2e}" for p, e in errs.items())
    assert acceptance(4, "state-independent BSC(p)", ok, detail)


def test_criterion_05_cross_solver_agreement(acceptance):
    worst_omni = worst_obl = 0.0
    for seed in range(10):
        base = systems.random_spec(500 + seed)
        ident = base.with_obs(np.eye(2))
        const = base.with_obs(np.ones((2, 1)))
        worst_omni = max(worst_omni, abs(capacity(ident).value - capacity_omniscient(base)))
        worst_obl = max(worst_obl, abs(capacity(const).value - capacity_oblivious(base)))
    ok = worst_omni <= 0.02 and worst_obl <= 0.02
    assert acceptance(5, "identity/omniscient and constant/oblivious", ok,
                      f"worst gaps {worst_omni:.2e} / {worst_obl:.2e} over 10 specs")


def test_criterion_06_oracle_equivalence(acceptance):
    t0 = time.perf_counter()
    gaps = []
    for seed in range(20):
        sp = systems.random_spec(seed)
        gaps.append(abs(capacity(sp, grid_k=16).value - brute_force_oracle(sp, 16)))
    t = time.perf_counter() - t0
    ok = max(gaps) <= 0.02 and t <= 20 * 60
    assert acceptance(6, "solver vs exhaustive oracle", ok,
                      f"max gap {max(gaps):.4f} mean {np.mean(gaps):.4f} over 20 specs, {t:.0f}s")


def test_criterion_07_inner_convexity(acceptance):
    worst = -np.inf
    r = np.random.default_rng(7)
    for i in range(100):
        ns, nz = (2, 2) if i % 2 else (3, 2)
        sp = systems.random_spec(1000 + i, ns=ns, nz=nz)
        model = ObjectiveModel(sp)
        pz = r.dirichlet(np.ones(ns)) @ sp.obs
        poly = MarginalPolytope.build(sp.obs, pz)
        P = r.dirichlet(np.ones(model.nu), size=nz)
        a, b = poly.sample(r), poly.sample(r)
        viol = model.value((a + b) / 2, P) - (model.value(a, P) + model.value(b, P)) / 2
        worst = max(worst, viol)
    assert acceptance(7, "midpoint convexity on 100 segments", worst <= 1e-9, f"max violation {worst:.2e}")


def test_criterion_08_achievability_waterfall(acceptance):
    errs = {n: mc(XOR_ID, n, 0.25, 500, seed=80 + n).p_error for n in (32, 64, 128)}
    e = list(errs.values())
    ok = e[0] >= e[1] >= e[2] and e[2] <= 0.1
    STATE["randomized_64"] = errs[64]
    assert acceptance(8, "waterfall at R=0.25", ok, " ".join(f"n={n}:{v:.3f}" for n, v in errs.items()))


def test_criterion_09_converse_side(acceptance):
    err = mc(XOR_CONST, 64, 0.5, 500, seed=9).p_error
    assert acceptance(9, "rate above capacity fails", err >= 0.5, f"error={err:.3f}")


def test_criterion_11_derandomization(acceptance):
    n = 64
    if "randomized_64" not in STATE:
        STATE["randomized_64"] = mc(XOR_ID, n, 0.25, 500, seed=80 + n).p_error
    fam = sample_multicode(XOR_ID, CodeParams(n, 0.25), seed=11)
    ev = evaluate_multicode(fam, XOR_ID, UNIFORM, 500, seed=111)
    MC_RUNS.append(("multicode K=4096", ev.results[0]))
    STATE["family"], STATE["multicode"] = fam, ev.error
    rnd = STATE["randomized_64"]
    ok = fam.K == n * n and ev.error <= 2 * rnd + 0.05
    assert acceptance(11, "K=n^2 code family", ok,
                      f"K={fam.K} family error={ev.error:.3f} randomized={rnd:.3f}")


def test_criterion_12_concatenation(acceptance):
    fam = STATE.get("family") or sample_multicode(XOR_ID, CodeParams(64, 0.25), seed=11)
    if "multicode" not in STATE:
        STATE["multicode"] = evaluate_multicode(fam, XOR_ID, UNIFORM, 500, seed=111).error
    cc = build_concatenated(XOR_ID, fam)
    ce = evaluate_concat(cc, XOR_ID, UNIFORM, 500, seed=121)
    MC_RUNS.append(("concatenated", ce.result))
    bound_ok = ce.result.p_error <= STATE["multicode"] + ce.prefix_error + 0.05

    # the encoder must not touch the shared seed: vary it (and global RNG state) and compare bytes
    z = make_rng(12, "z").integers(0, 2, size=cc.total_length)
    outs = []
    for shared, global_seed in ((1, 1), (2, 2), (2**40, 2**32 - 1)):
        params = CodeParams(64, 0.25, seed=shared)
        other = concatenate(cc.prefix, MultiCode(XOR_ID, params, fam.codes))
        np.random.seed(global_seed)
        outs.append(encode_concat(other, 5, z, private_seed=777).x.tobytes())
    bitwise = len(set(outs)) == 1 and outs[0] == encode_concat(cc, 5, z, private_seed=777).x.tobytes()
    private_used = len({encode_concat(cc, 5, z, private_seed=s).k for s in range(16)}) > 1
    ok = bound_ok and bitwise and private_used
    assert acceptance(12, "concatenated stochastic encoder", ok,
                      f"concat={ce.result.p_error:.3f} multicode={STATE['multicode']:.3f} "
                      f"prefix={ce.prefix_error:.3f} (L={ce.prefix_length}) bitwise={bitwise}")


def test_criterion_10_error_event_bookkeeping(acceptance):
    # extra runs across channels, adversaries and rates, plus everything recorded above
    mc(systems.xor_spec(0.1), 64, 0.2, 200, seed=101)
    mc(systems.xor_spec(0.25), 32, 0.3, 200, seed=102, adversary=IIDAdversary([0.8, 0.2]))
    mc(systems.random_spec(7), 32, 0.1, 200, seed=103, adversary=MemorylessAdversary([[1, 0], [0, 1]]))
    mc(systems.dmc_spec(0.05), 64, 0.25, 200, seed=104)
    mc(XOR_CONST, 32, 0.25, 200, seed=105)
    bad = [name for name, r in MC_RUNS if not r.union_bound_holds(3.0)]
    assert acceptance(10, "union bound on every Monte Carlo run", not bad,
                      f"{len(MC_RUNS) - len(bad)}/{len(MC_RUNS)} runs consistent" + (f"; failing: {bad}" if bad else ""))


def test_criterion_13_equivariance_and_round_trip(acceptance):
    r = np.random.default_rng(13)
    worst = 0.0
    cases = [XOR_ID, systems.xor_spec(0.2)] + [systems.random_spec(1300 + i) for i in range(4)] + \
            [systems.random_spec(1400, nx=3, ns=2, ny=2, nz=2), systems.random_spec(1401, nx=2, ns=3, ny=3, nz=2)]
    for sp in cases:
        base = capacity(sp, grid_k=8).value
        perms = [r.permutation(a.size) for a in (sp.x, sp.s, sp.y, sp.z)]
        worst = max(worst, abs(capacity(sp.permuted(*perms), grid_k=8).value - base))
    exact = True
    for sp in cases:
        f = ChannelSpecFile.from_system(sp)
        g = parse_channel_text(f.to_json())
        exact &= g.W == f.W and g.obs == f.obs and g.to_json() == f.to_json()
        back = g.to_system()
        exact &= bool(np.array_equal(back.W, sp.W) and np.array_equal(back.obs, sp.obs))
    doc = json.loads(f.to_json())
    doc["W"]["0"]["0"] = {"0": "0.3333333333333333333333333", "1": "0.6666666666666666666666667"}
    text = json.dumps(doc)
    exact &= parse_channel_text(parse_channel_text(text).to_json()).W == parse_channel_text(text).W
    ok = worst <= 1e-9 and exact
    assert acceptance(13, "relabeling invariance and file round trip", ok,
                      f"max capacity change {worst:.1e}, round trip exact={exact}")
