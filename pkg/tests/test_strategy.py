import numpy as np
import pytest
from hypothesis import given, strategies as st

from myopic_avc import systems
from myopic_avc.errors import CapacityLimitError, InvalidArgumentError, ValidationError
from myopic_avc.prob import Alphabet, Channel, Dist, compose, marginal, mutual_information
from myopic_avc.solver import MarginalPolytope
from myopic_avc.strategy import (ObjectiveModel, StrategyTable, SystemSpec, assemble_joint, canonical_strategies,
                                 objective)

B = Alphabet.of_size(2)


def test_canonical_strategy_enumeration():
    t = canonical_strategies(B, Alphabet.of_size(1))
    assert t.size == 2 and t.table.tolist() == [[0], [1]]
    t = canonical_strategies(B, B)
    assert t.table.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert t.u_alphabet.labels == ("00", "01", "10", "11")
    assert canonical_strategies(Alphabet.of_size(3), B).size == 9


def test_strategy_guard():
    with pytest.raises(CapacityLimitError):
        canonical_strategies(Alphabet.of_size(5), Alphabet.of_size(6))


def test_strategy_apply():
    t = canonical_strategies(B, B)
    # u = 2 is the map z -> 1 - z
    assert t.apply([2, 2], [1, 0]).tolist() == [0, 1]
    assert t.apply([1, 1], [1, 0]).tolist() == [1, 0]


def test_spec_validation_names_row():
    W = systems.xor_spec().W.copy()
    W[1, 0] = [0.5, 0.4]
    with pytest.raises(ValidationError, match=r"x=1, s=0"):
        SystemSpec(B, B, B, B, W, np.eye(2))


def xor_flip_index():
    # strategy x = u xor z realized as P(U|Z) over canonical strategies
    return 1, 2  # u=0 -> "01" (x=z), u=1 -> "10" (x=1-z)


def test_assemble_joint_single_cell():
    sp = systems.noiseless_spec()
    strat = canonical_strategies(B, B)
    P = np.zeros((2, 4))
    P[:, 1] = 1
    j = assemble_joint(sp, Dist.point(B, 0), Channel(B, strat.u_alphabet, P), strat)
    assert np.count_nonzero(j.mass) == 1
    assert j.mass.sum() == pytest.approx(1.0)


def test_xor_joint_uy_diagonal():
    sp = systems.xor_spec()
    strat = canonical_strategies(B, B)
    P = np.zeros((2, 4))
    P[:, [1, 2]] = 0.5  # U independent of Z, uniform over {x=z, x=1-z}
    j = assemble_joint(sp, Dist.uniform(B), P, strat)
    uy = marginal(j, (2, 4)).mass
    assert uy[1, 0] == pytest.approx(0.5) and uy[2, 1] == pytest.approx(0.5)
    assert mutual_information(uy) == pytest.approx(1.0)


def test_xor_uz_identity():
    sp = systems.xor_spec()
    strat = canonical_strategies(B, B)
    P = np.zeros((2, 4))
    P[0, 0] = P[1, 3] = 1.0  # U determined by Z
    j = assemble_joint(sp, Dist.uniform(B), P, strat)
    assert mutual_information(marginal(j, (2, 1)).mass) == pytest.approx(1.0)


@pytest.mark.parametrize("q0", np.linspace(0, 1, 11))
def test_objective_examples(q0):
    strat = canonical_strategies(B, B)
    q = np.array([q0, 1 - q0])
    P = np.zeros((2, 4))
    P[:, [1, 2]] = 0.5
    assert objective(systems.xor_spec(), q, P, strat) == pytest.approx(1.0, abs=1e-12)
    # a strategy table sending every u to the same input makes U useless
    flat = StrategyTable(strat.u_alphabet, B, B, np.zeros((4, 2), dtype=int))
    Pu = np.full((2, 4), 0.25)
    assert abs(objective(systems.xor_spec(), q, Pu, flat)) <= 1e-12
    Pr = np.random.default_rng(int(q0 * 10)).dirichlet(np.ones(4), size=2)
    assert objective(systems.constant_output_spec(), q, Pr, strat) <= 1e-12


def test_constant_output_objective_nonpositive():
    # I(U;Y) = 0 for a constant output, so the objective is -I(U;Z) <= 0 and 0 for independent U
    strat = canonical_strategies(B, B)
    sp = systems.constant_output_spec()
    assert objective(sp, [0.3, 0.7], np.full((2, 4), 0.25), strat) == pytest.approx(0.0, abs=1e-12)


def test_objective_mismatch():
    strat = canonical_strategies(B, B)
    with pytest.raises(InvalidArgumentError):
        objective(systems.xor_spec(), [0.5, 0.5], np.full((2, 3), 1 / 3), strat)


def _random_case(seed):
    r = np.random.default_rng(seed)
    ns, nz, nx, ny = (int(v) for v in r.integers(1, 4, size=4))
    sp = systems.random_spec(seed, nx=nx, ns=ns, ny=ny, nz=nz)
    strat = canonical_strategies(sp.x, sp.z)
    q = r.dirichlet(np.ones(ns))
    P = r.dirichlet(np.ones(strat.size), size=nz)
    return sp, strat, q, P


@given(st.integers(0, 10**6))
def test_joint_structure(seed):
    sp, strat, q, P = _random_case(seed)
    j = assemble_joint(sp, q, P, strat).mass
    assert abs(j.sum() - 1) <= 1e-12
    # support constraint x = x(u, z)
    for u in range(strat.size):
        for z in range(sp.z.size):
            off = [x for x in range(sp.x.size) if x != strat.table[u, z]]
            assert np.all(j[:, z, u, off, :] == 0)
    # (S, Z) marginal
    sz = j.sum(axis=(2, 3, 4))
    assert np.max(np.abs(sz - compose(Dist(sp.s, q), sp.obs_channel).mass)) <= 1e-12
    # Markov chain (U, Z) -> (X, S) -> Y
    for s in range(sp.s.size):
        for z in range(sp.z.size):
            for u in range(strat.size):
                x = strat.table[u, z]
                tot = j[s, z, u, x].sum()
                if tot > 1e-12:
                    assert np.max(np.abs(j[s, z, u, x] / tot - sp.W[x, s])) <= 1e-12


@given(st.integers(0, 10**6), st.randoms())
def test_objective_relabel_invariant(seed, rnd):
    sp, strat, q, P = _random_case(seed)
    v = objective(sp, q, P, strat)
    ps, py, pz = (rnd.sample(range(a.size), a.size) for a in (sp.s, sp.y, sp.z))
    px = rnd.sample(range(sp.x.size), sp.x.size)
    sp2 = sp.permuted(px=px, ps=ps, py=py, pz=pz)
    strat2 = canonical_strategies(sp2.x, sp2.z)
    # carry P(U|Z) over: old strategy f becomes new strategy g(z') = px^{-1}[f(pz[z'])]
    inv_x = np.argsort(px)
    index = {tuple(r): i for i, r in enumerate(strat2.table.tolist())}
    P2 = np.zeros_like(P)
    for u in range(strat.size):
        g = tuple(int(inv_x[strat.table[u, pz[zn]]]) for zn in range(sp.z.size))
        P2[:, index[g]] = P[pz, u]
    assert abs(objective(sp2, q[ps], P2, strat2) - v) <= 1e-9


@given(st.integers(0, 10**6))
def test_i_uz_constant_on_polytope(seed):
    r = np.random.default_rng(seed)
    sp = systems.random_spec(seed, ns=3, nz=2)
    model = ObjectiveModel(sp)
    q0 = r.dirichlet(np.ones(3))
    poly = MarginalPolytope.build(sp.obs, q0 @ sp.obs)
    P = r.dirichlet(np.ones(model.nu), size=2)
    vals = [model.i_uz(poly.sample(r) @ sp.obs, P) for _ in range(5)]
    assert np.ptp(vals) <= 1e-12
