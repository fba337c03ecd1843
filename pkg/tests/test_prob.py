import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from myopic_avc.errors import InvalidArgumentError, ValidationError
from myopic_avc.prob import (Alphabet, Channel, Dist, JointDist, compose, count_types,
                             entropy, enumerate_types, is_typical, joint_type_of, make_rng, marginal,
                             mutual_information, sample_channel, sample_iid, type_of)

B = Alphabet.of_size(2)


def h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def test_alphabet_rules():
    assert Alphabet(("a", "b")).size == 2
    with pytest.raises(ValidationError):
        Alphabet(("a", "a"))
    with pytest.raises(ValidationError):
        Alphabet(())


def test_dist_refuses_renormalization():
    with pytest.raises(ValidationError):
        Dist(B, [0.5, 0.4])
    with pytest.raises(ValidationError):
        Dist(B, [1.2, -0.2])
    d = Dist(B, [0.3, 0.7])
    with pytest.raises(ValueError):
        d.mass[0] = 1.0


@pytest.mark.parametrize("mass,expected", [([1.0, 0.0], 0.0), ([0.5, 0.5], 1.0), ([0.9, 0.1], 0.4690)])
def test_entropy_examples(mass, expected):
    assert entropy(Dist(B, mass)) == pytest.approx(expected, abs=1e-4)


def test_binary_entropy_closed_form():
    assert entropy(Dist(B, [0.9, 0.1])) == pytest.approx(h2(0.1), abs=1e-12)


def test_mutual_information_examples():
    assert mutual_information(JointDist((B, B), np.full((2, 2), 0.25))) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(JointDist((B, B), np.diag([0.5, 0.5]))) == pytest.approx(1.0)
    j = compose(Dist.uniform(B), Channel.bsc(0.1))
    assert mutual_information(j) == pytest.approx(0.5310, abs=1e-4)
    assert mutual_information(j) == pytest.approx(1 - h2(0.1), abs=1e-12)


def test_marginal_examples():
    p, q = np.array([0.2, 0.8]), np.array([0.6, 0.1, 0.3])
    j = JointDist((B, Alphabet.of_size(3)), np.outer(p, q))
    np.testing.assert_allclose(marginal(j, 0).mass, p)
    np.testing.assert_allclose(marginal(j, 1).mass, q)
    d = JointDist((B, B), np.diag([0.5, 0.5]))
    np.testing.assert_allclose(marginal(d, 1).mass, [0.5, 0.5])
    sz = compose(Dist(B, [0.3, 0.7]), Channel.identity(B))
    np.testing.assert_allclose(marginal(sz, 1).mass, [0.3, 0.7])
    with pytest.raises(InvalidArgumentError):
        marginal(d, 5)


def test_marginal_axis_order():
    rng = np.random.default_rng(0)
    m = rng.random((2, 3, 4))
    j = JointDist(tuple(Alphabet.of_size(k) for k in (2, 3, 4)), m / m.sum())
    np.testing.assert_allclose(marginal(j, (2, 0)).mass, j.mass.sum(axis=1).T)


def test_compose_examples():
    p = Dist(B, [0.3, 0.7])
    np.testing.assert_allclose(compose(p, Channel.identity(B)).mass, np.diag([0.3, 0.7]))
    np.testing.assert_allclose(compose(Dist.uniform(B), Channel.bsc(0.5)).mass, np.full((2, 2), 0.25))
    np.testing.assert_allclose(compose(p, Channel.bsc(0.1)).mass, [[0.27, 0.03], [0.07, 0.63]], atol=1e-15)
    with pytest.raises(InvalidArgumentError):
        compose(Dist.uniform(Alphabet.of_size(3)), Channel.bsc(0.1))


def test_types():
    t = type_of([0, 1, 1, 0])
    np.testing.assert_allclose(t.freqs, [0.5, 0.5])
    assert type_of([0, 0, 0]).n == 3
    np.testing.assert_allclose(type_of([0, 0, 0], B).freqs, [1.0, 0.0])
    jt = joint_type_of([0, 1], [1, 1])
    np.testing.assert_allclose(jt.freqs, [[0, 0.5], [0, 0.5]])
    with pytest.raises(InvalidArgumentError):
        type_of([])
    with pytest.raises(InvalidArgumentError):
        joint_type_of([0, 1], [0])


def test_is_typical_examples():
    t = type_of([0, 1], B)
    assert is_typical(t, Dist(B, [0.5, 0.5]), 0.0)
    assert not is_typical(t, Dist(B, [0.4, 0.6]), 0.05)
    assert is_typical(t, Dist(B, [0.45, 0.55]), 0.05)


def test_enumerate_types():
    assert sorted(t.key() for t in enumerate_types(B, 2)) == [(0, 2), (1, 1), (2, 0)]
    assert len(enumerate_types(B, 10)) == 11
    assert len(enumerate_types(Alphabet.of_size(3), 4)) == 15
    with pytest.raises(InvalidArgumentError):
        enumerate_types(B, 0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [1, 5, 17, 64])
def test_type_count_closed_form(k, n):
    ts = enumerate_types(Alphabet.of_size(k), n)
    assert len(ts) == math.comb(n + k - 1, k - 1) == count_types(k, n)
    assert all(t.counts.sum() == n for t in ts)


def test_sampling_examples():
    assert sample_channel(Channel.identity(B), [0, 1, 0], seed=7).tolist() == [0, 1, 0]
    a = Alphabet(("a", "b", "c"))
    assert sample_iid(Dist.point(a, 0), 5, seed=3).tolist() == [0] * 5
    assert np.array_equal(sample_iid(Dist(B, [0.3, 0.7]), 50, 9), sample_iid(Dist(B, [0.3, 0.7]), 50, 9))


def test_sampling_concentration_large_n():
    p = Dist(B, [0.3, 0.7])
    ok = sum(is_typical(type_of(sample_iid(p, 10**5, (1, r)), B), p, 0.01) for r in range(100))
    assert ok >= 99


def test_type_concentration_bound():
    # P(||T - P|| > delta) <= 2|A| exp(-2 n delta^2), checked with 3-sigma slack
    p = Dist(Alphabet.of_size(3), [0.2, 0.3, 0.5])
    n, delta, reps = 1000, 0.05, 1000
    fails = sum(not is_typical(type_of(sample_iid(p, n, (2, r)), p.alphabet), p, delta) for r in range(reps))
    bound = 2 * 3 * math.exp(-2 * n * delta**2)
    sigma = math.sqrt(bound * (1 - bound) / reps)
    assert fails / reps <= bound + 3 * sigma


def test_make_rng_keys():
    a = make_rng(1, "x", 3).random(4)
    assert np.array_equal(a, make_rng(1, "x", 3).random(4))
    assert not np.array_equal(a, make_rng(1, "y", 3).random(4))
    with pytest.raises(InvalidArgumentError):
        make_rng(-1)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

joints = st.integers(1, 4).flatmap(lambda a: st.integers(1, 4).flatmap(
    lambda b: st.lists(st.floats(0, 1), min_size=a * b, max_size=a * b).map(
        lambda v: (a, b, v))))


def _joint(abv):
    a, b, v = abv
    m = np.array(v).reshape(a, b) + 1e-3
    return JointDist((Alphabet.of_size(a), Alphabet.of_size(b)), m / m.sum())


@given(joints)
def test_mi_bounds(abv):
    j = _joint(abv)
    i = mutual_information(j)
    assert i >= 0
    assert i <= min(entropy(marginal(j, 0)), entropy(marginal(j, 1))) + 1e-9


@given(joints, st.randoms())
def test_mi_relabel_invariant(abv, rnd):
    j = _joint(abv)
    pa = list(range(j.mass.shape[0]))
    pb = list(range(j.mass.shape[1]))
    rnd.shuffle(pa)
    rnd.shuffle(pb)
    k = JointDist(j.axes, j.mass[pa][:, pb])
    assert abs(mutual_information(k) - mutual_information(j)) <= 1e-12
    assert abs(entropy(marginal(k, 0)) - entropy(marginal(j, 0))) <= 1e-12


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_compose_marginal_recovers_input(a, b, seed):
    r = np.random.default_rng(seed)
    p = Dist(Alphabet.of_size(a), r.dirichlet(np.ones(a)))
    ch = Channel(Alphabet.of_size(a), Alphabet.of_size(b), r.dirichlet(np.ones(b), size=a))
    assert np.max(np.abs(marginal(compose(p, ch), 0).mass - p.mass)) <= 1e-12


@given(st.lists(st.integers(0, 2), min_size=1, max_size=50))
def test_type_counts_exact(seq):
    t = type_of(seq, Alphabet.of_size(3))
    assert t.counts.sum() == len(seq)
    assert abs(t.freqs.sum() - 1) <= 1e-12
