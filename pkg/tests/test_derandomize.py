import math

import numpy as np
import pytest

from myopic_avc import systems
from myopic_avc.coding import (CodeParams, IIDAdversary, Simulator, decode, make_prefix, monte_carlo,
                               trials_csv)
from myopic_avc.derandomize import (build_concatenated, concatenate, decode_concat, default_prefix_rep,
                                    encode_concat, evaluate_concat, evaluate_multicode, sample_multicode)
from myopic_avc.errors import InvalidArgumentError
from myopic_avc.prob import make_rng, sample_rows

UNIFORM = IIDAdversary([0.5, 0.5])
XOR = systems.xor_spec()


@pytest.mark.parametrize("n,K", [(10, 100), (2, 4)])
def test_default_family_size(n, K):
    mc = sample_multicode(XOR, CodeParams(n, 0.25), seed=0)
    assert mc.K == K
    assert len(set(mc.codes)) == K


def test_family_shares_params_and_is_seeded():
    p = CodeParams(16, 0.25)
    a, b = sample_multicode(XOR, p, seed=1), sample_multicode(XOR, p, seed=1)
    assert a.codes == b.codes and a.params is p
    assert sample_multicode(XOR, p, seed=2).codes != a.codes


def test_multicode_guards():
    with pytest.raises(InvalidArgumentError):
        sample_multicode(XOR, CodeParams(1, 0.25), seed=0)
    with pytest.raises(InvalidArgumentError):
        sample_multicode(XOR, CodeParams(8, 0.25), seed=0, K=0)


def test_single_code_family_matches_fixed_seed_monte_carlo():
    p = CodeParams(32, 0.25)
    mc = sample_multicode(XOR, p, seed=3, K=1)
    ev = evaluate_multicode(mc, XOR, UNIFORM, 30, seed=5)
    fixed = CodeParams(32, 0.25, seed=mc.codes[0])
    sim = Simulator(XOR, fixed)
    from myopic_avc.coding import choose_messages
    ms = choose_messages(p.messages, 30, make_rng(5, 0, "messages"))
    direct = [sim.run(int(ms[t]), (5, 0), trial=t, adversary=UNIFORM) for t in range(30)]
    assert [r.m_hat for r in ev.results[0].records] == [r.m_hat for r in direct]
    assert {r.code_seed for r in ev.results[0].records} == {mc.codes[0]}


def test_noiseless_family_has_no_errors():
    spec = systems.noiseless_spec()
    for K in (1, 7):
        mc = sample_multicode(spec, CodeParams(32, 0.25, eps_rate=0.15), seed=0, K=K)
        assert evaluate_multicode(mc, spec, UNIFORM, 40, seed=1).error <= 0.05


def test_multicode_reports_max_over_adversaries():
    mc = sample_multicode(XOR, CodeParams(32, 0.25), seed=0, K=16)
    ev = evaluate_multicode(mc, XOR, [UNIFORM, IIDAdversary([0.9, 0.1])], 30, seed=0)
    assert len(ev.results) == 2
    assert ev.max_error >= max(r.p_error for r in ev.results)


# ---------------------------------------------------------------------------
# concatenation
# ---------------------------------------------------------------------------

def _concat(n=32, K=None, spec=XOR, seed=0):
    mc = sample_multicode(spec, CodeParams(n, min(0.25, 32 / n)), seed=seed, K=K)
    return build_concatenated(spec, mc, capacity_value=1.0)


def test_prefix_size_matches_family():
    cc = _concat(32)
    assert cc.prefix.size >= cc.K > cc.prefix.size // 2
    assert cc.prefix.bits == math.ceil(math.log2(32 * 32))
    assert cc.prefix.rep == default_prefix_rep(32) == 6
    assert cc.total_length == 32 + cc.prefix_length


def test_prefix_mismatch_is_rejected():
    mc = sample_multicode(XOR, CodeParams(16, 0.25), seed=0)
    with pytest.raises(InvalidArgumentError):
        concatenate(make_prefix(XOR, 4, 3), mc)
    with pytest.raises(InvalidArgumentError):
        concatenate(make_prefix(XOR, 2**12, 3), mc)


def test_refuses_without_capacity():
    spec = systems.xor_spec("constant")
    mc = sample_multicode(spec, CodeParams(16, 0.25), seed=0)
    with pytest.raises(InvalidArgumentError, match="positive capacity"):
        build_concatenated(spec, mc)


def test_refuses_without_usable_prefix():
    # capacity is positive on paper but no pair of strategies beats every state
    mc = sample_multicode(XOR, CodeParams(16, 0.25), seed=0)
    with pytest.raises(InvalidArgumentError, match="prefix"):
        build_concatenated(systems.xor_spec("constant"), mc, capacity_value=0.5)


def test_prefix_overhead_vanishes():
    ratios = []
    for n in (16, 64, 256, 1024):
        cc = _concat(n, K=n * n)
        ratios.append(cc.prefix_length / n)
        assert cc.total_length == n + cc.prefix_length
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_prefix_error_bound_is_respected():
    p = make_prefix(XOR, 64, 9)
    assert p.symbol_error == 0.0 and p.error_bound() == 0.0
    noisy = make_prefix(systems.dmc_spec(0.2), 8, 15)
    assert 0 < noisy.error_bound() < 1
    errs = 0
    rng = make_rng(0)
    for t in range(400):
        k = int(rng.integers(8))
        x = noisy.encode(k, np.zeros(noisy.length, int))
        y = sample_rows(noisy.spec.W.reshape(-1, 2), x * 2, rng)
        errs += noisy.decode(y) != k
    assert errs / 400 <= noisy.error_bound() + 0.05


def test_encoder_reads_no_shared_randomness():
    n = 32
    cc_a = _concat(n, seed=1)
    cc_b = _concat(n, seed=999)
    # family seeds differ, so any dependence on them would show in the prefix index or main word
    z = make_rng(7).integers(0, 2, size=cc_a.total_length)
    ta = encode_concat(cc_a, 3, z, private_seed=12345)
    tb = encode_concat(cc_b, 3, z, private_seed=12345)
    assert ta.k == tb.k
    assert np.array_equal(ta.x[:cc_a.prefix_length], tb.x[:cc_b.prefix_length])
    again = encode_concat(cc_a, 3, z, private_seed=12345)
    assert ta.x.tobytes() == again.x.tobytes()


def test_encoder_output_depends_on_private_seed():
    cc = _concat(32)
    z = np.zeros(cc.total_length, dtype=int)
    ks = {encode_concat(cc, 1, z, private_seed=s).k for s in range(20)}
    assert len(ks) > 1


def test_decode_concat_matches_component_decoder():
    cc = _concat(32)
    rng = make_rng(3)
    for t in range(10):
        z = rng.integers(0, 2, size=cc.total_length)
        tx = encode_concat(cc, 2, z, private_seed=t)
        y = tx.x ^ z  # identity observation, states equal to z
        d = decode_concat(cc, y, tx.t_z, sent_bin=tx.main_bin or 1, sent_word=tx.main_word, k_true=tx.k)
        assert d.k_hat == tx.k
        cb = cc.codebook(tx.k, tx.t_z)
        direct = decode(y[cc.prefix_length:], tx.t_z, cb, cc.main.params, sent_bin=tx.main_bin or 1)
        assert d.m_hat == direct.m_hat


def test_noiseless_concat_recovers_index():
    spec = systems.noiseless_spec()
    mc = sample_multicode(spec, CodeParams(32, 0.25, eps_rate=0.15), seed=0, K=16)
    cc = build_concatenated(spec, mc, capacity_value=1.0)
    ev = evaluate_concat(cc, spec, UNIFORM, 40, seed=0)
    assert ev.prefix_error == 0.0
    assert ev.result.p_error <= 0.05


def test_single_code_concat():
    mc = sample_multicode(XOR, CodeParams(32, 0.25), seed=0, K=1)
    cc = build_concatenated(XOR, mc, capacity_value=1.0)
    assert cc.prefix.bits == 0 and cc.prefix_length == 0
    ev = evaluate_concat(cc, XOR, UNIFORM, 40, seed=2)
    assert ev.prefix_error == 0.0
    single = monte_carlo(XOR, CodeParams(32, 0.25, seed=mc.codes[0]), UNIFORM, 40, seed=2)
    assert abs(ev.result.p_error - single.p_error) <= 0.15


def test_concat_csv_extra_columns():
    cc = _concat(16, K=4)
    ev = evaluate_concat(cc, XOR, UNIFORM, 3, seed=0)
    text = trials_csv(ev.result.records, cc.main.params, "iid", ("K", "prefix_len", "k", "k_hat"))
    header, row = text.splitlines()[:2]
    assert header.endswith("K,prefix_len,k,k_hat")
    assert row.split(",")[-4] == "4"
