import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commdensity.coding import gamma_length
from commdensity.prob_core import make_family
from commdensity.protocol import (
    CodewordOverflowError,
    SessionState,
    SharedRandomness,
    apply_codeword,
    mix64,
    replay_transcript,
    run_session,
    sample_codeword_index,
    select_codeword,
    simulate_session,
)
from commdensity.schedules import Schedule, one_way_schedule, tetration_schedule


def test_mix64_reference_values():
    # SplitMix64 outputs for state increments of the golden gamma from 0
    assert mix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF
    assert mix64(2 * 0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_prf_is_stable():
    r = SharedRandomness(123, (2.0,))
    a = r.bits_block(1, 1, 50, np.arange(40))
    b = SharedRandomness(123, (2.0,)).bits_block(1, 1, 50, np.arange(40))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(r.bits(1, 7, [3, 9]), a[6, [3, 9]])
    assert not np.array_equal(a, SharedRandomness(124, (2.0,)).bits_block(1, 1, 50, np.arange(40)))


def test_prf_bit_rate():
    r = SharedRandomness(9, (4.0,))
    bits = r.bits_block(1, 1, 2000, np.arange(100))
    p = 0.75
    assert abs(bits.mean() - p) <= 4 * math.sqrt(p * (1 - p) / bits.size)


def test_empty_zero_set_sends_one():
    r = SharedRandomness(1, (5.0,))
    assert select_codeword(r, 1, []) == 1


def test_selected_codeword_is_zero_on_set():
    r = SharedRandomness(11, (2.0,))
    zs = np.array([0, 4, 9])
    j = select_codeword(r, 1, zs)
    assert not r.bits(1, j, zs).any()
    for jj in range(1, j):
        assert r.bits(1, jj, zs).any()


def test_codeword_overflow():
    r = SharedRandomness(3, (1e6,))
    with pytest.raises(CodewordOverflowError):
        select_codeword(r, 1, np.arange(5), max_index=100)


def test_codeword_mean_literal_search():
    # geometric with mean alpha^s = 8 over many seeds
    js = np.array([select_codeword(SharedRandomness(s, (2.0,)), 1, [0, 1, 2]) for s in range(20000)])
    assert abs(js.mean() - 8) <= 3 * js.std(ddof=1) / math.sqrt(js.size)


def test_codeword_mean_sampled():
    rng = np.random.default_rng(0)
    js = np.array([sample_codeword_index(3, 2.0, rng) for _ in range(100_000)])
    assert abs(js.mean() - 8) <= 3 * js.std(ddof=1) / math.sqrt(js.size)
    # geometric pmf at 1 and 2
    assert abs((js == 1).mean() - 1 / 8) < 0.005
    assert abs((js == 2).mean() - 7 / 64) < 0.005


def test_huge_codeword_index_length():
    rng = np.random.default_rng(1)
    lens = np.array([gamma_length(sample_codeword_index(200, 2.0, rng)) for _ in range(4000)])
    # continuum limit: j ~ 2^200 * Exp(1)
    e = np.random.default_rng(2).standard_exponential(400_000)
    ref = 2 * np.floor(200 + np.log2(e)) + 1
    assert abs(lens.mean() - ref.mean()) <= 4 * lens.std() / np.sqrt(lens.size)


def test_near_one_alpha():
    rng = np.random.default_rng(2)
    js = [sample_codeword_index(5, 1 + 1e-9, rng) for _ in range(1000)]
    assert np.mean(js) < 1.01


def test_absorbed_state_emits_ones():
    r = SharedRandomness(5, (2.0, 2.0))
    st0 = SessionState("A", np.zeros(4, np.uint8), [np.ones(4, np.uint8)])
    np.testing.assert_array_equal(apply_codeword(st0, 2, 3, r).u_vectors[-1], 1)


def test_small_session_agrees():
    x = np.array([0, 1, 1, 0, 1, 1, 1, 0], np.uint8)
    y = np.array([0, 0, 1, 1, 1, 0, 1, 1], np.uint8)
    r = SharedRandomness(42, (2.0, 2.0))
    a, b, tr = run_session(x, y, Schedule((2.0, 2.0)), r)
    np.testing.assert_array_equal(a.u_matrix(), b.u_matrix())
    np.testing.assert_array_equal(replay_transcript(tr.to_bytes(), r), a.u_matrix())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 64 - 1), st.integers(1, 60), st.floats(0, 1), st.booleans())
def test_session_invariants(seed, n, delta, interactive):
    sched = tetration_schedule(20) if interactive else one_way_schedule(20)
    rng = np.random.default_rng(seed % 2 ** 32)
    x, y = make_family(20, 20, delta).sample(n, rng)
    r = SharedRandomness(seed, sched.alphas)
    a, b, tr = run_session(x, y, sched, r)
    u = a.u_matrix()
    np.testing.assert_array_equal(u, b.u_matrix())
    np.testing.assert_array_equal(replay_transcript(tr.to_bytes(), r), u)
    assert np.all(np.diff(u.astype(int), axis=0) >= 0)
    assert tr.bit_count == sum(2 * int(math.log2(j)) + 1 for j in tr.round_indices)
    # zero-valued refiner bits on the live set always emit 0
    live = np.ones(n, bool)
    for i in range(sched.r):
        ref = x if i % 2 == 0 else y
        assert np.all(u[i][live & (ref == 0)] == 0)
        live = u[i] == 0


def test_exact_and_sampled_engines_agree_in_law():
    sched = tetration_schedule(20)
    fam = make_family(20, 20, 1.0)
    rng = np.random.default_rng(4)
    bits_exact, bits_sim, z_exact, z_sim = [], [], [], []
    for s in range(300):
        x, y = fam.sample(60, rng)
        a, _, tr = run_session(x, y, sched, SharedRandomness(s, sched.alphas))
        sim = simulate_session(x, y, sched, rng)
        bits_exact.append(tr.bit_count)
        bits_sim.append(sim.bit_count)
        z_exact.append((a.u_matrix()[-1] == 0).sum())
        z_sim.append((sim.u[-1] == 0).sum())
    for e, s_ in ((bits_exact, bits_sim), (z_exact, z_sim)):
        e, s_ = np.array(e, float), np.array(s_, float)
        se = math.sqrt(e.var(ddof=1) / e.size + s_.var(ddof=1) / s_.size)
        assert abs(e.mean() - s_.mean()) <= 4 * se


def test_empirical_channel():
    sched = tetration_schedule(100)
    fam = make_family(100, 100, 0.5)
    rng = np.random.default_rng(8)
    hits = np.zeros(sched.r)
    tot = np.zeros(sched.r)
    for _ in range(40):
        x, y = fam.sample(20000, rng)
        u = simulate_session(x, y, sched, rng).u
        live = np.ones(x.size, bool)
        for i in range(sched.r):
            ref = x if i % 2 == 0 else y
            sel = live & (ref == 1)
            hits[i] += u[i][sel].sum()
            tot[i] += sel.sum()
            live = u[i] == 0
    p = 1 - 1 / np.array(sched.alphas)
    assert np.all(np.abs(hits / tot - p) <= 4 * np.sqrt(p * (1 - p) / tot))


def test_one_way_bits_bound():
    sched = one_way_schedule(20)
    fam = make_family(20, 20, 0.5)
    rng = np.random.default_rng(6)
    bits = [simulate_session(*fam.sample(20000, rng), sched, rng).bit_count for _ in range(100)]
    assert np.mean(bits) <= 3301
