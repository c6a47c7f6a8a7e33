from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from hxlab.calibration import load_calibration
from hxlab.errors import DomainError
from hxlab.exponents import conj
from hxlab.grid import Cube, GridShift
from hxlab.lab import random_a1_family, two_step_weight
from hxlab.lattice import LatticeFunction, Weight, lp_norm
from hxlab.maximal import (MaximalConfig, ball_max, dyadic_max, fs_check, fs_strong_check,
                           fs_strong_constant, kolmogorov_check, kolmogorov_ratio, maxfinsec_bound,
                           maximal, maxwduo_check, prop22_iii_check, prop22_iii_ratio)

CAL = load_calibration()
seeds = st.integers(0, 2 ** 32 - 1)


def rand_fn(seed, level=5, power=3.0):
    rng = np.random.default_rng(seed)
    return LatticeFunction.from_array(rng.random(2 ** level) ** power, level)


def rand_weight(seed, level=5):
    rng = np.random.default_rng(seed)
    return Weight(1, level, 1, (0,), np.exp(rng.normal(0, 1, 2 ** level)))


def test_constant_and_quarter():
    c = LatticeFunction.from_array(np.full(16, 0.7), 4)
    assert np.allclose(dyadic_max(c).values, 0.7)
    f = LatticeFunction.indicator([(0, F(1, 4))], 1, 4)
    want = [1.0] * 4 + [0.5] * 4 + [0.25] * 8
    assert dyadic_max(f).values.tolist() == want
    assert np.allclose(dyadic_max(f).values, oracles.dyadic_max(f.block(((0, 16),)).tolist(), 4))


@given(seeds, st.sampled_from([1.0, 1.5, 3.0]))
def test_oracle_agreement(seed, q):
    f = rand_fn(seed, 5)
    vals = (f.values ** q).tolist()
    want = oracles.dyadic_max(vals, 5) ** (1 / q)
    assert np.allclose(dyadic_max(f, q).values, want, rtol=1e-9, atol=0)
    if q == 1:
        assert np.allclose(ball_max(f).values, oracles.interval_max(vals), rtol=1e-9, atol=0)


@given(seeds, st.floats(1, 5))
def test_mq_definition(seed, q):
    f = rand_fn(seed)
    lhs = dyadic_max(f, q).values
    rhs = dyadic_max(f.power(q)).values ** (1 / q)
    assert np.allclose(lhs, rhs, rtol=1e-9)


def test_all_shifts_needs_thirds():
    f = rand_fn(1, 3)
    with pytest.raises(Exception):
        maximal(f, MaximalConfig("dyadic-all-shifts"))
    g = LatticeFunction.from_array(np.random.default_rng(0).random(24), 3, denom=3)
    all_ = maximal(g, MaximalConfig("dyadic-all-shifts"))
    std = maximal(g, MaximalConfig("dyadic-single-grid"))
    assert np.all(all_.values >= std.values - 1e-15)


def test_weighted_ball():
    w = two_step_weight(4)
    f = LatticeFunction.indicator([(0, F(1, 4))], 1, 4)
    Mw = maximal(f, MaximalConfig("weighted-ball", weight=w))
    one = maximal(f, MaximalConfig("weighted-ball", weight=Weight.constant(1.0, 1, 4)))
    assert np.allclose(one.values, ball_max(f).values)
    assert np.all(Mw.values >= f.block(((0, 16),)) - 1e-15)
    with pytest.raises(DomainError):
        MaximalConfig("weighted-ball")


@given(seeds, st.floats(0.1, 10))
def test_pointwise_properties(seed, c):
    f, g = rand_fn(seed), rand_fn(seed + 1)
    Mf = dyadic_max(f)
    assert np.all(f.values <= Mf.values)
    assert np.allclose(dyadic_max(f.scale(c)).values, c * Mf.values, rtol=1e-12)
    big = f.maximum(g)
    assert np.all(Mf.values <= dyadic_max(big).values + 1e-15)
    assert np.all(dyadic_max(Mf).values >= Mf.values)


@given(seeds, st.integers(1, 4), st.data())
def test_maxconst(seed, k, data):
    j = data.draw(st.integers(0, 2 ** k - 1))
    P = Cube(GridShift.standard(1), k, (j,))
    f = rand_fn(seed, 6)
    outside = f.values.copy()
    size = 64 >> k
    outside[j * size:(j + 1) * size] = 0
    M = dyadic_max(LatticeFunction.from_array(outside, 6)).values[j * size:(j + 1) * size]
    assert np.all(M == M[0])


@given(seeds, st.floats(1.1, 8))
def test_maxfinsec(seed, p):
    f = rand_fn(seed, 6)
    assert lp_norm(dyadic_max(f), p) <= maxfinsec_bound(1, p) * lp_norm(f, p)


def test_fs_examples():
    one = LatticeFunction.indicator([(0, 1)], 1, 4)
    lhs, rhs, ok = fs_check(one, Weight.constant(1.0, 1, 4))
    assert lhs == pytest.approx(1) and rhs == pytest.approx(1) and ok
    assert fs_check(LatticeFunction.indicator([(0, F(1, 4))], 1, 4), Weight.constant(1.0, 1, 4)).passed


@given(seeds, st.integers(1, 8))
def test_fs_random(seed, level):
    assert fs_check(rand_fn(seed, level), rand_weight(seed + 7, level)).passed


@given(seeds, st.sampled_from([1.5, 2.0, 4.0]), st.sampled_from([1.0, 1.2]))
def test_fs_strong_random(seed, p, q):
    assert fs_strong_check(rand_fn(seed), rand_weight(seed + 3), p, q).passed


def test_fs_strong_blowup():
    one = LatticeFunction.indicator([(0, 1)], 1, 4)
    w = Weight.constant(1.0, 1, 4)
    assert fs_strong_check(one, w, 2, 1).passed
    consts = [fs_strong_constant(2, q) for q in (1.0, 1.5, 1.9, 1.99)]
    assert consts == sorted(consts) and consts[-1] > 5
    f = LatticeFunction.indicator([(0, F(1, 16))], 1, 6)
    w = Weight.constant(1.0, 1, 6)
    for q in (1.5, 1.9, 1.99):
        chk = fs_strong_check(f, w, 2, q)
        assert fs_strong_constant(2, q) >= chk.lhs / lp_norm(f, 2, dyadic_max(w, domain=w.domain))
    with pytest.raises(DomainError):
        fs_strong_check(f, w, 2, 2)


def test_kolmogorov():
    one = LatticeFunction.from_array(np.ones(16), 4)
    for d in (0.2, 0.5, 0.9):
        assert kolmogorov_ratio(one, d) == pytest.approx(1 - d)
    f = LatticeFunction.indicator([(0, F(1, 4))], 1, 6)
    assert kolmogorov_check(f, 0.5, CAL["C_kol"]).passed
    g = rand_fn(5, 8, 8)
    ratios = [kolmogorov_ratio(g, d) for d in np.linspace(0.1, 0.9, 9)]
    assert max(ratios) <= CAL["C_kol"]


@given(seeds, st.sampled_from([1.5, 2.0, 3.0]), st.sampled_from([1.5, 2.0, 3.0]))
def test_maxwduo_random(seed, p, q):
    assert maxwduo_check(rand_fn(seed), rand_weight(seed + 11), p, q).passed


def test_maxwduo_examples():
    one = LatticeFunction.indicator([(0, 1)], 1, 4)
    assert maxwduo_check(one, Weight.constant(1.0, 1, 4), 2, 2).passed
    half = LatticeFunction.indicator([(0, F(1, 2))], 1, 6)
    assert maxwduo_check(half, two_step_weight(6), 2, 2).passed


def test_prop22_iii():
    c, k = CAL["c_hat"], CAL["kappa_hat"]
    assert prop22_iii_ratio(Weight.constant(1.0, 1, 6), 0.5) == pytest.approx(1.0)
    assert prop22_iii_ratio(Weight.constant(1.0, 1, 6), 8.0) == pytest.approx(1.0)
    assert prop22_iii_check(two_step_weight(8), c, k).passed
    for w in random_a1_family(50, 7, 777).realized:
        assert prop22_iii_check(w, c, k).passed
