from __future__ import annotations

import math
from fractions import Fraction as F

import numpy as np
import pytest
import sympy as sy
from hypothesis import given, strategies as st

import oracles
from hxlab.calibration import load_calibration, weight_suite
from hxlab.errors import DomainError
from hxlab.exponents import conj, div, inf, pw, ratio_conj, recip
from hxlab.grid import Cube, GridShift
from hxlab.lab import power_weight, two_step_weight
from hxlab.lattice import LatticeFunction, Weight
from hxlab.weights import (ExponentPair, PsiInputs, a_infty_wilson, a_one, a_p, ainfty_regest_check,
                           atwo_rhs, c_p, constants_report, holweight_check, phi, prop22_ii_check,
                           psi, psi_from, rh, tau_p, thm11_rhs)

TOP = Cube(GridShift.standard(1), 0, (0,))
W2 = two_step_weight(6)
seeds = st.integers(0, 2 ** 32 - 1)


def rand_weight(seed, level=5, spread=1.0):
    rng = np.random.default_rng(seed)
    return Weight(1, level, 1, (0,), np.exp(rng.normal(0, spread, 2 ** level)))


# conjugate arithmetic ------------------------------------------------------------

def test_edge_conventions():
    assert conj(1) == inf and conj(inf) == 1 and conj(2) == 2
    assert div(3, inf) == 0 and div(inf, 3) == inf
    with pytest.raises(DomainError):
        div(inf, inf)
    assert pw(inf, 0) == 1 and pw(inf, 2) == inf and pw(4, 0.5) == 2
    assert recip(inf) == 0 and recip(4) == 0.25
    assert ratio_conj(inf, 2) == 1 and ratio_conj(4, 2) == 2


# closed forms ----------------------------------------------------------------------

def _cp_symbolic(p, p0, q0):
    """The same formula in exact arithmetic; the endpoint cases are taken as limits."""
    x = sy.Symbol("x", positive=True)

    def c(t):
        return t / (t - 1)

    pc = c(p)
    if q0 is sy.oo:
        first = sy.limit(c(pc / c(x)) ** (1 / c(x)), x, sy.oo)
    else:
        first = c(pc / c(q0)) ** (1 / c(q0))
    if p0 == 1:
        inner = sy.limit(c(c(x) / pc), x, 1, "+")
    else:
        inner = c(c(p0) / pc)
    return first * (inner * c(p / p0)) ** (sy.Integer(1) / p0)


def test_c_p_reduces_to_p_pprime():
    for p in (1.5, 2.0, 4.0):
        assert c_p(p, ExponentPair(1, inf)) == pytest.approx(p * conj(p), rel=1e-12)
    assert c_p(2, ExponentPair(1, inf)) == 4


def test_c_p_symbolic_oracle():
    ref = _cp_symbolic(sy.Integer(3), sy.Integer(2), sy.Integer(4))
    assert sy.simplify(ref - 18) == 0
    assert c_p(3, ExponentPair(2, 4)) == pytest.approx(18.0, rel=1e-12)
    for p in (sy.Rational(3, 2), sy.Integer(2), sy.Integer(5)):
        ref = float(_cp_symbolic(p, sy.Integer(1), sy.oo))
        assert c_p(float(p), ExponentPair(1, inf)) == pytest.approx(ref, rel=1e-12)


def test_c_p_range():
    with pytest.raises(DomainError):
        c_p(5, ExponentPair(2, 4))


def test_tau_p():
    assert tau_p(2, 1) == 2
    for p in (1.2, 3.0, 7.5):
        assert tau_p(p, 1) == pytest.approx(conj(p), rel=1e-12)
        assert tau_p(p + 1, 1.5) >= 1
    with pytest.raises(DomainError):
        tau_p(1, 1)


def test_phi():
    for p in (1.5, 2.0, 9.0):
        assert phi(p, ExponentPair(1, inf)) == p
    assert phi(3, ExponentPair(2, 4)) == pytest.approx(3.0, rel=1e-12)
    # the formula gives (2/(3/2))' (3/2 - 1) + 1 = 4 * 1/2 + 1 = 3
    assert phi(1.5, ExponentPair(1, 2)) == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(DomainError):
        phi(4, ExponentPair(2, 4))


def test_psi_unit_constants():
    one = PsiInputs(1, 1, 1, 1)
    assert psi_from(one, ExponentPair(1, inf)) == pytest.approx(math.log(math.e + 1))
    assert psi_from(one, ExponentPair(2, inf)) == pytest.approx(math.log(math.e + 1))
    assert psi_from(one, ExponentPair(1, 2)) == 1
    assert psi_from(one, ExponentPair(2, 4)) == 1
    assert math.log(math.e + 1) == pytest.approx(1.31326, abs=1e-5)


def test_psi_two_step_composition():
    w = W2.values
    K = W2.level
    ref = oracles.wilson(w ** 2, K) * oracles.a_p(w, K, 1) * oracles.rh(w, K, 2)
    assert psi(W2, ExponentPair(1, 2)) == pytest.approx(ref, rel=1e-9)
    assert psi(W2, ExponentPair(1, 2)) == pytest.approx(2.055480479109447, rel=1e-9)


def test_thm11_and_atwo():
    one = Weight.constant(1.0, 1, 5)
    assert thm11_rhs(one, 2, ExponentPair(1, inf)) == pytest.approx(4.0)
    for p, ep in ((2, ExponentPair(1, inf)), (1.5, ExponentPair(1, 2)), (3, ExponentPair(2, 4))):
        assert atwo_rhs(one, p, ep) == pytest.approx(1.0)
    t = thm11_rhs(W2, 2, ExponentPair(1, inf))
    a = atwo_rhs(W2, 2, ExponentPair(1, inf))
    # recorded comparison: the mixed bound and the A_2 bound are both finite and >= c_p, 1
    assert t == pytest.approx(4 * a_infty_wilson(W2) ** 0.5 * a_one(W2) ** 0.5)
    assert a == pytest.approx(9 / 8) and t >= 4


# characteristics -------------------------------------------------------------------

def test_two_step_values():
    assert a_p(W2, 2) == pytest.approx(9 / 8, rel=1e-12)
    assert a_p(W2, 1) == pytest.approx(3 / 2, rel=1e-12)
    assert rh(W2, 2) == pytest.approx(math.sqrt(10) / 3, rel=1e-12)
    assert rh(W2, 1) == 1
    wil = a_infty_wilson(W2)
    assert 1 <= wil <= load_calibration()["C_cal"] * a_p(W2, 2)
    assert wil == pytest.approx(oracles.wilson(W2.values, W2.level), rel=1e-12)
    assert wil == pytest.approx(7 / 6, rel=1e-12)


def test_constant_weight():
    one = Weight.constant(3.0, 1, 5)
    for p in (1, 1.5, 2, 6):
        assert a_p(one, p) == pytest.approx(1.0)
    assert a_infty_wilson(one) == pytest.approx(1.0)
    assert rh(one, 3) == pytest.approx(1.0)


def test_report_attaining_cube():
    rep = constants_report(W2, ps=(1, 2), ss=(2,))
    assert rep.values["A_2"] == pytest.approx(9 / 8)
    assert rep.attained["A_2"] == TOP
    assert "A_infty_wilson" in rep.values and rep.to_csv().startswith("name,value,cube")


@given(seeds, st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_oracle_agreement(seed, p):
    w = rand_weight(seed, 4)
    assert a_p(w, p) == pytest.approx(oracles.a_p(w.values, 4, p), rel=1e-9)
    assert rh(w, 2.5) == pytest.approx(oracles.rh(w.values, 4, 2.5), rel=1e-9)
    assert a_infty_wilson(w) == pytest.approx(oracles.wilson(w.values, 4), rel=1e-9)


@given(seeds, st.floats(1, 6), st.floats(1, 6))
def test_ap_monotone(seed, p, q):
    q, p = min(p, q), max(p, q)
    w = rand_weight(seed)
    assert a_p(w, p) <= a_p(w, q) * (1 + 1e-12)


@given(seeds, st.floats(0.01, 100))
def test_scaling_invariance(seed, c):
    w = rand_weight(seed)
    cw = w.with_values(w.values * c)
    for fn in (lambda v: a_p(v, 2), lambda v: a_p(v, 1), a_infty_wilson, lambda v: rh(v, 2)):
        assert fn(cw) == pytest.approx(fn(w), rel=1e-12)


@given(seeds)
def test_constants_at_least_one_and_refinement(seed):
    w = rand_weight(seed, 4)
    fine = w.refine(1)
    for fn in (lambda v: a_p(v, 2), lambda v: a_p(v, 1), a_infty_wilson, lambda v: rh(v, 3)):
        assert fn(w) >= 1 - 1e-12
        assert fn(fine) == pytest.approx(fn(w), rel=1e-12)


def test_power_weight_frozen():
    w = power_weight(0.5, 10)
    assert a_one(w) == pytest.approx(oracles.a_p(w.values, 10, 1), rel=1e-9)
    assert a_infty_wilson(w) == pytest.approx(oracles.wilson(w.values, 10), rel=1e-9)
    # frozen from the enumeration oracles
    assert a_one(w) == pytest.approx(1.9995115994825667, rel=1e-9)
    assert a_p(w, 2) == pytest.approx(1.3333207244379683, rel=1e-9)
    assert a_infty_wilson(w) == pytest.approx(1.685009694274468, rel=1e-9)
    assert rh(w, 1.5) == pytest.approx(1.2158920177102799, rel=1e-9)


def test_prop22_ii():
    assert tuple(prop22_ii_check(Weight.constant(1.0, 1, 4), 2, 2))[:2] == pytest.approx((1, 1))
    assert prop22_ii_check(W2, 2, 2).passed
    for i, w in enumerate(weight_suite(50, 6, 99)):
        for p in (1.0, 2.0):
            for s in (2.0, 3.0):
                assert prop22_ii_check(w, p, s).passed, (i, p, s)


def test_holweight_examples():
    one = LatticeFunction.indicator([(0, 1)], 1, 6)
    chk = holweight_check(one, one, Weight.constant(1.0, 1, 6), 1, 2, TOP)
    assert chk.first.lhs == pytest.approx(chk.first.rhs) and chk.passed
    half = LatticeFunction.indicator([(0, F(1, 2))], 1, 6)
    assert holweight_check(half, half, W2, 1, 2, TOP).passed


def test_holweight_suite(rng):
    for _ in range(200):
        k = int(rng.integers(2, 7))
        w = Weight(1, k, 1, (0,), np.exp(rng.normal(0, 1, 2 ** k)))
        f = LatticeFunction.from_array(rng.random(2 ** k) ** 3, k)
        g = LatticeFunction.from_array(rng.random(2 ** k) ** 3, k)
        p = float(rng.uniform(1, 3))
        q = p * float(rng.uniform(1.2, 3))
        lev = int(rng.integers(0, k + 1))
        Q = Cube(GridShift.standard(1), lev, (int(rng.integers(2 ** lev)),))
        assert holweight_check(f, g, w, p, q, Q).passed


def test_ainfty_regest_with_calibration():
    c_cal = load_calibration()["C_cal"]
    for w in weight_suite():
        for p in (1.0, 2.0, 4.0):
            assert ainfty_regest_check(w, p, c_cal).passed


def test_holweight_exponent_near_one():
    # p' ~ 1800: the second line must not underflow to zero
    k = 3
    rng = np.random.default_rng(5)
    w = Weight(1, k, 1, (0,), np.exp(rng.normal(0, 1, 8)))
    f = LatticeFunction.from_array(rng.random(8) ** 3, k)
    Q = Cube(GridShift.standard(1), 3, (5,))
    chk = holweight_check(f, f, w, 1.0005446, 1.78166, Q)
    assert chk.second.rhs > 0 and chk.passed
