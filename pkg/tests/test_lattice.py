from __future__ import annotations

import json
import math
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from hxlab.errors import DomainError, LatticeMismatch, ParseError
from hxlab.grid import Cube, GridShift, children
from hxlab.lattice import (LatticeFunction, Weight, average, conjugate, load_function,
                           lp_norm, pairing, parse_function, weak_lp)

S0 = GridShift.standard(1)
TOP = Cube(S0, 0, (0,))
seeds = st.integers(0, 2 ** 32 - 1)


def rand_fn(seed, level=6, power=3.0, dim=1):
    rng = np.random.default_rng(seed)
    return LatticeFunction.from_array(rng.random((2 ** level,) * dim) ** power, level)


def test_average_examples():
    c = LatticeFunction.from_array(np.full(16, 2.5), 4)
    for p in (0.5, 1, 2, 7, math.inf):
        assert average(c, p, TOP) == pytest.approx(2.5, rel=1e-12)
    half = LatticeFunction.indicator([(0, F(1, 2))], 1, 4)
    assert average(half, 2, TOP) == pytest.approx(0.5 ** 0.5, rel=1e-12)
    quarter = LatticeFunction.indicator([(0, F(1, 4))], 1, 4)
    assert average(quarter, 1, TOP) == pytest.approx(0.25, rel=1e-12)


def test_average_lattice_mismatch():
    f = rand_fn(1, level=3)
    with pytest.raises(LatticeMismatch):
        average(f, 1, Cube(S0, 5, (0,)))
    with pytest.raises(LatticeMismatch):
        average(f, 1, Cube(GridShift((1,)), 1, (0,)))
    g = LatticeFunction.from_array(np.ones(24), 3, denom=3)
    # on the denominator-3 lattice every shifted cube is a union of cells
    assert average(g, 1, Cube(GridShift((1,)), 1, (1,))) == pytest.approx(1.0)


def test_pairing_examples():
    one = LatticeFunction.indicator([(0, 1)], 1, 3)
    assert pairing(one, one) == 1.0
    assert pairing(one, one.scale(0)) == 0.0


@given(seeds)
def test_pairing_vs_high_precision(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(64) * 1e3, rng.standard_normal(64)
    f, g = LatticeFunction.from_array(a, 6), LatticeFunction.from_array(b, 6)
    with mpmath.workdps(60):
        ref = mpmath.fsum(mpmath.mpf(x) * mpmath.mpf(y) for x, y in zip(a, b)) / 64
    got = pairing(f, g)
    assert abs(got - float(ref)) <= 1e-12 * max(abs(float(ref)), np.abs(a * b).sum() / 64)


def test_pairing_mismatch():
    with pytest.raises(LatticeMismatch):
        pairing(rand_fn(1, 3), rand_fn(1, 4))


def test_norm_examples():
    one = LatticeFunction.indicator([(0, 1)], 1, 4)
    w = Weight.constant(1.0, 1, 4)
    for p in (0.5, 1, 3):
        assert lp_norm(one, p, w) == pytest.approx(1.0)
        assert weak_lp(one, p, w) == pytest.approx(1.0)
    half = LatticeFunction.indicator([(0, F(1, 2))], 1, 4)
    assert weak_lp(half, 1, w) == pytest.approx(0.5)


def _weak_oracle(vals, mass, p):
    """Level sets enumerated directly: sup over lambda just below each value."""
    best = 0.0
    for v in set(vals.tolist()):
        if v > 0:
            lam = np.nextafter(v, 0)
            best = max(best, lam * mass[vals > lam].sum() ** (1 / p))
    return best


@given(seeds, st.sampled_from([0.5, 1.0, 2.0, 3.5]))
def test_weak_lp_oracle_and_chebyshev(seed, p):
    rng = np.random.default_rng(seed)
    vals = np.round(rng.random(32) * 4) / 4
    f = LatticeFunction.from_array(vals, 5)
    w = Weight(1, 5, 1, (0,), rng.random(32) + 0.1)
    got = weak_lp(f, p, w)
    assert got == pytest.approx(_weak_oracle(vals, w.values / 32, p), rel=1e-9)
    assert got <= lp_norm(f, p, w) * (1 + 1e-12)


def test_conjugate():
    assert conjugate(2) == 2
    assert conjugate(1) == math.inf
    assert conjugate(math.inf) == 1
    assert conjugate(4 / 3) == pytest.approx(4, rel=1e-12)
    with pytest.raises(DomainError):
        conjugate(0.5)


@given(st.floats(1.0001, 50))
def test_conjugate_involutive(p):
    assert conjugate(conjugate(p)) == pytest.approx(p, rel=1e-9)


def test_pointwise_ops():
    w = Weight(1, 3, 1, (0,), np.arange(1.0, 9.0))
    assert np.array_equal(w.power(1).values, w.values)
    f = rand_fn(3, 3)
    assert not f.scale(0).values.any()
    one = LatticeFunction.indicator([(0, 1)], 1, 3)
    r = one.restrict([(0, F(1, 2))])
    assert r.cells() == LatticeFunction.indicator([(0, F(1, 2))], 1, 3).cells()
    neg = LatticeFunction.from_array(np.array([-1.0, 2.0]), 1)
    with pytest.raises(DomainError):
        neg.power(0.5)
    assert neg.power(2).values.tolist() == [1.0, 4.0]


@given(seeds, st.floats(0.3, 6), st.floats(0.3, 6))
def test_holder_monotone_in_p(seed, p, q):
    p, q = min(p, q), max(p, q)
    f = rand_fn(seed, 5)
    for k in range(3):
        for j in range(2 ** k):
            cube = Cube(S0, k, (j,))
            assert average(f, p, cube) <= average(f, q, cube) * (1 + 1e-12)
            assert average(f, q, cube) <= average(f, math.inf, cube) * (1 + 1e-12)


@given(seeds, st.floats(1.05, 8))
def test_holder_product(seed, p):
    f, g = rand_fn(seed, 5), rand_fn(seed + 1, 5)
    lhs = lp_norm(f.mul(g), 1)
    assert lhs <= lp_norm(f, p) * lp_norm(g, conjugate(p)) * (1 + 1e-12)


@given(seeds, st.floats(0.5, 5), st.integers(0, 4))
def test_refinement_consistency(seed, p, k):
    f = rand_fn(seed, 6)
    q = Cube(S0, k, (0,))
    whole = average(f, p, q) ** p * float(q.measure)
    parts = sum(average(f, p, c) ** p * float(c.measure) for c in children(q))
    assert whole == pytest.approx(parts, rel=1e-9)
    # the same average on the refined lattice
    assert average(f.refine(1), p, q) == pytest.approx(average(f, p, q), rel=1e-9)


def _doc(**kw):
    doc = {"dim": 1, "level": 1, "denominator": 1, "domain": [[0, 1]],
           "cells": [{"idx": [0], "value": 2}, {"idx": [1], "value": 1}]}
    doc.update(kw)
    return doc


def test_parse_roundtrip(tmp_path):
    w = parse_function(_doc())
    assert isinstance(w, Weight) and w.values.tolist() == [2.0, 1.0]
    again = parse_function(w.to_json())
    assert again.values.tolist() == [2.0, 1.0]
    path = tmp_path / "w.json"
    path.write_text(json.dumps(_doc()))
    assert load_function(path).values.tolist() == [2.0, 1.0]
    f = parse_function({k: v for k, v in _doc().items() if k != "domain"})
    assert not isinstance(f, Weight)


@pytest.mark.parametrize("doc,field", [
    ({k: v for k, v in _doc().items() if k != "cells"}, "cells"),
    ({k: v for k, v in _doc().items() if k != "level"}, "level"),
    (_doc(denominator=2), "denominator"),
    (_doc(cells=[{"idx": [0], "value": 1}, {"idx": [0], "value": 1}]), "cells[1].idx"),
    (_doc(cells=[{"idx": [0], "value": 1}, {"idx": [1], "value": 0}]), "cells"),
    (_doc(cells=[{"idx": [0], "value": 1}]), "cells"),
    (_doc(cells=[{"idx": [0, 1], "value": 1}]), "cells[0].idx"),
    (_doc(cells=[{"idx": [0], "value": "x"}, {"idx": [1], "value": 1}]), "cells[0].value"),
])
def test_parse_errors_name_field(doc, field):
    with pytest.raises(ParseError) as exc:
        parse_function(doc)
    assert field in str(exc.value)
