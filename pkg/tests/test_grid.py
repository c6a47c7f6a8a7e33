from __future__ import annotations

import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from hxlab.errors import DomainError, NoParent
from hxlab.grid import (BoundedSystem, Cube, GridShift, box_contains, box_intersects,
                        children, cover_ball, cube_box, cube_containing, cubes_intersecting,
                        euclidean_params, parent, rho)

S0 = GridShift.standard(1)
S1 = GridShift((1,))
shifts1 = st.sampled_from(GridShift.all(1))


def test_cube_box_examples():
    assert cube_box(Cube(S0, 0, (0,))) == ((F(0), F(1)),)
    assert cube_box(Cube(S1, 1, (0,))) == ((F(-1, 6), F(1, 3)),)
    q = Cube(GridShift.standard(2), 2, (1, 1))
    assert cube_box(q) == ((F(1, 4), F(1, 2)), (F(1, 4), F(1, 2)))
    assert q.measure == F(1, 16) and q.side == F(1, 4)


def test_bad_shift_digit():
    with pytest.raises(DomainError):
        GridShift((3,))


def test_parent_children_examples():
    top = Cube(S0, 0, (0,))
    assert [c.box for c in children(top)] == [((F(0), F(1, 2)),), ((F(1, 2), F(1)),)]
    assert parent(Cube(S0, 2, (1,))).box == ((F(0), F(1, 2)),)
    with pytest.raises(NoParent):
        BoundedSystem(1, 3).parent(top)


@given(shifts1, st.integers(0, 10), st.integers(-50, 50))
def test_parent_children_consistency(s, k, m):
    q = Cube(s, k, (m,))
    kids = children(q)
    assert len(kids) == 2
    assert all(parent(c) == q for c in kids)
    assert box_contains(parent(q).box, q.box)
    assert sum(c.measure for c in kids) == q.measure
    (a, b), = q.box
    assert kids[0].box[0][0] == a and kids[-1].box[0][1] == b


def test_cube_containing_examples():
    assert cube_containing(S0, 1, [0.7]).box == ((F(1, 2), F(1)),)
    # x = 0.2 is not in [1/3, 4/3); the level-0 cube of D^{1/3} holding it is m = -1
    q = cube_containing(S1, 0, [F(1, 5)])
    assert q.index == (-1,) and q.box == ((F(-2, 3), F(1, 3)),)
    assert Cube(S1, 0, (0,)).box == ((F(1, 3), F(4, 3)),)


@given(st.sampled_from(GridShift.all(2)), st.integers(0, 12),
       st.tuples(st.fractions(-5, 5, max_denominator=1000), st.fractions(-5, 5, max_denominator=1000)))
def test_cube_containing_membership(s, k, x):
    q = cube_containing(s, k, x)
    assert q.contains_point(x) and q.level == k
    for d in itertools.product((-1, 0, 1), repeat=2):
        other = Cube(s, k, tuple(i + e for i, e in zip(q.index, d)))
        assert other == q or not other.contains_point(x)


def test_bounded_system_partition_and_children():
    bs = BoundedSystem(2, 3)
    for k in range(4):
        cubes = list(bs.cubes(k))
        assert sum(c.measure for c in cubes) == 1
        for a, b in itertools.combinations(cubes, 2):
            assert not box_intersects(a.box, b.box)
    for q in bs.all_cubes():
        if q.level < 3:
            assert len(bs.children(q)) == 4


@pytest.mark.parametrize("s", GridShift.all(1))
def test_partition_of_window(s):
    # level-k cubes of every shift tile [-2, 2)
    for k in range(0, 5):
        cubes = cubes_intersecting([(-2, 2)], s, [k])
        covered = sorted(c.box[0] for c in cubes)
        for (a0, b0), (a1, b1) in zip(covered, covered[1:]):
            assert b0 == a1
        assert covered[0][0] <= -2 and covered[-1][1] >= 2


@pytest.mark.parametrize("s", GridShift.all(1))
def test_nesting(s):
    cubes = [c for k in range(0, 7) for c in cubes_intersecting([(0, 1)], s, [k])]
    for a, b in itertools.product(cubes, repeat=2):
        if b.level >= a.level and box_intersects(a.box, b.box):
            assert box_contains(a.box, b.box)


@given(st.sampled_from(GridShift.all(2)), st.integers(-3, 8),
       st.tuples(st.integers(-20, 20), st.integers(-20, 20)))
def test_ball_in_cube(s, k, m):
    """B(z; c0 2^-k) ⊆ Q ⊆ B(z; C0 2^-k), checked on box arithmetic."""
    prm = euclidean_params(2)
    q = Cube(s, k, m)
    side = float(q.side)
    # the inscribed ball has radius side/2 and the circumscribed one sqrt(n) side / 2
    assert prm.c0 * side <= side / 2
    assert math.sqrt(2) * side / 2 < prm.C0 * side
    z = q.center
    assert all(lo + q.side / 2 == c for (lo, _), c in zip(q.box, z))


def test_cover_ball_examples():
    q, ratio = cover_ball([F(1, 2)], F(1, 10))
    (a, b), = q.box
    assert a <= F(2, 5) and F(3, 5) <= b and ratio <= rho(1)
    # exhaustive search over shifts and useful levels
    best = min(float(c.diam) / 0.1 for s in GridShift.all(1) for k in range(-3, 3)
               for c in [cube_containing(s, k, [F(2, 5)])] if c.box[0][1] >= F(3, 5))
    assert ratio == pytest.approx(best)
    q, ratio = cover_ball([0], 1)
    (a, b), = q.box
    assert a <= -1 and 1 <= b and ratio <= rho(1)


@given(st.tuples(st.fractions(-10, 10, max_denominator=997), st.fractions(-10, 10, max_denominator=997)),
       st.integers(1, 50000), st.integers(1, 2))
def test_cover_ball_ratio(x, r1000, n):
    x, r = x[:n], F(r1000, 1000)
    q, ratio = cover_ball(x, r)
    for (lo, hi), t in zip(q.box, x):
        assert lo <= t - r and t + r <= hi
    assert ratio < rho(n)


def test_cubes_intersecting_examples():
    got = cubes_intersecting([(0, 1)], S0, [0, 1])
    assert sorted(c.box for c in got) == sorted([((F(0), F(1)),), ((F(0), F(1, 2)),),
                                                 ((F(1, 2), F(1)),)])
    got = cubes_intersecting([(F(2, 5), F(3, 5))], S0, [2])
    assert [c.box for c in got] == [((F(1, 4), F(1, 2)),), ((F(1, 2), F(3, 4)),)]


@given(shifts1, st.fractions(-3, 3, max_denominator=64), st.fractions(0, 2, max_denominator=64),
       st.integers(0, 8))
def test_cubes_intersecting_brute(s, a, length, k):
    b = a + length
    got = set(cubes_intersecting([(a, b)], s, [k]))
    lo, hi = math.floor(a * 2 ** k) - 2, math.ceil(b * 2 ** k) + 2
    want = set()
    for m in range(lo, hi):
        (u, v), = Cube(s, k, (m,)).box
        if max(u, a) < min(v, b):
            want.add(Cube(s, k, (m,)))
    assert got == want
    assert len(got) == len(cubes_intersecting([(a, b)], s, [k]))


def test_params():
    prm = euclidean_params(1)
    assert prm.c0 <= prm.C0
    assert prm.whitney_ratio == pytest.approx(16.0)
    assert rho(2) == pytest.approx(6 * math.sqrt(2))
