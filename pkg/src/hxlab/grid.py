"""Translated dyadic systems on R^n and the bounded dyadic system on [0, 1)^n.

A cube of the system with shift ``alpha`` is ``2^-k ([0,1)^n + m + (-1)^k alpha)`` with
``alpha`` in ``{0, 1/3, 2/3}^n``.  Shifts are stored as ternary digits so every box
endpoint is an exact rational with denominator ``3 * 2^k``.

Published constants for the Euclidean instantiation (Lebesgue measure, Euclidean
metric), all derived in the module docs of :func:`euclidean_params`:

* ``rho(n) = 6 sqrt(n)``: every ball ``B(x; r)`` lies in some cube ``Q`` of one of the
  ``3^n`` systems with ``diam(Q) < rho(n) r``.
* ``c0 = 1/2`` and ``C0 = sqrt(n)``: ``B(z; c0 2^-k) ⊆ Q ⊆ B(z; C0 2^-k)`` for the
  centre ``z`` of a level-``k`` cube.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import DomainError, NoParent

Box = tuple[tuple[Fraction, Fraction], ...]


def _two_pow(k: int) -> Fraction:
    return Fraction(2) ** k


def _floor(x: Fraction) -> int:
    return math.floor(x)


def _ceil(x: Fraction) -> int:
    return math.ceil(x)


@dataclass(frozen=True, order=True)
class GridShift:
    """Shift vector ``alpha = digits / 3`` of a translated dyadic system."""

    digits: tuple[int, ...]

    def __post_init__(self):
        if not self.digits:
            raise DomainError("grid shift needs dim >= 1")
        for s in self.digits:
            if s not in (0, 1, 2):
                raise DomainError(f"shift digits must lie in {{0, 1, 2}}, got {s}")

    @property
    def dim(self) -> int:
        return len(self.digits)

    @property
    def alpha(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(s, 3) for s in self.digits)

    @property
    def is_standard(self) -> bool:
        return not any(self.digits)

    @classmethod
    def standard(cls, dim: int) -> "GridShift":
        return cls((0,) * dim)

    @classmethod
    def all(cls, dim: int) -> list["GridShift"]:
        return [cls(d) for d in itertools.product((0, 1, 2), repeat=dim)]

    def offset(self, level: int) -> tuple[Fraction, ...]:
        """The translation ``(-1)^level * alpha`` used at ``level``."""
        sign = -1 if level % 2 else 1
        return tuple(sign * a for a in self.alpha)


@dataclass(frozen=True, order=True)
class Cube:
    shift: GridShift
    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if len(self.index) != self.shift.dim:
            raise DomainError("cube index length must equal the grid dimension")

    @property
    def dim(self) -> int:
        return self.shift.dim

    @property
    def side(self) -> Fraction:
        return _two_pow(-self.level)

    @property
    def measure(self) -> Fraction:
        return self.side ** self.dim

    @property
    def diam(self) -> float:
        return math.sqrt(self.dim) * float(self.side)

    @property
    def box(self) -> Box:
        return cube_box(self)

    @property
    def center(self) -> tuple[Fraction, ...]:
        return tuple(lo + self.side / 2 for lo, _ in self.box)

    def contains_point(self, x: Sequence) -> bool:
        return all(lo <= Fraction(t) < hi for (lo, hi), t in zip(self.box, x))

    def contains(self, other: "Cube") -> bool:
        """Box inclusion ``other ⊆ self``."""
        return box_contains(self.box, other.box)

    def to_json(self) -> dict:
        return {"shift": list(self.shift.digits), "level": self.level, "index": list(self.index)}

    @classmethod
    def from_json(cls, obj: dict) -> "Cube":
        return cls(GridShift(tuple(int(s) for s in obj["shift"])), int(obj["level"]),
                   tuple(int(i) for i in obj["index"]))

    def __repr__(self):
        box = " x ".join(f"[{lo}, {hi})" for lo, hi in self.box)
        return f"Cube(shift={self.shift.digits}, k={self.level}, m={self.index}: {box})"


def cube_box(q: Cube) -> Box:
    """Exact half-open box ``2^-k ([0,1)^n + m + (-1)^k alpha)``."""
    side = q.side
    return tuple(((m + off) * side, (m + 1 + off) * side)
                 for m, off in zip(q.index, q.shift.offset(q.level)))


def box_contains(outer: Box, inner: Box) -> bool:
    return all(a <= c and d <= b for (a, b), (c, d) in zip(outer, inner))


def box_intersects(a: Box, b: Box) -> bool:
    return all(lo1 < hi2 and lo2 < hi1 for (lo1, hi1), (lo2, hi2) in zip(a, b))


def box_measure(b: Box) -> Fraction:
    out = Fraction(1)
    for lo, hi in b:
        out *= max(hi - lo, Fraction(0))
    return out


def cube_containing(shift: GridShift, level: int, x: Sequence) -> Cube:
    """The unique cube of ``shift`` at ``level`` whose box contains the point ``x``."""
    if len(x) != shift.dim:
        raise DomainError("point dimension does not match the grid")
    scale = _two_pow(level)
    idx = tuple(_floor(Fraction(t) * scale - off) for t, off in zip(x, shift.offset(level)))
    return Cube(shift, level, idx)


def parent(q: Cube) -> Cube:
    lo = tuple(a for a, _ in q.box)
    return cube_containing(q.shift, q.level - 1, lo)


def children(q: Cube) -> list[Cube]:
    half = q.side / 2
    lo = tuple(a for a, _ in q.box)
    out = []
    for corner in itertools.product((0, 1), repeat=q.dim):
        x = tuple(a + c * half for a, c in zip(lo, corner))
        out.append(cube_containing(q.shift, q.level + 1, x))
    return out


def ancestors(q: Cube, level: int) -> Cube:
    """The ancestor of ``q`` at the coarser ``level``."""
    if level > q.level:
        raise DomainError("ancestor level must not exceed the cube level")
    lo = tuple(a for a, _ in q.box)
    return cube_containing(q.shift, level, lo)


class BoundedSystem:
    """Standard-grid dyadic subcubes of ``[0, 1)^n`` at levels ``0..max_level``."""

    def __init__(self, dim: int, max_level: int):
        if dim < 1 or max_level < 0:
            raise DomainError("bounded system needs dim >= 1 and max_level >= 0")
        self.dim = dim
        self.max_level = max_level
        self.shift = GridShift.standard(dim)

    @property
    def top(self) -> Cube:
        return Cube(self.shift, 0, (0,) * self.dim)

    def cubes(self, level: int) -> Iterator[Cube]:
        if not 0 <= level <= self.max_level:
            raise DomainError(f"level {level} outside 0..{self.max_level}")
        for idx in itertools.product(range(2 ** level), repeat=self.dim):
            yield Cube(self.shift, level, idx)

    def all_cubes(self) -> Iterator[Cube]:
        for k in range(self.max_level + 1):
            yield from self.cubes(k)

    def __contains__(self, q: Cube) -> bool:
        return (q.shift == self.shift and 0 <= q.level <= self.max_level
                and all(0 <= m < 2 ** q.level for m in q.index))

    def parent(self, q: Cube) -> Cube:
        if q not in self:
            raise DomainError("cube is not in the bounded system")
        if q.level == 0:
            raise NoParent()
        return parent(q)

    def children(self, q: Cube) -> list[Cube]:
        if q not in self:
            raise DomainError("cube is not in the bounded system")
        if q.level >= self.max_level:
            raise DomainError("cube is at the finest level of the system")
        return children(q)


@dataclass(frozen=True)
class SystemParams:
    """Parameters ``(c0, C0, delta, A, gamma, nu)`` of a dyadic system.

    ``rho`` is the ball-covering ratio for the union of the translated systems.
    """

    c0: float
    C0: float
    delta: float
    quasimetric_A: float
    gamma: float
    doubling_nu: float
    rho: float

    def __post_init__(self):
        if not (0 < self.c0 <= self.C0):
            raise DomainError("need 0 < c0 <= C0")
        if not 0 < self.delta < 1:
            raise DomainError("delta must lie in (0, 1)")
        if self.quasimetric_A < 1 or self.gamma <= 0:
            raise DomainError("need A >= 1 and gamma > 0")

    @property
    def whitney_ratio(self) -> float:
        """Upper bound ``4 A^2 C0 / (gamma c0 delta)`` for ``d(P, Omega^c) / diam P``."""
        return 4 * self.quasimetric_A ** 2 * self.C0 / (self.gamma * self.c0 * self.delta)

    @property
    def cz_tau(self) -> float:
        A = self.quasimetric_A
        return 4 * A + 16 * A ** 3 * self.C0 / (self.gamma * self.c0 * self.delta)

    @property
    def cz_unbounded_constant(self) -> float:
        """Constant ``c`` with ``<f>_P <= c lambda`` for Whitney cubes of ``{M^B f > lambda}``.

        The enlarged ball ``B(z_P; tau C0 delta^k)`` has Lebesgue measure
        ``(tau C0 / c0)^nu`` times that of the inner ball ``B(z_P; c0 delta^k) ⊆ P``.
        """
        return (self.cz_tau * self.C0 / self.c0) ** self.doubling_nu

    @property
    def cz_bounded_constant(self) -> float:
        """``lambda < <f>_P <= c lambda`` in the bounded case; exactly ``2^n`` for Lebesgue."""
        return 2.0 ** self.doubling_nu


def rho(dim: int) -> float:
    """Ball-covering ratio.

    In one axis, the union of the three translated level-``k`` grids has its endpoints on
    ``2^-k / 3`` multiples, and consecutive endpoints belong to different grids.  An open
    interval of length ``2r`` is cut by every grid only when it holds three endpoints,
    which is impossible once ``2^-k / 3 >= r``.  The finest such level has
    ``2^-k < 6 r``, so ``diam Q < 6 sqrt(n) r``; the bound is approached but not attained.
    """
    return 6.0 * math.sqrt(dim)


def euclidean_params(dim: int) -> SystemParams:
    """Constants of the standard dyadic system in ``R^dim`` with Lebesgue measure.

    ``c0 = 1/2``: the open ball of radius half the side sits in the half-open cube.
    ``C0 = sqrt(n)``: the cube (including its closed corner at distance ``sqrt(n)/2``
    times the side) lies in the open ball of radius ``sqrt(n)`` times the side; this
    choice also makes the nesting property of child and parent balls hold.
    ``delta = 1/2``, ``A = 1`` (a metric), ``gamma = 1`` (connected and unbounded) and
    ``nu = n``.
    """
    return SystemParams(c0=0.5, C0=math.sqrt(dim), delta=0.5, quasimetric_A=1.0, gamma=1.0,
                        doubling_nu=float(dim), rho=rho(dim))


def cover_ball(x: Sequence, r) -> tuple[Cube, float]:
    """Smallest cube among all translated systems containing the open ball ``B(x; r)``.

    Returns the cube and ``diam(Q) / r``, which is always below :func:`rho`.
    """
    r = Fraction(r)
    if r <= 0:
        raise DomainError("radius must be positive")
    x = tuple(Fraction(t) for t in x)
    dim = len(x)
    # coarsest candidate: 2^-k / 3 in [r, 2r) always works
    k = _floor(-math.log2(float(3 * r)))
    while _two_pow(-k) / 3 < r:
        k -= 1
    while _two_pow(-(k + 1)) / 3 >= r:
        k += 1
    best = None
    while _two_pow(-k) >= 2 * r:
        digits = []
        idx = []
        for t in x:
            for s in (0, 1, 2):
                off = Fraction(s, 3) * (-1 if k % 2 else 1)
                m = _floor((t - r) * _two_pow(k) - off)
                if (t + r) * _two_pow(k) - off <= m + 1:
                    digits.append(s)
                    idx.append(m)
                    break
            else:
                break
        if len(digits) == dim:
            best = Cube(GridShift(tuple(digits)), k, tuple(idx))
        elif best is None:
            raise AssertionError("coarsest covering level failed")
        k += 1
    return best, best.diam / float(r)


def cubes_intersecting(region: Sequence, shift: GridShift, levels: Sequence[int]) -> list[Cube]:
    """All cubes of ``shift`` at the given levels whose box meets the half-open ``region``."""
    region = tuple((Fraction(a), Fraction(b)) for a, b in region)
    if len(region) != shift.dim:
        raise DomainError("region dimension does not match the grid")
    out = []
    if any(a >= b for a, b in region):
        return out
    for k in sorted(set(levels)):
        scale = _two_pow(k)
        ranges = []
        for (a, b), off in zip(region, shift.offset(k)):
            mlo = _floor(a * scale - off)
            mhi = _ceil(b * scale - off)
            ranges.append(range(mlo, mhi))
        for idx in itertools.product(*ranges):
            q = Cube(shift, k, idx)
            if box_intersects(q.box, region):
                out.append(q)
    return out
