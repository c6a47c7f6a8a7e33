"""Calderón-Zygmund and Whitney decompositions on lattice functions.

Bounded mode works on the unit cube with the standard grid: the selected cubes are the
maximal dyadic cubes whose average exceeds ``lambda``, found top-down so the first hit on
every branch wins.

Unbounded mode (``n = 1``) takes ``Omega = {M^B f > lambda}`` from the interval maximal
function and tiles it with Whitney intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, LatticeMismatch, LevelTooSmall
from .grid import Cube, GridShift, SystemParams, euclidean_params
from .lattice import LatticeFunction, block_layer, coarsest_level
from .maximal import _interval_sup

MEAN_TOL = 1e-12


@dataclass
class WhitneyDecomposition:
    level: int
    origin: int
    omega: np.ndarray          # boolean mask of cells on [origin, origin + len)
    cubes: list[Cube]
    ratios: list[float]        # d(P, Omega^c) / diam(P)
    c_whit: float

    def to_json(self) -> dict:
        return {"level": self.level, "c_whit": self.c_whit,
                "omega": _runs(self.omega, self.origin, self.level),
                "cubes": [{**q.to_json(), "ratio": r} for q, r in zip(self.cubes, self.ratios)]}

    def invariants(self) -> dict[str, bool]:
        return {
            "disjoint_union": _tiles(self.cubes, self.omega, self.origin, self.level),
            "ratio_lower": all(r >= 1 for r in self.ratios),
            "ratio_upper": all(r <= self.c_whit for r in self.ratios),
        }


def _runs(mask: np.ndarray, origin: int, level: int) -> list[list[str]]:
    """Maximal runs of ``True`` cells as ``[lo, hi)`` strings of exact rationals."""
    out = []
    N = 2 ** level
    padded = np.r_[False, mask, False].astype(np.int8)
    d = np.diff(padded)
    for a, b in zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)):
        out.append([str(Fraction(int(a) + origin, N)), str(Fraction(int(b) + origin, N))])
    return out


def _tiles(cubes: list[Cube], omega: np.ndarray, origin: int, level: int) -> bool:
    """Cubes are pairwise disjoint, cover exactly ``omega`` and ``sum |P| = |omega|``."""
    N = 2 ** level
    cover = np.zeros(omega.shape, dtype=np.int64)
    total = Fraction(0)
    for q in cubes:
        (lo, hi), = q.box
        a, b = int(lo * N) - origin, int(hi * N) - origin
        if a < 0 or b > omega.size:
            return False
        cover[a:b] += 1
        total += q.measure
    return bool(np.all(cover == omega)) and total == Fraction(int(omega.sum()), N)


def _distance_to_complement(mask: np.ndarray) -> np.ndarray:
    """Centre-to-centre distance (in cells) from each cell to the nearest cell off ``mask``.

    Cells outside the stored range count as complement.
    """
    n = mask.size
    idx = np.arange(n)
    left = np.where(~mask, idx, -1)
    left = np.maximum.accumulate(left)
    right = np.where(~mask, idx, n)
    right = np.minimum.accumulate(right[::-1])[::-1]
    return np.minimum(idx - left, right - idx)


def whitney(omega: np.ndarray, level: int, origin: int = 0,
            params: SystemParams | None = None) -> WhitneyDecomposition:
    """Whitney tiling of a finite union of lattice intervals in ``R``.

    ``omega`` is a boolean mask of the cells ``origin .. origin + len - 1`` at ``level``
    (denominator 1); everything outside is complement.  The distance from a cube to the
    complement is measured between nearest cell centres, i.e. the gap plus one cell; with
    that convention the finest cubes next to the boundary qualify and the tiling is finite.
    ``E = {Q ⊆ Omega : diam Q <= d(Q, Omega^c)}`` and the output is
    ``{Q in E : parent(Q) not in E}``.
    """
    omega = np.asarray(omega, dtype=bool)
    if omega.ndim != 1:
        raise DomainError("whitney decomposition is one-dimensional")
    if not omega.any():
        raise DomainError("omega is empty")
    params = params or euclidean_params(1)
    dist = _distance_to_complement(omega)
    shift = GridShift.standard(1)
    win = ((origin, origin + omega.size),)
    k0 = coarsest_level(win, level, 1)
    parent_in_e = np.zeros(omega.size, dtype=bool)
    cubes, ratios = [], []
    for k in range(k0, level + 1):
        lay = block_layer(win, level, 1, shift, k, "inside")
        if lay.empty:
            parent_in_e[:] = False
            continue
        inside = lay.reduce(omega.astype(float), "min", fill=0.0) > 0
        dq = lay.reduce(dist.astype(float), "min", fill=0.0)
        in_e = inside & (lay.size <= dq)
        par = lay.reduce(parent_in_e.astype(float), "min", fill=0.0) > 0
        sel = in_e & ~par
        for j in np.flatnonzero(sel):
            q = lay.cube((int(j),))
            cubes.append(q)
            ratios.append(float(dq[j]) / lay.size)
        parent_in_e = lay.expand(in_e.astype(float), 0.0) > 0
    return WhitneyDecomposition(level, origin, omega, cubes, ratios, params.whitney_ratio)


@dataclass
class CZDecomposition:
    lam: float
    mode: str
    f: LatticeFunction
    omega: np.ndarray
    omega_origin: tuple[int, ...]
    cubes: list[Cube]
    averages: list[float]
    good: LatticeFunction
    bad: list[LatticeFunction]
    c_good: float
    whitney: WhitneyDecomposition | None = None
    parent_averages: list[float | None] = field(default_factory=list)

    def omega_measure(self) -> Fraction:
        return Fraction(int(self.omega.sum()), self.f.N ** self.f.dim)

    def invariants(self) -> dict[str, bool]:
        f = self.f
        total = self.good
        for b in self.bad:
            total = total.add(b)
        diff = total.sub(f)
        scale = max(f.sup(), 1e-300)
        l1 = max(np.abs(f.values).sum() * f.cell_volume, 1e-300)
        mean_zero = all(abs(float(b.values.sum()) * f.cell_volume) <= MEAN_TOL * l1 + 1e-300
                        for b in self.bad)
        support = all(_window_inside(b, q) for b, q in zip(self.bad, self.cubes))
        inv = {
            "reconstruct": bool(np.all(np.abs(diff.values) <= MEAN_TOL * scale)),
            "bad_support": support,
            "mean_zero": mean_zero,
            "good_sup": self.good.sup() <= self.c_good * self.lam * (1 + 1e-12),
            "good_sup_2n": self.good.sup() <= 2 ** f.dim * self.lam * (1 + 1e-12),
            "good_l1": (np.abs(self.good.values).sum() * f.cell_volume
                        <= l1 * (1 + 1e-12)),
            "disjoint_union": self._disjoint_union(),
            "averages_above": all(a > self.lam for a in self.averages) if self.mode == "bounded" else True,
            "averages_below": all(a <= self.c_good * self.lam * (1 + 1e-12) for a in self.averages),
        }
        if self.mode == "bounded":
            inv["maximal"] = all(pa is None or pa <= self.lam for pa in self.parent_averages)
        if self.whitney is not None:
            inv.update({f"whitney_{k}": v for k, v in self.whitney.invariants().items()})
        return inv

    def _disjoint_union(self) -> bool:
        f = self.f
        cover = np.zeros(self.omega.shape, dtype=np.int64)
        total = Fraction(0)
        for q in self.cubes:
            rng = f.cell_range(q)
            sl = tuple(slice(a - o, b - o) for (a, b), o in zip(rng, self.omega_origin))
            if any(a - o < 0 or b - o > s for (a, b), o, s in zip(rng, self.omega_origin, self.omega.shape)):
                return False
            cover[sl] += 1
            total += q.measure
        return bool(np.all(cover == self.omega)) and total == self.omega_measure()

    def to_json(self) -> dict:
        out = {
            "mode": self.mode, "lambda": self.lam, "c_good": self.c_good,
            "omega_measure": str(self.omega_measure()),
            "cubes": [{**q.to_json(), "average": a} for q, a in zip(self.cubes, self.averages)],
            "good": self.good.to_json(),
            "invariants": self.invariants(),
        }
        if self.whitney is not None:
            out["whitney"] = {"c_whit": self.whitney.c_whit, "ratios": self.whitney.ratios}
        return out


def _window_inside(b: LatticeFunction, q: Cube) -> bool:
    rng = b.cell_range(q)
    supp = b.support_window()
    if all(y <= x for x, y in supp):
        return True
    return all(a <= x and y <= c for (a, c), (x, y) in zip(rng, supp))


def _split(f: LatticeFunction, cubes: list[Cube]) -> tuple[LatticeFunction, list[LatticeFunction], list[float]]:
    good_vals = f.values.copy()
    bad, avgs = [], []
    for q in cubes:
        rng = f.cell_range(q)
        local = f.block(rng)
        avg = float(local.mean())
        avgs.append(avg)
        sl = tuple(slice(a - o, b - o) for (a, b), o in zip(rng, f.origin))
        good_vals[sl] = avg
        bad.append(LatticeFunction(f.dim, f.level, f.denom, tuple(a for a, _ in rng), local - avg))
    return f.with_values(good_vals), bad, avgs


def cz_bounded(f: LatticeFunction, lam: float) -> CZDecomposition:
    """Maximal dyadic cubes of ``[0,1)^n`` with ``<f>_{1,P} > lam``; ``lam < <f>_P <= 2^n lam``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if f.denom != 1:
        raise LatticeMismatch("bounded decomposition uses the denominator-1 lattice")
    if np.any(f.values < 0):
        raise DomainError("the decomposition needs f >= 0")
    n = f.dim
    f = f.on_window(tuple((0, f.N) for _ in range(n)))
    win = f.window
    shift = GridShift.standard(n)
    vals = f.values
    covered = np.zeros(vals.shape, dtype=bool)
    cubes, parents = [], []
    prev_avg = None
    for k in range(0, f.level + 1):
        lay = block_layer(win, f.level, 1, shift, k, "inside")
        avg = lay.reduce(vals, "sum") / lay.size ** n
        if k == 0 and avg.max() > lam:
            raise LevelTooSmall()
        free = lay.reduce(covered.astype(float), "max") == 0
        sel = (avg > lam) & free
        for j in zip(*np.nonzero(sel)):
            cubes.append(lay.cube(j))
            parents.append(None if prev_avg is None else
                           float(prev_avg[tuple(i // 2 for i in j)]))
        covered |= lay.expand(sel.astype(float), 0.0) > 0
        prev_avg = avg
    good, bad, avgs = _split(f, cubes)
    return CZDecomposition(lam, "bounded", f, covered, f.origin, cubes, avgs, good, bad,
                           2.0 ** n, parent_averages=parents)


def level_set_window(f: LatticeFunction, lam: float) -> tuple[int, int]:
    """A cell window outside which ``M^B f <= lam``.

    An interval with average above ``lam`` is shorter than ``||f||_1 / lam``, and it must
    meet the support, so padding the support by that length on each side suffices.
    """
    (a, b), = f.support_window()
    if b <= a:
        return a, a
    l1 = float(np.abs(f.values).sum()) * f.cell_volume
    pad = int(math.ceil(l1 / lam * f.N)) + 1
    return a - pad, b + pad


MAX_UNBOUNDED_CELLS = 1 << 14


def cz_unbounded(f: LatticeFunction, lam: float, params: SystemParams | None = None) -> CZDecomposition:
    """Whitney cubes of ``{M^B f > lam}`` on the line, with ``<f>_P <= c_I lam``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if f.dim != 1 or f.denom != 1:
        raise LatticeMismatch("unbounded decomposition is for n = 1 on the denominator-1 lattice")
    if np.any(f.values < 0):
        raise DomainError("the decomposition needs f >= 0")
    params = params or euclidean_params(1)
    a, b = level_set_window(f, lam)
    if b - a > MAX_UNBOUNDED_CELLS:
        raise DomainError(f"level set window of {b - a} cells is too large; raise lambda")
    f = f.on_window(((a, b),))
    vals = f.values
    omega = (_interval_sup(vals, np.ones_like(vals)) > lam) if vals.size else np.zeros(0, bool)
    if not omega.any():
        return CZDecomposition(lam, "unbounded", f, omega, (a,), [], [], f, [],
                               params.cz_unbounded_constant)
    wd = whitney(omega, f.level, a, params)
    good, bad, avgs = _split(f, wd.cubes)
    return CZDecomposition(lam, "unbounded", f, omega, (a,), wd.cubes, avgs, good, bad,
                           params.cz_unbounded_constant, whitney=wd)
