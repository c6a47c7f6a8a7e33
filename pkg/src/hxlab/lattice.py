"""Piecewise-constant functions and weights on a refinement lattice.

A lattice with level ``K`` and denominator ``d`` has cells of side ``h = 2^-K / d``; the
cell with integer index ``i`` covers ``prod_t [i_t h, (i_t + 1) h)``.  With ``d = 3``
every cube of every translated system at level ``k <= K`` is a union of cells.

Values are stored densely on a rectangular window of cells (``origin`` plus the array
shape); cells outside the window are zero.  Geometry and indices are exact integers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, LatticeMismatch, ParseError, OverflowDomain
from .exponents import conj
from .grid import Cube, GridShift

Window = tuple[tuple[int, int], ...]


def cells_per_unit(level: int, denom: int) -> int:
    if level < 0:
        raise DomainError("lattice level must be >= 0")
    if denom not in (1, 3):
        raise DomainError(f"lattice denominator must be 1 or 3, got {denom}")
    return denom * 2 ** level


def box_to_window(box: Sequence, level: int, denom: int) -> Window:
    """Cell index ranges of a box whose endpoints lie on the lattice."""
    N = cells_per_unit(level, denom)
    out = []
    for lo, hi in box:
        a, b = Fraction(lo) * N, Fraction(hi) * N
        if a.denominator != 1 or b.denominator != 1:
            raise LatticeMismatch()
        if b < a:
            raise DomainError("box has hi < lo")
        out.append((int(a), int(b)))
    return tuple(out)


def _intersect(a: Window, b: Window) -> Window:
    return tuple((max(x0, y0), min(x1, y1)) for (x0, x1), (y0, y1) in zip(a, b))


def _union(a: Window, b: Window) -> Window:
    return tuple((min(x0, y0), max(x1, y1)) for (x0, x1), (y0, y1) in zip(a, b))


def _contains(outer: Window, inner: Window) -> bool:
    return all(a <= c and d <= b for (a, b), (c, d) in zip(outer, inner))


def _empty(w: Window) -> bool:
    return any(b <= a for a, b in w)


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    dim: int
    level: int
    denom: int
    origin: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        cells_per_unit(self.level, self.denom)
        vals = np.array(self.values, dtype=float)
        if vals.ndim != self.dim or len(self.origin) != self.dim:
            raise DomainError("values must be a dim-dimensional array matching origin")
        if not np.all(np.isfinite(vals)):
            raise DomainError("lattice values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", tuple(int(o) for o in self.origin))

    # construction

    @classmethod
    def zeros(cls, dim: int, level: int, denom: int = 1, box=None) -> "LatticeFunction":
        box = box if box is not None else [(0, 1)] * dim
        win = box_to_window(box, level, denom)
        return cls(dim, level, denom, tuple(a for a, _ in win),
                   np.zeros(tuple(b - a for a, b in win)))

    @classmethod
    def from_array(cls, values, level: int, denom: int = 1, origin=None) -> "LatticeFunction":
        values = np.asarray(values, dtype=float)
        origin = origin if origin is not None else (0,) * values.ndim
        return cls(values.ndim, level, denom, tuple(origin), values)

    @classmethod
    def from_cells(cls, dim: int, level: int, denom: int, cells: dict) -> "LatticeFunction":
        if not cells:
            return cls(dim, level, denom, (0,) * dim, np.zeros((0,) * dim))
        idx = np.array([tuple(k) for k in cells], dtype=np.int64).reshape(len(cells), dim)
        lo, hi = idx.min(axis=0), idx.max(axis=0) + 1
        vals = np.zeros(tuple(hi - lo))
        for k, v in cells.items():
            vals[tuple(np.asarray(k) - lo)] = v
        return cls(dim, level, denom, tuple(lo), vals)

    @classmethod
    def indicator(cls, box, dim: int, level: int, denom: int = 1) -> "LatticeFunction":
        win = box_to_window(box, level, denom)
        return cls(dim, level, denom, tuple(a for a, _ in win),
                   np.ones(tuple(b - a for a, b in win)))

    @classmethod
    def from_callable(cls, fn, box, level: int, denom: int = 1) -> "LatticeFunction":
        """Sample ``fn`` at cell midpoints; ``fn`` receives one coordinate array per axis."""
        win = box_to_window(box, level, denom)
        N = cells_per_unit(level, denom)
        axes = [(np.arange(a, b) + 0.5) / N for a, b in win]
        grids = np.meshgrid(*axes, indexing="ij")
        return cls(len(win), level, denom, tuple(a for a, _ in win), np.asarray(fn(*grids), float))

    def with_values(self, values) -> "LatticeFunction":
        return LatticeFunction(self.dim, self.level, self.denom, self.origin, values)

    # geometry

    @property
    def N(self) -> int:
        return cells_per_unit(self.level, self.denom)

    @property
    def cell_volume(self) -> float:
        return float(Fraction(1, self.N) ** self.dim)

    @property
    def window(self) -> Window:
        return tuple((o, o + s) for o, s in zip(self.origin, self.values.shape))

    @property
    def window_box(self) -> tuple[tuple[Fraction, Fraction], ...]:
        return tuple((Fraction(a, self.N), Fraction(b, self.N)) for a, b in self.window)

    def cells(self) -> dict[tuple[int, ...], float]:
        out = {}
        for pos in zip(*np.nonzero(self.values)):
            out[tuple(int(p) + o for p, o in zip(pos, self.origin))] = float(self.values[pos])
        return out

    def value_at(self, idx: Sequence[int]) -> float:
        pos = tuple(i - o for i, o in zip(idx, self.origin))
        if all(0 <= p < s for p, s in zip(pos, self.values.shape)):
            return float(self.values[pos])
        return 0.0

    def cell_range(self, q: Cube) -> Window:
        if q.dim != self.dim:
            raise LatticeMismatch("cube dimension does not match")
        return box_to_window(q.box, self.level, self.denom)

    def compatible(self, other: "LatticeFunction") -> None:
        if (self.dim, self.level, self.denom) != (other.dim, other.level, other.denom):
            raise LatticeMismatch()

    def support_window(self) -> Window:
        nz = np.nonzero(self.values)
        if len(nz[0]) == 0:
            return tuple((o, o) for o in self.origin)
        return tuple((int(a.min()) + o, int(a.max()) + 1 + o) for a, o in zip(nz, self.origin))

    def block(self, win: Window) -> np.ndarray:
        """Values on ``win``, zero outside the stored window."""
        out = np.zeros(tuple(max(b - a, 0) for a, b in win))
        inter = _intersect(win, self.window)
        if _empty(inter) or _empty(win):
            return out
        dst = tuple(slice(a - w0, b - w0) for (a, b), (w0, _) in zip(inter, win))
        src = tuple(slice(a - o, b - o) for (a, b), o in zip(inter, self.origin))
        out[dst] = self.values[src]
        return out

    def on_window(self, win: Window) -> "LatticeFunction":
        return LatticeFunction(self.dim, self.level, self.denom, tuple(a for a, _ in win), self.block(win))

    # pointwise operations

    def power(self, a: float) -> "LatticeFunction":
        if a != int(a) and np.any(self.values < 0):
            raise DomainError("negative base with fractional exponent")
        if a < 0 and np.any(self.values == 0):
            raise DomainError("zero base with negative exponent")
        with np.errstate(over="raise"):
            try:
                vals = np.power(self.values, a) if a != 0 else np.ones_like(self.values)
            except FloatingPointError as exc:
                raise DomainError("power overflows") from exc
        return self.with_values(vals)

    def scale(self, c: float) -> "LatticeFunction":
        return self.with_values(self.values * c)

    def abs(self) -> "LatticeFunction":
        return self.with_values(np.abs(self.values))

    def _binary(self, other: "LatticeFunction", op, union: bool) -> "LatticeFunction":
        self.compatible(other)
        win = _union(self.window, other.window) if union else _intersect(self.window, other.window)
        win = tuple((a, max(a, b)) for a, b in win)
        return LatticeFunction(self.dim, self.level, self.denom, tuple(a for a, _ in win),
                               op(self.block(win), other.block(win)))

    def add(self, other: "LatticeFunction") -> "LatticeFunction":
        return self._binary(other, np.add, union=True)

    def sub(self, other: "LatticeFunction") -> "LatticeFunction":
        return self._binary(other, np.subtract, union=True)

    def mul(self, other: "LatticeFunction") -> "LatticeFunction":
        return self._binary(other, np.multiply, union=False)

    def maximum(self, other: "LatticeFunction") -> "LatticeFunction":
        return self._binary(other, np.maximum, union=True)

    def restrict(self, box) -> "LatticeFunction":
        win = box_to_window(box, self.level, self.denom)
        return self.on_window(win)

    def refine(self, levels: int = 1) -> "LatticeFunction":
        """The same step function on the lattice ``K + levels``."""
        f = 2 ** levels
        vals = self.values
        for ax in range(self.dim):
            vals = np.repeat(vals, f, axis=ax)
        return LatticeFunction(self.dim, self.level + levels, self.denom,
                               tuple(o * f for o in self.origin), vals)

    def to_thirds(self) -> "LatticeFunction":
        """Re-express a ``d = 1`` function on the ``d = 3`` lattice of the same level."""
        if self.denom == 3:
            return self
        vals = self.values
        for ax in range(self.dim):
            vals = np.repeat(vals, 3, axis=ax)
        return LatticeFunction(self.dim, self.level, 3, tuple(o * 3 for o in self.origin), vals)

    def integral(self) -> float:
        return float(math.fsum(self.values.ravel())) * self.cell_volume

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    # serialization

    def to_json(self) -> dict:
        return {"dim": self.dim, "level": self.level, "denominator": self.denom,
                "cells": [{"idx": list(k), "value": v} for k, v in sorted(self.cells().items())]}

    def __repr__(self):
        return (f"LatticeFunction(dim={self.dim}, K={self.level}, d={self.denom}, "
                f"window={self.window})")


class Weight(LatticeFunction):
    """A positive lattice function that is total on its declared domain box.

    The stored window is exactly the domain; any read outside it raises.
    """

    def __post_init__(self):
        super().__post_init__()
        if self.values.size == 0:
            raise DomainError("weight domain is empty")
        if np.any(self.values <= 0):
            raise DomainError("weight values must be positive on the domain")

    @classmethod
    def from_function(cls, f: LatticeFunction) -> "Weight":
        return cls(f.dim, f.level, f.denom, f.origin, f.values)

    @classmethod
    def constant(cls, c: float, dim: int, level: int, denom: int = 1, box=None) -> "Weight":
        box = box if box is not None else [(0, 1)] * dim
        win = box_to_window(box, level, denom)
        return cls(dim, level, denom, tuple(a for a, _ in win),
                   np.full(tuple(b - a for a, b in win), float(c)))

    @property
    def domain(self):
        return self.window_box

    def block(self, win: Window) -> np.ndarray:
        if not _empty(win) and not _contains(self.window, win):
            raise DomainError("operation touches cells outside the weight domain")
        return super().block(win)

    def with_values(self, values) -> "Weight":
        return Weight(self.dim, self.level, self.denom, self.origin, values)

    def power(self, a: float) -> "Weight":
        with np.errstate(over="ignore", under="ignore"):
            vals = np.power(self.values, a)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise OverflowDomain()
        return self.with_values(vals)

    def refine(self, levels: int = 1) -> "Weight":
        return Weight.from_function(LatticeFunction.refine(self, levels))

    def to_thirds(self) -> "Weight":
        return Weight.from_function(LatticeFunction.to_thirds(self))

    def measure_window(self, win: Window) -> float:
        return float(np.sum(self.block(win))) * self.cell_volume

    def to_json(self) -> dict:
        out = super().to_json()
        out["domain"] = [[str(a), str(b)] for a, b in self.domain]
        return out

    def __repr__(self):
        return f"Weight(dim={self.dim}, K={self.level}, d={self.denom}, domain={self.window})"


def _region(f: LatticeFunction, w: LatticeFunction | None) -> Window:
    """Window over which a weighted quantity of ``f`` must be summed."""
    if w is None:
        return f.window
    f.compatible(w)
    if isinstance(w, Weight):
        supp = f.support_window()
        if not _empty(supp) and not _contains(w.window, supp):
            raise DomainError("function support leaves the weight domain")
        return w.window
    return _intersect(f.window, w.window)


def average(f: LatticeFunction, p: float, q: Cube) -> float:
    """``<f>_{p,Q}``, exact up to floating-point sums."""
    if not p > 0:
        raise DomainError("average exponent must be positive")
    vals = np.abs(f.block(f.cell_range(q)))
    if p == math.inf:
        return float(vals.max())
    if p == 1:
        return float(vals.mean())
    return float(np.mean(vals ** p) ** (1.0 / p))


def pairing(f: LatticeFunction, g: LatticeFunction) -> float:
    f.compatible(g)
    win = _intersect(f.window, g.window)
    if _empty(win):
        return 0.0
    return float(math.fsum((f.block(win) * g.block(win)).ravel())) * f.cell_volume


def lp_norm(f: LatticeFunction, p: float, w: LatticeFunction | None = None) -> float:
    """``(sum |f|^p w h^n)^{1/p}``; ``w = None`` means Lebesgue measure."""
    if not p > 0:
        raise DomainError("norm exponent must be positive")
    win = _region(f, w)
    if _empty(win):
        return 0.0
    vals = np.abs(f.block(win))
    if p == math.inf:
        if w is None:
            return float(vals.max())
        return float(vals[w.block(win) > 0].max(initial=0.0))
    dens = vals ** p if p != 1 else vals
    if w is not None:
        dens = dens * w.block(win)
    return float(math.fsum(dens.ravel()) * f.cell_volume) ** (1.0 / p)


def weak_lp(f: LatticeFunction, p: float, w: LatticeFunction | None = None) -> float:
    """``sup_lambda lambda w(|f| > lambda)^{1/p}``.

    For a step function the supremum is approached as ``lambda`` rises to a value ``v``
    taken by ``|f|``, so it equals ``max_v v w(|f| >= v)^{1/p}`` over those values.
    """
    if not 0 < p < math.inf:
        raise DomainError("weak norm exponent must lie in (0, inf)")
    win = _region(f, w)
    if _empty(win):
        return 0.0
    vals = np.abs(f.block(win)).ravel()
    mass = (w.block(win).ravel() if w is not None else np.ones_like(vals)) * f.cell_volume
    keep = vals > 0
    vals, mass = vals[keep], mass[keep]
    if vals.size == 0:
        return 0.0
    order = np.argsort(-vals, kind="stable")
    vals, mass = vals[order], mass[order]
    tail = np.cumsum(mass)
    # w(|f| >= v) for each distinct v is the cumulative mass at the last tie
    last = np.r_[vals[1:] != vals[:-1], True]
    return float(np.max(vals[last] * tail[last] ** (1.0 / p)))


def conjugate(p: float) -> float:
    return conj(p)


def _num(v, field):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ParseError("expected a number", field)
    try:
        return Fraction(v) if isinstance(v, str) else v
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad number {v!r}", field) from exc


def parse_function(obj: dict, weight: bool | None = None) -> LatticeFunction:
    """Build a function (or a :class:`Weight` if ``domain`` is present) from parsed JSON."""
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object")
    for key in ("dim", "level", "denominator", "cells"):
        if key not in obj:
            raise ParseError("missing", key)
    dim, level, denom = obj["dim"], obj["level"], obj["denominator"]
    for key, v in (("dim", dim), ("level", level), ("denominator", denom)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ParseError("expected an integer", key)
    if dim < 1:
        raise ParseError("must be >= 1", "dim")
    if level < 0:
        raise ParseError("must be >= 0", "level")
    if denom not in (1, 3):
        raise ParseError("must be 1 or 3", "denominator")
    if not isinstance(obj["cells"], list):
        raise ParseError("expected a list", "cells")
    cells = {}
    for j, c in enumerate(obj["cells"]):
        fld = f"cells[{j}]"
        if not isinstance(c, dict) or "idx" not in c or "value" not in c:
            raise ParseError("expected {idx, value}", fld)
        idx = c["idx"]
        if (not isinstance(idx, list) or len(idx) != dim
                or any(isinstance(i, bool) or not isinstance(i, int) for i in idx)):
            raise ParseError(f"idx must be a list of {dim} integers", fld + ".idx")
        val = _num(c["value"], fld + ".value")
        val = float(val)
        if not math.isfinite(val):
            raise ParseError("value must be finite", fld + ".value")
        key = tuple(idx)
        if key in cells:
            raise ParseError(f"duplicate cell index {idx}", fld + ".idx")
        cells[key] = val
    want_weight = ("domain" in obj) if weight is None else weight
    if not want_weight:
        return LatticeFunction.from_cells(dim, level, denom, cells)
    if "domain" not in obj:
        raise ParseError("missing (required for weights)", "domain")
    dom = obj["domain"]
    if not isinstance(dom, list) or len(dom) != dim:
        raise ParseError(f"expected {dim} [lo, hi] pairs", "domain")
    box = []
    for t, pair in enumerate(dom):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError("expected [lo, hi]", f"domain[{t}]")
        box.append((_num(pair[0], f"domain[{t}]"), _num(pair[1], f"domain[{t}]")))
    try:
        win = box_to_window([(Fraction(a), Fraction(b)) for a, b in box], level, denom)
    except LatticeMismatch as exc:
        raise ParseError("domain endpoints are not on the lattice", "domain") from exc
    if _empty(win):
        raise ParseError("domain is empty", "domain")
    vals = np.zeros(tuple(b - a for a, b in win))
    mapped = np.zeros(vals.shape, dtype=bool)
    for key, v in cells.items():
        pos = tuple(i - a for i, (a, _) in zip(key, win))
        if not all(0 <= p_ < s for p_, s in zip(pos, vals.shape)):
            raise ParseError(f"cell {list(key)} outside the domain", "cells")
        if v <= 0:
            raise ParseError(f"weight value at {list(key)} must be positive", "cells")
        vals[pos] = v
        mapped[pos] = True
    if not mapped.all():
        raise ParseError("every cell of the domain must be mapped", "cells")
    return Weight(dim, level, denom, tuple(a for a, _ in win), vals)


def load_function(path, weight: bool | None = None) -> LatticeFunction:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from exc
    return parse_function(obj, weight)


def lattice_of(objs: Iterable[LatticeFunction]) -> tuple[int, int, int]:
    objs = list(objs)
    for o in objs[1:]:
        objs[0].compatible(o)
    return objs[0].dim, objs[0].level, objs[0].denom


# Block layers -------------------------------------------------------------

@dataclass(frozen=True)
class BlockLayer:
    """The cubes of one grid at one level, laid over a window of cells.

    Cube ``j`` (a multi-index into ``counts``) covers cells
    ``start + j * size`` to ``start + (j + 1) * size`` on each axis.
    """

    shift: GridShift
    level: int
    size: int
    window: Window
    first: tuple[int, ...]   # grid index m of cube j = 0
    start: tuple[int, ...]   # absolute cell index where cube j = 0 begins
    counts: tuple[int, ...]

    @property
    def empty(self) -> bool:
        return any(c <= 0 for c in self.counts)

    def cube(self, j: Sequence[int]) -> Cube:
        return Cube(self.shift, self.level, tuple(int(m + a) for m, a in zip(self.first, j)))

    def covered(self) -> Window:
        return tuple((s, s + c * self.size) for s, c in zip(self.start, self.counts))

    def _cropped(self, arr: np.ndarray, fill: float) -> np.ndarray:
        """``arr`` (on ``window``) restricted or padded to the covered window."""
        cov = self.covered()
        out = np.full(tuple(b - a for a, b in cov), fill, dtype=float)
        inter = _intersect(cov, self.window)
        if _empty(inter):
            return out
        dst = tuple(slice(a - c0, b - c0) for (a, b), (c0, _) in zip(inter, cov))
        src = tuple(slice(a - w0, b - w0) for (a, b), (w0, _) in zip(inter, self.window))
        out[dst] = arr[src]
        return out

    def reduce(self, arr: np.ndarray, op: str = "sum", fill: float = 0.0) -> np.ndarray:
        if self.empty:
            return np.zeros(self.counts if all(c >= 0 for c in self.counts) else (0,) * len(self.counts))
        a = self._cropped(arr, fill)
        shape = []
        for c in self.counts:
            shape += [c, self.size]
        a = a.reshape(shape)
        axes = tuple(range(1, 2 * len(self.counts), 2))
        return {"sum": np.sum, "max": np.max, "min": np.min}[op](a, axis=axes)

    def expand(self, vals: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Broadcast per-cube values back onto ``window`` (``fill`` where uncovered)."""
        out = np.full(tuple(b - a for a, b in self.window), fill, dtype=float)
        if self.empty:
            return out
        big = vals
        for ax in range(len(self.counts)):
            big = np.repeat(big, self.size, axis=ax)
        cov = self.covered()
        inter = _intersect(cov, self.window)
        if _empty(inter):
            return out
        dst = tuple(slice(a - w0, b - w0) for (a, b), (w0, _) in zip(inter, self.window))
        src = tuple(slice(a - c0, b - c0) for (a, b), (c0, _) in zip(inter, cov))
        out[dst] = big[src]
        return out


def block_layer(window: Window, level: int, denom: int, shift: GridShift, k: int,
                mode: str = "inside") -> BlockLayer:
    """Cubes of ``shift`` at level ``k`` that lie inside (``mode="inside"``) or meet
    (``mode="meet"``) the cell window of a lattice ``(level, denom)``."""
    if k > level:
        raise DomainError("cube level exceeds the lattice level")
    size = denom * 2 ** (level - k)
    sign = -1 if k % 2 else 1
    first, start, counts = [], [], []
    for (a, b), s in zip(window, shift.digits):
        num = sign * s * size
        if num % 3:
            raise LatticeMismatch("shifted grids need the denominator-3 lattice")
        off = num // 3
        if mode == "inside":
            m0 = -((off - a) // size)  # ceil((a - off) / size)
            m1 = (b - off) // size
        elif mode == "meet":
            m0 = (a - off) // size
            m1 = -((off - b) // size)
        else:
            raise DomainError(f"unknown layer mode {mode!r}")
        first.append(m0)
        start.append(m0 * size + off)
        counts.append(max(m1 - m0, 0))
    return BlockLayer(shift, k, size, window, tuple(first), tuple(start), tuple(counts))


def coarsest_level(window: Window, level: int, denom: int) -> int:
    """Smallest ``k`` whose side fits inside the window on every axis."""
    width = min(b - a for a, b in window)
    if width < 1:
        raise DomainError("empty window")
    # need denom * 2^(level-k) <= width
    j = int(math.floor(math.log2(width / denom))) if width >= denom else -1
    while denom * 2 ** (j + 1) <= width:
        j += 1
    while j >= 0 and denom * 2 ** j > width:
        j -= 1
    return level - j
