"""Bounds-versus-estimates laboratory.

Weighted norm lower bounds from the sparse estimators are compared against the upper-bound
shapes of the weighted strong and weak type estimates, and the exponent of the dependence
on the weight characteristic is fitted on log-log data.  Nothing here certifies an upper
bound: every assertion has the form "lower bound <= c x theoretical upper bound".
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .exponents import conj, inf, ratio_conj
from .lattice import LatticeFunction, Weight, box_to_window, lp_norm
from .maximal import dyadic_max, maxfinsec_bound
from .sparse import (SparseFormSpec, strong_norm_estimate, weak_norm_estimate)
from .weights import (ExponentPair, a_infty_wilson, a_one, atwo_exponent, psi, rh,
                      thm11_rhs)


def child_seeds(seed: int, n: int) -> list[int]:
    """Per-point seeds derived from a master seed (stable across runs and job counts)."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _pmap(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# weight families -------------------------------------------------------------------

def power_weight(delta: float, level: int) -> Weight:
    """Exact cell averages of ``x^(delta - 1)`` on ``[0, 1)``.

    The average over ``[j/N, (j+1)/N)`` is ``N^(1-delta) ((j+1)^delta - j^delta) / delta``.
    """
    if not 0 < delta <= 1:
        raise DomainError("power weight exponent delta must lie in (0, 1]")
    N = 2 ** level
    if delta == 1:
        return Weight.constant(1.0, 1, level)
    j = np.arange(N, dtype=float)
    vals = N ** (1 - delta) * ((j + 1) ** delta - j ** delta) / delta
    return Weight(1, level, 1, (0,), vals)


def two_step_weight(level: int, low: float = 1.0, high: float = 2.0) -> Weight:
    N = 2 ** level
    vals = np.where(np.arange(N) < N // 2, low, high).astype(float)
    return Weight(1, level, 1, (0,), vals)


def random_a1_weight(level: int, seed: int, delta: float = 0.5) -> Weight:
    """``(M h)^delta`` for a random nonnegative ``h``; such powers are A_1 weights."""
    rng = np.random.default_rng(seed)
    h = rng.random(2 ** level) ** 6 + 1e-3
    Mh = dyadic_max(LatticeFunction.from_array(h, level))
    return Weight(1, level, 1, (0,), Mh.values ** delta)


@dataclass
class WeightFamily:
    kind: str
    parameters: list[float]
    realized: list[Weight]
    constants: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if not self.constants:
            self.constants = [{"A1": a_one(w), "Ainf": a_infty_wilson(w)} for w in self.realized]

    def __len__(self):
        return len(self.realized)


def power_family(deltas: Sequence[float], level: int = 10) -> WeightFamily:
    ws = [power_weight(d, level) for d in deltas]
    return WeightFamily("power", list(deltas), ws)


def random_a1_family(n: int, level: int, seed: int) -> WeightFamily:
    seeds = child_seeds(seed, n)
    return WeightFamily("random-A1", [float(s) for s in seeds],
                        [random_a1_weight(level, s) for s in seeds])


def two_step_family(level: int, highs: Sequence[float] = (2.0,)) -> WeightFamily:
    return WeightFamily("two-step", list(highs), [two_step_weight(level, 1.0, h) for h in highs])


# Rubio de Francia ---------------------------------------------------------------------

@dataclass(frozen=True)
class RdFConfig:
    p: float
    p0: float = 1.0
    grids: int = 1
    k_max: int = 30
    norm_bound: float | None = None

    def __post_init__(self):
        if not self.p > self.p0 >= 1:
            raise DomainError("Rubio de Francia needs p > p0 >= 1")
        if self.k_max < 0:
            raise DomainError("k_max must be nonnegative")

    @property
    def bound(self) -> float:
        """``||M_{p0}||_p <= (K (p/p0)')^{1/p0}``, used as the series denominator."""
        if self.norm_bound is not None:
            return self.norm_bound
        return maxfinsec_bound(self.grids, self.p / self.p0) ** (1 / self.p0)


@dataclass
class RdFResult:
    value: LatticeFunction
    h: LatticeFunction
    cfg: RdFConfig
    tail_bound: float       # L^p norm of the dropped terms, at most 2^-k_max ||h||_p
    a_bound: float          # (C)'s right side, 2^{p0} ||M||_{p/p0} >= (2 N)^{p0}

    def property_a(self) -> bool:
        return bool(np.all(self.h.values <= self.value.block(self.h.window)))

    def property_b(self) -> tuple[float, float]:
        p = self.cfg.p
        return lp_norm(self.value, p), 2 * lp_norm(self.h, p)

    def property_c(self) -> tuple[float, float]:
        v = self.value.power(self.cfg.p0)
        Mv = dyadic_max(v, domain=v.window_box)
        pos = v.values > 0
        a1 = float(np.max(Mv.values[pos] / v.values[pos])) if pos.any() else 1.0
        return a1, self.a_bound

    def slack(self) -> float:
        """Declared truncation slack ``2^-k_max * 10``."""
        return 2.0 ** -self.cfg.k_max * 10


def rubio_de_francia(h: LatticeFunction, cfg: RdFConfig, domain=None) -> RdFResult:
    """``sum_{k <= k_max} 2^-k M_{p0}^k h / N^k`` with ``N = cfg.bound`` (single grid)."""
    if np.any(h.values < 0):
        raise DomainError("Rubio de Francia needs h >= 0")
    domain = domain if domain is not None else [(0, 1)] * h.dim
    N = cfg.bound
    term = h.on_window(box_to_window(domain, h.level, h.denom))
    total = term
    for k in range(1, cfg.k_max + 1):
        term = dyadic_max(term, cfg.p0, domain).scale(1 / (2 * N))
        total = total.add(term)
    tail = 2.0 ** -cfg.k_max * lp_norm(h, cfg.p)
    a_bound = 2 ** cfg.p0 * N ** cfg.p0
    return RdFResult(total, h, cfg, tail, a_bound)


# theorem-shape checks ------------------------------------------------------------------

@dataclass
class ShapeRow:
    label: float
    a1: float
    ainf: float
    rh: float
    norm_lb: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.norm_lb / self.rhs

    def as_list(self) -> list:
        return [repr(self.label), repr(self.a1), repr(self.ainf), repr(self.rh),
                repr(self.norm_lb), repr(self.rhs), repr(self.ratio)]


CSV_HEADER = ["delta", "A1", "Ainf", "RH", "norm_lb", "rhs", "ratio"]


@dataclass
class ShapeReport:
    kind: str
    exponents: ExponentPair
    p: float | None
    rows: list[ShapeRow]
    c_T: float
    seed: int
    budget: int
    level: int

    @property
    def sup_ratio(self) -> float:
        return max(r.ratio for r in self.rows)

    @property
    def violations(self) -> list[ShapeRow]:
        return [r for r in self.rows if r.ratio > self.c_T * (1 + 1e-9)]

    @property
    def passed(self) -> bool:
        return not self.violations

    def trend(self) -> float | None:
        """Slope of log(ratio) against log([w]_{A1}) over rows with distinct A1."""
        pts = [(r.a1, r.ratio) for r in self.rows]
        if len({round(a, 12) for a, _ in pts}) < 3:
            return None
        return fit_exponent(pts).slope

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in self.rows:
            wr.writerow(r.as_list())
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"kind": self.kind, "p0": self.exponents.p0, "q0": _jnum(self.exponents.q0),
                "p": self.p, "c_T": self.c_T, "seed": self.seed, "budget": self.budget,
                "level": self.level, "sup_ratio": self.sup_ratio, "trend": self.trend(),
                "passed": self.passed,
                "rows": [dict(zip(CSV_HEADER, [r.label, r.a1, r.ainf, r.rh, r.norm_lb,
                                               r.rhs, r.ratio])) for r in self.rows]}


def _jnum(x: float):
    return "inf" if x == inf else x


def _rh_for(w: Weight, ep: ExponentPair, p: float) -> float:
    s = ratio_conj(ep.q0, p)
    return 1.0 if s == 1 else rh(w, s)


def verify_thm11(spec: SparseFormSpec, p: float, family: WeightFamily, c_T: float,
                 budget: int = 2000, seed: int = 0, jobs: int = 1) -> ShapeReport:
    """Strong-type lower bounds against ``c_T * thm11_rhs`` over a weight family."""
    ep = spec.exponents
    ep.check_inside(p)
    seeds = child_seeds(seed, len(family))

    def one(i):
        w = family.realized[i]
        est = strong_norm_estimate(spec, p, w, budget, seeds[i])
        c = family.constants[i]
        return ShapeRow(family.parameters[i], c["A1"], c["Ainf"], _rh_for(w, ep, p),
                        est.value, thm11_rhs(w, p, ep))

    rows = _pmap(one, range(len(family)), jobs)
    return ShapeReport("thm11", ep, p, rows, c_T, seed, budget, family.realized[0].level)


def verify_thm12(spec: SparseFormSpec, family: WeightFamily, c_T: float, budget: int = 2000,
                 seed: int = 0, jobs: int = 1) -> ShapeReport:
    """Weak-type ``(p0, p0)`` lower bounds against ``c_T * psi(w)``."""
    ep = spec.exponents
    seeds = child_seeds(seed, len(family))

    def one(i):
        w = family.realized[i]
        est = weak_norm_estimate(spec, ep.p0, w, budget, seeds[i])
        c = family.constants[i]
        s = 1.0 if ep.q0 == inf else ratio_conj(ep.q0, ep.p0)
        return ShapeRow(family.parameters[i], c["A1"], c["Ainf"],
                        1.0 if s == 1 else rh(w, s), est.value, psi(w, ep))

    rows = _pmap(one, range(len(family)), jobs)
    return ShapeReport("thm12", ep, None, rows, c_T, seed, budget, family.realized[0].level)


def verify_dual(spec: SparseFormSpec, family: WeightFamily, c_dual: float, budget: int = 500,
                seed: int = 0, jobs: int = 1) -> ShapeReport:
    """Dual weak-type search per unit ``||f||_{q0'}`` against the calibrated right side.

    The ``rhs`` column is ``c_dual (...)^{1/q0'}`` and ``c_T`` is 1, so passing means
    ``lhs <= rhs`` for every member.
    """
    from .sparse import dual_weak_check
    seeds = child_seeds(seed, len(family))

    def one(i):
        w = family.realized[i]
        chk = dual_weak_check(spec, w, c_dual, budget=budget, seed=seeds[i])
        c = family.constants[i]
        return ShapeRow(family.parameters[i], c["A1"], c["Ainf"], 1.0, chk.lhs, chk.rhs)

    rows = _pmap(one, range(len(family)), jobs)
    return ShapeReport("dual", spec.exponents, None, rows, 1.0, seed, budget,
                       family.realized[0].level)


# exponent fits ---------------------------------------------------------------------

@dataclass
class ExponentFit:
    points: list[tuple[float, float]]
    slope: float
    intercept: float
    residuals: list[float]

    @property
    def rms(self) -> float:
        return math.sqrt(math.fsum(r * r for r in self.residuals) / len(self.residuals))

    def to_json(self) -> dict:
        return {"points": [list(p) for p in self.points], "slope": self.slope,
                "intercept": self.intercept, "residual_rms": self.rms}


def fit_exponent(points: Sequence[tuple[float, float]]) -> ExponentFit:
    """Least-squares slope of ``log y`` on ``log x``."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise DomainError("an exponent fit needs at least 3 points")
    if any(not (x > 0 and y > 0) for x, y in pts):
        raise DomainError("exponent fits need positive coordinates")
    lx = [math.log(x) for x, _ in pts]
    ly = [math.log(y) for _, y in pts]
    mx, my = math.fsum(lx) / len(lx), math.fsum(ly) / len(ly)
    dx = [a - mx for a in lx]
    dy = [b - my for b in ly]
    sxx = math.fsum(a * a for a in dx)
    if sxx == 0:
        raise DomainError("exponent fits need at least two distinct abscissae")
    slope = math.fsum(a * b for a, b in zip(dx, dy)) / sxx
    icpt = my - slope * mx
    res = [b - (icpt + slope * a) for a, b in zip(lx, ly)]
    return ExponentFit(pts, slope, icpt, res)


@dataclass
class EndpointFit:
    alpha: float
    gamma: float
    low: ExponentFit
    high: ExponentFit

    def ceilings(self, ep: ExponentPair, tol: float = 0.1) -> tuple[bool, bool]:
        return self.alpha <= 1 / ep.p0 + tol, self.gamma <= 1 / ep.q0c + tol

    def to_json(self) -> dict:
        return {"alpha_hat": self.alpha, "gamma_hat": self.gamma, "low": self.low.to_json(),
                "high": self.high.to_json(), "note": "fitted proxies on a finite p-grid"}


def unweighted_norm(spec: SparseFormSpec, p: float, level: int, budget: int, seed: int) -> float:
    w = Weight.constant(1.0, spec.collection.dim or 1, level)
    return strong_norm_estimate(spec, p, w, budget, seed).value


def estimate_endpoint_exponents(spec: SparseFormSpec, low_grid: Sequence[float],
                                high_grid: Sequence[float], level: int = 10,
                                budget: int = 2000, seed: int = 0,
                                jobs: int = 1) -> EndpointFit:
    """``alpha`` from ``log ||T||_p`` against ``-log(p - p0)`` as ``p -> p0``; ``gamma``
    against ``-log(q0 - p)``, or against ``log p`` when ``q0 = inf``."""
    ep = spec.exponents
    for p in list(low_grid) + list(high_grid):
        ep.check_inside(p)
    grid = list(low_grid) + list(high_grid)
    seeds = child_seeds(seed, len(grid))
    norms = _pmap(lambda i: unweighted_norm(spec, grid[i], level, budget, seeds[i]),
                  range(len(grid)), jobs)
    lo, hi = norms[:len(low_grid)], norms[len(low_grid):]
    low = fit_exponent([(1 / (p - ep.p0), n) for p, n in zip(low_grid, lo)])
    if ep.q0 == inf:
        high = fit_exponent([(p, n) for p, n in zip(high_grid, hi)])
    else:
        high = fit_exponent([(1 / (ep.q0 - p), n) for p, n in zip(high_grid, hi)])
    return EndpointFit(low.slope, high.slope, low, high)


@dataclass
class OptimalityReport:
    exponents: ExponentPair
    p: float
    beta: ExponentFit
    endpoint: EndpointFit | None
    predicted: float
    tol: float

    @property
    def implied(self) -> float | None:
        """``max(p0/(p - p0) alpha, (q0/p)' gamma)``."""
        if self.endpoint is None:
            return None
        ep = self.exponents
        return max(ep.p0 / (self.p - ep.p0) * self.endpoint.alpha,
                   ratio_conj(ep.q0, self.p) * self.endpoint.gamma)

    @property
    def passed(self) -> bool:
        return abs(self.beta.slope - self.predicted) <= self.tol

    def to_json(self) -> dict:
        return {"p0": self.exponents.p0, "q0": _jnum(self.exponents.q0), "p": self.p,
                "beta_hat": self.beta.slope, "predicted": self.predicted,
                "implied_lower": self.implied, "tolerance": self.tol, "passed": self.passed,
                "fit": self.beta.to_json(),
                "endpoint": None if self.endpoint is None else self.endpoint.to_json()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["constant", "norm_lb"])
        for x, y in self.beta.points:
            wr.writerow([repr(x), repr(y)])
        wr.writerow([])
        wr.writerow(["beta_hat", "predicted", "implied_lower", "tolerance", "passed"])
        wr.writerow([repr(self.beta.slope), repr(self.predicted), repr(self.implied),
                     repr(self.tol), self.passed])
        return buf.getvalue()


def optimality_report(spec: SparseFormSpec, p: float, family: WeightFamily,
                      endpoint: EndpointFit | None = None, budget: int = 2000, seed: int = 0,
                      tol: float = 0.2, jobs: int = 1) -> OptimalityReport:
    """Fit ``beta`` in ``||T||_{L^p(w)} ~ [w]_{A1}^beta`` over the family and compare with
    ``max(1/(p - p0), (q0 - 1)/(q0 - p))``."""
    ep = spec.exponents
    ep.check_inside(p)
    seeds = child_seeds(seed, len(family))
    norms = _pmap(lambda i: strong_norm_estimate(spec, p, family.realized[i], budget,
                                                 seeds[i]).value, range(len(family)), jobs)
    pts = [(c["A1"], n) for c, n in zip(family.constants, norms)]
    return OptimalityReport(ep, p, fit_exponent(pts), endpoint, atwo_exponent(p, ep), tol)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
