"""Dyadic, interval and weighted maximal operators on lattice functions.

Admissible sets are taken inside a domain box (by default the weight's domain, or the unit
cube).  For the dyadic variants they are the grid cubes of level ``<= K`` contained in the
domain, plus the base cells, so ``|f| <= Mf`` always.  For the interval variants
(``n = 1``) they are the intervals with lattice endpoints inside the domain that contain
the whole cell; this is the step-function part of the ball maximal function, which is
itself not piecewise constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LatticeMismatch
from .exponents import conj
from .grid import GridShift
from .lattice import (LatticeFunction, Weight, block_layer, box_to_window, coarsest_level,
                      lp_norm, weak_lp)
from .weights import Check, a_infty_wilson

VARIANTS = ("dyadic-single-grid", "dyadic-all-shifts", "interval-ball", "weighted-ball")


@dataclass(frozen=True)
class MaximalConfig:
    variant: str = "dyadic-single-grid"
    q: float = 1.0
    shift: GridShift | None = None
    weight: Weight | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown maximal variant {self.variant!r}")
        if not self.q >= 1:
            raise DomainError("maximal exponent q must be >= 1")
        if self.variant == "weighted-ball" and self.weight is None:
            raise DomainError("weighted-ball needs a weight")


def _domain_window(f: LatticeFunction, domain) -> tuple:
    if domain is None:
        if isinstance(f, Weight):
            return f.window
        domain = [(0, 1)] * f.dim
    win = box_to_window(domain, f.level, f.denom)
    supp = f.support_window()
    if any(b > a for a, b in supp) and not all(
            w0 <= a and b <= w1 for (a, b), (w0, w1) in zip(supp, win)):
        raise DomainError("function support leaves the maximal-function domain")
    return win


def _dyadic(vals: np.ndarray, win, level, denom, shifts) -> np.ndarray:
    out = vals.copy()
    k0 = coarsest_level(win, level, denom)
    for s in shifts:
        for k in range(k0, level + 1):
            lay = block_layer(win, level, denom, s, k, "inside")
            if lay.empty:
                continue
            avg = lay.reduce(vals, "sum") / lay.size ** len(win)
            np.maximum(out, lay.expand(avg, 0.0), out=out)
    return out


def _interval_sup(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """``max over u <= c < v`` of ``sum num[u:v] / sum den[u:v]`` for every cell ``c``.

    One pass per left endpoint ``u``: a suffix maximum over right endpoints gives the best
    interval starting at ``u`` and reaching past each ``c >= u``.  O(N^2) time, O(N) memory.
    """
    N = num.size
    S = np.concatenate([[0.0], np.cumsum(num)])
    D = np.concatenate([[0.0], np.cumsum(den)])
    out = np.full(N, -np.inf)
    for u in range(N):
        row = (S[u + 1:] - S[u]) / (D[u + 1:] - D[u])
        best = np.maximum.accumulate(row[::-1])[::-1]
        np.maximum(out[u:], best, out=out[u:])
    return out


def maximal(f: LatticeFunction, cfg: MaximalConfig = MaximalConfig(), domain=None) -> LatticeFunction:
    """``x -> sup_{Q ∋ x} <f>_{q,Q}`` over the admissible sets of ``cfg``, on the domain."""
    win = _domain_window(f, domain)
    vals = np.abs(f.block(win))
    q = cfg.q
    powered = vals ** q if q != 1 else vals
    if cfg.variant in ("dyadic-single-grid", "dyadic-all-shifts"):
        if cfg.variant == "dyadic-all-shifts":
            if f.denom != 3:
                raise LatticeMismatch("all-shifts maximal needs the denominator-3 lattice")
            shifts = GridShift.all(f.dim)
        else:
            shifts = [cfg.shift or GridShift.standard(f.dim)]
        out = _dyadic(powered, win, f.level, f.denom, shifts)
    else:
        if f.dim != 1:
            raise DomainError("interval maximal operators are one-dimensional")
        if cfg.variant == "interval-ball":
            out = _interval_sup(powered, np.ones_like(powered))
        else:
            w = cfg.weight
            f.compatible(w)
            wv = w.block(win)
            out = _interval_sup(powered * wv, wv)
    if q != 1:
        out = out ** (1.0 / q)
    return LatticeFunction(f.dim, f.level, f.denom, tuple(a for a, _ in win), out)


def dyadic_max(f: LatticeFunction, q: float = 1.0, domain=None, shift=None) -> LatticeFunction:
    return maximal(f, MaximalConfig("dyadic-single-grid", q, shift), domain)


def ball_max(f: LatticeFunction, q: float = 1.0, domain=None) -> LatticeFunction:
    return maximal(f, MaximalConfig("interval-ball", q), domain)


def maxfinsec_bound(grids: int, p: float) -> float:
    """``K p'``: an upper bound for ``||M||_{L^p}`` when ``K`` dyadic grids are in play."""
    return grids * conj(p)


def fs_check(f: LatticeFunction, w: Weight) -> Check:
    """Weak Fefferman-Stein: ``||Mf||_{L^{1,inf}(w)} <= ||f||_{L^1(Mw)}``, constant 1."""
    dom = w.domain
    Mf = dyadic_max(f, domain=dom)
    Mw = dyadic_max(w, domain=dom)
    return Check(weak_lp(Mf, 1, w), lp_norm(f, 1, Mw))


def fs_strong_constant(p: float, q: float) -> float:
    return conj(p / q) ** (1 / q)


def fs_strong_check(f: LatticeFunction, w: Weight, p: float, q: float) -> Check:
    """``||M_q f||_{L^p(w)} <= [(p/q)']^{1/q} ||f||_{L^p(Mw)}`` for ``1 <= q < p``."""
    if not 1 <= q < p < math.inf:
        raise DomainError("need 1 <= q < p < inf")
    dom = w.domain
    lhs = lp_norm(dyadic_max(f, q, dom), p, w)
    rhs = fs_strong_constant(p, q) * lp_norm(f, p, dyadic_max(w, domain=dom))
    return Check(lhs, rhs)


@dataclass(frozen=True)
class RatioCheck:
    ratio: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.ratio <= self.bound * (1 + 1e-9)

    def __iter__(self):
        return iter((self.ratio, self.passed))


def kolmogorov_ratio(f: LatticeFunction, delta: float, domain=None) -> float:
    """``(1 - delta) max M((Mf)^delta) / (Mf)^delta`` over cells where ``Mf > 0``."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    Mf = dyadic_max(f, domain=domain)
    g = Mf.power(delta)
    Mg = dyadic_max(g, domain=Mf.window_box)
    pos = g.values > 0
    if not pos.any():
        return 0.0
    return float((1 - delta) * np.max(Mg.values[pos] / g.values[pos]))


def kolmogorov_check(f: LatticeFunction, delta: float, c_kol: float, domain=None) -> RatioCheck:
    return RatioCheck(kolmogorov_ratio(f, delta, domain), c_kol)


def maxwduo_constant(p: float, q: float) -> float:
    return ((p * q - 1) / (q - 1)) ** (1 - 1 / (p * q))


def maxwduo_check(f: LatticeFunction, w: Weight, p: float, q: float) -> Check:
    """``||Mf||_{L^{p'}((M_q w)^{1-p'})} <= ((pq-1)/(q-1))^{1-1/(pq)} ||f||_{L^{p'}(w^{1-p'})}``."""
    if not (1 < p < math.inf and 1 < q < math.inf):
        raise DomainError("need 1 < p, q < inf")
    dom = w.domain
    pc = conj(p)
    Mf = dyadic_max(f, domain=dom)
    Mqw = dyadic_max(w, q, dom)
    lhs = lp_norm(Mf, pc, Mqw.power(1 - pc))
    rhs = maxwduo_constant(p, q) * lp_norm(f, pc, w.power(1 - pc))
    return Check(lhs, rhs)


def ball_a_one(w: Weight) -> float:
    """``max M^B w / w``: the interval form of ``[w]_{A_1}`` (``n = 1``)."""
    return float(np.max(ball_max(w, domain=w.domain).values / w.values))


def prop22_iii_ratio(w: Weight, kappa: float) -> float:
    """``max M^B_q w / ([w]_{A_1} w)`` at ``q = 1 + 1/(kappa [w]_{A_inf})``.

    ``[w]_{A_1}`` is the interval form and ``[w]_{A_inf}`` the dyadic Wilson constant.
    """
    if w.dim != 1:
        raise DomainError("the ball variant is one-dimensional")
    q = 1 + 1 / (kappa * a_infty_wilson(w))
    Mq = ball_max(w, q, w.domain)
    return float(np.max(Mq.values / w.values)) / ball_a_one(w)


KAPPA_CANDIDATES = tuple(2.0 ** j for j in range(-3, 6))


def prop22_iii_calibrate(weights, kappas=KAPPA_CANDIDATES, c_target: float = 2.0):
    """Calibrate ``(c_hat, kappa_hat)`` on a suite.

    ``kappa_hat`` is the smallest candidate whose suite-wide ratio is at most ``c_target``
    (larger ``kappa`` means ``q`` closer to 1, hence a smaller ratio); ``c_hat`` is the
    observed suite maximum at ``kappa_hat``, the smallest constant making the bound hold.
    """
    weights = list(weights)
    for kappa in sorted(kappas):
        c = max(prop22_iii_ratio(w, kappa) for w in weights)
        if c <= c_target:
            return c, kappa
    raise DomainError("no candidate kappa meets the target constant")


def prop22_iii_check(w: Weight, c_hat: float, kappa_hat: float) -> RatioCheck:
    return RatioCheck(prop22_iii_ratio(w, kappa_hat), c_hat)
