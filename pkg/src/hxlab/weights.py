"""Weight characteristics and closed-form bound constants.

The characteristics are suprema over a finite cube family: by default every standard-grid
cube of level ``<= K`` contained in the weight's domain.  With ``family="all-shifts"``
(denominator-3 lattices only) the cubes of all ``3^n`` translated systems are scanned.
Each supremum is computed exactly on the step weight, and the attaining cube is kept.

The Wilson constant is the dyadic variant: for a cube ``Q`` the maximal function of
``w chi_Q`` only sees subcubes of ``Q`` from the same grid, together with base cells.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .exponents import conj, inf, pw, ratio_conj, recip
from .grid import Cube, GridShift
from .lattice import (BlockLayer, LatticeFunction, Weight, average, block_layer,
                      coarsest_level)

REL_TOL = 1e-9


@dataclass(frozen=True)
class ExponentPair:
    p0: float
    q0: float

    def __post_init__(self):
        if not (self.p0 >= 1 and self.q0 > self.p0):
            raise DomainError(f"need 1 <= p0 < q0 <= inf, got p0={self.p0}, q0={self.q0}")

    @property
    def q0c(self) -> float:
        """``q0'``."""
        return conj(self.q0)

    def check_inside(self, p: float) -> None:
        if not self.p0 < p < self.q0:
            raise DomainError(f"p={p} must lie strictly between p0={self.p0} and q0={self.q0}")

    def __str__(self):
        return f"({self.p0:g}, {self.q0:g})"


FAMILIES = ("dyadic", "all-shifts")


def family_layers(w: LatticeFunction, family: str = "dyadic") -> list[BlockLayer]:
    """Block layers of the cubes in ``family`` that sit inside ``w``'s window."""
    if family == "dyadic":
        shifts = [GridShift.standard(w.dim)]
    elif family == "all-shifts":
        shifts = GridShift.all(w.dim)
    else:
        raise DomainError(f"unknown cube family {family!r}; expected one of {FAMILIES}")
    k0 = coarsest_level(w.window, w.level, w.denom)
    layers = []
    for s in shifts:
        for k in range(k0, w.level + 1):
            lay = block_layer(w.window, w.level, w.denom, s, k, "inside")
            if not lay.empty:
                layers.append(lay)
    if not layers:
        raise DomainError("empty cube family")
    return layers


def _argmax_cube(values: np.ndarray, lay: BlockLayer) -> tuple[float, Cube]:
    j = np.unravel_index(int(np.argmax(values)), values.shape)
    return float(values[j]), lay.cube(j)


def _sup(w: LatticeFunction, family: str, fn) -> tuple[float, Cube]:
    """Maximise ``fn(layer) -> per-cube array`` over every layer of the family."""
    best, arg = -math.inf, None
    for lay in family_layers(w, family):
        v, q = _argmax_cube(fn(lay), lay)
        if v > best * (1 + 1e-15) or arg is None:
            best, arg = v, q
    return best, arg


def _mean(lay: BlockLayer, arr) -> np.ndarray:
    return lay.reduce(arr, "sum") / lay.size ** len(lay.counts)


def _p_mean(lay: BlockLayer, arr, r: float) -> np.ndarray:
    """``<arr>_{r,Q}`` for positive ``arr`` and ``r`` in ``(0, inf]``."""
    if r == inf:
        return lay.reduce(arr, "max")
    if r == 1:
        return _mean(lay, arr)
    # factor out the block maximum so large r neither overflows nor underflows
    m = lay.reduce(arr, "max")
    m = np.where(m > 0, m, 1.0)
    return m * _mean(lay, (arr / lay.expand(m, 1.0)) ** r) ** (1.0 / r)


def _weighted_pmean(v: np.ndarray, wts: np.ndarray, r: float) -> float:
    """``(sum v^r wts / sum wts)^{1/r}`` for ``v >= 0``, scaled by ``max v``."""
    m = float(v.max())
    if m == 0:
        return 0.0
    return m * (float(((v / m) ** r * wts).sum()) / float(wts.sum())) ** (1 / r)


def _ap_fn(vals, p):
    def fn(lay):
        m = _mean(lay, vals)
        if p == 1:
            return m / lay.reduce(vals, "min")
        if p == inf:
            return m * np.exp(-_mean(lay, np.log(vals)))
        return m * _p_mean(lay, 1.0 / vals, conj(p) - 1.0)
    return fn


def a_p_attained(w: Weight, p: float, family: str = "dyadic") -> tuple[float, Cube]:
    if not p >= 1:
        raise DomainError("A_p needs p >= 1")
    v, q = _sup(w, family, _ap_fn(w.values, p))
    return max(v, 1.0) if v > 1 - REL_TOL else v, q


def a_p(w: Weight, p: float, family: str = "dyadic") -> float:
    """``[w]_{A_p} = sup_Q <w>_{1,Q} <w^-1>_{p'-1,Q}``; ``p = 1`` uses the cell minimum."""
    return a_p_attained(w, p, family)[0]


def a_one(w: Weight, family: str = "dyadic") -> float:
    return a_p(w, 1, family)


def _wilson_fn(w: Weight):
    vals = w.values
    cache: dict = {}

    def suffix(shift: GridShift, k: int) -> np.ndarray:
        """``max_{j >= k}`` of level-``j`` averages (and the cell value) at every cell."""
        key = (shift, k)
        if key in cache:
            return cache[key]
        if k > w.level:
            out = vals
        else:
            lay = block_layer(w.window, w.level, w.denom, shift, k, "inside")
            avg = lay.expand(_mean(lay, vals), fill=0.0)
            out = np.maximum(avg, suffix(shift, k + 1))
        cache[key] = out
        return out

    def fn(lay: BlockLayer):
        s = suffix(lay.shift, lay.level)
        return lay.reduce(s, "sum") / lay.reduce(vals, "sum")
    return fn


def a_infty_wilson_attained(w: Weight, family: str = "dyadic") -> tuple[float, Cube]:
    v, q = _sup(w, family, _wilson_fn(w))
    return v, q


def a_infty_wilson(w: Weight, family: str = "dyadic") -> float:
    """Dyadic Wilson constant ``sup_Q w(Q)^-1 int_Q M(w chi_Q)``.

    Nested cubes of one grid are either disjoint or contained, so a subcube of ``Q``
    containing ``x`` is an ancestor of ``x``'s cell at a level ``>= level(Q)``.  The
    maximal function on ``Q`` is therefore the running maximum of those ancestors'
    averages, computed once per level for the whole window.
    """
    return a_infty_wilson_attained(w, family)[0]


def rh_attained(w: Weight, s: float, family: str = "dyadic") -> tuple[float, Cube | None]:
    if s == 1:
        return 1.0, None
    if not s > 1:
        raise DomainError("reverse Holder exponent must be >= 1")
    vals = w.values
    return _sup(w, family, lambda lay: _p_mean(lay, vals, s) / _mean(lay, vals))


def rh(w: Weight, s: float, family: str = "dyadic") -> float:
    """``[w]_{RH_s} = sup_Q <w>_{s,Q} / <w>_{1,Q}``, with ``[w]_{RH_1} = 1``."""
    return rh_attained(w, s, family)[0]


# closed-form constants ---------------------------------------------------

def phi(s: float, ep: ExponentPair) -> float:
    """``(q0/s)' (s/p0 - 1) + 1``."""
    if not ep.p0 < s < ep.q0:
        raise DomainError(f"s={s} must lie strictly between p0 and q0")
    return ratio_conj(ep.q0, s) * (s / ep.p0 - 1.0) + 1.0


def tau_p(p: float, p0: float) -> float:
    """``[(p0'/p')' (p/p0)']^{1/p0}``."""
    if not (p0 >= 1 and p > p0):
        raise DomainError("tau_p needs p > p0 >= 1")
    pc = conj(p)
    return (ratio_conj(conj(p0), pc) * ratio_conj(p, p0)) ** (1.0 / p0)


def c_p(p: float, ep: ExponentPair) -> float:
    """``[(p'/q0')']^{1/q0'} tau_p``."""
    ep.check_inside(p)
    q0c = ep.q0c
    first = pw(ratio_conj(conj(p), q0c), recip(q0c))
    return first * tau_p(p, ep.p0)


def _log_e(x: float) -> float:
    return math.log(math.e + x)


@dataclass
class PsiInputs:
    """The characteristics entering ``psi(w)``; missing ones are computed on demand."""

    a1: float
    ainf: float
    rh: float = 1.0
    ainf_power: float = 1.0


def psi_inputs(w: Weight, ep: ExponentPair, family: str = "dyadic") -> PsiInputs:
    a1 = a_one(w, family)
    ainf = a_infty_wilson(w, family)
    if ep.q0 == inf:
        return PsiInputs(a1, ainf)
    s = ratio_conj(ep.q0, ep.p0)  # (q0/p0)', equal to q0' when p0 = 1
    return PsiInputs(a1, ainf, rh(w, s, family), a_infty_wilson(w.power(s), family))


def psi_from(c: PsiInputs, ep: ExponentPair) -> float:
    p0 = ep.p0
    if ep.q0 == inf:
        if p0 == 1:
            return c.a1 * _log_e(c.ainf)
        return c.a1 ** (1 / p0) * c.ainf ** (1 / conj(p0)) * _log_e(c.ainf) ** (2 / p0)
    if p0 == 1:
        return c.ainf_power * c.a1 * c.rh
    return c.ainf_power ** (1 + 1 / p0) * (c.a1 * c.rh) ** (1 / p0)


def psi(w: Weight, ep: ExponentPair, family: str = "dyadic") -> float:
    """The weak-type weight function, case by case in ``(p0, q0)``."""
    return psi_from(psi_inputs(w, ep, family), ep)


def thm11_rhs(w: Weight, p: float, ep: ExponentPair, family: str = "dyadic") -> float:
    """``c_p [v]_{A_inf}^{1/p'} [v]_{A_1}^{1/(p (q0/p)')}`` with ``v = w^{(q0/p)'}``."""
    ep.check_inside(p)
    e = ratio_conj(ep.q0, p)
    v = w.power(e) if e != 1 else w
    return (c_p(p, ep) * a_infty_wilson(v, family) ** (1 / conj(p))
            * a_one(v, family) ** (1 / (p * e)))


def atwo_exponent(p: float, ep: ExponentPair) -> float:
    """``max(1/(p - p0), (q0 - 1)/(q0 - p))``; the second term is 1 for ``q0 = inf``."""
    ep.check_inside(p)
    second = 1.0 if ep.q0 == inf else (ep.q0 - 1) / (ep.q0 - p)
    return max(1 / (p - ep.p0), second)


def atwo_rhs(w: Weight, p: float, ep: ExponentPair, family: str = "dyadic") -> float:
    """``[v]_{A_phi(p)}^{atwo_exponent / (q0/p)'}`` with ``v = w^{(q0/p)'}``."""
    e = ratio_conj(ep.q0, p)
    v = w.power(e) if e != 1 else w
    return a_p(v, phi(p, ep), family) ** (atwo_exponent(p, ep) / e)


# inequality checks ---------------------------------------------------------

@dataclass(frozen=True)
class Check:
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1 + REL_TOL)

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.passed))


def prop22_ii_check(w: Weight, p: float, s: float, family: str = "dyadic") -> Check:
    """``[w^s]_{A_{s(p-1)+1}} <= ([w]_{A_p} [w]_{RH_s})^s``."""
    if p < 1 or s < 1:
        raise DomainError("need p >= 1 and s >= 1")
    lhs = a_p(w.power(s), s * (p - 1) + 1, family)
    rhs = (a_p(w, p, family) * rh(w, s, family)) ** s
    return Check(lhs, rhs)


def _local(w: Weight, q: Cube, fn) -> float:
    lay = block_layer(w.window, w.level, w.denom, q.shift, q.level, "inside")
    rng = w.cell_range(q)
    j = tuple((a - s) // lay.size for (a, _), s in zip(rng, lay.start))
    return float(fn(lay)[j])


@dataclass(frozen=True)
class HolderCheck:
    first: Check
    second: Check

    @property
    def passed(self) -> bool:
        return self.first.passed and self.second.passed


def holweight_check(f: LatticeFunction, g: LatticeFunction, w: Weight, p: float, q: float,
                    Q: Cube, family: str = "dyadic") -> HolderCheck:
    """Both Holder lines on ``Q`` with the global constants ``[w]_{A_{q/p}}`` and
    ``[w]_{RH_{(q/p)'}}`` (the supremum over the family and ``Q`` itself).

    First:  ``<f>_{p,Q} <= [w]_{A_{q/p}}^{1/q} (w(Q)^-1 int_Q |f|^q w)^{1/q}``.
    Second: ``<g w>_{q',Q} |Q| <= [w]_{RH_{(q/p)'}}^{1/p} (w(Q)^-1 int_Q |g|^{p'} w)^{1/p'} w(Q)``.
    """
    if not 1 <= p <= q < inf:
        raise DomainError("need 1 <= p <= q < inf")
    rng = w.cell_range(Q)
    wv = w.block(rng)
    fv = np.abs(f.block(rng))
    gv = np.abs(g.block(rng))
    vol = w.cell_volume
    wQ = float(wv.sum()) * vol
    measQ = float(Q.measure)
    r = q / p
    ap = max(a_p(w, r, family), _local(w, Q, _ap_fn(w.values, r)))
    s = conj(r)
    if s == 1:
        rhc = 1.0
    else:
        rhc = max(rh(w, s, family),
                  _local(w, Q, lambda lay: _p_mean(lay, w.values, s) / _mean(lay, w.values)))
    lhs1 = average(f, p, Q)
    rhs1 = ap ** (1 / q) * _weighted_pmean(fv, wv, q)
    qc, pc = conj(q), conj(p)
    gw = gv * wv
    lhs2 = (float(gw.max()) if qc == inf else _weighted_pmean(gw, np.ones_like(gw), qc)) * measQ
    if pc == inf:
        inner = float(gv.max())
    else:
        inner = _weighted_pmean(gv, wv, pc)
    rhs2 = rhc ** (1 / p) * inner * wQ
    return HolderCheck(Check(lhs1, rhs1), Check(lhs2, rhs2))


def ainfty_regest_check(w: Weight, p: float, c_cal: float, family: str = "dyadic") -> Check:
    """``[w]_{A_inf} <= C_cal [w]_{A_p}`` with the calibrated comparison constant."""
    return Check(a_infty_wilson(w, family), c_cal * a_p(w, p, family))


# reports ----------------------------------------------------------------------

@dataclass
class ConstantsReport:
    values: dict[str, float] = field(default_factory=dict)
    attained: dict[str, Cube | None] = field(default_factory=dict)

    def add(self, name: str, value: float, cube: Cube | None) -> None:
        self.values[name] = value
        self.attained[name] = cube

    def to_json(self) -> dict:
        return {"constants": [
            {"name": k, "value": v,
             "cube": None if self.attained[k] is None else self.attained[k].to_json()}
            for k, v in self.values.items()]}

    def rows(self) -> list[list]:
        out = []
        for k, v in self.values.items():
            q = self.attained[k]
            cube = "" if q is None else json.dumps(q.to_json(), separators=(",", ":"))
            out.append([k, repr(v), cube])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["name", "value", "cube"])
        wr.writerows(self.rows())
        return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:g}" if x != inf else "inf"


def constants_report(w: Weight, ps=(2.0,), ss=(2.0,), family: str = "dyadic") -> ConstantsReport:
    rep = ConstantsReport()
    for p in ps:
        v, q = a_p_attained(w, p, family)
        rep.add(f"A_{_fmt(p)}", v, q)
    v, q = a_infty_wilson_attained(w, family)
    rep.add("A_infty_wilson", v, q)
    for s in ss:
        v, q = rh_attained(w, s, family)
        rep.add(f"RH_{_fmt(s)}", v, q)
    return rep


__all__ = [
    "ExponentPair", "a_p", "a_one", "a_infty_wilson", "rh", "phi", "tau_p", "c_p", "psi",
    "psi_inputs", "psi_from", "thm11_rhs", "atwo_rhs", "atwo_exponent", "prop22_ii_check",
    "holweight_check", "ainfty_regest_check", "constants_report", "ConstantsReport",
    "Check", "family_layers",
]
