"""Sparse collections, sparse forms and the positive sparse operator.

The form ``c sum_Q <f>_{p0,Q} <g>_{q0',Q} |Q|`` and the operator
``A_S f = c sum_Q <f>_{p0,Q} chi_Q`` are evaluated through a cube-by-cell incidence
matrix; a plain per-cube loop is kept as an oracle and to re-verify estimator witnesses.

Norm estimators return certified lower bounds: the reported value is the objective at an
explicit witness, recomputed by the per-cube path before it is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse as sp

from .errors import DomainError, LatticeMismatch, ParseError
from .exponents import conj, inf
from .grid import Cube, GridShift, ancestors, box_measure, children
from .lattice import LatticeFunction, Weight, average, lp_norm, weak_lp
from .maximal import dyadic_max
from .weights import ExponentPair, a_infty_wilson, a_one, c_p

Window = tuple[tuple[int, int], ...]


# collections -------------------------------------------------------------

@dataclass
class SparseCollection:
    cubes: list[Cube]
    eta: float = 1.0
    witness: dict | None = None

    def __post_init__(self):
        seen, uniq = set(), []
        for q in self.cubes:
            if q not in seen:
                seen.add(q)
                uniq.append(q)
        self.cubes = uniq
        if not 0 < self.eta <= 1:
            raise DomainError("eta must lie in (0, 1]")
        dims = {q.dim for q in self.cubes}
        if len(dims) > 1:
            raise DomainError("all cubes need the same dimension")

    @property
    def dim(self) -> int:
        return self.cubes[0].dim if self.cubes else 0

    @property
    def shifts(self) -> list[GridShift]:
        return sorted({q.shift for q in self.cubes})

    def by_grid(self) -> dict[GridShift, list[Cube]]:
        out: dict = {}
        for q in self.cubes:
            out.setdefault(q.shift, []).append(q)
        return out

    def to_json(self) -> dict:
        return {"eta": self.eta, "cubes": [q.to_json() for q in self.cubes]}

    def __len__(self):
        return len(self.cubes)


def parse_collection(obj) -> SparseCollection:
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object")
    if "cubes" not in obj:
        raise ParseError("missing", "cubes")
    if not isinstance(obj["cubes"], list):
        raise ParseError("expected a list", "cubes")
    eta = obj.get("eta", 1.0)
    if isinstance(eta, bool) or not isinstance(eta, (int, float)) or not 0 < eta <= 1:
        raise ParseError("must be a number in (0, 1]", "eta")
    cubes = []
    for j, c in enumerate(obj["cubes"]):
        fld = f"cubes[{j}]"
        try:
            cubes.append(Cube.from_json(c))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad cube ({exc})", fld) from exc
    if len({q.dim for q in cubes}) > 1:
        raise ParseError("cubes of different dimensions", "cubes")
    return SparseCollection(cubes, float(eta))


def _nearest_ancestor(q: Cube, members: set, min_level: int) -> Cube | None:
    for k in range(q.level - 1, min_level - 1, -1):
        a = ancestors(q, k)
        if a in members:
            return a
    return None


def _maximal_subcubes(cubes) -> dict[Cube, list[Cube]]:
    out: dict[Cube, list[Cube]] = {q: [] for q in cubes}
    for grid in {q.shift for q in cubes}:
        members = {q for q in cubes if q.shift == grid}
        kmin = min(q.level for q in members)
        for q in members:
            a = _nearest_ancestor(q, members, kmin)
            if a is not None:
                out[a].append(q)
    return out


def _difference_boxes(q: Cube, removed: Sequence[Cube]) -> list:
    """Exact boxes tiling ``Q`` minus the union of ``removed`` (subcubes of ``Q``)."""
    if not removed:
        return [q.box]
    hit = set(removed)
    deepest = max(p.level for p in removed)
    stack, out = [q], []
    while stack:
        c = stack.pop()
        if c in hit:
            continue
        if c.level >= deepest or not any(ancestors(p, c.level) == c for p in removed
                                          if p.level > c.level):
            out.append(c.box)
            continue
        stack.extend(children(c))
    return out


@dataclass
class SparseWitness:
    """Disjoint sets ``E_Q``, stored as exact claims on the canonical pieces.

    ``D_R = R minus its maximal proper subcubes in S``.  ``claims[Q]`` lists ``(R, a)``:
    ``E_Q`` owns measure ``a`` of ``D_R``.  Claims on one ``D_R`` are realised as
    consecutive slabs (along the first axis) of every box of ``D_R``, so they are disjoint.
    """
    ok: bool
    eta: float
    eta_achieved: float
    carleson: float
    removed: dict[Cube, list[Cube]]
    claims: dict[Cube, list[tuple[Cube, Fraction]]]
    measures: dict[Cube, Fraction]
    failing: Cube | None = None
    canonical: bool = True

    def boxes(self, q: Cube) -> list:
        """``E_Q`` as a list of boxes with Fraction coordinates."""
        out = []
        for r, a in self.claims.get(q, []):
            pieces = _difference_boxes(r, self.removed[r])
            total = sum((box_measure(b) for b in pieces), Fraction(0))
            start = Fraction(0)
            for other, b2 in self.claims_on(r):
                if other == q:
                    break
                start += b2
            lo, hi = start / total, (start + a) / total
            for b in pieces:
                (x0, x1), rest = b[0], list(b[1:])
                out.append([(x0 + (x1 - x0) * lo, x0 + (x1 - x0) * hi)] + rest)
        return out

    def claims_on(self, r: Cube) -> list[tuple[Cube, Fraction]]:
        order = getattr(self, "_order", None)
        if order is None:
            order = {}
            for q in sorted(self.claims, key=lambda c: (-c.level, c.index, c.shift.digits)):
                for rr, a in self.claims[q]:
                    order.setdefault(rr, []).append((q, a))
            self._order = order
        return order.get(r, [])


def _exact(x) -> Fraction:
    """Floats are read by their shortest repr, so ``0.2`` means ``1/5``."""
    return x if isinstance(x, (Fraction, int)) else Fraction(repr(float(x)))


def verify_sparse(S: SparseCollection | Sequence[Cube], eta: float) -> SparseWitness:
    """Construct sets ``E_Q`` with ``|E_Q| >= eta |Q|`` (per grid), exactly.

    The canonical choice ``E_Q = D_Q`` is tried first.  If some ``|D_Q| < eta |Q|``, cubes
    are processed from fine to coarse and each takes exactly ``eta |Q|`` from ``D_Q`` and
    then from the leftovers of its descendants.  The leftover inside ``Q`` when it is reached
    is ``|Q| - eta sum_{P subsetneq Q} |P|``, so this succeeds iff ``eta <= 1/carleson(S)``.
    """
    cubes = S.cubes if isinstance(S, SparseCollection) else list(dict.fromkeys(S))
    if not 0 < eta <= 1:
        raise DomainError("eta must lie in (0, 1]")
    et = _exact(eta)
    removed = _maximal_subcubes(cubes)
    lam = carleson(cubes, exact=True)
    dmeas = {q: q.measure - sum((p.measure for p in removed[q]), Fraction(0)) for q in cubes}
    if all(dmeas[q] >= et * q.measure for q in cubes):
        claims = {q: [(q, dmeas[q])] for q in cubes}
        worst = min((dmeas[q] / q.measure for q in cubes), default=Fraction(1))
        return SparseWitness(True, eta, float(worst), float(lam), removed, claims, dict(dmeas))
    rem = dict(dmeas)
    claims: dict[Cube, list] = {}
    pool: dict[Cube, list[Cube]] = {}
    failing = None
    for q in sorted(cubes, key=lambda c: -c.level):
        need = et * q.measure
        mine = []
        avail = [q] + [r for p in removed[q] for r in pool.pop(p, [])]
        keep = []
        for r in avail:
            if need > 0 and rem[r] > 0:
                a = min(rem[r], need)
                rem[r] -= a
                need -= a
                mine.append((r, a))
            if rem[r] > 0:
                keep.append(r)
        pool[q] = keep
        claims[q] = mine
        if need > 0 and failing is None:
            failing = q
    measures = {q: sum((a for _, a in claims[q]), Fraction(0)) for q in cubes}
    worst = min((measures[q] / q.measure for q in cubes), default=Fraction(1))
    return SparseWitness(failing is None, eta, float(worst), float(lam), removed, claims,
                         measures, failing, canonical=False)


def carleson(S: SparseCollection | Sequence[Cube], exact: bool = False):
    """``sup_{Q in S} sum_{P in S, P ⊆ Q} |P| / |Q|``, each grid separately."""
    cubes = S.cubes if isinstance(S, SparseCollection) else list(dict.fromkeys(S))
    if not cubes:
        return Fraction(1) if exact else 1.0
    best = Fraction(0)
    for grid in {q.shift for q in cubes}:
        members = {q for q in cubes if q.shift == grid}
        kmin = min(q.level for q in members)
        packed = {q: q.measure for q in members}
        for p in members:
            for k in range(p.level - 1, kmin - 1, -1):
                a = ancestors(p, k)
                if a in packed:
                    packed[a] += p.measure
        best = max(best, max(packed[q] / q.measure for q in members))
    return best if exact else float(best)


def disjoint_family(cubes: Iterable[Cube]) -> SparseCollection:
    return SparseCollection(list(cubes), 1.0)


def full_tree(depth: int, dim: int = 1) -> SparseCollection:
    """Every standard dyadic cube of ``[0,1)^dim`` down to ``depth``."""
    import itertools
    shift = GridShift.standard(dim)
    cubes = [Cube(shift, k, idx) for k in range(depth + 1)
             for idx in itertools.product(range(2 ** k), repeat=dim)]
    return SparseCollection(cubes, 1.0 / (depth + 1))


def maximal_family(depth: int) -> SparseCollection:
    """Nested intervals ``[0, 2^-k)``, ``k = 0..depth``; 1/2-sparse.

    Its sparse operator behaves like the dyadic maximal operator near the origin, so the
    unweighted ``L^p`` norm grows like ``p'`` as ``p -> 1``.
    """
    shift = GridShift.standard(1)
    return SparseCollection([Cube(shift, k, (0,)) for k in range(depth + 1)], 0.5)


def stopping_family(f: LatticeFunction, ratio: float = 2.0) -> SparseCollection:
    """Principal cubes of ``f >= 0`` in the unit cube.

    Starting from ``[0,1)^n``, the children of a stopping cube ``Q`` are the maximal
    subcubes ``P`` with ``<f>_P > ratio <f>_Q``.  The result is ``(1 - 1/ratio)``-sparse
    (at least) with Carleson constant at most ``ratio / (ratio - 1)``.
    """
    if ratio <= 1:
        raise DomainError("stopping ratio must exceed 1")
    if f.denom != 1:
        raise LatticeMismatch("stopping families use the denominator-1 lattice")
    from .lattice import block_layer
    n = f.dim
    win = tuple((0, f.N) for _ in range(n))
    vals = np.abs(f.block(win))
    shift = GridShift.standard(n)
    top = Cube(shift, 0, (0,) * n)
    out = [top]
    # stopping value inherited by each cell from its current stopping ancestor
    ref = np.full(vals.shape, float(vals.mean()))
    for k in range(1, f.level + 1):
        lay = block_layer(win, f.level, 1, shift, k, "inside")
        avg = lay.reduce(vals, "sum") / lay.size ** n
        anc = lay.reduce(ref, "max")
        hit = (avg > ratio * anc) & (avg > 0)
        for j in zip(*np.nonzero(hit)):
            out.append(lay.cube(j))
        upd = lay.expand(np.where(hit, avg, 0.0), 0.0)
        ref = np.where(upd > 0, upd, ref)
    eta = 1 - 1 / ratio
    return SparseCollection(out, eta)


# forms -----------------------------------------------------------------------

@dataclass(frozen=True)
class SparseFormSpec:
    collection: SparseCollection
    exponents: ExponentPair
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("form scale must be positive")


class Incidence:
    """Cube-by-cell incidence of a collection over a window of a lattice."""

    def __init__(self, cubes: Sequence[Cube], dim: int, level: int, denom: int,
                 window: Window | None = None):
        self.cubes = list(cubes)
        self.dim, self.level, self.denom = dim, level, denom
        probe = LatticeFunction.zeros(dim, level, denom, [(0, 0)] * dim)
        ranges = [probe.cell_range(q) for q in self.cubes]
        if window is None:
            if ranges:
                window = tuple((min(r[t][0] for r in ranges), max(r[t][1] for r in ranges))
                               for t in range(dim))
            else:
                window = tuple((0, 0) for _ in range(dim))
        self.window = tuple(window)
        self.shape = tuple(b - a for a, b in self.window)
        rows, cols = [], []
        for i, rng in enumerate(ranges):
            if not all(a <= c and d <= b for (c, d), (a, b) in zip(rng, self.window)):
                raise DomainError(f"cube {self.cubes[i]} leaves the evaluation window")
            axes = [np.arange(c - a, d - a) for (c, d), (a, _) in zip(rng, self.window)]
            flat = np.ravel_multi_index(np.meshgrid(*axes, indexing="ij"), self.shape).ravel()
            cols.append(flat)
            rows.append(np.full(flat.size, i))
        ncells = int(np.prod(self.shape)) if self.shape else 0
        if rows:
            r, c = np.concatenate(rows), np.concatenate(cols)
        else:
            r = c = np.zeros(0, dtype=np.int64)
        self.matrix = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(len(self.cubes), ncells))
        self.matrix_t = self.matrix.T.tocsr()
        self.counts = np.asarray(self.matrix.sum(axis=1)).ravel()
        self.measures = np.array([float(q.measure) for q in self.cubes])
        self.cell_volume = float(Fraction(1, denom * 2 ** level) ** dim)

    def cells(self, f: LatticeFunction) -> np.ndarray:
        if (f.dim, f.level, f.denom) != (self.dim, self.level, self.denom):
            raise LatticeMismatch()
        return np.abs(f.block(self.window)).ravel()

    def averages(self, x: np.ndarray, r: float) -> np.ndarray:
        if r == 1:
            return self.matrix @ x / self.counts
        return (self.matrix @ (x ** r) / self.counts) ** (1.0 / r)

    def spread(self, per_cube: np.ndarray) -> np.ndarray:
        """``sum_Q v_Q chi_Q`` on the window cells."""
        return self.matrix_t @ per_cube

    def to_function(self, x: np.ndarray) -> LatticeFunction:
        return LatticeFunction(self.dim, self.level, self.denom,
                               tuple(a for a, _ in self.window), x.reshape(self.shape))


def _incidence(spec_or_cubes, f: LatticeFunction, window=None) -> Incidence:
    cubes = spec_or_cubes.cubes if isinstance(spec_or_cubes, SparseCollection) else spec_or_cubes
    return Incidence(cubes, f.dim, f.level, f.denom, window)


def sparse_form(spec: SparseFormSpec, f: LatticeFunction, g: LatticeFunction) -> float:
    """``c sum_Q <f>_{p0,Q} <g>_{q0',Q} |Q|`` (absolute values taken)."""
    f.compatible(g)
    inc = _incidence(spec.collection, f)
    ep = spec.exponents
    af = inc.averages(inc.cells(f), ep.p0)
    ag = inc.averages(inc.cells(g), ep.q0c)
    return spec.scale * float(math.fsum(af * ag * inc.measures))


def sparse_form_naive(spec: SparseFormSpec, f: LatticeFunction, g: LatticeFunction) -> float:
    ep = spec.exponents
    return spec.scale * math.fsum(average(f, ep.p0, q) * average(g, ep.q0c, q) * float(q.measure)
                                  for q in spec.collection.cubes)


def sparse_operator(S: SparseCollection, p0: float, f: LatticeFunction, scale: float = 1.0) -> LatticeFunction:
    """``A_S f = c sum_Q <f>_{p0,Q} chi_Q``."""
    if not p0 >= 1:
        raise DomainError("p0 must be >= 1")
    inc = _incidence(S, f)
    return inc.to_function(scale * inc.spread(inc.averages(inc.cells(f), p0)))


def remark23_bound(eta: float, p: float, ep: ExponentPair) -> float:
    """Unweighted ceiling ``eta^-1 [(p/p0)']^{1/p0} [(p'/q0')']^{1/q0'}``."""
    ep.check_inside(p)
    from .exponents import pw, ratio_conj, recip
    q0c = ep.q0c
    return (1 / eta) * ratio_conj(p, ep.p0) ** (1 / ep.p0) * pw(ratio_conj(conj(p), q0c), recip(q0c))


# lemma checks ----------------------------------------------------------------------

@dataclass(frozen=True)
class LemmaCheck:
    lhs: float
    rhs: float
    bound: float = 1.0

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else inf)

    @property
    def passed(self) -> bool:
        return self.lhs <= self.bound * self.rhs * (1 + 1e-9)

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.passed))


def _single_grid(S: SparseCollection) -> GridShift:
    shifts = S.shifts
    if len(shifts) != 1:
        raise DomainError("this check needs a single-grid collection")
    return shifts[0]


def intermedmax_check(S: SparseCollection, f: LatticeFunction, g: LatticeFunction, beta: float,
                      ep: ExponentPair, eta: float | None = None, domain=None) -> LemmaCheck:
    """``sum <f>_{p0}<g>_{q0'}|Q| <= eta^-1 int M_{p0}((M_{q0'} g)^{1-beta} f)(M_{q0'} g)^beta``."""
    if not 0 < beta <= 1:
        raise DomainError("beta must lie in (0, 1]")
    shift = _single_grid(S)
    if eta is None:
        wit = verify_sparse(S, S.eta)
        if not wit.ok:
            raise DomainError("collection is not eta-sparse")
        eta = S.eta
    domain = domain if domain is not None else [(0, 1)] * f.dim
    lhs = sparse_form(SparseFormSpec(S, ep), f, g)
    Mg = dyadic_max(g, ep.q0c, domain, shift)
    inner = Mg.power(1 - beta).mul(f.abs()) if beta < 1 else f.abs()
    left = dyadic_max(inner, ep.p0, domain, shift)
    rhs = left.mul(Mg.power(beta)).integral() / eta
    return LemmaCheck(lhs, rhs)


def lemma_main_rhs(eta: float, f: LatticeFunction, g: LatticeFunction, w: Weight, p: float,
                   q: float, ep: ExponentPair, shift: GridShift | None = None) -> float:
    """``eta^-1 c_p (q')^{1/p'} ||f||_{L^p(M_{q (q0/p)'} w)} ||g||_{L^{p'}(w^{1-p'})}``."""
    from .exponents import ratio_conj
    ep.check_inside(p)
    if not 1 < q < inf:
        raise DomainError("need 1 < q < inf")
    pc = conj(p)
    r = q * ratio_conj(ep.q0, p)
    Mw = dyadic_max(w, r, w.domain, shift)
    return (c_p(p, ep) * conj(q) ** (1 / pc) * lp_norm(f, p, Mw)
            * lp_norm(g, pc, w.power(1 - pc)) / eta)


def lemma_main_check(S: SparseCollection, f: LatticeFunction, g: LatticeFunction, w: Weight,
                     p: float, q: float, ep: ExponentPair, c_lem: float) -> LemmaCheck:
    shift = _single_grid(S)
    lhs = sparse_form(SparseFormSpec(S, ep), f, g)
    return LemmaCheck(lhs, lemma_main_rhs(S.eta, f, g, w, p, q, ep, shift), c_lem)


# estimators ------------------------------------------------------------------------

@dataclass
class NormEstimate:
    value: float
    f: LatticeFunction | None
    g: LatticeFunction | None
    evaluations: int
    budget: int
    seed: int
    kind: str
    trace: list[float] = field(default_factory=list)   # best value after each restart
    verified: float | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value, "verified": self.verified,
                "evaluations": self.evaluations, "budget": self.budget, "seed": self.seed,
                "trace": self.trace,
                "witness_f": None if self.f is None else self.f.to_json(),
                "witness_g": None if self.g is None else self.g.to_json()}


class _Budget:
    def __init__(self, n: int):
        self.left = int(n)
        self.used = 0

    def take(self) -> bool:
        if self.left <= 0:
            return False
        self.left -= 1
        self.used += 1
        return True


class _Strong:
    """Objective ``form(f, g) / (||f||_{L^p(w)} ||g||_{L^{p'}(w^{1-p'})})`` on cell vectors."""

    def __init__(self, spec: SparseFormSpec, p: float, w: Weight):
        self.spec, self.p, self.pc = spec, p, conj(p)
        self.inc = Incidence(spec.collection.cubes, w.dim, w.level, w.denom, w.window)
        self.w = w.values.ravel()
        self.sigma = self.w ** (1 - self.pc)
        self.h = self.inc.cell_volume
        self.p0, self.s = spec.exponents.p0, spec.exponents.q0c

    def norm_f(self, f):
        return float(np.sum(f ** self.p * self.w) * self.h) ** (1 / self.p)

    def norm_g(self, g):
        return float(np.sum(g ** self.pc * self.sigma) * self.h) ** (1 / self.pc)

    def form(self, f, g):
        inc = self.inc
        return self.spec.scale * float(np.sum(inc.averages(f, self.p0) * inc.averages(g, self.s)
                                              * inc.measures))

    def value(self, f, g):
        nf, ng = self.norm_f(f), self.norm_g(g)
        if nf == 0 or ng == 0:
            return 0.0
        return self.form(f, g) / (nf * ng)

    def _grad(self, x, other, r_x, r_o):
        # d/dx_c of sum_Q a_Q <x>_{r,Q} |Q| is sum_{Q ∋ c} a_Q |Q| <x>^{1-r} x_c^{r-1} / #Q
        inc = self.inc
        ax = inc.averages(x, r_x)
        coef = self.spec.scale * inc.averages(other, r_o) * inc.measures / inc.counts
        if r_x == 1:
            return inc.spread(coef)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(ax > 0, coef * ax ** (1 - r_x), 0.0)
        return inc.spread(c) * x ** (r_x - 1)

    def best_g(self, f, g):
        G = self._grad(g, f, self.s, self.p0)
        return _normalize((G / self.sigma) ** (self.p - 1))

    def best_f(self, f, g):
        F = self._grad(f, g, self.p0, self.s)
        return _normalize((F / self.w) ** (self.pc - 1))


def _normalize(x):
    m = float(np.max(x)) if x.size else 0.0
    return x / m if m > 0 else x


def _inits(rng: np.random.Generator, obj: _Strong, shape, index: int):
    """Deterministic restart schedule: structured starts first, then random ones."""
    n = int(np.prod(shape))
    w = obj.w
    if index == 0:
        return np.ones(n), np.ones(n)
    if index == 1:
        return _normalize(obj.sigma.copy()), _normalize(w.copy())
    if index == 2:
        return _normalize(obj.sigma.copy()), np.ones(n)
    inc = obj.inc
    # random cube indicator mixed with noise
    f = rng.random(n) ** 3
    if len(inc.cubes):
        i = int(rng.integers(len(inc.cubes)))
        row = inc.matrix.getrow(i).toarray().ravel()
        f = f * 0.1 + row
    g = rng.random(n) + 0.05
    return _normalize(f), _normalize(g)


def strong_norm_estimate(spec: SparseFormSpec, p: float, w: Weight, budget: int = 2000,
                         seed: int = 0, per_restart: int = 60) -> NormEstimate:
    """Lower bound for ``||T||_{L^p(w) -> L^p(w)}`` through the bilinear form.

    Each restart alternates exact best responses: for fixed ``f`` the form is a convex,
    1-homogeneous function of ``g``, so replacing ``g`` by the maximiser of its linearisation
    never lowers the objective, and symmetrically for ``f``.  The remaining evaluations of a
    restart go to random cellwise multiplicative moves, accepted only when they improve.
    The evaluation stream does not depend on ``budget``, so the estimate is monotone in it.
    """
    spec.exponents.check_inside(p)
    obj = _Strong(spec, p, w)
    shape = w.values.shape
    ss = np.random.SeedSequence(seed)
    bud = _Budget(budget)
    best, bf, bg, trace = 0.0, None, None, []
    restart = 0
    n = int(np.prod(shape))
    while bud.left > 0:
        rng = np.random.default_rng(ss.spawn(1)[0])
        f, g = _inits(rng, obj, shape, restart)
        if not bud.take():
            break
        cur = obj.value(f, g)
        steps = 1
        stall = 0
        while steps < per_restart and bud.left > 0:
            if stall < 2:
                if steps % 2:
                    nf, ng = obj.best_f(f, g), g
                else:
                    nf, ng = f, obj.best_g(f, g)
            else:
                nf, ng = f.copy(), g.copy()
                c = int(rng.integers(n))
                factor = float(rng.choice([0.0, 0.5, 2.0, 4.0]))
                if rng.random() < 0.5:
                    nf[c] = nf[c] * factor if nf[c] > 0 else 1.0 * (factor > 0)
                else:
                    ng[c] = ng[c] * factor if ng[c] > 0 else 1.0 * (factor > 0)
            bud.take()
            steps += 1
            v = obj.value(nf, ng)
            if v > cur * (1 + 1e-13):
                f, g, cur = nf, ng, v
                stall = 0 if stall < 2 else stall
            else:
                stall += 1
        if cur > best:
            best, bf, bg = cur, f, g
        trace.append(best)
        restart += 1
    est = NormEstimate(best, None, None, bud.used, budget, seed, "strong", trace)
    if bf is not None:
        est.f = obj.inc.to_function(bf)
        est.g = obj.inc.to_function(bg)
        est.verified = verify_strong_witness(spec, p, w, est.f, est.g)
    return est


def verify_strong_witness(spec, p, w, f, g) -> float:
    pc = conj(p)
    return sparse_form_naive(spec, f, g) / (lp_norm(f, p, w) * lp_norm(g, pc, w.power(1 - pc)))


class _Weak:
    def __init__(self, spec: SparseFormSpec, p0: float, w: Weight):
        self.spec, self.p0 = spec, p0
        self.inc = Incidence(spec.collection.cubes, w.dim, w.level, w.denom, w.window)
        self.w = w.values.ravel()
        self.h = self.inc.cell_volume

    def value(self, f):
        nf = float(np.sum(f ** self.p0 * self.w) * self.h) ** (1 / self.p0)
        if nf == 0:
            return 0.0
        Af = self.spec.scale * self.inc.spread(self.inc.averages(f, self.p0))
        return _weak_vec(Af, self.w * self.h, self.p0) / nf


def _weak_vec(vals, mass, p):
    keep = vals > 0
    v, m = vals[keep], mass[keep]
    if v.size == 0:
        return 0.0
    o = np.argsort(-v, kind="stable")
    v, m = v[o], m[o]
    tail = np.cumsum(m)
    last = np.r_[v[1:] != v[:-1], True]
    return float(np.max(v[last] * tail[last] ** (1 / p)))


def _hill_climb(value, x0, rng, bud: _Budget, steps: int):
    x, cur = x0, value(x0)
    n = x.size
    for _ in range(steps):
        if not bud.take():
            break
        y = x.copy()
        c = int(rng.integers(n))
        mode = rng.random()
        if mode < 0.4:
            y[c] = y[c] * float(rng.choice([0.0, 0.5, 2.0])) if y[c] > 0 else 1.0
        elif mode < 0.7:
            y = y * 0.0
            y[c] = 1.0
            y = 0.5 * x + y * float(np.max(x))
        else:
            y = x * np.exp(0.3 * rng.standard_normal(n))
        v = value(y)
        if v > cur * (1 + 1e-13):
            x, cur = _normalize(y), v
    return x, cur


def weak_norm_estimate(spec: SparseFormSpec, p0: float, w: Weight, budget: int = 2000,
                       seed: int = 0, per_restart: int = 80) -> NormEstimate:
    """Lower bound for ``||A_S||_{L^{p0}(w) -> L^{p0,inf}(w)}`` by the direct definition.

    The operator is the positive sparse operator with ``p0``-averages, which lies in
    ``S(p0, inf)`` and therefore in every ``S(p0, q0)``; the weak quasinorm of ``A_S f`` is
    computed exactly for each searched ``f``.
    """
    if not p0 >= 1:
        raise DomainError("p0 must be >= 1")
    obj = _Weak(spec, p0, w)
    n = w.values.size
    inc = obj.inc
    ss = np.random.SeedSequence(seed)
    bud = _Budget(budget)
    best, bx, trace = 0.0, None, []
    starts = [np.ones(n)]
    for i in range(len(inc.cubes)):
        starts.append(inc.matrix.getrow(i).toarray().ravel())
    restart = 0
    while bud.left > 0:
        rng = np.random.default_rng(ss.spawn(1)[0])
        if restart < len(starts):
            x0 = starts[restart]
        elif restart % 2:
            x0 = np.zeros(n)
            x0[int(rng.integers(n))] = 1.0
        else:
            x0 = rng.random(n) ** 4
        x, v = _hill_climb(obj.value, _normalize(x0), rng, bud,
                           per_restart if restart >= len(starts) else 4)
        if v > best:
            best, bx = v, x
        trace.append(best)
        restart += 1
    est = NormEstimate(best, None, None, bud.used, budget, seed, "weak", trace)
    if bx is not None:
        est.f = inc.to_function(bx)
        Af = sparse_operator(spec.collection, p0, est.f, spec.scale)
        est.verified = weak_lp(Af.on_window(w.window), p0, w) / lp_norm(est.f, p0, w)
    return est


@dataclass(frozen=True)
class DualCheck:
    lhs: float
    rhs: float
    estimate: NormEstimate | None = None

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-9)

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.passed))


def _dual_lhs(inc: Incidence, scale: float, f, w_vec, h, s):
    Tf = scale * inc.spread(inc.averages(f, 1.0))  # linear, self-adjoint
    return _weak_vec(Tf / w_vec ** (1 / s), w_vec * h, s)


def dual_weak_rhs(w: Weight, ep: ExponentPair, c_dual: float, family: str = "dyadic") -> float:
    """``c ([w]_{A_inf} log(e + [w]_{A_1}))^{1/q0'}`` per unit ``||f||_{q0'}``."""
    if ep.q0 == inf:
        raise DomainError("the dual weak estimate needs q0 < inf")
    s = ep.q0c
    return c_dual * (a_infty_wilson(w, family) * math.log(math.e + a_one(w, family))) ** (1 / s)


def dual_weak_check(spec: SparseFormSpec, w: Weight, c_dual: float, f: LatticeFunction | None = None,
                    budget: int = 500, seed: int = 0) -> DualCheck:
    """``||T* f / w^{1/q0'}||_{L^{q0',inf}(w)} <= c (...)^{1/q0'} ||f||_{q0'}``.

    ``T`` is the linear sparse operator ``sum <f>_{1,Q} chi_Q`` (its own adjoint).  With
    ``f`` given the left side is exact; otherwise it is the best ratio found by search,
    reported per unit norm.
    """
    ep = spec.exponents
    rhs1 = dual_weak_rhs(w, ep, c_dual)
    s = ep.q0c
    inc = Incidence(spec.collection.cubes, w.dim, w.level, w.denom, w.window)
    wv, h = w.values.ravel(), inc.cell_volume

    def ratio(x):
        nx = float(np.sum(x ** s) * h) ** (1 / s)
        return 0.0 if nx == 0 else _dual_lhs(inc, spec.scale, x, wv, h, s) / nx

    if f is not None:
        x = inc.cells(f)
        nx = float(np.sum(x ** s) * h) ** (1 / s)
        return DualCheck(_dual_lhs(inc, spec.scale, x, wv, h, s), rhs1 * nx)
    bud = _Budget(budget)
    ss = np.random.SeedSequence(seed)
    n = wv.size
    best, bx, restart = 0.0, None, 0
    while bud.left > 0:
        rng = np.random.default_rng(ss.spawn(1)[0])
        if restart == 0:
            x0 = np.ones(n)
        elif restart % 2:
            x0 = np.zeros(n)
            x0[int(rng.integers(n))] = 1.0
        else:
            x0 = rng.random(n) ** 3
        x, v = _hill_climb(ratio, x0, rng, bud, 60)
        if v > best:
            best, bx = v, x
        restart += 1
    est = NormEstimate(best, inc.to_function(bx) if bx is not None else None, None,
                       bud.used, budget, seed, "dual-weak")
    return DualCheck(best, rhs1, est)
