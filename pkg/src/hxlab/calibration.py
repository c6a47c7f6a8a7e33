"""Calibrated constants for the implicit-constant checks.

Each constant is the observed supremum of its ratio over a fixed seeded suite, times 1.1;
``(c_hat, kappa_hat)`` is the smallest pair that works on its suite.  The values are frozen
in ``data/calibration.json``; ``recompute`` regenerates them so tests can flag drift.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exponents import inf
from .lattice import LatticeFunction, Weight
from .maximal import KAPPA_CANDIDATES, kolmogorov_ratio, prop22_iii_calibrate
from .weights import ExponentPair, a_infty_wilson, a_p

MARGIN = 1.1
ENV_VAR = "HXLAB_CALIBRATION"
DEFAULT_PATH = Path(__file__).with_name("data") / "calibration.json"
NAMES = ("C_kol", "c_hat", "kappa_hat", "C_cal", "c_lem", "c_T", "c_dual")


@dataclass(frozen=True)
class Calibration:
    values: dict
    path: str
    sha256: str

    def __getitem__(self, name: str) -> float:
        return self.values[name]


def calibration_path() -> Path:
    env = os.environ.get(ENV_VAR)
    return Path(env) if env else DEFAULT_PATH


def load_calibration(path=None) -> Calibration:
    p = Path(path) if path is not None else calibration_path()
    raw = p.read_bytes()
    data = json.loads(raw)
    vals = data["constants"]
    missing = [n for n in NAMES if n not in vals]
    if missing:
        raise KeyError(f"calibration file lacks {', '.join(missing)}")
    return Calibration(dict(vals), str(p), hashlib.sha256(raw).hexdigest())


# suites -----------------------------------------------------------------------

SUITE_LEVEL = 8


def weight_suite(n: int = 50, level: int = SUITE_LEVEL, seed: int = 2024) -> list[Weight]:
    """Mixed suite: random A_1 powers, log-normal weights, steps and power weights."""
    from .lab import power_weight, random_a1_weight, two_step_weight
    rng = np.random.default_rng(seed)
    out = [two_step_weight(level), power_weight(0.5, level), power_weight(0.2, level)]
    N = 2 ** level
    while len(out) < n:
        kind = len(out) % 3
        if kind == 0:
            out.append(random_a1_weight(level, int(rng.integers(2 ** 31)),
                                        float(rng.uniform(0.2, 0.9))))
        elif kind == 1:
            out.append(Weight(1, level, 1, (0,), np.exp(rng.normal(0, 0.8, N))))
        else:
            out.append(power_weight(float(rng.uniform(0.1, 1.0)), level))
    return out[:n]


def kol_raw(draws: int = 1000, level: int = SUITE_LEVEL, seed: int = 11) -> float:
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(draws):
        k = int(rng.integers(3, level + 1))
        f = LatticeFunction.from_array(rng.random(2 ** k) ** float(rng.uniform(1, 8)), k)
        best = max(best, kolmogorov_ratio(f, float(rng.uniform(0.05, 0.95))))
    return best


def cal_raw(weights=None, ps=(1.0, 1.5, 2.0, 3.0, 4.0, 8.0)) -> float:
    ws = weights if weights is not None else weight_suite()
    return max(a_infty_wilson(w) / a_p(w, p) for w in ws for p in ps)


def prop22_raw(weights=None) -> tuple[float, float]:
    ws = weights if weights is not None else weight_suite()
    return prop22_iii_calibrate(ws, KAPPA_CANDIDATES)


PAIRS = (ExponentPair(1, inf), ExponentPair(1, 2), ExponentPair(2, 4))


def lem_raw(draws: int = 60, level: int = 6, seed: int = 13) -> float:
    from .sparse import lemma_main_check, stopping_family
    rng = np.random.default_rng(seed)
    ws = weight_suite(20, level, seed + 1)
    best = 0.0
    N = 2 ** level
    for i in range(draws):
        ep = PAIRS[i % 3]
        hi = ep.q0 if ep.q0 != inf else 4.0
        p = float(rng.uniform(ep.p0 + 0.1 * (hi - ep.p0), hi - 0.1 * (hi - ep.p0)))
        q = float(rng.choice([1.25, 2.0, 4.0]))
        w = ws[i % len(ws)]
        S = stopping_family(LatticeFunction.from_array(rng.random(N) ** 6, level),
                            float(rng.uniform(1.5, 4)))
        f = LatticeFunction.from_array(rng.random(N) ** 3, level)
        g = LatticeFunction.from_array(rng.random(N) ** 3, level)
        best = max(best, lemma_main_check(S, f, g, w, p, q, ep, 1.0).ratio)
    # the extremal unweighted case: one cube, f = g = 1
    from .grid import Cube, GridShift
    from .sparse import SparseCollection
    top = SparseCollection([Cube(GridShift.standard(1), 0, (0,))])
    one, w1 = LatticeFunction.from_array(np.ones(N), level), Weight.constant(1.0, 1, level)
    for ep in PAIRS:
        hi = ep.q0 if ep.q0 != inf else 4.0
        for t in (0.1, 0.3, 0.5, 0.7, 0.9):
            p = ep.p0 + t * (hi - ep.p0)
            for q in (1.25, 2.0, 4.0):
                best = max(best, lemma_main_check(top, one, one, w1, p, q, ep, 1.0).ratio)
    return best


def _shape_suite(level: int):
    from .lab import random_a1_family, two_step_family
    from .sparse import SparseCollection, maximal_family, stopping_family
    from .grid import Cube, GridShift
    fams = [two_step_family(level, (2.0, 4.0)), random_a1_family(3, level, 5)]
    ws = [Weight.constant(1.0, 1, level)] + [w for fm in fams for w in fm.realized]
    rng = np.random.default_rng(17)
    top = SparseCollection([Cube(GridShift.standard(1), 0, (0,))])
    stop = stopping_family(LatticeFunction.from_array(rng.random(2 ** level) ** 8, level))
    return ws, [top, maximal_family(level), stop]


def t_raw(level: int = SUITE_LEVEL, budget: int = 400, seed: int = 19) -> float:
    from .lab import child_seeds
    from .sparse import SparseFormSpec, strong_norm_estimate, weak_norm_estimate
    from .weights import psi, thm11_rhs
    ws, colls = _shape_suite(level)
    jobs = [(w, S, ep) for w in ws for S in colls for ep in PAIRS]
    seeds = child_seeds(seed, len(jobs))
    best = 0.0
    for (w, S, ep), s in zip(jobs, seeds):
        spec = SparseFormSpec(S, ep)
        hi = ep.q0 if ep.q0 != inf else 4.0
        p = (ep.p0 + hi) / 2
        st = strong_norm_estimate(spec, p, w, budget, s).value / thm11_rhs(w, p, ep)
        wk = weak_norm_estimate(spec, ep.p0, w, budget, s).value / psi(w, ep)
        best = max(best, st, wk)
    return best


def dual_raw(level: int = 7, budget: int = 200, seed: int = 23) -> float:
    from .lab import child_seeds
    from .sparse import SparseFormSpec, dual_weak_check
    ws, colls = _shape_suite(level)
    pairs = (ExponentPair(1, 2), ExponentPair(2, 4), ExponentPair(1, 4))
    jobs = [(w, S, ep) for w in ws for S in colls for ep in pairs]
    seeds = child_seeds(seed, len(jobs))
    best = 0.0
    for (w, S, ep), s in zip(jobs, seeds):
        chk = dual_weak_check(SparseFormSpec(S, ep), w, 1.0, budget=budget, seed=s)
        best = max(best, chk.lhs / chk.rhs)
    return best


def recompute(names=NAMES) -> dict:
    """Rerun the calibration suites; returns frozen values (``raw x MARGIN``) and raws."""
    raw: dict[str, float] = {}
    out: dict[str, float] = {}
    for name in names:
        if name in ("c_hat", "kappa_hat"):
            if "c_hat" not in raw:
                c, k = prop22_raw()
                raw["c_hat"], raw["kappa_hat"] = c, k
                out["c_hat"], out["kappa_hat"] = c, k
            continue
        fn = {"C_kol": kol_raw, "C_cal": cal_raw, "c_lem": lem_raw, "c_T": t_raw,
              "c_dual": dual_raw}[name]
        raw[name] = fn()
        out[name] = _round_up(raw[name] * MARGIN)
    return {"constants": out, "raw": raw}


def _round_up(x: float, digits: int = 4) -> float:
    if x <= 0:
        return x
    e = math.floor(math.log10(x)) - digits + 1
    return float(f"{math.ceil(x / 10 ** e) * 10 ** e:.{digits}g}")


def write_calibration(path=None) -> Path:
    p = Path(path) if path is not None else DEFAULT_PATH
    res = recompute()
    doc = {"version": 1, "rule": f"observed suite supremum x {MARGIN}, rounded up to 4 digits;"
                                 " c_hat/kappa_hat: smallest working pair on the suite",
           "constants": {k: res["constants"][k] for k in NAMES},
           "raw": {k: res["raw"][k] for k in NAMES}}
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return p
