"""Hölder-conjugate arithmetic with the edge conventions used by the bound formulas.

Conventions: ``1' = inf``, ``inf' = 1``, ``x / inf = 0``, ``inf / x = inf`` for finite
``x > 0``, and ``t ** 0 = 1`` even when ``t`` is infinite.  Every closed-form constant in
:mod:`hxlab.weights` is routed through these helpers so the limiting cases
(``p0 = 1`` or ``q0 = inf``) are handled in exactly one place.
"""

from __future__ import annotations

import math

from .errors import DomainError

inf = math.inf


def conj(p: float) -> float:
    """Return the conjugate exponent ``p' = p / (p - 1)`` for ``p`` in ``[1, inf]``."""
    if p != p or p < 1:
        raise DomainError(f"conjugate exponent needs p >= 1, got {p}")
    if p == 1:
        return inf
    if p == inf:
        return 1.0
    return p / (p - 1.0)


def div(a: float, b: float) -> float:
    """``a / b`` for positive extended reals."""
    if b == inf:
        if a == inf:
            raise DomainError("inf / inf is undefined")
        return 0.0
    if a == inf:
        return inf
    return a / b


def ratio_conj(a: float, b: float) -> float:
    """``(a / b)'``, the conjugate of a quotient that must be at least one."""
    return conj(div(a, b))


def pw(t: float, e: float) -> float:
    """``t ** e`` with ``t ** 0 = 1`` and ``inf ** e = inf`` for ``e > 0``."""
    if e == 0:
        return 1.0
    if t == inf:
        if e > 0:
            return inf
        return 0.0
    return t ** e


def recip(p: float) -> float:
    """``1 / p`` with ``1 / inf = 0``."""
    return 0.0 if p == inf else 1.0 / p
