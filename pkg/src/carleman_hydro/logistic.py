"""Carleman linearisation of the logistic equation ``x' = -a x + b x**2``.

The closed-form solution and the truncated power series in
``q(t) = R x0 (1 - exp(-a t))`` (``R = b / a``) serve as continuous-time
oracles for the lifted hierarchy, which is integrated with forward Euler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DIVERGENCE_THRESHOLD = 1e12


class BlowUpError(ArithmeticError):
    """The exact solution is singular at or before the requested time."""

    def __init__(self, t_sing: float, t: float):
        super().__init__(f"solution blows up at t_sing={t_sing:.6g} (requested t={t:.6g})")
        self.t_sing = t_sing
        self.t = t


@dataclass(frozen=True)
class LogisticParams:
    a: float
    b: float
    x0: float

    @property
    def R(self) -> float:
        if self.a == 0:
            raise ValueError("R = b/a is undefined for a = 0")
        return self.b / self.a

    def dual(self) -> LogisticParams:
        """Parameters of ``y = 1/R - x``, which solves the logistic law with ``(-a, -b)``."""
        return LogisticParams(-self.a, -self.b, 1.0 / self.R - self.x0)


def _q(p: LogisticParams, t):
    return p.R * p.x0 * (1.0 - np.exp(-p.a * t))


def singular_time(p: LogisticParams) -> float | None:
    """First positive time at which the exact-solution denominator vanishes, if any."""
    if p.x0 == 0 or p.b == 0:
        return None
    # 1 - R x0 (1 - e^{-at}) = 0  <=>  e^{-at} = 1 - 1/(R x0)
    target = 1.0 - 1.0 / (p.R * p.x0)
    if target <= 0:
        return None
    t = -math.log(target) / p.a
    return t if t > 0 else None


def exact_solution(p: LogisticParams, t):
    """Closed-form solution; raises :class:`BlowUpError` at or past the singularity."""
    t_arr = np.asarray(t, dtype=float)
    t_sing = singular_time(p)
    if t_sing is not None and np.any(t_arr >= t_sing):
        raise BlowUpError(t_sing, float(np.max(t_arr)))
    e = np.exp(-p.a * t_arr)
    out = p.x0 * e / (1.0 - p.R * p.x0 * (1.0 - e))
    return float(out) if np.ndim(out) == 0 else out


def blowup_time(p: LogisticParams) -> float | None:
    """Finite-time singularity of the decaying case (``a, b > 0``), or None when ``R x0 <= 1``."""
    if not (p.a > 0 and p.b > 0):
        raise ValueError(f"blowup_time needs a > 0 and b > 0, got a={p.a}, b={p.b}")
    rx0 = p.R * p.x0
    if rx0 <= 1:
        return None
    return math.log(rx0 / (rx0 - 1.0)) / p.a


def convergence_horizon(p: LogisticParams) -> float:
    """Time beyond which the Carleman series diverges in the growing case (``a, b < 0``)."""
    if not (p.a < 0 and p.b < 0):
        raise ValueError(f"convergence_horizon needs a < 0 and b < 0, got a={p.a}, b={p.b}")
    rx0 = p.R * p.x0
    return math.log((1.0 + rx0) / rx0) / abs(p.a)


@dataclass(frozen=True)
class SeriesValue:
    value: float
    diverging: bool


def carleman_series_checked(p: LogisticParams, t: float, K: int) -> SeriesValue:
    """Truncated series with a flag raised once a term exceeds the divergence threshold."""
    if K < 0:
        raise ValueError("truncation order must be >= 0")
    q = float(_q(p, t))
    lead = p.x0 * math.exp(-p.a * t)
    total = 0.0
    term = lead
    diverging = False
    for _ in range(K + 1):
        total += term
        if abs(term) > DIVERGENCE_THRESHOLD:
            diverging = True
        term *= q
    return SeriesValue(total, diverging)


def carleman_series(p: LogisticParams, t, K: int):
    """``x0 e^{-at} sum_{k=0..K} q(t)^k``; vectorised over ``t``."""
    if K < 0:
        raise ValueError("truncation order must be >= 0")
    t_arr = np.asarray(t, dtype=float)
    q = _q(p, t_arr)
    term = p.x0 * np.exp(-p.a * t_arr)
    total = np.zeros_like(term)
    for _ in range(K + 1):
        total = total + term
        term = term * q
    return float(total) if np.ndim(total) == 0 else total


def series_tail(p: LogisticParams, t: float, K: int) -> float:
    """Geometric-tail size ``|x0 e^{-at}| |q|^{K+1} / |1 - q|`` of the truncation error."""
    q = float(_q(p, t))
    return abs(p.x0 * math.exp(-p.a * t)) * abs(q) ** (K + 1) / abs(1.0 - q)


def hierarchy_matrix(p: LogisticParams, K: int) -> np.ndarray:
    """Generator of ``d x^(k)/dt = -k (a x^(k) - b x^(k+1))`` truncated by ``x^(K+1) = 0``."""
    if K < 1:
        raise ValueError("hierarchy needs K >= 1")
    m = np.zeros((K, K))
    for k in range(1, K + 1):
        m[k - 1, k - 1] = -k * p.a
        if k < K:
            m[k - 1, k] = k * p.b
    return m


def carleman_hierarchy(p: LogisticParams, dt: float, steps: int, K: int) -> np.ndarray:
    """Forward-Euler trajectory of ``x^(1)`` for the K-level hierarchy.

    Returns ``steps + 1`` values starting at ``x0``.  The continuous-time
    limit of level ``K`` is the series truncated after the ``q**(K-1)`` term.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    step = np.eye(K) + dt * hierarchy_matrix(p, K)
    y = p.x0 ** np.arange(1, K + 1, dtype=float)
    out = np.empty(steps + 1)
    out[0] = y[0]
    for n in range(steps):
        y = step @ y
        out[n + 1] = y[0]
    return out
