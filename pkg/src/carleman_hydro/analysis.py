"""Error metrics, counting, telescopic propagation, conditioning and cost estimates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .carleman_grad import CarlemanOperator, ResourceGuardError, build_carleman_operator
from .grad_dns import N_COMP, GradParams
from .linalg import DENSE_THRESHOLD, Grid, SingularMatrixError, condition_number

MASK_ATOL = 1e-12


class EmptyReportError(ValueError):
    """Every site was excluded from an error average."""


class BigCountError(OverflowError):
    """Variable count does not fit a signed 64-bit integer."""


# ---------------------------------------------------------------------------
# relative errors


@dataclass(frozen=True)
class ErrorReport:
    """Per-site relative current error at one time index.

    ``field`` is zero at excluded sites; ``mask`` is True where a site is excluded.
    """

    field: np.ndarray
    mask: np.ndarray
    mean: float
    t: int


def currents(states: np.ndarray) -> np.ndarray:
    """Current components ``(J1, J2)`` of a state array with a trailing axis of 6 (or 2)."""
    states = np.asarray(states, dtype=float)
    if states.shape[-1] == 2:
        return states
    if states.shape[-1] == N_COMP:
        return states[..., 1:3]
    raise ValueError(f"expected a trailing axis of 6 (full state) or 2 (currents), got {states.shape[-1]}")


def _component_mask(ref_j: np.ndarray, t: int, mode: str, atol: float) -> np.ndarray:
    if mode == "initial":
        return np.abs(ref_j[0]) <= atol
    if mode == "pointwise":
        return np.abs(ref_j[t]) <= atol
    raise ValueError(f"mask mode must be 'initial' or 'pointwise', got {mode!r}")


def relative_error(reference: np.ndarray, approx: np.ndarray, t: int, mask: str = "initial",
                   atol: float = MASK_ATOL) -> ErrorReport:
    """Sum over current components of ``|(J_ref - J) / J_ref|`` at step ``t``.

    ``reference`` and ``approx`` are trajectories ``(steps + 1, nx, ny, 6 or 2)``.
    A component is skipped where the reference vanishes (at ``t = 0`` by default,
    or at ``t`` itself with ``mask="pointwise"``); a site is excluded only when
    both components are skipped.
    """
    ref_j, app_j = currents(reference), currents(approx)
    if ref_j.shape[1:] != app_j.shape[1:]:
        raise ValueError(f"grid mismatch: {ref_j.shape[1:]} vs {app_j.shape[1:]}")
    if not (0 <= t < min(len(ref_j), len(app_j))):
        raise ValueError(f"time index {t} outside both series")
    skip = _component_mask(ref_j, t, mask, atol)
    denom = np.where(skip, 1.0, ref_j[t])
    comp = np.where(skip, 0.0, np.abs((ref_j[t] - app_j[t]) / denom))
    excluded = skip.all(axis=-1)
    if excluded.all():
        raise EmptyReportError(f"all sites are excluded at t={t}")
    err = comp.sum(axis=-1)
    return ErrorReport(err, excluded, float(err[~excluded].mean()), t)


def mean_error_series(reference: np.ndarray, approx: np.ndarray, horizon: int | None = None,
                      mask: str = "initial", atol: float = MASK_ATOL) -> np.ndarray:
    """Mean relative error over included sites for steps ``0..horizon``."""
    last = min(len(reference), len(approx)) - 1
    horizon = last if horizon is None else horizon
    if horizon > last:
        raise ValueError(f"horizon {horizon} exceeds the available {last} steps")
    return np.array([relative_error(reference, approx, t, mask, atol).mean
                     for t in range(horizon + 1)])


def probe_errors(reference: np.ndarray, approx: np.ndarray, site: tuple[int, int],
                 component: int = 0) -> np.ndarray:
    """Absolute current error ``|J_ref - J|`` at one site over time."""
    ref_j, app_j = currents(reference), currents(approx)
    n = min(len(ref_j), len(app_j))
    return np.abs(ref_j[:n, site[0], site[1], component] - app_j[:n, site[0], site[1], component])


def crossover_step(err_low: np.ndarray, err_high: np.ndarray, rtol: float = 1e-12,
                   atol: float = 0.0) -> int | None:
    """First step where ``err_low`` falls below ``err_high`` after having been above it.

    ``err_low`` is the lower-order error series.  A lead counts only when the
    gap exceeds ``max(atol, rtol * max(|a|, |b|))``.  Returns None when the
    higher order never led, or never lost its lead.
    """
    n = min(len(err_low), len(err_high))
    a, b = np.asarray(err_low[:n]), np.asarray(err_high[:n])
    margin = np.maximum(atol, rtol * np.maximum(np.abs(a), np.abs(b)))
    high_leads = a > b + margin
    low_leads = b > a + margin
    led = np.flatnonzero(high_leads)
    if led.size == 0:
        return None
    after = np.flatnonzero(low_leads[led[0]:])
    return int(led[0] + after[0]) if after.size else None


def relative_l2(approx: np.ndarray, reference: np.ndarray) -> float:
    ref = np.asarray(reference, dtype=float)
    return float(np.linalg.norm(np.asarray(approx) - ref) / np.linalg.norm(ref))


# ---------------------------------------------------------------------------
# decay fits


def mode_amplitude(values: np.ndarray, k: float, axis: int) -> float:
    """Projection of a scalar field ``(nx, ny)`` onto ``cos(k x_axis)``."""
    values = np.asarray(values, dtype=float)
    x = np.arange(values.shape[axis - 1])
    basis = np.cos(k * x)
    prof = values.mean(axis=1 if axis == 1 else 0)
    return float(2.0 * prof @ basis / len(x))


def fit_decay_rate(t: np.ndarray, amplitude: np.ndarray) -> float:
    """Least-squares rate ``gamma`` of ``amplitude ~ exp(-gamma t)``."""
    slope, _ = np.polyfit(np.asarray(t, dtype=float), np.log(np.abs(amplitude)), 1)
    return float(-slope)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r2: float


def fit_power_law(x, y) -> PowerLawFit:
    """Least-squares fit of ``log y = p log x + c`` with its coefficient of determination."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    p, c = np.polyfit(lx, ly, 1)
    resid = ly - (p * lx + c)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(p), float(math.exp(c)), r2)


def fit_exponential(x, y) -> PowerLawFit:
    """Fit of ``log y = r x + c``; ``exponent`` holds the rate ``r``."""
    xx, ly = np.asarray(x, dtype=float), np.log(np.asarray(y, dtype=float))
    r, c = np.polyfit(xx, ly, 1)
    resid = ly - (r * xx + c)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(r), float(math.exp(c)), r2)


# ---------------------------------------------------------------------------
# counting


def carleman_variable_count(b: int, k: int) -> tuple[int, int]:
    """Number of distinct monomials of degree ``1..k`` in ``b`` variables, and qubits to index them."""
    if b < 1 or k < 1:
        raise ValueError(f"need b >= 1 and k >= 1, got b={b}, k={k}")
    n = sum(math.comb(b + j - 1, j) for j in range(1, k + 1))
    if n >= 2**63:
        raise BigCountError(f"count for b={b}, k={k} exceeds 64 bits")
    return n, (n - 1).bit_length()


def multiset_count_bruteforce(b: int, k: int) -> int:
    """Enumerate every multiset of size ``1..k`` drawn from ``b`` symbols."""
    return sum(sum(1 for _ in itertools.combinations_with_replacement(range(b), j))
               for j in range(1, k + 1))


def qubit_estimate(re: float) -> float:
    """Qubits needed to resolve a flow at Reynolds number ``re``: ``3 log2 Re``."""
    if re <= 1:
        raise ValueError(f"Reynolds number must exceed 1, got {re}")
    return 3.0 * math.log2(re)


# ---------------------------------------------------------------------------
# telescopic propagation


def lifted_site_index(grid: Grid, K: int) -> np.ndarray:
    """Site owning each entry of the flattened lifted state."""
    n = grid.n_sites
    return np.concatenate([np.repeat(np.arange(n), N_COMP**j) for j in range(1, K + 1)])


def site_bandwidth(matrix, grid: Grid, site_of: np.ndarray) -> int:
    """Largest periodic Manhattan distance between sites coupled by ``matrix``."""
    m = sp.coo_matrix(matrix)
    keep = m.data != 0
    rs, cs = site_of[m.row[keep]], site_of[m.col[keep]]
    d1 = np.abs(rs // grid.ny - cs // grid.ny)
    d2 = np.abs(rs % grid.ny - cs % grid.ny)
    d1 = np.minimum(d1, grid.nx - d1)
    d2 = np.minimum(d2, grid.ny - d2)
    return int((d1 + d2).max()) if d1.size else 0


@dataclass
class Telescope:
    """``matrix`` is ``M**T``; ``bandwidth[t - 1]`` is the site bandwidth of ``M**t``."""

    T: int
    matrix: sp.csr_matrix
    bandwidth: list[int] = field(default_factory=list)


def telescopic_propagator(op: CarlemanOperator, T: int, max_dim: int = DENSE_THRESHOLD) -> Telescope:
    """Materialise ``M**T`` for the one-step lifted matrix ``M``.

    Refused above ``max_dim`` rows; propagate by repeated application instead.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    dim = op.shape[0]
    if dim > max_dim:
        raise ResourceGuardError(f"telescopic matrix of dimension {dim} exceeds the guard ({max_dim})")
    m = op.to_scipy()
    site_of = lifted_site_index(op.grid, op.K)
    power = m.copy()
    bands = [site_bandwidth(power, op.grid, site_of)]
    for _ in range(1, T):
        power = (power @ m).tocsr()
        bands.append(site_bandwidth(power, op.grid, site_of))
    return Telescope(T, power, bands)


# ---------------------------------------------------------------------------
# conditioning


@dataclass(frozen=True)
class SweepPoint:
    x: int
    k: int
    kappa: float
    error: str = ""


@dataclass
class SweepTable:
    variable: str
    points: list[SweepPoint]
    fit: PowerLawFit | None = None

    def kappas(self) -> np.ndarray:
        return np.array([p.kappa for p in self.points])


def _kappa_point(x: int, k: int, matrix, dense_threshold: int) -> SweepPoint:
    try:
        return SweepPoint(x, k, condition_number(matrix, dense_threshold))
    except SingularMatrixError as exc:
        return SweepPoint(x, k, float("nan"), str(exc))


def _fit_valid(points: list[SweepPoint]) -> PowerLawFit | None:
    good = [p for p in points if np.isfinite(p.kappa)]
    if len(good) < 2:
        return None
    return fit_power_law([p.x for p in good], [p.kappa for p in good])


def kappa_vs_sites(params: GradParams, k: int, sizes: list[int], closure: str = "diagonal",
                   dense_threshold: int = DENSE_THRESHOLD) -> SweepTable:
    """Condition number of the one-step lifted matrix on ``L x L`` grids with ``N = L**2`` sites."""
    points = []
    for n in sizes:
        L = math.isqrt(n)
        if L * L != n:
            raise ValueError(f"site count {n} is not a perfect square")
        op = build_carleman_operator(params, Grid(L, L), k, closure)
        points.append(_kappa_point(n, k, op.to_scipy(), dense_threshold))
    return SweepTable("N", points, _fit_valid(points))


def kappa_vs_steps(params: GradParams, k: int, steps: list[int], L: int = 8,
                   closure: str = "diagonal", max_dim: int = DENSE_THRESHOLD) -> SweepTable:
    """Condition number of ``M**T`` for each ``T`` in ``steps`` (dense powers)."""
    op = build_carleman_operator(params, Grid(L, L), k, closure)
    if op.shape[0] > max_dim:
        raise ResourceGuardError(f"dense powers of dimension {op.shape[0]} exceed the guard ({max_dim})")
    m = op.to_scipy().toarray()
    points, power, done = [], np.eye(m.shape[0]), 0
    for T in sorted(steps):
        for _ in range(T - done):
            power = m @ power
        done = T
        points.append(_kappa_point(T, k, power, max_dim))
    return SweepTable("T", points, _fit_valid([p for p in points if p.x > 0]))


# ---------------------------------------------------------------------------
# quantum solver cost


def solver_complexity(kind: str, N: int, k: int, kappa: float, eps: float,
                      s: float | None = None, g: int = N_COMP) -> float:
    """Abstract cost with unit prefactor: HHL ``log2(g^k N) s^2 kappa^2 / eps``,
    CKS ``log2(g^k N / eps) kappa``."""
    if min(N, k, kappa, eps) <= 0 or eps >= 1:
        raise ValueError("need positive N, k, kappa and 0 < eps < 1")
    dim = float(g) ** k * N
    if kind.upper() == "HHL":
        if s is None or s <= 0:
            raise ValueError("HHL cost needs a positive sparsity s")
        return math.log2(dim) * s * s * kappa * kappa / eps
    if kind.upper() == "CKS":
        return math.log2(dim / eps) * kappa
    raise ValueError(f"unknown solver kind {kind!r}; choose HHL or CKS")
