"""Explicit solver for Grad's 2D moment system (density, current, momentum flux).

Per-site state ``V = (rho, J1, J2, P11, P12, P22)``.  The energy flux is closed
at its equilibrium value and cubic terms are dropped, giving

    d rho / dt  = -d_a J_a
    d J_a / dt  = -d_b P_ab
    d P_ab / dt = -d_c Q_abc^eq - omega (P_ab - P_ab^eq)

with ``P^eq = J_a J_b / rho + cs^2 rho delta_ab`` and
``Q^eq = cs^2 (J_a d_bc + J_b d_ac + J_c d_ab)``.  Space uses central
differences on the unit lattice, time uses forward Euler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import Grid, central_difference

RHO, J1, J2, P11, P12, P22 = range(6)
N_COMP = 6
COMPONENTS = ("rho", "J1", "J2", "P11", "P12", "P22")

D1 = central_difference(1)
D2 = central_difference(2)


class InstabilityError(FloatingPointError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step: int, what: str = "state"):
        super().__init__(f"{what} became non-finite at step {step}")
        self.step = step


@dataclass(frozen=True)
class GradParams:
    omega: float = 2.0
    cs: float = 1.0 / math.sqrt(3.0)
    dt: float = 0.01
    use_polynomial_inverse: bool = True

    @property
    def tau(self) -> float:
        return math.inf if self.omega == 0 else 1.0 / self.omega

    @property
    def cs2(self) -> float:
        return self.cs * self.cs

    @property
    def viscosity(self) -> float:
        """Kinematic viscosity ``cs^2 / omega`` of the adiabatic closure."""
        return math.inf if self.omega == 0 else self.cs2 / self.omega

    def validate(self) -> None:
        if self.dt <= 0 or self.omega < 0:
            raise ValueError("need dt > 0 and omega >= 0")
        if self.omega * self.dt >= 2:
            raise ValueError(f"omega*dt = {self.omega * self.dt} violates omega*dt < 2")
        if self.cs * self.dt >= 1:
            raise ValueError(f"cs*dt = {self.cs * self.dt} violates the acoustic CFL bound")


@dataclass
class FlowField:
    """State on ``grid``; ``V`` has shape ``(nx, ny, 6)``."""

    grid: Grid
    V: np.ndarray

    @property
    def rho(self) -> np.ndarray:
        return self.V[..., RHO]

    @property
    def J(self) -> np.ndarray:
        return self.V[..., J1:J2 + 1]

    @property
    def P(self) -> np.ndarray:
        return self.V[..., P11:]

    def flat(self) -> np.ndarray:
        return self.V.reshape(-1).copy()

    @classmethod
    def from_flat(cls, grid: Grid, v: np.ndarray) -> FlowField:
        return cls(grid, np.asarray(v, dtype=float).reshape(grid.nx, grid.ny, N_COMP))

    def copy(self) -> FlowField:
        return FlowField(self.grid, self.V.copy())


def inverse_density(rho: np.ndarray, polynomial: bool) -> np.ndarray:
    if polynomial:
        return 2.0 - rho
    if np.any(rho <= 0):
        raise ValueError("exact inverse density needs rho > 0")
    return 1.0 / rho


def equilibrium_tensors(V: np.ndarray, cs: float, polynomial: bool = True):
    """Return ``(P_eq, Q_eq)`` for states ``V`` with a trailing axis of 6.

    ``P_eq`` stacks ``(P11, P12, P22)``; ``Q_eq`` stacks the independent
    components ``(Q111, Q112, Q122, Q222)``.
    """
    V = np.asarray(V, dtype=float)
    rho, j1, j2 = V[..., RHO], V[..., J1], V[..., J2]
    inv = inverse_density(rho, polynomial)
    cs2 = cs * cs
    p_eq = np.stack([j1 * j1 * inv + cs2 * rho, j1 * j2 * inv, j2 * j2 * inv + cs2 * rho], axis=-1)
    q_eq = np.stack([3 * cs2 * j1, cs2 * j2, cs2 * j1, 3 * cs2 * j2], axis=-1)
    return p_eq, q_eq


def div_q_eq(grid: Grid, J: np.ndarray, cs: float) -> np.ndarray:
    """``d_c Q_abc^eq`` for ``(ab) = (11, 12, 22)``."""
    cs2 = cs * cs
    d1j1, d2j1 = D1.apply(grid, J[..., 0]), D2.apply(grid, J[..., 0])
    d1j2, d2j2 = D1.apply(grid, J[..., 1]), D2.apply(grid, J[..., 1])
    return np.stack([cs2 * (3 * d1j1 + d2j2), cs2 * (d2j1 + d1j2), cs2 * (d1j1 + 3 * d2j2)], axis=-1)


def kolmogorov_init(grid: Grid, A1: float, A2: float, params: GradParams,
                    chapman_enskog: bool = False) -> FlowField:
    """``rho = 1``, ``J1 = A1 cos(k x2)``, ``J2 = A2 cos(k x1)``, ``k = 2 pi / L``; P at equilibrium."""
    if grid.nx != grid.ny:
        raise ValueError(f"Kolmogorov initial data needs an L x L grid, got {grid.nx}x{grid.ny}")
    k = 2 * np.pi / grid.nx
    x1, x2 = grid.coords()
    V = np.zeros(grid.shape + (N_COMP,))
    V[..., RHO] = 1.0
    V[..., J1] = A1 * np.cos(k * x2)
    V[..., J2] = A2 * np.cos(k * x1)
    V[..., P11:], _ = equilibrium_tensors(V, params.cs, params.use_polynomial_inverse)
    field = FlowField(grid, V)
    if chapman_enskog:
        V[..., P11:] = chapman_enskog_pressure(field, params)
    return field


def uniform_equilibrium(grid: Grid, params: GradParams, rho: float = 1.0,
                        J: tuple[float, float] = (0.0, 0.0)) -> FlowField:
    V = np.zeros(grid.shape + (N_COMP,))
    V[..., RHO] = rho
    V[..., J1], V[..., J2] = J
    V[..., P11:], _ = equilibrium_tensors(V, params.cs, params.use_polynomial_inverse)
    return FlowField(grid, V)


def chapman_enskog_pressure(field: FlowField, params: GradParams) -> np.ndarray:
    """Adiabatic-closure estimate ``P^eq - tau d_c Q^eq`` of the momentum flux."""
    p_eq, _ = equilibrium_tensors(field.V, params.cs, params.use_polynomial_inverse)
    return p_eq - params.tau * div_q_eq(field.grid, field.J, params.cs)


def grad_step(field: FlowField, params: GradParams, nonlinear: bool = True) -> FlowField:
    """One forward-Euler step; reads the old state only (double buffer).

    With ``nonlinear=False`` the ``J J / rho`` part of ``P^eq`` is dropped,
    leaving the linearised system about rest.
    """
    grid, V, dt = field.grid, field.V, params.dt
    j1, j2 = V[..., J1], V[..., J2]
    p11, p12, p22 = V[..., P11], V[..., P12], V[..., P22]
    if nonlinear:
        p_eq, _ = equilibrium_tensors(V, params.cs, params.use_polynomial_inverse)
    else:
        iso = params.cs2 * V[..., RHO]
        p_eq = np.stack([iso, np.zeros_like(iso), iso], axis=-1)
    out = np.empty_like(V)
    out[..., RHO] = V[..., RHO] - dt * (D1.apply(grid, j1) + D2.apply(grid, j2))
    out[..., J1] = j1 - dt * (D1.apply(grid, p11) + D2.apply(grid, p12))
    out[..., J2] = j2 - dt * (D1.apply(grid, p12) + D2.apply(grid, p22))
    out[..., P11:] = V[..., P11:] - dt * div_q_eq(grid, V[..., J1:J2 + 1], params.cs) \
        - dt * params.omega * (V[..., P11:] - p_eq)
    return FlowField(grid, out)


def run(field: FlowField, params: GradParams, steps: int, every: int = 1,
        nonlinear: bool = True):
    """Yield ``(step, FlowField)`` every ``every`` steps, including step 0."""
    params.validate()
    for n in range(steps + 1):
        if n % every == 0:
            yield n, field
        if n < steps:
            # overflow is caught by the finiteness check below
            with np.errstate(over="ignore", invalid="ignore"):
                field = grad_step(field, params, nonlinear)
            if not np.all(np.isfinite(field.V)):
                raise InstabilityError(n + 1)


def trajectory(field: FlowField, params: GradParams, steps: int,
               nonlinear: bool = True) -> np.ndarray:
    """All states as an array ``(steps + 1, nx, ny, 6)``."""
    out = np.empty((steps + 1,) + field.V.shape)
    for n, f in run(field, params, steps, nonlinear=nonlinear):
        out[n] = f.V
    return out
