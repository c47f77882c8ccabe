"""D2Q9 BGK lattice Boltzmann solver on a periodic grid (collide, then stream)."""

from __future__ import annotations

import numpy as np

from .linalg import Grid

# discrete velocities: rest, 4 axis-aligned, 4 diagonal
C = np.array([[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1],
              [1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=int)
W = np.array([4 / 9] + [1 / 9] * 4 + [1 / 36] * 4)
CS2 = 1.0 / 3.0


def viscosity(omega: float) -> float:
    return CS2 * (1.0 / omega - 0.5)


def omega_for_viscosity(nu: float) -> float:
    return 1.0 / (nu / CS2 + 0.5)


def d2q9_equilibrium(rho: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Second-order equilibrium populations, shape ``rho.shape + (9,)``.

    ``J`` has a trailing axis of length 2.
    """
    rho = np.asarray(rho, dtype=float)
    J = np.asarray(J, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("equilibrium needs strictly positive density")
    jc = J @ C.T.astype(float)  # (..., 9)
    jj = np.sum(J * J, axis=-1)[..., None]
    r = rho[..., None]
    return W * (r + jc / CS2 + jc**2 / (2 * CS2**2 * r) - jj / (2 * CS2 * r))


def moments(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rho = f.sum(axis=-1)
    J = f @ C.astype(float)
    return rho, J


def second_moment(f: np.ndarray) -> np.ndarray:
    """Momentum flux ``sum_i f_i c_ia c_ib`` as ``(..., 2, 2)``."""
    cc = np.einsum("ia,ib->iab", C, C).astype(float)
    return np.einsum("...i,iab->...ab", f, cc)


def stream(f: np.ndarray) -> np.ndarray:
    """Periodic streaming ``f_i(x + c_i) <- f_i(x)``."""
    out = np.empty_like(f)
    for i, (c1, c2) in enumerate(C):
        out[..., i] = np.roll(f[..., i], shift=(c1, c2), axis=(0, 1))
    return out


def lbm_step(f: np.ndarray, omega: float) -> np.ndarray:
    if not 0.0 <= omega < 2.0:
        raise ValueError(f"BGK stability needs 0 <= omega < 2, got {omega}")
    if omega == 0.0:
        return stream(f)
    rho, J = moments(f)
    post = f - omega * (f - d2q9_equilibrium(rho, J))
    return stream(post)


def kolmogorov_populations(grid: Grid, A1: float, A2: float) -> np.ndarray:
    """Equilibrium populations for ``rho = 1``, ``J = (A1 cos k x2, A2 cos k x1)``."""
    if grid.nx != grid.ny:
        raise ValueError("Kolmogorov initial data needs a square grid")
    k = 2 * np.pi / grid.nx
    x1, x2 = grid.coords()
    J = np.stack([A1 * np.cos(k * x2), A2 * np.cos(k * x1)], axis=-1)
    return d2q9_equilibrium(np.ones(grid.shape), J)


def run(f0: np.ndarray, omega: float, steps: int, every: int = 1):
    """Yield ``(step, rho, J)`` every ``every`` steps, including step 0."""
    f = f0
    for n in range(steps + 1):
        if n % every == 0:
            rho, J = moments(f)
            yield n, rho, J
        if n < steps:
            f = lbm_step(f, omega)
