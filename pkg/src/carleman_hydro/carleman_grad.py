"""Carleman lifting of the Euler-discretised Grad system.

One time step of the moment system is the local polynomial map

    V(x, t+1) = (A V)(x) + B (V (x) V)(x) + C (V (x) V (x) V)(x),

where ``A = A_loc (x) 1 + A_d1 (x) D1 + A_d2 (x) D2`` carries relaxation and
transport, ``B`` the quadratic part of ``P^eq`` and ``C`` the cubic part left by
``1/rho ~ 2 - rho``.  Order ``j`` of the lifted state holds the per-site tensor
power ``V^(x)j`` in the full ``6**j`` basis.  Its evolution is block upper
triangular with bandwidth two in the order index.

Transport of a product field is not local in general (``V(x) V(y)`` pairs appear),
so the same-order block needs a closure:

``diagonal``
    sitewise Kronecker compression: the block at site offset ``d`` is the
    ``j``-fold Kronecker power of the first-order block at ``d``.
``leibniz``
    ``A_loc`` lifted as a Kronecker power, plus each derivative term applied
    once to the product field with its component matrix averaged over slots.
    Exact for scalar transport coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .grad_dns import (J1, J2, N_COMP, P11, P12, P22, RHO, FlowField, GradParams,
                       InstabilityError)
from .linalg import BlockSparseOperator, Grid, KronTerm, central_difference, kron_compress

CLOSURES = ("diagonal", "leibniz")
MAX_ORDER = 5
MAX_NONLOCAL_SITES = 16


class ResourceGuardError(MemoryError):
    """Requested size exceeds a configured guard."""


@dataclass(frozen=True)
class LocalMatrices:
    """One-step coefficient matrices of the local polynomial map.

    ``A_d1``/``A_d2`` multiply the derivative stencils; all matrices already
    include the factor ``dt``.
    """

    A_loc: np.ndarray
    A_d1: np.ndarray
    A_d2: np.ndarray
    B: np.ndarray
    C: np.ndarray


def _pair(a: int, b: int) -> int:
    return a * N_COMP + b


def _triple(a: int, b: int, c: int) -> int:
    return (a * N_COMP + b) * N_COMP + c


def build_local_matrices(params: GradParams, transport: bool = True) -> LocalMatrices:
    dt, om, cs2 = params.dt, params.omega, params.cs2
    A_loc = np.eye(N_COMP)
    for p in (P11, P12, P22):
        A_loc[p, p] = 1.0 - om * dt
    A_loc[P11, RHO] = A_loc[P22, RHO] = dt * om * cs2

    A_d1 = np.zeros((N_COMP, N_COMP))
    A_d2 = np.zeros((N_COMP, N_COMP))
    if transport:
        # mass and current rows: divergence form
        A_d1[RHO, J1] = A_d2[RHO, J2] = -dt
        A_d1[J1, P11] = A_d2[J1, P12] = -dt
        A_d1[J2, P12] = A_d2[J2, P22] = -dt
        # momentum-flux rows: divergence of Q^eq
        A_d1[P11, J1], A_d2[P11, J2] = -3 * dt * cs2, -dt * cs2
        A_d1[P12, J2], A_d2[P12, J1] = -dt * cs2, -dt * cs2
        A_d1[P22, J1], A_d2[P22, J2] = -dt * cs2, -3 * dt * cs2

    B = np.zeros((N_COMP, N_COMP**2))
    B[P11, _pair(J1, J1)] = B[P12, _pair(J1, J2)] = B[P22, _pair(J2, J2)] = 2 * dt * om
    C = np.zeros((N_COMP, N_COMP**3))
    C[P11, _triple(J1, J1, RHO)] = C[P12, _triple(J1, J2, RHO)] = C[P22, _triple(J2, J2, RHO)] = -dt * om
    return LocalMatrices(A_loc, A_d1, A_d2, B, C)


def local_polynomial_step(mats: LocalMatrices, V: np.ndarray) -> np.ndarray:
    """``A_loc V + B V(x)V + C V(x)V(x)V`` for a derivative-free (uniform) state."""
    V2 = np.kron(V, V)
    return mats.A_loc @ V + mats.B @ V2 + mats.C @ np.kron(V2, V)


def _first_order_terms(mats: LocalMatrices):
    """``(offset, block)`` pairs of the assembled one-step matrix A-hat."""
    terms = [((0, 0), mats.A_loc)]
    for mat, stencil in ((mats.A_d1, central_difference(1)), (mats.A_d2, central_difference(2))):
        if np.any(mat):
            terms += [((d1, d2), w * mat) for d1, d2, w in stencil.offsets]
    return terms


def build_global_matrices(params: GradParams, grid: Grid, transport: bool = True):
    """Return ``(A_hat, B_hat, C_hat)`` as block-sparse operators on ``grid``."""
    mats = build_local_matrices(params, transport)
    A_hat = BlockSparseOperator.from_terms(grid, N_COMP, N_COMP, _first_order_terms(mats))
    B_hat = BlockSparseOperator.from_terms(grid, N_COMP, N_COMP**2, [((0, 0), mats.B)])
    C_hat = BlockSparseOperator.from_terms(grid, N_COMP, N_COMP**3, [((0, 0), mats.C)])
    return A_hat, B_hat, C_hat


# ---------------------------------------------------------------------------
# lifted state


@dataclass
class LiftedState:
    """Orders ``1..K``; ``orders[j-1]`` has shape ``(N, 6**j)``."""

    grid: Grid
    orders: list[np.ndarray]

    @property
    def K(self) -> int:
        return len(self.orders)

    def first_order(self) -> FlowField:
        return FlowField.from_flat(self.grid, self.orders[0].reshape(-1))

    def flat(self) -> np.ndarray:
        return np.concatenate([w.reshape(-1) for w in self.orders])

    @classmethod
    def from_flat(cls, grid: Grid, v: np.ndarray, K: int) -> LiftedState:
        n = grid.n_sites
        out, pos = [], 0
        for j in range(1, K + 1):
            size = n * N_COMP**j
            out.append(np.asarray(v[pos:pos + size], dtype=float).reshape(n, N_COMP**j))
            pos += size
        if pos != len(v):
            raise ValueError(f"vector length {len(v)} does not match K={K} on {n} sites")
        return cls(grid, out)


def lift_initial_state(V0: FlowField, K: int) -> LiftedState:
    """Per-site tensor powers ``V0^(x)j`` for ``j = 1..K``."""
    n = V0.grid.n_sites
    v = V0.V.reshape(n, N_COMP)
    orders = [v.copy()]
    for _ in range(1, K):
        orders.append((orders[-1][:, :, None] * v[:, None, :]).reshape(n, -1))
    return LiftedState(V0.grid, orders)


def lifted_dimension(n_sites: int, K: int) -> int:
    return sum(N_COMP**j * n_sites for j in range(1, K + 1))


# ---------------------------------------------------------------------------
# lifted operator


@dataclass
class CarlemanOperator:
    """Block upper-triangular one-step matrix on the lifted state.

    ``blocks[(i, j)]`` maps order ``j`` into order ``i`` with ``j - i`` in {0, 1, 2}.
    """

    params: GradParams
    grid: Grid
    K: int
    closure: str
    blocks: dict[tuple[int, int], BlockSparseOperator] = field(default_factory=dict)

    @property
    def dims(self) -> list[int]:
        return [N_COMP**j * self.grid.n_sites for j in range(1, self.K + 1)]

    @property
    def shape(self) -> tuple[int, int]:
        d = sum(self.dims)
        return (d, d)

    def apply(self, state: LiftedState) -> LiftedState:
        if state.K != self.K or state.grid != self.grid:
            raise ValueError("lifted state does not match the operator")
        out = []
        for i in range(1, self.K + 1):
            acc = None
            for j in (i, i + 1, i + 2):
                op = self.blocks.get((i, j))
                if op is None:
                    continue
                y = op.apply(state.orders[j - 1].reshape(-1))
                acc = y if acc is None else acc + y
            out.append(acc.reshape(self.grid.n_sites, -1))
        return LiftedState(self.grid, out)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.apply(LiftedState.from_flat(self.grid, v, self.K)).flat()

    def to_scipy(self) -> sp.csr_matrix:
        rows = []
        for i in range(1, self.K + 1):
            row = []
            for j in range(1, self.K + 1):
                op = self.blocks.get((i, j))
                row.append(op.to_scipy() if op is not None else None)
            rows.append(row)
        # bmat needs a shape hint for empty block rows/cols; the diagonal is always set
        return sp.bmat(rows, format="csr")

    def block_row_nnz(self, order: int) -> np.ndarray:
        """Nonzeros per row of the diagonal block ``T(order, order)``."""
        return self.blocks[(order, order)].row_nnz()


def _same_order_block(mats: LocalMatrices, grid: Grid, j: int, closure: str) -> BlockSparseOperator:
    dim = N_COMP**j
    if closure == "diagonal":
        a_kron = BlockSparseOperator.from_terms(
            grid, N_COMP, N_COMP, [(o, KronTerm((b,))) for o, b in _first_order_terms(mats)])
        op = a_kron
        for _ in range(1, j):
            op = kron_compress(op, a_kron)
        return op
    if closure == "leibniz":
        terms = [((0, 0), KronTerm((mats.A_loc,) * j))]
        for mat, stencil in ((mats.A_d1, central_difference(1)), (mats.A_d2, central_difference(2))):
            if not np.any(mat):
                continue
            for d1, d2, w in stencil.offsets:
                for m in range(j):
                    factors = (None,) * m + (w * mat,) + (None,) * (j - m - 1)
                    terms.append(((d1, d2), KronTerm(factors, N_COMP, 1.0 / j)))
        return BlockSparseOperator.from_terms(grid, dim, dim, terms)
    raise ValueError(f"unknown closure {closure!r}; choose from {CLOSURES}")


def _coupling_block(mats: LocalMatrices, grid: Grid, j: int, coupling: np.ndarray) -> BlockSparseOperator:
    """``sum_m A_loc^(m-1) (x) coupling (x) A_loc^(j-m)`` acting on a higher order."""
    extra = round(np.log(coupling.shape[1]) / np.log(N_COMP)) - 1
    terms = []
    for m in range(j):
        factors = (mats.A_loc,) * m + (coupling,) + (mats.A_loc,) * (j - m - 1)
        terms.append(((0, 0), KronTerm(factors, N_COMP)))
    return BlockSparseOperator.from_terms(grid, N_COMP**j, N_COMP**(j + extra), terms)


def build_carleman_operator(params: GradParams, grid: Grid, K: int, closure: str = "diagonal",
                            transport: bool = True, max_order: int = MAX_ORDER,
                            nonlinear: bool = True) -> CarlemanOperator:
    """Assemble the truncated lifted one-step operator for orders ``1..K``.

    ``nonlinear=False`` drops the B and C couplings (linear-regime checks).
    """
    if K < 1:
        raise ValueError("truncation order must be >= 1")
    if K > max_order:
        raise ResourceGuardError(f"K={K} exceeds the order guard ({max_order})")
    if closure not in CLOSURES:
        raise ValueError(f"unknown closure {closure!r}; choose from {CLOSURES}")
    params.validate()
    mats = build_local_matrices(params, transport)
    blocks: dict[tuple[int, int], BlockSparseOperator] = {}
    for j in range(1, K + 1):
        blocks[(j, j)] = _same_order_block(mats, grid, j, closure)
        if nonlinear and j + 1 <= K:
            blocks[(j, j + 1)] = _coupling_block(mats, grid, j, mats.B)
        if nonlinear and j + 2 <= K:
            blocks[(j, j + 2)] = _coupling_block(mats, grid, j, mats.C)
    return CarlemanOperator(params, grid, K, closure, blocks)


def carleman_run(op: CarlemanOperator, s0: LiftedState, steps: int, every: int = 1):
    """Yield ``(step, FlowField)`` of the first-order block every ``every`` steps."""
    state = s0
    for n in range(steps + 1):
        if n % every == 0:
            yield n, state.first_order()
        if n < steps:
            with np.errstate(over="ignore", invalid="ignore"):
                state = op.apply(state)
            if not all(np.all(np.isfinite(w)) for w in state.orders):
                raise InstabilityError(n + 1, "lifted state")


def carleman_trajectory(op: CarlemanOperator, V0: FlowField, steps: int) -> np.ndarray:
    """First-order states ``(steps + 1, nx, ny, 6)`` starting from the lift of ``V0``."""
    out = np.empty((steps + 1,) + V0.V.shape)
    for n, f in carleman_run(op, lift_initial_state(V0, op.K), steps):
        out[n] = f.V
    return out


def export_triplets(matrix: sp.spmatrix, path) -> None:
    """Write ``row col value`` lines (0-based) for every stored nonzero."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


# ---------------------------------------------------------------------------
# nonlocal oracle


@dataclass
class NonlocalReport:
    """Deviation of local closures from the full nonlocal second-order lift.

    Arrays are indexed by step (entry 0 is the initial state).
    """

    dt: float
    order1_max: dict[str, np.ndarray]
    order1_mean: dict[str, np.ndarray]
    order2_max: dict[str, np.ndarray]
    order2_mean: dict[str, np.ndarray]


def exact_nonlocal_lift(params: GradParams, V0: FlowField, steps: int,
                        transport: bool = True) -> NonlocalReport:
    """Evolve the full ``(6N)^2`` second-order lift and compare both local closures.

    The nonlocal state ``W`` holds every site pair; one step is
    ``V <- A V + B diag(W)`` and ``W <- A W A^T``.  Its same-site diagonal is
    the ground truth for the local ``K = 2`` closures.
    """
    grid = V0.grid
    n = grid.n_sites
    if n > MAX_NONLOCAL_SITES:
        raise ResourceGuardError(f"nonlocal lift limited to {MAX_NONLOCAL_SITES} sites, got {n}")
    A_hat, B_hat, _ = build_global_matrices(params, grid, transport)
    a = A_hat.toarray()
    b = B_hat.to_scipy()

    def diag_blocks(W):
        blocks = W.reshape(n, N_COMP, n, N_COMP)[np.arange(n), :, np.arange(n), :]
        return blocks.reshape(-1)

    v = V0.flat()
    W = np.outer(v, v)
    ops = {c: build_carleman_operator(params, grid, 2, c, transport) for c in CLOSURES}
    states = {c: lift_initial_state(V0, 2) for c in CLOSURES}
    o1max = {c: np.zeros(steps + 1) for c in CLOSURES}
    o1mean = {c: np.zeros(steps + 1) for c in CLOSURES}
    o2max = {c: np.zeros(steps + 1) for c in CLOSURES}
    o2mean = {c: np.zeros(steps + 1) for c in CLOSURES}
    for t in range(1, steps + 1):
        v, W = a @ v + b @ diag_blocks(W), a @ W @ a.T
        w_diag = diag_blocks(W)
        for c in CLOSURES:
            states[c] = ops[c].apply(states[c])
            d1 = np.abs(states[c].orders[0].reshape(-1) - v)
            d2 = np.abs(states[c].orders[1].reshape(-1) - w_diag)
            o1max[c][t], o1mean[c][t] = d1.max(), d1.mean()
            o2max[c][t], o2mean[c][t] = d2.max(), d2.mean()
    return NonlocalReport(params.dt, o1max, o1mean, o2max, o2mean)
