"""Periodic-grid bookkeeping and block-sparse operator algebra.

Flat vectors use a fixed layout: the component index varies fastest inside a
site, and sites are ordered row-major over ``(x1, x2)``, i.e.
``index = (x1 * ny + x2) * block + component``.

Operators are stored per site offset.  The block attached to offset ``d`` at
row-site ``x`` multiplies the input at site ``x + d`` (periodic wrap), so

    (M v)(x) = sum_d block_d(x) @ v(x + d).

A block is either a dense ``(rows, cols)`` array shared by every site, a
``(N, rows, cols)`` stack with one block per site, or a :class:`KronTerm`
holding a Kronecker-factored block that is never materialised densely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

Offset = tuple[int, int]


class SingularMatrixError(ValueError):
    """Raised when the smallest singular value is numerically zero."""


# ---------------------------------------------------------------------------
# grid and stencils


@dataclass(frozen=True)
class Grid:
    """Periodic ``nx`` by ``ny`` lattice with unit spacing."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.nx}x{self.ny}")

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def site_index(self, x1: int, x2: int) -> int:
        return (x1 % self.nx) * self.ny + (x2 % self.ny)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x1, x2)`` integer coordinate arrays of shape ``(nx, ny)``."""
        return np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")

    def canonical(self, offset: Offset) -> Offset:
        return (offset[0] % self.nx, offset[1] % self.ny)

    def distance(self, offset: Offset) -> int:
        """Periodic Manhattan length of a site offset."""
        d1, d2 = self.canonical(offset)
        return min(d1, self.nx - d1) + min(d2, self.ny - d2)

    def shift(self, field: np.ndarray, offset: Offset) -> np.ndarray:
        """Return ``g`` with ``g(x) = field(x + offset)``; leading axes are ``(nx, ny)``."""
        d1, d2 = self.canonical(offset)
        if d1 == 0 and d2 == 0:
            return field
        return np.roll(field, shift=(-d1, -d2), axis=(0, 1))

    def shift_matrix(self, offset: Offset) -> sp.csr_matrix:
        """Site permutation ``S`` with ``(S u)(x) = u(x + offset)``."""
        n = self.n_sites
        x1, x2 = self.coords()
        rows = (x1 * self.ny + x2).ravel()
        cols = (((x1 + offset[0]) % self.nx) * self.ny + (x2 + offset[1]) % self.ny).ravel()
        return sp.csr_matrix((np.ones(n), (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class Stencil:
    """Finite set of ``(dx1, dx2, weight)`` taps."""

    offsets: tuple[tuple[int, int, float], ...]

    def apply(self, grid: Grid, field: np.ndarray) -> np.ndarray:
        out = np.zeros_like(field, dtype=float)
        for d1, d2, w in self.offsets:
            if w != 0.0:
                out = out + w * grid.shift(field, (d1, d2))
        return out

    def scaled(self, factor: float) -> Stencil:
        return Stencil(tuple((d1, d2, factor * w) for d1, d2, w in self.offsets))


def central_difference(axis: int) -> Stencil:
    """Second-order central difference along ``axis`` (1 or 2) on the unit lattice."""
    if axis == 1:
        return Stencil(((1, 0, 0.5), (-1, 0, -0.5)))
    if axis == 2:
        return Stencil(((0, 1, 0.5), (0, -1, -0.5)))
    raise ValueError(f"axis must be 1 or 2, got {axis}")


def identity_stencil() -> Stencil:
    return Stencil(((0, 0, 1.0),))


# ---------------------------------------------------------------------------
# Kronecker-factored blocks


@dataclass(frozen=True)
class KronTerm:
    """Block ``coeff * F_1 (x) F_2 (x) ... (x) F_m`` acting on a tensor-power field.

    Factor ``F_i`` has shape ``(r_i, c_i)``; a factor with ``c_i = d**q``
    consumes ``q`` consecutive input slots of size ``d``.  ``None`` stands
    for the identity on one slot of size ``slot_dim`` and is skipped on
    application.
    """

    factors: tuple[np.ndarray | None, ...]
    slot_dim: int = 6
    coeff: float = 1.0

    def _dims(self) -> list[tuple[int, int]]:
        return [(self.slot_dim, self.slot_dim) if f is None else f.shape for f in self.factors]

    @property
    def shape(self) -> tuple[int, int]:
        dims = self._dims()
        return (math.prod(r for r, _ in dims), math.prod(c for _, c in dims))

    @cached_property
    def nnz(self) -> int:
        return math.prod(self.slot_dim if f is None else int(np.count_nonzero(f))
                         for f in self.factors)

    @cached_property
    def _sparse(self) -> sp.csr_matrix:
        return self.tosparse()

    def _prefers_sparse(self) -> bool:
        rows, cols = self.shape
        return cols > 36 and self.nnz <= 16 * rows

    def matmat_t(self, xt: np.ndarray) -> np.ndarray:
        """Apply to every column of ``xt`` (shape ``(cols, batch)``)."""
        if self._prefers_sparse():
            # few nonzeros per row: one sparse product beats per-slot passes
            return self._sparse @ xt
        return self.matmat(xt.T).T

    def matmat(self, x: np.ndarray) -> np.ndarray:
        """Apply to every row of ``x`` (shape ``(batch, cols)``)."""
        if self._prefers_sparse():
            return np.ascontiguousarray((self._sparse @ x.T).T)
        batch = x.shape[0]
        dims = self._dims()
        # shrinking factors go first to keep intermediates small; each mode
        # product acts in place on its slot so the output layout is unchanged
        sizes = [c for _, c in dims]
        t = x.reshape([batch] + sizes)
        order = sorted((i for i, f in enumerate(self.factors) if f is not None),
                       key=lambda i: dims[i][0] / dims[i][1])
        for i in order:
            shape = t.shape
            lead = batch * math.prod(shape[1:i + 1])
            rest = math.prod(shape[i + 2:])
            t = _mode_product(self.factors[i], t.reshape(lead, shape[i + 1], rest))
            t = t.reshape(shape[:i + 1] + (dims[i][0],) + shape[i + 2:])
        t = t.reshape(batch, -1)
        return t if self.coeff == 1.0 else self.coeff * t

    def toarray(self) -> np.ndarray:
        mats = [np.eye(self.slot_dim) if f is None else f for f in self.factors]
        return self.coeff * reduce(np.kron, mats)

    def tosparse(self) -> sp.csr_matrix:
        mats = [sp.identity(self.slot_dim, format="csr") if f is None else sp.csr_matrix(f)
                for f in self.factors]
        out = reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)
        return (self.coeff * out).tocsr()

    def pattern(self) -> np.ndarray:
        """Boolean structural nonzero pattern of the dense block."""
        mats = [np.eye(self.slot_dim, dtype=bool) if f is None else f != 0 for f in self.factors]
        return reduce(lambda a, b: np.kron(a, b).astype(bool), mats)


def _mode_product(f: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``out[p, a, q] = sum_b f[a, b] t[p, b, q]`` with one large GEMM where possible."""
    p, c, q = t.shape
    r = f.shape[0]
    if q == 1:
        return (t.reshape(p, c) @ f.T).reshape(p, r, 1)
    if p == 1:
        return (f @ t.reshape(c, q)).reshape(1, r, q)
    if q >= 64:
        return np.matmul(f, t)
    out = np.ascontiguousarray(t.transpose(0, 2, 1)).reshape(p * q, c) @ f.T
    return out.reshape(p, q, r).transpose(0, 2, 1)


Block = Union[np.ndarray, KronTerm]


def _block_shape(block: Block) -> tuple[int, int]:
    return block.shape if isinstance(block, KronTerm) else block.shape[-2:]


def _apply_block_t(block: Block, xt: np.ndarray) -> np.ndarray:
    """Block product in component-major layout: ``xt`` is ``(cols, n_sites)``."""
    if isinstance(block, KronTerm):
        return block.matmat_t(xt)
    if block.ndim == 2:
        return block @ xt
    return np.einsum("nij,jn->in", block, xt)


def _dense_block(block: Block) -> np.ndarray:
    return block.toarray() if isinstance(block, KronTerm) else block


# ---------------------------------------------------------------------------
# block-sparse operators


@dataclass(frozen=True)
class BlockSparseOperator:
    """Translation-structured sparse operator on ``grid`` with dense component blocks."""

    grid: Grid
    block_rows: int
    block_cols: int
    blocks: dict[Offset, tuple[Block, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for off, terms in self.blocks.items():
            for b in terms:
                if _block_shape(b) != (self.block_rows, self.block_cols):
                    raise ValueError(
                        f"block at offset {off} has shape {_block_shape(b)}, "
                        f"expected {(self.block_rows, self.block_cols)}"
                    )
                if isinstance(b, np.ndarray) and b.ndim == 3 and b.shape[0] != self.grid.n_sites:
                    raise ValueError("per-site block stack must have one block per site")

    # construction -----------------------------------------------------------

    @classmethod
    def from_terms(cls, grid: Grid, rows: int, cols: int,
                   terms: Iterable[tuple[Offset, Block]]) -> BlockSparseOperator:
        acc: dict[Offset, list[Block]] = {}
        for off, b in terms:
            acc.setdefault(grid.canonical(off), []).append(b)
        return cls(grid, rows, cols, {k: tuple(v) for k, v in sorted(acc.items())})

    @classmethod
    def identity(cls, grid: Grid, dim: int) -> BlockSparseOperator:
        return cls.from_terms(grid, dim, dim, [((0, 0), np.eye(dim))])

    @classmethod
    def from_stencil(cls, grid: Grid, component: np.ndarray, stencil: Stencil) -> BlockSparseOperator:
        """The operator ``component (x) stencil``."""
        component = np.asarray(component, dtype=float)
        r, c = component.shape
        return cls.from_terms(grid, r, c, [((d1, d2), w * component)
                                           for d1, d2, w in stencil.offsets if w != 0.0])

    # algebra ----------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        n = self.grid.n_sites
        return (self.block_rows * n, self.block_cols * n)

    @property
    def offsets(self) -> list[Offset]:
        return sorted(self.blocks)

    def __add__(self, other: BlockSparseOperator) -> BlockSparseOperator:
        if self.grid != other.grid or (self.block_rows, self.block_cols) != (other.block_rows, other.block_cols):
            raise ValueError("operator shapes or grids differ")
        terms = [(o, b) for o, bs in self.blocks.items() for b in bs]
        terms += [(o, b) for o, bs in other.blocks.items() for b in bs]
        return BlockSparseOperator.from_terms(self.grid, self.block_rows, self.block_cols, terms)

    def scaled(self, alpha: float) -> BlockSparseOperator:
        def sc(b: Block) -> Block:
            if isinstance(b, KronTerm):
                return KronTerm(b.factors, b.slot_dim, alpha * b.coeff)
            return alpha * b
        return BlockSparseOperator(self.grid, self.block_rows, self.block_cols,
                                   {o: tuple(sc(b) for b in bs) for o, bs in self.blocks.items()})

    def block(self, offset: Offset, site: int = 0) -> np.ndarray:
        """Dense total block at ``offset`` for row-site ``site``."""
        out = np.zeros((self.block_rows, self.block_cols))
        for b in self.blocks.get(self.grid.canonical(offset), ()):
            d = _dense_block(b)
            out += d[site] if d.ndim == 3 else d
        return out

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Exact sparse product ``M v`` with a fixed (sorted-offset) summation order."""
        v = np.asarray(v, dtype=float)
        n = self.grid.n_sites
        if v.shape != (self.block_cols * n,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.block_cols * n},)")
        # component-major copy so every shifted slice is contiguous
        field_t = np.ascontiguousarray(v.reshape(n, self.block_cols).T).reshape(
            self.block_cols, self.grid.nx, self.grid.ny)
        out_t = np.zeros((self.block_rows, n))
        for off in self.offsets:
            xt = np.roll(field_t, (-off[0], -off[1]), axis=(1, 2)).reshape(self.block_cols, n)
            for b in self.blocks[off]:
                out_t += _apply_block_t(b, xt)
        return np.ascontiguousarray(out_t.T).reshape(-1)

    def to_scipy(self) -> sp.csr_matrix:
        n = self.grid.n_sites
        total = sp.csr_matrix(self.shape)
        for off in self.offsets:
            shift = self.grid.shift_matrix(off)
            for b in self.blocks[off]:
                if isinstance(b, KronTerm):
                    total = total + sp.kron(shift, b.tosparse(), format="csr")
                elif b.ndim == 2:
                    total = total + sp.kron(shift, sp.csr_matrix(b), format="csr")
                else:
                    total = total + sp.block_diag(list(b), format="csr") @ sp.kron(
                        shift, sp.identity(self.block_cols), format="csr")
        total.eliminate_zeros()
        return total.tocsr()

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row_nnz(self) -> np.ndarray:
        """Structural nonzeros in each row of the assembled matrix."""
        m = self.to_scipy()
        return np.diff(m.indptr)


def apply(op: BlockSparseOperator, v: np.ndarray) -> np.ndarray:
    return op.apply(v)


def _sitewise(block: Block, n: int) -> np.ndarray:
    d = _dense_block(block)
    return d if d.ndim == 3 else np.broadcast_to(d, (n,) + d.shape)


def kron_compress(op_a: BlockSparseOperator, op_b: BlockSparseOperator) -> BlockSparseOperator:
    """Restriction of ``op_a (x) op_b`` to same-site product fields.

    The result has block ``block_a(x, x') (x) block_b(x, x')`` at each site pair,
    so only offsets present in both operands survive.
    """
    if op_a.grid != op_b.grid:
        raise ValueError("operators live on different grids")
    grid = op_a.grid
    n = grid.n_sites
    terms: list[tuple[Offset, Block]] = []
    for off in sorted(set(op_a.blocks) & set(op_b.blocks)):
        for ba in op_a.blocks[off]:
            for bb in op_b.blocks[off]:
                if isinstance(ba, np.ndarray) and isinstance(bb, np.ndarray) and ba.ndim == bb.ndim == 2:
                    terms.append((off, np.kron(ba, bb)))
                elif isinstance(ba, KronTerm) and isinstance(bb, KronTerm) and ba.slot_dim == bb.slot_dim:
                    terms.append((off, KronTerm(ba.factors + bb.factors, ba.slot_dim, ba.coeff * bb.coeff)))
                else:
                    sa, sb = _sitewise(ba, n), _sitewise(bb, n)
                    terms.append((off, np.einsum("nij,nkl->nikjl", sa, sb).reshape(
                        n, sa.shape[1] * sb.shape[1], sa.shape[2] * sb.shape[2])))
    return BlockSparseOperator.from_terms(grid, op_a.block_rows * op_b.block_rows,
                                          op_a.block_cols * op_b.block_cols, terms)


def full_kron(op_a: BlockSparseOperator, op_b: BlockSparseOperator) -> sp.csr_matrix:
    """Plain Kronecker product of the assembled matrices (all site pairs)."""
    return sp.kron(op_a.to_scipy(), op_b.to_scipy(), format="csr")


# ---------------------------------------------------------------------------
# condition numbers

DENSE_THRESHOLD = 5000


def _as_matrix(op) -> Union[np.ndarray, sp.spmatrix]:
    if isinstance(op, BlockSparseOperator):
        return op.to_scipy()
    if sp.issparse(op):
        return op.tocsc()
    return np.asarray(op, dtype=float)


def _extreme_sigma(m, rtol: float, smallest: bool) -> float:
    """Lanczos iteration on ``M^T M`` (or its inverse via one LU factorisation)."""
    n = m.shape[0]
    if smallest:
        lu = spla.splu(sp.csc_matrix(m))
        op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(lu.solve(x), trans="T"),
                                 dtype=float)
    else:
        mt = m.T.tocsr() if sp.issparse(m) else m.T
        op = spla.LinearOperator((n, n), matvec=lambda x: mt @ (m @ x), dtype=float)
    # deterministic start vector
    v0 = np.cos(np.arange(n) * 0.618033988749895 + 0.3)
    lam = spla.eigsh(op, k=1, which="LM", v0=v0, tol=rtol, return_eigenvectors=False,
                     maxiter=max(1000, 20 * n))[0]
    return float(np.sqrt(1.0 / lam if smallest else lam))


def singular_extremes(op, dense_threshold: int = DENSE_THRESHOLD,
                      rtol: float = 1e-6) -> tuple[float, float]:
    """Return ``(sigma_max, sigma_min)``."""
    m = _as_matrix(op)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"condition number needs a square matrix, got shape {m.shape}")
    if m.shape[0] <= dense_threshold:
        dense = m.toarray() if sp.issparse(m) else m
        s = np.linalg.svd(dense, compute_uv=False)
        return float(s[0]), float(s[-1])
    smax = _extreme_sigma(m, rtol, smallest=False)
    try:
        smin = _extreme_sigma(m, rtol, smallest=True)
    except RuntimeError as exc:  # exactly singular LU pivot
        raise SingularMatrixError(str(exc)) from exc
    return smax, smin


def condition_number(op, dense_threshold: int = DENSE_THRESHOLD, rtol: float = 1e-6) -> float:
    """Spectral condition number ``sigma_max / sigma_min``.

    Dense SVD at or below ``dense_threshold`` rows; otherwise Lanczos on
    ``M^T M`` for the top singular value and on ``(M^T M)^{-1}`` through a
    sparse LU factorisation for the bottom one.
    """
    smax, smin = singular_extremes(op, dense_threshold, rtol)
    if not np.isfinite(smin) or smin <= 1e-14 * smax:
        raise SingularMatrixError(f"matrix is singular (sigma_min={smin:.3e}, sigma_max={smax:.3e})")
    return smax / smin


def periodic_bandwidth(matrix: Union[np.ndarray, sp.spmatrix], grid: Grid, block: int) -> int:
    """Largest periodic Manhattan distance between coupled sites."""
    m = sp.coo_matrix(matrix)
    mask = m.data != 0
    rs = m.row[mask] // block
    cs = m.col[mask] // block
    d1 = np.abs(rs // grid.ny - cs // grid.ny)
    d2 = np.abs(rs % grid.ny - cs % grid.ny)
    d1 = np.minimum(d1, grid.nx - d1)
    d2 = np.minimum(d2, grid.ny - d2)
    return int((d1 + d2).max()) if d1.size else 0

