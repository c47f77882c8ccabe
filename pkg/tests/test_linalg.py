import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from carleman_hydro.linalg import (BlockSparseOperator, Grid, KronTerm, SingularMatrixError,
                                   apply, central_difference, condition_number, full_kron,
                                   identity_stencil, kron_compress, periodic_bandwidth)
from carleman_hydro.grad_dns import GradParams
from carleman_hydro.carleman_grad import build_carleman_operator, build_global_matrices

D1, D2 = central_difference(1), central_difference(2)


def random_operator(grid, rows, cols, rng, offsets=((0, 0), (1, 0), (0, -1), (2, 1))):
    return BlockSparseOperator.from_terms(
        grid, rows, cols, [(o, rng.standard_normal((rows, cols))) for o in offsets])


# -- grid and stencils --------------------------------------------------------

def test_grid_rejects_empty():
    with pytest.raises(ValueError):
        Grid(0, 3)


def test_site_index_row_major():
    g = Grid(3, 4)
    assert g.site_index(1, 2) == 6
    assert g.site_index(-1, 0) == 8


@given(st.integers(1, 6), st.integers(1, 6))
def test_shift_by_full_period_is_identity(nx, ny):
    g = Grid(nx, ny)
    f = np.arange(nx * ny, dtype=float).reshape(nx, ny)
    assert np.array_equal(g.shift(f, (nx, 0)), f)
    assert np.array_equal(g.shift(f, (0, ny)), f)


def test_shift_matrix_matches_shift(rng):
    g = Grid(4, 5)
    f = rng.standard_normal(g.shape)
    for off in [(1, 0), (0, -1), (3, 2)]:
        assert np.array_equal(g.shift_matrix(off) @ f.ravel(), g.shift(f, off).ravel())


def test_central_difference_weights():
    assert set(D1.offsets) == {(1, 0, 0.5), (-1, 0, -0.5)}
    assert set(D2.offsets) == {(0, 1, 0.5), (0, -1, -0.5)}
    with pytest.raises(ValueError):
        central_difference(3)


def test_constant_annihilated():
    g = Grid(5, 7)
    c = np.full(g.shape, 3.7)
    assert np.all(D1.apply(g, c) == 0)
    assert np.all(D2.apply(g, c) == 0)


def test_d1_of_function_of_x2_vanishes():
    g = Grid(32, 32)
    k = 2 * np.pi / 32
    _, x2 = g.coords()
    assert np.all(D1.apply(g, np.cos(k * x2)) == 0)


def test_d2_on_sampled_cosine():
    g = Grid(32, 32)
    k = 2 * np.pi / 32
    _, x2 = g.coords()
    out = D2.apply(g, np.cos(k * x2))
    assert np.allclose(out, -np.sin(k * x2) * np.sin(k), atol=1e-15)
    assert np.sin(k) == pytest.approx(0.19509, abs=1e-5)


@given(st.integers(0, 2**32 - 1))
def test_central_difference_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    g = Grid(5, 4)
    u, v = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    for d in (D1, D2):
        assert np.sum(u * d.apply(g, v)) == pytest.approx(-np.sum(d.apply(g, u) * v), abs=1e-12)


def test_identity_stencil():
    g = Grid(3, 3)
    f = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(identity_stencil().apply(g, f), f)


# -- operators ------------------------------------------------------------------

def test_identity_apply(rng):
    g = Grid(3, 4)
    v = rng.standard_normal(6 * g.n_sites)
    assert np.array_equal(apply(BlockSparseOperator.identity(g, 6), v), v)


def test_single_offset_is_circular_shift(rng):
    g = Grid(4, 3)
    op = BlockSparseOperator.from_terms(g, 2, 2, [((1, 0), np.eye(2))])
    v = rng.standard_normal(2 * g.n_sites)
    expect = np.roll(v.reshape(4, 3, 2), -1, axis=0).ravel()
    assert np.array_equal(op.apply(v), expect)


def test_apply_shape_error():
    op = BlockSparseOperator.identity(Grid(2, 2), 3)
    with pytest.raises(ValueError):
        op.apply(np.zeros(5))


def test_block_shape_validated():
    with pytest.raises(ValueError):
        BlockSparseOperator.from_terms(Grid(2, 2), 2, 2, [((0, 0), np.eye(3))])


def test_equilibrium_fixed_point_of_a_hat(params):
    g = Grid(4, 4)
    a_hat, _, _ = build_global_matrices(params, g)
    v = np.tile([1.0, 0, 0, params.cs2, 0, params.cs2], g.n_sites)
    assert np.allclose(a_hat.apply(v), v, atol=1e-15)


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_apply_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    g = Grid(3, 4)
    op = random_operator(g, 3, 2, rng)
    u, v = rng.standard_normal(2 * g.n_sites), rng.standard_normal(2 * g.n_sites)
    lhs = op.apply(alpha * u + beta * v)
    rhs = alpha * op.apply(u) + beta * op.apply(v)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_apply_matches_assembled(rng):
    g = Grid(4, 3)
    op = random_operator(g, 3, 2, rng)
    v = rng.standard_normal(2 * g.n_sites)
    assert np.allclose(op.apply(v), op.to_scipy() @ v, atol=1e-13)


def test_apply_deterministic(rng):
    g = Grid(5, 5)
    op = random_operator(g, 4, 4, rng)
    v = rng.standard_normal(4 * g.n_sites)
    assert np.array_equal(op.apply(v), op.apply(v.copy()))


def test_add_and_scale(rng):
    g = Grid(3, 3)
    a, b = random_operator(g, 2, 2, rng), random_operator(g, 2, 2, rng)
    v = rng.standard_normal(2 * g.n_sites)
    assert np.allclose((a + b).apply(v), a.apply(v) + b.apply(v))
    assert np.allclose(a.scaled(-2.5).apply(v), -2.5 * a.apply(v))


def test_stencil_operator(rng):
    g = Grid(4, 4)
    comp = rng.standard_normal((2, 2))
    op = BlockSparseOperator.from_stencil(g, comp, D1)
    f = rng.standard_normal(g.shape + (2,))
    expect = np.einsum("ij,xyj->xyi", comp, D1.apply(g, f))
    assert np.allclose(op.apply(f.ravel()), expect.ravel())


def test_row_nnz_counts_offsets():
    g = Grid(4, 4)
    op = BlockSparseOperator.from_stencil(g, np.ones((2, 2)), D1)
    assert np.all(op.row_nnz() == 4)


# -- Kronecker terms -----------------------------------------------------------

@pytest.mark.parametrize("factors", [
    (np.arange(36.0).reshape(6, 6) - 10, None),
    (None, np.eye(6)[:, ::-1], None),
    (np.ones((6, 36)), None),
])
def test_kronterm_matmat_matches_dense(factors, rng):
    term = KronTerm(factors, 6, 0.5)
    x = rng.standard_normal((7, term.shape[1]))
    dense = term.toarray()
    assert np.allclose(term.matmat(x), x @ dense.T)
    assert np.allclose(term.matmat_t(x.T), dense @ x.T)
    assert np.allclose(term.tosparse().toarray(), dense)
    assert np.array_equal(term.pattern(), dense != 0)


def test_kronterm_sparse_path_matches_dense(rng):
    f = np.zeros((6, 6))
    f[3, 1] = 2.0
    term = KronTerm((f, None, f), 6, -1.5)
    x = rng.standard_normal((5, 216))
    assert np.allclose(term.matmat(x), x @ term.toarray().T)


# -- Kronecker compression -----------------------------------------------------

def test_kron_compress_identity():
    g = Grid(3, 3)
    i2 = BlockSparseOperator.identity(g, 2)
    out = kron_compress(i2, i2)
    assert np.array_equal(out.toarray(), np.eye(4 * g.n_sites))


def test_kron_compress_local(rng):
    g = Grid(2, 3)
    a, b = rng.standard_normal((2, 2)), rng.standard_normal((3, 3))
    opa = BlockSparseOperator.from_terms(g, 2, 2, [((0, 0), a)])
    opb = BlockSparseOperator.from_terms(g, 3, 3, [((0, 0), b)])
    out = kron_compress(opa, opb)
    assert out.offsets == [(0, 0)]
    assert np.allclose(out.block((0, 0)), np.kron(a, b))


def _diagonal_embedding(n, d):
    """Rows of the full (n d)^2 space that hold same-site pairs, in lifted order."""
    idx = []
    for s in range(n):
        for a in range(d):
            for b in range(d):
                idx.append((s * d + a) * (n * d) + s * d + b)
    return np.array(idx)


@pytest.mark.parametrize("seed", range(4))
def test_kron_compress_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    g = Grid(4, 4)
    n, d = g.n_sites, 2
    opa = random_operator(g, d, d, rng)
    opb = random_operator(g, d, d, rng)
    full = full_kron(opa, opb).toarray()
    idx = _diagonal_embedding(n, d)
    # same-site product field embedded in the full space, then read back on the diagonal
    w = rng.standard_normal(n * d * d)
    embedded = np.zeros(full.shape[1])
    embedded[idx] = w
    expect = (full @ embedded)[idx]
    assert np.allclose(kron_compress(opa, opb).apply(w), expect, atol=1e-12)


def test_kron_compress_of_kronterms_matches_dense(params):
    g = Grid(4, 4)
    a_hat, _, _ = build_global_matrices(params, g)
    kt = BlockSparseOperator.from_terms(
        g, 6, 6, [(o, KronTerm((b,))) for o, bs in a_hat.blocks.items() for b in bs])
    dense = kron_compress(a_hat, a_hat)
    lazy = kron_compress(kt, kt)
    assert np.allclose(dense.toarray(), lazy.toarray())


def test_kron_compress_grid_mismatch():
    with pytest.raises(ValueError):
        kron_compress(BlockSparseOperator.identity(Grid(2, 2), 1),
                      BlockSparseOperator.identity(Grid(2, 3), 1))


# -- condition numbers -----------------------------------------------------------

def test_condition_identity_and_diag():
    assert condition_number(np.eye(4)) == pytest.approx(1.0)
    assert condition_number(np.diag([2.0, 1.0])) == pytest.approx(2.0)


def test_condition_singular():
    with pytest.raises(SingularMatrixError):
        condition_number(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularMatrixError):
        condition_number(sp.csr_matrix(np.diag([1.0, 0.0, 2.0])), dense_threshold=1)


def test_condition_requires_square():
    with pytest.raises(ValueError):
        condition_number(np.ones((2, 3)))


def test_condition_iterative_matches_dense():
    op = build_carleman_operator(GradParams(omega=2.0, dt=0.01), Grid(8, 8), 1)
    m = op.to_scipy()
    dense = condition_number(m)
    iterative = condition_number(m, dense_threshold=10)
    assert iterative == pytest.approx(dense, rel=1e-4)


@given(st.floats(0.01, 100.0), st.booleans())
def test_condition_scale_invariant(alpha, negate):
    rng = np.random.default_rng(7)
    m = rng.standard_normal((12, 12)) + 6 * np.eye(12)
    s = -alpha if negate else alpha
    assert condition_number(s * m) == pytest.approx(condition_number(m), rel=1e-10)
    sm = sp.csr_matrix(m)
    assert condition_number(s * sm, dense_threshold=4) == pytest.approx(
        condition_number(sm, dense_threshold=4), rel=1e-5)


def test_periodic_bandwidth():
    g = Grid(6, 6)
    op = BlockSparseOperator.from_stencil(g, np.eye(1), D1)
    assert periodic_bandwidth(op.to_scipy(), g, 1) == 1
    assert periodic_bandwidth((op.to_scipy() @ op.to_scipy()), g, 1) == 2
