import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from stadium_spectra.discretize import (
    DimensionMismatch,
    SparseSymMatrix,
    assemble_laplacian,
    matvec,
    write_matrix_market,
)
from stadium_spectra.geometry import GridSpec, RectangleGeometry, StadiumGeometry, build_grid
from stadium_spectra.oracles import jacobi_eigenvalues, masked_rectangle_eigenvalues


def tridiagonal(n, h=1.0):
    d = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr") / (h * h)
    return SparseSymMatrix(n, d.indptr, d.indices, d.data, h)


def test_unit_square_half_spacing():
    g = build_grid(RectangleGeometry(1, 1), GridSpec(0.5))
    m = assemble_laplacian(g)
    A = m.toarray()
    assert m.n == 4
    assert np.all(np.diag(A) == 16.0)
    off = A - np.diag(np.diag(A))
    # each node touches exactly two others in the 2x2 block
    assert sorted(off[off != 0].tolist()) == [-4.0] * 8
    assert np.allclose(np.sort(np.linalg.eigvalsh(A)), masked_rectangle_eigenvalues(2, 2, 0.5))


def test_unit_square_row_sums():
    m = assemble_laplacian(build_grid(RectangleGeometry(1, 1), GridSpec(0.5)))
    assert np.array_equal(matvec(m, np.ones(4)), np.full(4, 8.0))


def test_tridiagonal_eigenvectors():
    m = tridiagonal(4)
    idx = np.arange(1, 5)
    for k in range(1, 5):
        v = np.sin(k * math.pi * idx / 5)
        lam = 2 - 2 * math.cos(k * math.pi / 5)
        assert np.allclose(matvec(m, v), lam * v, atol=1e-12)


def test_matvec_dimension_mismatch():
    m = SparseSymMatrix(1, np.array([0, 1]), np.array([0]), np.array([2.0]), 1.0)
    assert np.array_equal(matvec(m, [1.0]), [2.0])
    with pytest.raises(DimensionMismatch):
        matvec(m, [1.0, 1.0])


def test_even_fold_of_disk():
    g = build_grid(StadiumGeometry(0.0), GridSpec(0.5, "EE"))
    A = assemble_laplacian(g).toarray()
    corner = g.index_of(0, 0)
    assert A.shape == (3, 3)
    assert A[corner, corner] == 8.0
    # the other two nodes fold one ghost each
    assert sorted(np.diag(A).tolist()) == [8.0, 12.0, 12.0]


def test_odd_fold_of_disk():
    g = build_grid(StadiumGeometry(0.0), GridSpec(0.5, "OO"))
    A = assemble_laplacian(g).toarray()
    assert A[g.index_of(0, 0), g.index_of(0, 0)] == 24.0


@pytest.mark.parametrize("h", [0.5, 0.25, 1 / 7, 0.1])
def test_full_domain_entries_are_exact(h):
    m = assemble_laplacian(build_grid(StadiumGeometry(0.6), GridSpec(h)))
    A = m.csr
    assert np.all(m.diagonal() == 4 / (h * h))
    off = (A - sp.diags(m.diagonal())).data
    off = off[off != 0]
    assert np.all(off == -1 / (h * h))
    assert (A - A.T).count_nonzero() == 0


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.0, 1.5),
    st.sampled_from([0.125, 0.2, 0.25]),
    st.sampled_from([None, "EE", "EO", "OE", "OO"]),
)
def test_symmetric_and_gershgorin(a, h, cls):
    m = assemble_laplacian(build_grid(StadiumGeometry(a), GridSpec(h, cls)))
    A = m.toarray()
    assert np.array_equal(A, A.T)
    ev = np.linalg.eigvalsh(A)
    assert ev.min() > 0
    assert ev.max() <= 8 / (h * h) * (1 + 1e-12)


@pytest.mark.parametrize("cls", ["EE", "EO", "OE", "OO"])
def test_quadrant_spectrum_inside_full_spectrum(cls):
    geo = StadiumGeometry(0.5)
    full = np.linalg.eigvalsh(assemble_laplacian(build_grid(geo, GridSpec(0.125))).toarray())
    quad = np.linalg.eigvalsh(assemble_laplacian(build_grid(geo, GridSpec(0.125, cls))).toarray())
    for lam in quad:
        assert np.min(np.abs(full - lam)) <= 1e-9 * lam


def test_rectangle_matches_jacobi_oracle():
    m = assemble_laplacian(build_grid(RectangleGeometry(1, 1), GridSpec(1 / 4)))
    assert np.allclose(jacobi_eigenvalues(m.toarray()), masked_rectangle_eigenvalues(4, 4, 1 / 4), rtol=1e-12)


def test_matrix_market(tmp_path):
    m = assemble_laplacian(build_grid(RectangleGeometry(1, 1), GridSpec(0.5)))
    path = tmp_path / "m.mtx"
    write_matrix_market(m, path, comment="square")
    import scipy.io

    back = scipy.io.mmread(str(path)).toarray()
    assert np.array_equal(back, m.toarray())
    assert path.read_text().startswith("%%MatrixMarket matrix coordinate real symmetric\n% square\n")
