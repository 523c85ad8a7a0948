import cmath

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invariantlab.geometry import (
    DimensionError,
    InvalidInputError,
    cmatrix,
    cvec,
    eigenvalues_2x2,
    numerical_rank,
    singular_values,
    sup_norm,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)


def test_cvec_rejects_empty_and_nonfinite():
    with pytest.raises(DimensionError):
        cvec()
    with pytest.raises(InvalidInputError):
        cvec(1.0, float("nan"))


def test_cmatrix_requires_square():
    with pytest.raises(DimensionError):
        cmatrix([[1, 2, 3], [4, 5, 6]])


def test_henon_differential_at_origin_has_unit_spectrum():
    spec = eigenvalues_2x2([[0, 1], [1, 0]])
    assert sorted(v.real for v in spec.eigenvalues) == pytest.approx([-1.0, 1.0], abs=1e-12)
    assert all(abs(m - 1.0) <= 1e-12 for m in spec.moduli)


def test_eigenvalues_of_rotation():
    spec = eigenvalues_2x2(np.diag([cmath.exp(1j), cmath.exp(1j * 2**0.5)]))
    assert spec.moduli == pytest.approx((1.0, 1.0), abs=1e-15)


def test_eigenvalues_reject_other_shapes():
    with pytest.raises(DimensionError):
        eigenvalues_2x2(np.eye(3))


@given(st.lists(cplx, min_size=4, max_size=4))
def test_eigenvalues_match_trace_and_determinant(entries):
    m = np.array(entries).reshape(2, 2)
    lam = eigenvalues_2x2(m).eigenvalues
    scale = 1 + np.abs(m).max() ** 2
    assert abs(sum(lam) - np.trace(m)) <= 1e-9 * scale
    assert abs(lam[0] * lam[1] - np.linalg.det(m)) <= 1e-9 * scale


@given(st.integers(1, 5), st.integers(0, 10_000))
def test_singular_values_match_numpy(k, seed):
    r = np.random.default_rng(seed)
    m = r.standard_normal((k, k)) + 1j * r.standard_normal((k, k))
    ref = np.linalg.svd(m, compute_uv=False)
    assert np.allclose(singular_values(m), ref, rtol=1e-10, atol=1e-12)


@given(st.integers(0, 10_000))
def test_rank_is_unitarily_invariant(seed):
    r = np.random.default_rng(seed)
    u, _ = np.linalg.qr(r.standard_normal((3, 3)) + 1j * r.standard_normal((3, 3)))
    m = np.diag([1.0, 0.5, 0.0]).astype(complex)
    assert numerical_rank(m, 1e-6) == 2
    assert numerical_rank(u @ m @ u.conj().T, 1e-6) == 2


def test_rank_zero_matrix_and_tolerance_check():
    assert numerical_rank(np.zeros((2, 2)), 1e-4) == 0
    with pytest.raises(InvalidInputError):
        numerical_rank(np.eye(2), 0.0)


def test_rank_is_relative_to_largest_singular_value():
    assert numerical_rank(np.diag([1e8, 1.0]), 1e-4) == 1
    assert numerical_rank(np.diag([1e-3, 1e-9]), 1e-4) == 1
    # all values below tol: absolute fallback
    assert numerical_rank(np.diag([1e-8, 1e-9]), 1e-4) == 0


@given(st.lists(cplx, min_size=1, max_size=6), st.floats(0, 5))
def test_sup_norm_is_absolutely_homogeneous(coords, s):
    v = np.array(coords)
    assert sup_norm(s * v) == pytest.approx(s * sup_norm(v), rel=1e-12, abs=1e-300)
    assert sup_norm(v) <= np.linalg.norm(v) + 1e-12


def test_sup_norm_batch():
    v = np.array([[3 + 4j, 1], [0, -2]])
    assert np.allclose(sup_norm(v), [5.0, 2.0])
