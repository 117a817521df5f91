import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import ldl

from spectrakde.specmat import (
    EigenFailure,
    NotPSDError,
    as_symmetric,
    eigh,
    eigvalsh,
    isclose,
    sample_covariance,
    sym_sqrt,
)


def count_below(a, lam):
    """Number of eigenvalues of symmetric ``a`` below ``lam``.

    Sylvester inertia of a - lam I from a Bunch-Kaufman LDL^T factorization;
    D has 1x1 and 2x2 blocks whose eigenvalues are explicit.
    """
    _, d, _ = ldl(np.asarray(a, dtype=float) - lam * np.eye(len(a)))
    return int(np.sum(np.linalg.eigvalsh(d) < 0))


def bisection_eigenvalues(a, tol=1e-12):
    """Independent oracle: k-th eigenvalue by bisection on the inertia count."""
    a = np.asarray(a, dtype=float)
    radius = np.max(np.sum(np.abs(a), axis=1)) + 1.0
    out = []
    for k in range(len(a)):
        # asymmetric bracket keeps midpoints off exact eigenvalues such as 0
        lo, hi = -radius * 1.01371, radius
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if count_below(a, mid) > k:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


def random_symmetric(rng, n):
    x = rng.standard_normal((n, n))
    return 0.5 * (x + x.T)


def test_identity_eigenvalues():
    vals, vecs = eigh(np.eye(3))
    np.testing.assert_array_equal(vals, [1.0, 1.0, 1.0])
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-15)


def test_diagonal_gives_permuted_identity():
    vals, vecs = eigh(np.diag([3.0, 1.0]))
    np.testing.assert_array_equal(vals, [1.0, 3.0])
    np.testing.assert_allclose(np.abs(vecs), [[0.0, 1.0], [1.0, 0.0]], atol=1e-15)


def test_two_by_two_matches_characteristic_roots():
    # lambda^2 - 4 lambda + 3 = 0
    vals = eigh([[2.0, 1.0], [1.0, 2.0]]).eigenvalues
    np.testing.assert_allclose(vals, [1.0, 3.0], atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 40, 120])
def test_reconstruction_and_orthogonality(n):
    a = random_symmetric(np.random.default_rng(n), n)
    vals, q = eigh(a)
    assert np.all(np.diff(vals) >= 0)
    assert np.max(np.abs(q.T @ q - np.eye(n))) <= 1e-10
    assert np.linalg.norm(q * vals @ q.T - a) <= 1e-10 * np.linalg.norm(a)


def test_eigvalsh_agrees_with_eigh():
    a = random_symmetric(np.random.default_rng(5), 60)
    np.testing.assert_allclose(eigvalsh(a), eigh(a).eigenvalues, atol=1e-12)


def test_deterministic():
    a = random_symmetric(np.random.default_rng(9), 30)
    v1, q1 = eigh(a)
    v2, q2 = eigh(a)
    assert np.array_equal(v1, v2) and np.array_equal(q1, q2)


def test_rejects_nonsymmetric_and_nonfinite():
    with pytest.raises(ValueError):
        eigh([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        eigh([[np.nan, 0.0], [0.0, 1.0]])


def test_failure_names_index():
    err = EigenFailure(4, 10)
    assert err.index == 4 and "index 4" in str(err)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-10, 10, allow_nan=False))))
def test_small_matrices_match_bisection_oracle(x):
    a = 0.5 * (x + x.T)
    np.testing.assert_allclose(eigvalsh(a), bisection_eigenvalues(a), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_trace_equals_eigenvalue_sum(n, seed):
    a = random_symmetric(np.random.default_rng(seed), n) * 3.0 + 2.0 * np.eye(n)
    vals = eigvalsh(a)
    assert abs(vals.sum() - np.trace(a)) <= 1e-9 * max(abs(np.trace(a)), np.abs(vals).sum())


def test_sym_sqrt_examples():
    np.testing.assert_allclose(sym_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)


def test_sym_sqrt_rotated():
    rng = np.random.default_rng(11)
    q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    m = q @ np.diag([1.0, 4.0]) @ q.T
    r = sym_sqrt(m)
    np.testing.assert_array_equal(r, r.T)
    assert np.linalg.norm(r @ r - m) <= 1e-9 * np.linalg.norm(m)
    assert np.all(eigvalsh(r) >= 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_sym_sqrt_commutes_and_squares(n, seed):
    x = np.random.default_rng(seed).standard_normal((n, n + 2))
    m = x @ x.T
    r = sym_sqrt(m)
    norm = np.linalg.norm(m)
    assert np.linalg.norm(r @ m - m @ r) <= 1e-9 * norm
    assert np.linalg.norm(r @ r - m) <= 1e-9 * norm


def test_sym_sqrt_clamps_roundoff_and_rejects_negative():
    r = sym_sqrt(np.diag([1.0, -5e-13]))
    np.testing.assert_array_equal(np.diag(r), [1.0, 0.0])
    with pytest.raises(NotPSDError, match="not positive semidefinite"):
        sym_sqrt(np.diag([1.0, -1e-6]))


def test_sample_covariance_examples():
    np.testing.assert_array_equal(sample_covariance(np.eye(2), np.eye(2)), 0.5 * np.eye(2))
    np.testing.assert_array_equal(sample_covariance(np.eye(1), [[3.0]]), [[9.0]])
    np.testing.assert_array_equal(sample_covariance([[2.0]], [[1.0, -1.0]]), [[4.0]])


def test_sample_covariance_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        sample_covariance(np.eye(3), np.ones((2, 5)))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_sample_covariance_symmetric_psd(p, n, seed):
    rng = np.random.default_rng(seed)
    t_sqrt = sym_sqrt(np.cov(rng.standard_normal((p, p + 3))) + 0.1 * np.eye(p))
    a = sample_covariance(t_sqrt, rng.standard_normal((p, n)))
    np.testing.assert_array_equal(a, a.T)
    assert eigvalsh(a).min() >= -1e-10


def test_as_symmetric_copies_lower_triangle():
    a = as_symmetric([[1.0, 2.0 + 1e-12], [2.0, 1.0]])
    assert a[0, 1] == a[1, 0] == 2.0


def test_isclose_form():
    assert isclose(1.0 + 5e-10, 1.0)
    assert not isclose(1.0 + 5e-9, 1.0)
