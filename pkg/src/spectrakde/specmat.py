"""Dense real symmetric linear algebra.

The eigensolver is the classical two-phase scheme: Householder reduction to
tridiagonal form, then implicit-shift QL sweeps on the tridiagonal matrix.
Both phases are compiled with numba.  Transforms are kept transposed
(row k of the work array is column k of the orthogonal factor) so the inner
loops run over contiguous memory.
"""

from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np

ATOL = 1e-12
RTOL = 1e-9
PSD_CLAMP = -1e-12


class EigenFailure(ArithmeticError):
    """Implicit QL iteration did not converge."""

    def __init__(self, index: int, dim: int):
        self.index = index
        super().__init__(
            f"QL iteration did not converge at off-diagonal index {index} "
            f"(dim={dim}, cap={50 * dim} sweeps)"
        )


class NotPSDError(ValueError):
    pass


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def isclose(a, b, atol: float = ATOL, rtol: float = RTOL):
    return np.abs(np.asarray(a) - np.asarray(b)) <= atol + rtol * np.abs(b)


def as_dense(x) -> np.ndarray:
    """Validate a real 2-D matrix with finite entries."""
    a = np.array(x, dtype=np.float64, copy=True)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def as_symmetric(m, check: bool = True) -> np.ndarray:
    """Return a float64 copy of ``m`` whose two triangles agree exactly.

    The lower triangle is the stored one; with ``check`` the input must
    already be symmetric to relative precision 1e-9.
    """
    a = as_dense(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"symmetric matrix must be square, got {a.shape}")
    if check:
        scale = max(np.max(np.abs(a)), 1.0)
        if np.max(np.abs(a - a.T)) > RTOL * scale:
            raise ValueError("matrix is not symmetric")
    lower = np.tril(a)
    return lower + np.tril(a, -1).T


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


@numba.njit(cache=True, nogil=True)
def _tred2(w, d, e, want_vectors):
    # Householder reduction of the symmetric matrix held in ``w``.
    # On exit d/e hold the tridiagonal diagonal and subdiagonal (e[0] = 0)
    # and, if requested, w holds the transposed accumulated transform.
    n = w.shape[0]
    for j in range(n):
        d[j] = w[j, n - 1]
    for i in range(n - 1, 0, -1):
        scale = 0.0
        h = 0.0
        for k in range(i):
            scale += abs(d[k])
        if scale == 0.0:
            e[i] = d[i - 1]
            for j in range(i):
                d[j] = w[j, i - 1]
                w[j, i] = 0.0
                w[i, j] = 0.0
        else:
            for k in range(i):
                d[k] /= scale
                h += d[k] * d[k]
            f = d[i - 1]
            g = np.sqrt(h)
            if f > 0:
                g = -g
            e[i] = scale * g
            h = h - f * g
            d[i - 1] = f - g
            for j in range(i):
                e[j] = 0.0
            for j in range(i):
                f = d[j]
                w[i, j] = f
                g = e[j] + w[j, j] * f
                for k in range(j + 1, i):
                    g += w[j, k] * d[k]
                    e[k] += w[j, k] * f
                e[j] = g
            f = 0.0
            for j in range(i):
                e[j] /= h
                f += e[j] * d[j]
            hh = f / (h + h)
            for j in range(i):
                e[j] -= hh * d[j]
            for j in range(i):
                f = d[j]
                g = e[j]
                for k in range(j, i):
                    w[j, k] -= f * e[k] + g * d[k]
                d[j] = w[j, i - 1]
                w[j, i] = 0.0
        d[i] = h

    if want_vectors:
        for i in range(n - 1):
            w[i, n - 1] = w[i, i]
            w[i, i] = 1.0
            h = d[i + 1]
            if h != 0.0:
                for k in range(i + 1):
                    d[k] = w[i + 1, k] / h
                for j in range(i + 1):
                    g = 0.0
                    for k in range(i + 1):
                        g += w[i + 1, k] * w[j, k]
                    for k in range(i + 1):
                        w[j, k] -= g * d[k]
            for k in range(i + 1):
                w[i + 1, k] = 0.0
        for j in range(n):
            d[j] = w[j, n - 1]
            w[j, n - 1] = 0.0
        w[n - 1, n - 1] = 1.0
    else:
        # Without accumulation the diagonal is still where the reduction left it.
        for j in range(n):
            d[j] = w[j, j]
    e[0] = 0.0


@numba.njit(cache=True, nogil=True)
def _tql2(w, d, e, want_vectors):
    # Implicit QL with a shift from the leading 2x2 block (Wilkinson).
    # Returns -1 on success, otherwise the off-diagonal index that stalled.
    n = d.shape[0]
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    f = 0.0
    tst1 = 0.0
    eps = 2.0 ** -52
    cap = 50 * n
    sweeps = 0
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n:
            if abs(e[m]) <= eps * tst1:
                break
            m += 1
        if m > l:
            while True:
                sweeps += 1
                if sweeps > cap:
                    return l
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = np.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h
                p = d[m]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = np.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    if want_vectors:
                        for k in range(n):
                            h = w[i + 1, k]
                            w[i + 1, k] = s * w[i, k] + c * h
                            w[i, k] = c * w[i, k] - s * h
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if abs(e[l]) <= eps * tst1:
                    break
        d[l] = d[l] + f
        e[l] = 0.0
    return -1


def _decompose(m, want_vectors: bool):
    a = as_symmetric(m)
    n = a.shape[0]
    d = np.zeros(n)
    e = np.zeros(n)
    if n == 1:
        return a[0].copy(), np.ones((1, 1))
    w = np.ascontiguousarray(a)
    _tred2(w, d, e, want_vectors)
    status = _tql2(w, d, e, want_vectors)
    if status >= 0:
        raise EigenFailure(int(status), n)
    order = np.argsort(d, kind="stable")
    vals = d[order]
    if not want_vectors:
        return vals, None
    return vals, np.ascontiguousarray(w[order].T)


def eigh(m) -> EigenDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Column ``k`` of ``eigenvectors`` pairs with ``eigenvalues[k]``.
    Raises :class:`EigenFailure` if the QL phase exceeds 50*dim sweeps.
    """
    vals, vecs = _decompose(m, True)
    return EigenDecomposition(vals, vecs)


def eigvalsh(m) -> np.ndarray:
    """Ascending eigenvalues only; skips the transform accumulation."""
    vals, _ = _decompose(m, False)
    return vals


def sym_sqrt(m) -> np.ndarray:
    """Symmetric PSD square root via the eigendecomposition.

    Eigenvalues in [-1e-12, 0) are treated as roundoff and clamped to zero.
    """
    vals, vecs = eigh(m)
    if vals[0] < PSD_CLAMP:
        raise NotPSDError(f"not positive semidefinite (min eigenvalue {vals[0]:.3e})")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return symmetrize((vecs * root) @ vecs.T)


def sample_covariance(t_sqrt, x, identity_population: bool = False) -> np.ndarray:
    """Return ``(1/n) t_sqrt X X^T t_sqrt`` for a p x n data matrix ``X``.

    With ``identity_population`` the ``t_sqrt`` products are skipped
    (``t_sqrt`` may then be None).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    p, n = x.shape
    if identity_population:
        return symmetrize(x @ x.T) / n
    t_sqrt = as_symmetric(t_sqrt, check=False)
    if t_sqrt.shape[0] != p:
        raise ValueError(f"dimension mismatch: t_sqrt is {t_sqrt.shape}, X is {x.shape}")
    y = t_sqrt @ x
    return symmetrize(y @ y.T) / n
