"""Small dense linear algebra: Cholesky solves and per-pixel 2x2 systems.

The reduced systems this library produces are K x K with K <= 32, so a plain
row-wise Cholesky in numpy is plenty; writing it out lets the failure mode
report exactly which pivot collapsed.
"""

import numpy as np

from .errors import NotPositiveDefiniteError, SingularBlockError

PIVOT_TOL = 1e-12
DET_TOL = 1e-12


def cholesky_factor(a):
    """Lower-triangular Cholesky factor of a symmetric positive-definite matrix.

    Raises :class:`NotPositiveDefiniteError` (with the pivot index) when a
    diagonal pivot falls at or below ``PIVOT_TOL``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    lower = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= PIVOT_TOL:
            raise NotPositiveDefiniteError(j, pivot)
        ljj = np.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / ljj
    return lower


def cholesky_solve(a, b):
    """Solve ``a @ z = b`` for symmetric positive-definite ``a``."""
    lower = cholesky_factor(a)
    b = np.asarray(b, dtype=np.float64)
    y = _forward_substitute(lower, b)
    return _backward_substitute(lower.T, y)


def _forward_substitute(lower, b):
    n = lower.shape[0]
    y = np.zeros(n, dtype=np.float64)
    for i in range(n):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    return y


def _backward_substitute(upper, y):
    n = upper.shape[0]
    z = np.zeros(n, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        z[i] = (y[i] - upper[i, i + 1 :] @ z[i + 1 :]) / upper[i, i]
    return z


def det2(m):
    """Determinant of a 2x2 matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def cramer2(h, s):
    """Solve the 2x2 system ``h @ z = s`` by Cramer's rule.

    Each solution component is the determinant of ``h`` with the matching
    column replaced by ``s``, divided by ``det(h)``.  Raises
    :class:`SingularBlockError` when ``|det(h)| <= DET_TOL``.
    """
    h = np.asarray(h, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if h.shape != (2, 2) or s.shape != (2,):
        raise ValueError(f"expected 2x2 matrix and 2-vector, got {h.shape}, {s.shape}")
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    if abs(det) <= DET_TOL:
        raise SingularBlockError(det)
    det_x = s[0] * h[1, 1] - h[0, 1] * s[1]
    det_y = h[0, 0] * s[1] - s[0] * h[1, 0]
    return np.array([det_x / det, det_y / det])
