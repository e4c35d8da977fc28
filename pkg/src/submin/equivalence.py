"""Executable check that subspace minimization matches regularized minimization.

With R = D(P - I) the dense regularized Newton system (D + R) dx = -(d + R x)
and the projection-corrected subspace solve share solutions: the subspace
coefficients of any dense solution equal the coefficients the reduced K x K
system produces.  D + R = DP has rank at most K, so arbitrary right-hand
sides are inconsistent; instances are therefore *constructed* to satisfy the
hypothesis, with a known coefficient vector planted as the answer.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentInstanceError
from .solver import project

ORACLE_N_MAX = 256


@dataclass
class DenseRegularizedSystem:
    """Explicit dense oracle instance; N is capped at oracle scale."""

    d_mat: np.ndarray   # (n, n) diagonal
    r_mat: np.ndarray   # (n, n) = D (P - I)
    d_vec: np.ndarray   # (n,)
    x: np.ndarray       # (n,)
    c0: np.ndarray      # (k,) planted coefficients


def build_consistent_instance(basis, h, c0, x):
    """Construct a dense system whose solution is exactly ``V c0``.

    Setting d = -D r - D V c0 makes dx = V c0 satisfy
    (D + R) dx = -(d + R x), inhabiting the proposition's hypothesis.
    """
    h = np.asarray(h, dtype=np.float64).ravel()
    c0 = np.asarray(c0, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if (h <= 0).any():
        raise ValueError("h must be positive elementwise")
    v = basis.v
    n = v.shape[0]
    if n > ORACLE_N_MAX:
        raise ValueError(f"oracle instances are capped at N={ORACLE_N_MAX}, got {n}")
    if h.size != n or x.size != n or c0.size != v.shape[1]:
        raise ValueError("dimension mismatch between basis, h, c0, x")

    _, r = project(basis, x)
    d_vec = -h * r - h * (v @ c0)

    d_mat = np.diag(h)
    p_mat = v @ np.linalg.solve(v.T @ v, v.T)
    r_mat = d_mat @ (p_mat - np.eye(n))
    return DenseRegularizedSystem(d_mat=d_mat, r_mat=r_mat, d_vec=d_vec, x=x, c0=c0)


@dataclass
class PropositionReport:
    c_dense: np.ndarray
    c_sub: np.ndarray
    max_diff: float
    dense_residual: float


def verify_proposition(sys, basis):
    """Compare the dense solution's coefficients against the reduced solve.

    Solves the (rank-deficient) dense system by pseudoinverse, extracts
    c_dense = (V^T V)^{-1} V^T dx, computes c_sub from the projected-solve
    formula, and reports their max difference.
    """
    v = basis.v
    m = sys.d_mat + sys.r_mat
    rhs = -(sys.d_vec + sys.r_mat @ sys.x)
    dx = np.linalg.pinv(m) @ rhs
    residual = float(np.max(np.abs(m @ dx - rhs)))
    if residual > 1e-8 * max(1.0, float(np.max(np.abs(rhs)))):
        raise InconsistentInstanceError(
            f"dense system residual {residual:.3e} exceeds tolerance; "
            "instance was not constructed consistently"
        )

    c_dense = np.linalg.solve(v.T @ v, v.T @ dx)

    h = np.diag(sys.d_mat)
    _, r = project(basis, sys.x)
    a = (v * h[:, None]).T @ v
    c_sub = np.linalg.solve(a, -(v.T @ (sys.d_vec + h * r)))

    return PropositionReport(
        c_dense=c_dense,
        c_sub=c_sub,
        max_diff=float(np.max(np.abs(c_dense - c_sub))),
        dense_residual=residual,
    )


def fast_vtrx(basis, h, x):
    """V^T R x without materializing R.

    Uses the identity V^T R x = (V^T D V)(V^T V)^{-1} V^T x - V^T D x.
    """
    h = np.asarray(h, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    v = basis.v
    vdv = (v * h[:, None]).T @ v
    coeff = np.linalg.solve(v.T @ v, v.T @ x)
    return vdv @ coeff - v.T @ (h * x)
