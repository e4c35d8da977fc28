"""Subspace-constrained quadratic minimization.

Solves min 0.5 dx^T D dx + d^T dx restricted to a K-dimensional subspace,
reducing the N-pixel problem to a K x K (or 2K x 2K for flow) Cholesky solve.
The dense N x N diagonal never materializes: multiplying the basis by a
(block-)diagonal matrix is a column-wise product.

When the current solution has drifted off the freshly generated subspace,
the projection-corrected variant reparameterizes the step as r + V c with
r the residual to the solution's orthogonal projection, so the updated
solution always lies on the subspace.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IndefiniteSystemError,
    NotPositiveDefiniteError,
    RankDeficientBasisError,
)
from .linalg import cholesky_solve

RANK_RTOL = 1e-10
DAMPING_RETRIES = 5


@dataclass
class SubspaceBasis:
    """Dense N x K matrix whose columns span the constraint subspace."""

    v: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.v.ndim != 2:
            raise ValueError(f"basis must be a 2D matrix, got shape {self.v.shape}")
        gram = self.v.T @ self.v
        eig = np.linalg.eigvalsh(gram)
        if eig[0] < RANK_RTOL * max(eig[-1], 1e-300):
            raise RankDeficientBasisError(
                f"basis columns are linearly dependent "
                f"(Gram eigenvalue ratio {eig[0]:.3e} / {eig[-1]:.3e})"
            )

    @property
    def n(self):
        return self.v.shape[0]

    @property
    def k(self):
        return self.v.shape[1]


@dataclass
class FlowBasisPair:
    """Independent subspaces for the horizontal and vertical flow components."""

    v_u: SubspaceBasis
    v_v: SubspaceBasis

    def __post_init__(self):
        if self.v_u.n != self.v_v.n:
            raise ValueError(
                f"component bases disagree on pixel count: {self.v_u.n} vs {self.v_v.n}"
            )


@dataclass
class SolveReport:
    coefficients: np.ndarray
    predicted_decrease: float = 0.0
    damping_used: float = 0.0
    projection_residual_norm: float = 0.0


def orthonormalize(v):
    """Orthonormalize basis columns by modified Gram-Schmidt.

    Raises :class:`RankDeficientBasisError` when a column collapses below
    the rank tolerance relative to its original norm.
    """
    v = np.array(v, dtype=np.float64)
    n, k = v.shape
    for j in range(k):
        col = v[:, j]
        ref = np.linalg.norm(col)
        for i in range(j):
            col -= (v[:, i] @ col) * v[:, i]
        norm = np.linalg.norm(col)
        if norm <= max(ref, 1.0) * 1e-10:
            raise RankDeficientBasisError(
                f"column {j} collapsed during orthonormalization (norm {norm:.3e})"
            )
        v[:, j] = col / norm
    return v


def _auto_damping(a):
    return 1e-6 * np.trace(a) / a.shape[0]


def _solve_damped(a, b, damping):
    """Cholesky solve with Levenberg-style damping escalation.

    ``damping=None`` applies the default 1e-6 * trace(A)/K.  On a failed
    factorization the damping escalates tenfold up to ``DAMPING_RETRIES``
    times before raising :class:`IndefiniteSystemError`.
    """
    k = a.shape[0]
    lam = _auto_damping(a) if damping is None else float(damping)
    last_err = None
    for _ in range(DAMPING_RETRIES + 1):
        try:
            c = cholesky_solve(a + lam * np.eye(k), b)
            return c, lam
        except NotPositiveDefiniteError as err:
            last_err = err
            lam = max(lam, _auto_damping(a), 1e-12) * 10.0
    raise IndefiniteSystemError(lam, cause=last_err)


def _flatten_scalar(q):
    d = q.d[:, :, 0].ravel()
    h = q.h[:, :, 0].ravel()
    return d, h


def solve_subspace(q, basis, damping=None):
    """Coefficients minimizing the scalar-task quadratic model on the subspace.

    Forms A = V^T D V (column-wise product with the diagonal) and solves
    A c = -V^T d.  Returns the K coefficients.
    """
    d, h = _flatten_scalar(q)
    if basis.n != d.size:
        raise ValueError(f"basis rows {basis.n} != pixel count {d.size}")
    v = basis.v
    a = (v * h[:, None]).T @ v
    b = -(v.T @ d)
    c, _ = _solve_damped(a, b, damping)
    return c


def project(basis, x):
    """Orthogonal projection of ``x`` onto the basis span, via the Gram matrix.

    Returns ``(p, r)`` with ``p = P x`` and ``r = P x - x``; the projector
    ``P = V (V^T V)^{-1} V^T`` is never materialized.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    v = basis.v
    if v.shape[0] != x.size:
        raise ValueError(f"basis rows {v.shape[0]} != vector length {x.size}")
    gram = v.T @ v
    try:
        z = cholesky_solve(gram, v.T @ x)
    except NotPositiveDefiniteError as err:
        raise RankDeficientBasisError(f"Gram matrix singular: {err}") from err
    p = v @ z
    return p, p - x


def _quad_value_scalar(h, d, dx):
    return 0.5 * float(dx @ (h * dx)) + float(d @ dx)


def solve_projected(q, basis, x, damping=None):
    """Projection-corrected subspace solve for scalar tasks.

    Computes the projection residual r of the current solution, solves
    A c = -V^T (d + D r) and returns the step dx = r + V c together with a
    report.  With ``x = 0`` (or ``x`` already in the span) this reduces
    exactly to :func:`solve_subspace`.
    """
    d, h = _flatten_scalar(q)
    if basis.n != d.size:
        raise ValueError(f"basis rows {basis.n} != pixel count {d.size}")
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != d.size:
        raise ValueError(f"solution length {x.size} != pixel count {d.size}")

    v = basis.v
    _, r = project(basis, x)
    a = (v * h[:, None]).T @ v
    b = -(v.T @ (d + h * r))
    c, lam = _solve_damped(a, b, damping)
    dx = r + v @ c

    decrease = _quad_value_scalar(h, d, r) - _quad_value_scalar(h, d, dx)
    _, ortho = project(basis, x + dx)
    report = SolveReport(
        coefficients=c,
        predicted_decrease=decrease,
        damping_used=lam,
        projection_residual_norm=float(np.linalg.norm(ortho)),
    )
    return dx, report


def solve_flow_subspace(q, pair, x, damping=None):
    """Projection-corrected block solve for optical flow.

    Assembles the symmetric 2K x 2K system with blocks V_u^T H_xx V_u,
    V_u^T H_xy V_v, V_v^T H_yy V_v and the projection-corrected right-hand
    side, then returns the per-component step (du, dv) stacked as a 2-channel
    field vector of shape (n, 2).
    """
    hgrid = q.h
    dgrid = q.d
    if dgrid.shape[2] != 2 or hgrid.shape[2] != 3:
        raise ValueError("flow quadratic model must have 2 d-channels and 3 h-channels")
    n = dgrid.shape[0] * dgrid.shape[1]
    if pair.v_u.n != n:
        raise ValueError(f"basis rows {pair.v_u.n} != pixel count {n}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        xu, xv = x[:, :, 0].ravel(), x[:, :, 1].ravel()
    else:
        xu, xv = x[:, 0].ravel(), x[:, 1].ravel()

    dx_ = dgrid[:, :, 0].ravel()
    dy_ = dgrid[:, :, 1].ravel()
    hxx = hgrid[:, :, 0].ravel()
    hxy = hgrid[:, :, 1].ravel()
    hyy = hgrid[:, :, 2].ravel()
    vu, vv = pair.v_u.v, pair.v_v.v
    ku, kv = pair.v_u.k, pair.v_v.k

    _, ru = project(pair.v_u, xu)
    _, rv = project(pair.v_v, xv)

    a = np.empty((ku + kv, ku + kv))
    a[:ku, :ku] = (vu * hxx[:, None]).T @ vu
    a[:ku, ku:] = (vu * hxy[:, None]).T @ vv
    a[ku:, :ku] = a[:ku, ku:].T
    a[ku:, ku:] = (vv * hyy[:, None]).T @ vv

    rhs_u = dx_ + hxx * ru + hxy * rv
    rhs_v = dy_ + hxy * ru + hyy * rv
    b = -np.concatenate([vu.T @ rhs_u, vv.T @ rhs_v])

    c, lam = _solve_damped(a, b, damping)
    du = ru + vu @ c[:ku]
    dv = rv + vv @ c[ku:]

    def quad_value(su, sv):
        quad = su @ (hxx * su) + 2.0 * (su @ (hxy * sv)) + sv @ (hyy * sv)
        return 0.5 * float(quad) + float(dx_ @ su + dy_ @ sv)

    decrease = quad_value(ru, rv) - quad_value(du, dv)
    _, ou = project(pair.v_u, xu + du)
    _, ov = project(pair.v_v, xv + dv)
    report = SolveReport(
        coefficients=c,
        predicted_decrease=decrease,
        damping_used=lam,
        projection_residual_norm=float(np.hypot(np.linalg.norm(ou), np.linalg.norm(ov))),
    )
    return np.stack([du, dv], axis=1), report
