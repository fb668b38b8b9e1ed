"""Matrix norms, logarithmic norms and the small dense solves built on them.

The logarithmic norm (matrix measure) of a square matrix ``M`` with respect
to an induced matrix norm is

    mu[M] = lim_{h -> 0+} (||I + h M|| - 1) / h.

Unlike a norm it can be negative, which is what makes it useful as a decay
rate certificate: ``||exp(M t)|| <= exp(mu[M] t)`` for all ``t >= 0``.

Closed forms are implemented for the one, two and infinity norms and for
Euclidean norms weighted by a symmetric positive definite matrix ``H``
(``||x||_H = sqrt(x^T H x)``).  Everything here is meant for the small
systems this package targets (dimension 2..16), so the solvers favour
transparency over asymptotic speed: a cyclic Jacobi eigensolver, Gaussian
elimination with partial pivoting, and a Kronecker-product Lyapunov solve.
"""

from __future__ import annotations

import numpy as np

from .tolerances import (
    INVERT_RESIDUAL_TOL,
    JACOBI_MAX_SWEEPS,
    JACOBI_OFFDIAG_TOL,
    LYAPUNOV_RESIDUAL_TOL,
    MAX_DIM,
    MIN_DIM,
    SINGULAR_PIVOT_TOL,
    SYMMETRY_TOL,
)

__all__ = [
    "ONE",
    "TWO",
    "INF",
    "Weighted",
    "LinalgError",
    "SingularMatrixError",
    "NotSymmetricError",
    "NotDefiniteError",
    "NotHurwitzError",
    "ConvergenceError",
    "as_matrix",
    "as_vector",
    "vector_norm",
    "induced_norm",
    "lognorm",
    "lognorm_limit",
    "symmetric_eigenvalues",
    "symmetric_eigen_max",
    "invert",
    "lyapunov_solve",
    "frobenius",
]

ONE = "one"
TWO = "two"
INF = "inf"


class LinalgError(ValueError):
    """Base class for the numerical failures raised by this module."""


class SingularMatrixError(LinalgError):
    pass


class NotSymmetricError(LinalgError):
    pass


class NotDefiniteError(LinalgError):
    pass


class NotHurwitzError(LinalgError):
    pass


class ConvergenceError(LinalgError):
    """An iteration hit its sweep budget without meeting its tolerance."""


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and return ``M`` as a float64 square array.

    Rejects non-square shapes, non-finite entries and dimensions outside
    the supported range 2..16.
    """
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {A.shape}")
    n = A.shape[0]
    if not (MIN_DIM <= n <= MAX_DIM):
        raise LinalgError(f"{name} dimension {n} outside supported range "
                          f"{MIN_DIM}..{MAX_DIM}")
    if not np.isfinite(A).all():
        raise LinalgError(f"{name} has non-finite entries")
    return A


def as_vector(x, n: int | None = None, name: str = "vector") -> np.ndarray:
    """Validate and return ``x`` as a finite float64 1-d array."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise LinalgError(f"{name} must be 1-dimensional, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise LinalgError(f"{name} must have length {n}, got {v.shape[0]}")
    if not np.isfinite(v).all():
        raise LinalgError(f"{name} has non-finite entries")
    return v


def frobenius(M) -> float:
    A = np.asarray(M, dtype=float)
    return float(np.sqrt((A * A).sum()))


class Weighted:
    """Euclidean norm weighted by a symmetric positive definite matrix H.

    ``||x||_H = sqrt(x^T H x) = ||L x||_2`` where ``H = L^T L`` is the
    Cholesky factorization.  The induced matrix norm and logarithmic norm
    follow by the similarity ``M -> L M L^{-1}``.
    """

    def __init__(self, H):
        H = as_matrix(H, "weight matrix H")
        asym = np.abs(H - H.T).max()
        if asym > SYMMETRY_TOL * max(1.0, frobenius(H)):
            raise NotSymmetricError(
                f"weight matrix H is not symmetric (max asymmetry {asym:.3e})")
        H = 0.5 * (H + H.T)
        try:
            C = np.linalg.cholesky(H)  # H = C C^T with C lower triangular
        except np.linalg.LinAlgError:
            raise NotDefiniteError("weight matrix H is not positive definite") from None
        self.H = H
        self.L = C.T                       # upper triangular, H = L^T L
        self.L_inv = _triangular_inverse_upper(self.L)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def __repr__(self) -> str:
        return f"Weighted(H={self.H.tolist()!r})"


def _triangular_inverse_upper(L: np.ndarray) -> np.ndarray:
    # back substitution against each unit vector; L is upper triangular with
    # positive diagonal (it comes from a Cholesky factor), so no pivot check
    n = L.shape[0]
    X = np.zeros((n, n))
    for j in range(n):
        b = np.zeros(n)
        b[j] = 1.0
        for i in range(n - 1, -1, -1):
            X[i, j] = (b[i] - L[i, i + 1:] @ X[i + 1:, j]) / L[i, i]
    return X


def _check_kind(kind, n: int):
    if isinstance(kind, Weighted):
        if kind.n != n:
            raise LinalgError(f"weight matrix is {kind.n}x{kind.n}, "
                              f"operand has dimension {n}")
        return kind
    if kind in (ONE, TWO, INF):
        return kind
    raise LinalgError(f"unknown norm kind {kind!r}; expected 'one', 'two', "
                      "'inf' or a Weighted instance")


def vector_norm(x, kind=TWO) -> float:
    """Vector norm ``||x||`` for kind 'one', 'two', 'inf' or Weighted."""
    v = as_vector(x)
    kind = _check_kind(kind, v.shape[0])
    if kind == ONE:
        return float(np.abs(v).sum())
    if kind == TWO:
        return float(np.sqrt(v @ v))
    if kind == INF:
        return float(np.abs(v).max())
    return float(np.linalg.norm(kind.L @ v))


def induced_norm(M, kind=TWO) -> float:
    """Matrix norm induced by the matching vector norm.

    'one' is the maximum absolute column sum, 'inf' the maximum absolute
    row sum, 'two' the spectral norm ``sqrt(lambda_max(M^T M))``, and a
    Weighted kind gives the spectral norm of ``L M L^{-1}``.
    """
    A = as_matrix(M)
    kind = _check_kind(kind, A.shape[0])
    if kind == ONE:
        return float(np.abs(A).sum(axis=0).max())
    if kind == INF:
        return float(np.abs(A).sum(axis=1).max())
    if isinstance(kind, Weighted):
        A = kind.L @ A @ kind.L_inv
    lam = symmetric_eigen_max(A.T @ A)
    return float(np.sqrt(max(lam, 0.0)))


def lognorm(M, kind=TWO) -> float:
    """Logarithmic norm mu[M] with respect to the chosen vector norm.

    Closed forms:

    * one:  ``max_j ( m_jj + sum_{i != j} |m_ij| )``
    * two:  ``(1/2) lambda_max(M + M^T)``
    * inf:  ``max_i ( m_ii + sum_{j != i} |m_ij| )``
    * Weighted(H): the two-norm formula applied to ``L M L^{-1}``.

    mu can be negative; ``mu[M] <= ||M||`` always holds.
    """
    A = as_matrix(M)
    kind = _check_kind(kind, A.shape[0])
    if kind == ONE:
        cols = np.abs(A).sum(axis=0) - np.abs(np.diag(A)) + np.diag(A)
        return float(cols.max())
    if kind == INF:
        rows = np.abs(A).sum(axis=1) - np.abs(np.diag(A)) + np.diag(A)
        return float(rows.max())
    if isinstance(kind, Weighted):
        A = kind.L @ A @ kind.L_inv
    return 0.5 * symmetric_eigen_max(A + A.T)


def lognorm_limit(M, kind=TWO, h: float = 1e-7) -> float:
    """Difference-quotient approximation ``(||I + h M|| - 1) / h``.

    This is the defining limit of the logarithmic norm evaluated at a small
    positive ``h``.  It converges to ``lognorm(M, kind)`` as ``h -> 0+`` at
    first order and serves as an independent cross-check of the closed
    forms; it is never used on a hot path.
    """
    A = as_matrix(M)
    if not (h > 0.0):
        raise LinalgError("step h must be positive")
    n = A.shape[0]
    return (induced_norm(np.eye(n) + h * A, kind) - 1.0) / h


def symmetric_eigenvalues(S) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending.

    Uses cyclic Jacobi rotations: every accepted matrix is orthogonally
    similar to the returned diagonal, so eigenvalues are found to high
    relative accuracy for the small dimensions supported here.  Input with
    relative asymmetry above 1e-12 is rejected rather than silently
    symmetrized.
    """
    S = as_matrix(S, "symmetric matrix")
    scale = frobenius(S)
    asym = np.abs(S - S.T).max()
    if asym > SYMMETRY_TOL * max(1.0, scale):
        raise NotSymmetricError(
            f"matrix is not symmetric (max asymmetry {asym:.3e})")
    A = 0.5 * (S + S.T)
    n = A.shape[0]
    stop = JACOBI_OFFDIAG_TOL * scale
    for _ in range(JACOBI_MAX_SWEEPS):
        # sum the off-diagonal squares directly; the difference form
        # (|A|_F^2 - sum of diag^2) cancels and floors near sqrt(eps)|A|_F
        off2 = ((A - np.diag(np.diag(A))) ** 2).sum()
        if np.sqrt(max(off2, 0.0)) <= stop:
            return np.sort(np.diag(A))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                # rotation angle that zeroes the (p, q) entry
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-20 * abs(diff):
                    t = apq / diff  # tiny angle; tau below would overflow
                else:
                    tau = diff / (2.0 * apq)
                    t = np.sign(tau) if tau != 0.0 else 1.0
                    t = t / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
    raise ConvergenceError(
        f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps")


def symmetric_eigen_max(S) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    return float(symmetric_eigenvalues(S)[-1])


def invert(M) -> np.ndarray:
    """Matrix inverse by Gauss-Jordan elimination with partial pivoting.

    Raises SingularMatrixError when a pivot falls at or below
    ``1e-13 * ||M||_F``.  For well-conditioned input the residual
    ``|M @ invert(M) - I|`` stays below 1e-10 elementwise.
    """
    A = as_matrix(M)
    n = A.shape[0]
    scale = frobenius(A)
    aug = np.hstack([A, np.eye(n)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) <= SINGULAR_PIVOT_TOL * scale:
            raise SingularMatrixError(
                f"matrix is singular to working precision (pivot "
                f"{abs(aug[piv, col]):.3e} at column {col})")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        for r in range(n):
            if r != col and aug[r, col] != 0.0:
                aug[r] -= aug[r, col] * aug[col]
    return aug[:, n:].copy()


def lyapunov_solve(A) -> np.ndarray:
    """Solve ``A^T H + H A = -2 I`` for symmetric positive definite H.

    The equation is rewritten as the Kronecker linear system
    ``(I (x) A^T + A^T (x) I) vec(H) = vec(-2 I)`` with column-major vec,
    and solved densely; this is exact up to rounding for the dimensions
    supported here.  A unique solution exists iff A and -A share no
    eigenvalue, and H is positive definite iff A is Hurwitz.  For Hurwitz A
    the weighted logarithmic norm satisfies
    ``lognorm(A, Weighted(H)) = -1 / lambda_max(H)``.
    """
    A = as_matrix(A)
    n = A.shape[0]
    eye = np.eye(n)
    lhs = np.kron(eye, A.T) + np.kron(A.T, eye)
    rhs = (-2.0 * eye).flatten(order="F")
    try:
        h = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(
            "Lyapunov equation has no unique solution "
            "(A and -A share an eigenvalue)") from None
    H = h.reshape((n, n), order="F")
    H = 0.5 * (H + H.T)
    resid = frobenius(A.T @ H + H @ A + 2.0 * eye)
    if not np.isfinite(resid) or resid > LYAPUNOV_RESIDUAL_TOL * max(1.0, frobenius(H)):
        raise SingularMatrixError(
            f"Lyapunov equation has no unique solution (residual {resid:.3e})")
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise NotHurwitzError(
            "A is not Hurwitz: the Lyapunov solution is not positive definite"
        ) from None
    return H
