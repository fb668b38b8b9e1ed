"""Central numerical tolerances.

Every hard-coded threshold used by the library lives here so that the
test-suite and the implementation cannot silently drift apart.
"""

# symmetric eigensolver
SYMMETRY_TOL = 1e-12        # relative asymmetry max|S - S^T| / max(1, ||S||_F) accepted
JACOBI_OFFDIAG_TOL = 1e-14  # stop when off(S) <= tol * ||S||_F
JACOBI_MAX_SWEEPS = 100

# dense solves
SINGULAR_PIVOT_TOL = 1e-13   # pivot <= tol * ||M||_F flags the matrix as singular
INVERT_RESIDUAL_TOL = 1e-10  # elementwise |M @ inv(M) - I| guarantee for well-conditioned M
LYAPUNOV_RESIDUAL_TOL = 1e-9  # Frobenius residual of A^T H + H A + 2 I

# synthesis
GAIN_IDENTITY_TOL = 1e-10   # spot check of B K(t) = -A_sym(t) + diag(lam) + diag(gamma(t))
DECOMPOSE_TOL = 1e-12       # reconstruction A = A_sym + A_skew at sample times

# supported problem sizes
MIN_DIM = 2
MAX_DIM = 16
