"""System and controller descriptions.

A plant is ``x' = [A(t) + Delta(t)] x + B u + omega(t, x)`` started at
``(t0, x0)``: ``A`` the known time-varying part, ``Delta`` an unknown but
bounded-influence uncertainty, ``B`` a constant invertible input matrix
and ``omega`` a disturbance whose norm is dominated by a known scalar
envelope ``omega_bound(t)``.  A controller supplies the state feedback
``u = K(t) x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .expr import Expr, MatrixFunction, VectorFunction, collect_vars, state_vars
from .linalg import LinalgError, as_matrix, as_vector
from .tolerances import MAX_DIM, MIN_DIM

__all__ = [
    "SystemSpec",
    "ControllerSpec",
    "closed_loop_matrix",
    "closed_loop_function",
]


@dataclass
class SystemSpec:
    """An uncertain linear time-varying plant.

    Attributes
    ----------
    n : state dimension (2..16).
    A : known plant matrix as a MatrixFunction of t.
    B : constant square input matrix.
    t0, x0 : initial time and state.
    Delta : optional uncertainty matrix, a MatrixFunction of t.
    omega : optional disturbance, a VectorFunction of t and x1..xn.
    omega_bound : optional scalar envelope in t with
        ``||omega(t, x)|| <= omega_bound(t)`` along trajectories.
    norm : the vector norm used by default in analyses ('one', 'two',
        'inf' or a Weighted instance).
    """

    n: int
    A: MatrixFunction
    B: np.ndarray
    t0: float
    x0: np.ndarray
    Delta: MatrixFunction | None = None
    omega: VectorFunction | None = None
    omega_bound: Expr | None = None
    norm: object = "two"

    def __post_init__(self):
        if not (MIN_DIM <= self.n <= MAX_DIM):
            raise LinalgError(f"dimension n={self.n} outside supported range "
                              f"{MIN_DIM}..{MAX_DIM}")
        if not isinstance(self.A, MatrixFunction) or self.A.n != self.n:
            raise LinalgError(f"A must be an {self.n}x{self.n} MatrixFunction")
        if self.A.state_dependent:
            raise LinalgError("A may depend on t only")
        self.B = as_matrix(self.B, "control matrix B")
        if self.B.shape[0] != self.n:
            raise LinalgError(f"control matrix B must be {self.n}x{self.n}, "
                              f"got {self.B.shape}")
        self.t0 = float(self.t0)
        if not np.isfinite(self.t0):
            raise LinalgError("t0 must be finite")
        self.x0 = as_vector(self.x0, self.n, "x0")
        if self.Delta is not None:
            if not isinstance(self.Delta, MatrixFunction) or self.Delta.n != self.n:
                raise LinalgError(f"Delta must be an {self.n}x{self.n} MatrixFunction")
            if self.Delta.state_dependent:
                raise LinalgError("Delta may depend on t only")
        if self.omega is not None:
            if not isinstance(self.omega, VectorFunction) or self.omega.n != self.n:
                raise LinalgError(f"omega must have {self.n} components")
            allowed = {"t", *state_vars(self.n)}
            bad = {v for v in self.omega.allowed if v not in allowed}
            if bad:
                raise LinalgError(f"omega uses unknown state variables {sorted(bad)}")
        if self.omega_bound is not None:
            extra = collect_vars(self.omega_bound) - {"t"}
            if extra:
                raise LinalgError(
                    f"omega_bound may depend on t only, found {sorted(extra)}")


@dataclass
class ControllerSpec:
    """A state-feedback gain ``u = K(t) x`` in split form.

    ``B K(t) = -A_sym(t) + diag(lam) + diag(gamma(t))`` by construction:
    the adaptive part cancels the symmetric part of the plant and places
    constant rates ``lam``, the robust part adds the time-varying margins
    ``gamma``.  ``system`` is the plant the gain was synthesized for.
    """

    lam: np.ndarray
    gamma: tuple  # tuple[Expr] diagonal entries of the robust part
    K: MatrixFunction
    adaptive_part: MatrixFunction  # -A_sym(t) + diag(lam)
    B_inv: np.ndarray
    system: SystemSpec

    @property
    def n(self) -> int:
        return len(self.lam)

    def gamma_max(self) -> Callable[[float], float]:
        """The pointwise closed-loop rate ``Gamma(t) = max_i(lam_i + gamma_i(t))``.

        Positive entries of ``lam + gamma`` mean the controller is not
        contracting at that time.
        """
        from .expr import compile_expr
        gs = [compile_expr(g, ("t",)) for g in self.gamma]
        lam = self.lam

        def fn(t: float) -> float:
            return max(lam[i] + gs[i](t) for i in range(len(lam)))

        return fn


def closed_loop_matrix(spec: SystemSpec, ctrl: ControllerSpec | None, t: float,
                       include_delta: bool = False) -> np.ndarray:
    """The closed-loop matrix ``A(t) + B K(t)`` (plus ``Delta(t)`` when
    requested) at a single time ``t >= t0``.

    ``ctrl=None`` means open loop (``K = 0``).
    """
    if t < spec.t0:
        raise ValueError(f"t={t} is before the initial time t0={spec.t0}")
    M = spec.A(t)
    if ctrl is not None:
        M = M + spec.B @ ctrl.K(t)
    if include_delta and spec.Delta is not None:
        M = M + spec.Delta(t)
    return M


def closed_loop_function(spec: SystemSpec, ctrl: ControllerSpec | None = None,
                         include_delta: bool = False,
                         negate: bool = False) -> Callable[[float], np.ndarray]:
    """A compiled evaluator ``t -> A(t) + B K(t) [+ Delta(t)]``.

    Used on hot paths (quadrature, simulation); results match
    :func:`closed_loop_matrix` bit for bit.  ``negate=True`` returns the
    negated matrix, which the instability test integrates.
    """
    A = spec.A.compiled()
    K = ctrl.K.compiled() if ctrl is not None else None
    B = spec.B
    D = spec.Delta.compiled() if (include_delta and spec.Delta is not None) else None

    def fn(t: float) -> np.ndarray:
        M = A(t)
        if K is not None:
            M = M + B @ K(t)
        if D is not None:
            M = M + D(t)
        return -M if negate else M

    return fn
