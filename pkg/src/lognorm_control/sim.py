"""Closed-loop simulation and transition-matrix bound checks.

The integrator is an explicit Dormand-Prince 5(4) pair with PI step-size
control and a quartic dense-output interpolant, accurate enough that the
logarithmic-norm envelopes can be checked tightly.  Explicit methods fail
loudly rather than silently on stiff problems: when the step size stays
pinned at ``h_min`` for 50 consecutive attempts the run aborts with a
:class:`StiffnessError` carrying the local logarithmic norm, which is the
quantity that makes the problem stiff in the first place.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import EvalError
from .linalg import induced_norm, lognorm, vector_norm
from .analysis import cumulative_integral, json_default, norm_name
from .system import ControllerSpec, SystemSpec, closed_loop_function

__all__ = [
    "NumericalError",
    "StiffnessError",
    "Trace",
    "TransitionTrace",
    "SandwichReport",
    "ConvergenceReport",
    "simulate",
    "fundamental_matrix",
    "verify_sandwich",
    "convergence_report",
    "write_trace_csv",
]

STIFF_LIMIT = 50

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: weights of the embedded error estimate
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])
# dense-output weights for the quartic interpolant
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])

_SAFETY = 0.9
_ALPHA = 0.7 / 5.0  # PI controller exponents
_BETA = 0.4 / 5.0
_FAC_MIN = 0.2
_FAC_MAX = 5.0


class NumericalError(RuntimeError):
    """The integration could not continue (non-finite state or an
    expression domain failure along the trajectory)."""


class StiffnessError(RuntimeError):
    """The step size stayed pinned at h_min; the problem is stiff for
    this explicit method at the reported time."""

    def __init__(self, t: float, h: float, mu: float | None = None):
        self.t = t
        self.h = h
        self.mu = mu
        msg = (f"step size pinned at h={h:g} for {STIFF_LIMIT} consecutive "
               f"attempts near t={t:.6g}")
        if mu is not None:
            msg += (f"; local closed-loop logarithmic norm mu={mu:.6g} "
                    f"(|mu| * h ~ {abs(mu) * h:.3g})")
        msg += ("; the problem is stiff here - shorten the horizon, "
                "relax tol, or lower h_min")
        super().__init__(msg)


def _initial_step(f, t0, y0, h_min, h_max):
    # deterministic heuristic: aim for a step that moves the state ~1%
    k = f(t0, y0)
    scale = (1.0 + float(np.linalg.norm(y0))) / (1.0 + float(np.linalg.norm(k)))
    return float(min(max(0.01 * scale, h_min), h_max))


def _integrate(f, t0, y0, T, tol, h_min, h_max, grid, diag_mu=None):
    """Core stepper.  Fills `grid` (strictly increasing, within [t0, T])
    by dense output and returns (outputs, accepted_h, n_rejected)."""
    if not (T > t0):
        raise ValueError(f"horizon T={T} must exceed t0={t0}")
    if not (tol > 0.0) or not np.isfinite(tol):
        raise ValueError("tol must be a positive finite number")
    if not (0.0 < h_min <= h_max):
        raise ValueError("need 0 < h_min <= h_max")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or (np.diff(grid) <= 0).any():
        raise ValueError("output grid must be non-empty and strictly increasing")
    if grid[0] < t0 or grid[-1] > T:
        raise ValueError("output grid must lie within [t0, T]")

    y = np.asarray(y0, dtype=float).copy()
    ndim = len(y)
    out = np.empty((len(grid), ndim))
    gi = 0
    while gi < len(grid) and grid[gi] <= t0:
        out[gi] = y
        gi += 1

    t = t0
    k = np.empty((7, ndim))
    k[0] = f(t, y)
    h = _initial_step(f, t0, y, h_min, h_max)
    facold = 1e-4
    accepted = []
    n_rejected = 0
    pinned = 0

    while t < T:
        if T - t <= 4e-16 * max(1.0, abs(T)):
            break  # within rounding of the endpoint
        end_clamped = False
        if t + h >= T:
            h = T - t
            end_clamped = True
        h_attempt = h

        for i in range(1, 7):
            k[i] = f(t + _C[i] * h, y + h * (_A[i] @ k[:i]))
        y_new = y + h * (_B5 @ k)
        err_vec = h * (_E @ k)
        finite = np.isfinite(y_new).all() and np.isfinite(err_vec).all()
        if finite:
            sc = tol * (1.0 + float(np.linalg.norm(y)))
            err = float(np.linalg.norm(err_vec)) / sc
        else:
            err = math.inf

        at_floor = (not end_clamped) and h_attempt <= h_min * (1.0 + 1e-9)
        if err <= 1.0:
            # dense output over (t, t + h]
            if gi < len(grid) and grid[gi] <= t + h:
                ydiff = y_new - y
                bspl = h * k[0] - ydiff
                r4 = ydiff - h * k[6] - bspl
                r5 = h * (_D @ k)
                while gi < len(grid) and grid[gi] <= t + h:
                    th = (grid[gi] - t) / h
                    out[gi] = y + th * (ydiff + (1.0 - th)
                                        * (bspl + th * (r4 + (1.0 - th) * r5)))
                    gi += 1
            accepted.append(h)
            t = t + h
            y = y_new
            k[0] = k[6]  # first-same-as-last
            eps = max(err, 1e-16)
            fac = _SAFETY * eps ** (-_ALPHA) * facold ** _BETA
            h = h_attempt * min(_FAC_MAX, max(_FAC_MIN, fac))
            facold = max(err, 1e-4)
        else:
            n_rejected += 1
            if not finite and at_floor:
                raise NumericalError(
                    f"state became non-finite at t={t:.6g} with the step "
                    "already at h_min")
            fac = _FAC_MIN if not finite else \
                min(1.0, max(_FAC_MIN, _SAFETY * err ** (-0.2)))
            h = h_attempt * fac
        h = min(max(h, h_min), h_max)

        pinned = pinned + 1 if at_floor else 0
        if pinned >= STIFF_LIMIT:
            mu = None
            if diag_mu is not None:
                try:
                    mu = diag_mu(t)
                except Exception:
                    mu = None
            raise StiffnessError(t, h_min, mu)

    while gi < len(grid):  # grid points at exactly T
        out[gi] = y
        gi += 1
    return out, np.array(accepted), n_rejected


@dataclass
class Trace:
    """A simulated closed-loop trajectory on an output grid.

    ``norms`` is ``||x(t)||`` in the norm named by ``norm_kind``;
    ``mu_cl`` is the logarithmic norm of the full closed-loop matrix
    (including the uncertainty); ``bound_upper`` / ``bound_lower`` are
    the envelopes ``||x0|| exp(+-int mu)`` of the homogeneous part.  With
    a disturbance present the envelopes are reference curves, not bounds.
    """
    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    mu_cl: np.ndarray
    bound_upper: np.ndarray
    bound_lower: np.ndarray
    step_sizes: np.ndarray
    n_rejected: int
    norm_kind: str

    @property
    def n(self) -> int:
        return self.states.shape[1]


def simulate(spec: SystemSpec, ctrl: ControllerSpec | None = None,
             T: float | None = None, tol: float = 1e-8,
             h_min: float = 1e-9, h_max: float = 0.1,
             grid=None, n_out: int = 1001,
             bounds_tol: float = 1e-10) -> Trace:
    """Integrate ``x' = [A + Delta + B K] x + omega(t, x)`` from (t0, x0).

    The local error per step is held below ``tol * (1 + ||x||)``.  The
    returned trace carries the state on the output grid together with the
    pointwise closed-loop logarithmic norm and the integrated envelopes.
    Raises StiffnessError / NumericalError as described in the module
    docstring; expression domain failures along the trajectory are
    wrapped in NumericalError.
    """
    if T is None:
        T = spec.t0 + 10.0
    k = spec.norm
    Acl = closed_loop_function(spec, ctrl, include_delta=True)
    omega = spec.omega.compiled() if spec.omega is not None else None

    def f(t, y):
        try:
            dy = Acl(t) @ y
            if omega is not None:
                dy = dy + omega(t, y)
        except EvalError as exc:
            raise NumericalError(
                f"expression evaluation failed at t={t:.6g}: {exc}") from exc
        return dy

    if grid is None:
        if n_out < 2:
            raise ValueError("n_out must be at least 2")
        grid = np.linspace(spec.t0, T, n_out)
    diag = lambda t: lognorm(Acl(t), k)
    states, steps, nrej = _integrate(f, spec.t0, spec.x0, T, tol, h_min,
                                     h_max, grid, diag_mu=diag)
    grid = np.asarray(grid, dtype=float)
    mu_vals = np.array([lognorm(Acl(float(t)), k) for t in grid])
    norms = np.array([vector_norm(x, k) for x in states])

    x0n = vector_norm(spec.x0, k)
    if len(grid) >= 2:
        J_up, _, _, _ = cumulative_integral(diag, grid, bounds_tol)
        J_low, _, _, _ = cumulative_integral(
            lambda t: lognorm(-Acl(t), k), grid, bounds_tol)
    else:
        J_up = J_low = np.zeros(len(grid))
    with np.errstate(over="ignore"):
        upper = x0n * np.exp(J_up)
        lower = x0n * np.exp(-J_low)
    return Trace(times=grid, states=states, norms=norms, mu_cl=mu_vals,
                 bound_upper=upper, bound_lower=lower, step_sizes=steps,
                 n_rejected=nrej, norm_kind=norm_name(k))


@dataclass
class TransitionTrace:
    """The fundamental matrix ``Phi(t)`` (with ``Phi(t0) = I``) sampled
    on a grid."""
    times: np.ndarray
    phis: np.ndarray  # shape (m, n, n)
    step_sizes: np.ndarray
    n_rejected: int


def fundamental_matrix(F: Callable[[float], np.ndarray], t0: float, T: float,
                       tol: float = 1e-8, h_min: float = 1e-9,
                       h_max: float = 0.1, n_out: int = 201) -> TransitionTrace:
    """Integrate ``Phi' = F(t) Phi`` columnwise from the identity."""
    n = np.asarray(F(t0)).shape[0]

    def f(t, y):
        try:
            return (F(t) @ y.reshape(n, n)).ravel()
        except EvalError as exc:
            raise NumericalError(
                f"expression evaluation failed at t={t:.6g}: {exc}") from exc

    grid = np.linspace(t0, T, n_out)
    flat, steps, nrej = _integrate(f, t0, np.eye(n).ravel(), T, tol, h_min,
                                   h_max, grid)
    return TransitionTrace(times=grid, phis=flat.reshape(len(grid), n, n),
                           step_sizes=steps, n_rejected=nrej)


@dataclass
class SandwichReport:
    """Checks of the transition-matrix sandwich

        exp(-int_tau^t mu[-F]) <= ||Phi(t) Phi(tau)^{-1}|| <= exp(+int_tau^t mu[F])

    over sampled pairs ``tau < t``, plus the matching state bounds for
    trajectories started at t0 from unit vectors.  All comparisons happen
    in the log domain with an explicit slack covering the quadrature
    error plus a per-pair integrator-noise allowance; ``slack`` records
    the base (pair-independent) part, each pair dict its own total.  The
    worst margins (>= 0 means the inequality held with room to spare)
    are recorded.
    """
    passed: bool
    n_pairs: int
    worst_upper_margin: float
    worst_lower_margin: float
    p4_worst_margin: float
    slack: float
    pairs: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "n_pairs": self.n_pairs,
                "worst_upper_margin": self.worst_upper_margin,
                "worst_lower_margin": self.worst_lower_margin,
                "p4_worst_margin": self.p4_worst_margin,
                "slack": self.slack, "pairs": list(self.pairs),
                "notes": list(self.notes)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True,
                          default=json_default)


_NOISE_GAIN = 16.0  # a few steps' worth of local error, absorbed into slack


def verify_sandwich(tt: TransitionTrace, F: Callable[[float], np.ndarray],
                    kind="two", n_pairs: int = 20, tol_slack: float = 1e-6,
                    quad_tol: float = 1e-9, phi_tol: float = 1e-8,
                    seed: int = 0) -> SandwichReport:
    """Check the logarithmic-norm sandwich on a computed fundamental matrix.

    ``phi_tol`` is the local tolerance the Phi integration used.  The
    computed Phi carries absolute noise of roughly that size, and forming
    a transition norm amplifies it by ||Phi(tau)^{-1}||, which can reach
    exp(int mu[-F]).  Each (tau, t) pair therefore gets its own slack:
    the base slack plus log1p(C * phi_tol * (e^{J-(tau)} + e^{J-(t)}))
    with J- the cumulative integral of mu[-F].  The pair sample always
    contains (t0, T), (t0, mid) and (mid, T); the rest is drawn from a
    seeded generator, so the report is reproducible.
    """
    times = tt.times
    m = len(times)
    J_up, e_up, _, _ = cumulative_integral(
        lambda t: lognorm(F(t), kind), times, quad_tol)
    J_low, e_low, _, _ = cumulative_integral(
        lambda t: lognorm(-F(t), kind), times, quad_tol)
    base_slack = math.log1p(tol_slack) + 4.0 * (e_up + e_low)

    def pair_slack(i: int, j: int) -> float:
        # first-order error in W = Phi(t)Phi(tau)^{-1}: ||dW||/||W|| <=
        # ||E|| ||Phi(tau)^{-1}|| (1/||W|| + 1), bounded via the a-priori
        # estimates ||Phi(s)^{-1}|| <= e^{J-(s)} and ||W|| >= e^{-dJ-}
        if phi_tol <= 0.0:
            return base_slack
        noise_log = (math.log(_NOISE_GAIN * phi_tol)
                     + float(np.logaddexp(J_low[i], J_low[j])))
        # log1p(e^x), overflow-safe
        return base_slack + float(np.logaddexp(0.0, noise_log))

    rng = np.random.default_rng(seed)
    pairs = {(0, m - 1), (0, m // 2), (m // 2, m - 1)}
    while len(pairs) < n_pairs:
        i, j = sorted(rng.integers(0, m, size=2))
        if i < j:
            pairs.add((int(i), int(j)))
    pairs = sorted(pairs)

    results = []
    notes = []
    worst_up = worst_low = math.inf
    ok = True
    for i, j in pairs:
        up = float(J_up[j] - J_up[i])
        low = float(J_low[j] - J_low[i])
        slack = pair_slack(i, j)
        try:
            X = np.linalg.solve(tt.phis[i].T, tt.phis[j].T).T
        except np.linalg.LinAlgError:
            ok = False
            notes.append(f"Phi({times[i]:g}) is numerically singular; "
                         "the transition norm could not be formed "
                         "(horizon too long for float64)")
            continue
        nrm = induced_norm(X, kind)
        lognrm = math.log(nrm) if nrm > 0.0 else -math.inf
        up_margin = (up + slack) - lognrm
        low_margin = lognrm - (-low - slack)
        worst_up = min(worst_up, up_margin)
        worst_low = min(worst_low, low_margin)
        ok = ok and up_margin >= 0.0 and low_margin >= 0.0
        results.append({"tau": float(times[i]), "t": float(times[j]),
                        "log_transition_norm": lognrm,
                        "int_mu_upper": up, "int_mu_lower": -low,
                        "slack": slack,
                        "upper_margin": up_margin,
                        "lower_margin": low_margin})

    # state bounds for trajectories x(t) = Phi(t) v, ||v|| = 1
    p4_worst = math.inf
    n = tt.phis.shape[1]
    for j in {m // 4, m // 2, (3 * m) // 4, m - 1}:
        slack = pair_slack(0, j)
        for _ in range(3):
            v = rng.standard_normal(n)
            v = v / vector_norm(v, kind)
            xn = vector_norm(tt.phis[j] @ v, kind)
            logx = math.log(xn) if xn > 0.0 else -math.inf
            up_margin = (float(J_up[j]) + slack) - logx
            low_margin = logx - (-float(J_low[j]) - slack)
            p4_worst = min(p4_worst, up_margin, low_margin)
            ok = ok and up_margin >= 0.0 and low_margin >= 0.0
    return SandwichReport(passed=ok, n_pairs=len(results),
                          worst_upper_margin=worst_up,
                          worst_lower_margin=worst_low,
                          p4_worst_margin=p4_worst, slack=base_slack,
                          pairs=results, notes=notes)


@dataclass
class ConvergenceReport:
    """Tail behaviour of a trace: the final norm, a fitted exponential
    rate over the second half, and whether the final quarter of the norm
    curve is non-increasing (up to 1e-9 of its scale)."""
    final_norm: float
    fitted_rate: float
    tail_nonincreasing: bool
    fit_start: float
    max_norm: float

    def to_dict(self) -> dict:
        return {"final_norm": self.final_norm, "fitted_rate": self.fitted_rate,
                "tail_nonincreasing": self.tail_nonincreasing,
                "fit_start": self.fit_start, "max_norm": self.max_norm}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True,
                          default=json_default)


def convergence_report(trace: Trace) -> ConvergenceReport:
    m = len(trace.times)
    half = m // 2
    norms = np.maximum(trace.norms, 1e-300)
    rate = float(np.polyfit(trace.times[half:], np.log(norms[half:]), 1)[0])
    quarter = (3 * m) // 4
    tail = trace.norms[quarter:]
    atol = 1e-9 * (1.0 + float(trace.norms.max()))
    noninc = bool(len(tail) < 2 or np.diff(tail).max() <= atol)
    return ConvergenceReport(final_norm=float(trace.norms[-1]),
                             fitted_rate=rate, tail_nonincreasing=noninc,
                             fit_start=float(trace.times[half]),
                             max_norm=float(trace.norms.max()))


def write_trace_csv(trace: Trace, path) -> None:
    """Write a trace as CSV: ``t, x_1..x_n, norm_x, mu_cl, bound_upper,
    bound_lower`` with 17 significant digits (enough to round-trip
    float64 exactly)."""
    header = (["t"] + [f"x_{i + 1}" for i in range(trace.n)]
              + ["norm_x", "mu_cl", "bound_upper", "bound_lower"])

    def fmt(v: float) -> str:
        return f"{v:.17g}"

    close = False
    if hasattr(path, "write"):
        fh = path
    else:
        fh = open(path, "w", newline="")
        close = True
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(trace.times)):
            row = ([fmt(trace.times[i])]
                   + [fmt(v) for v in trace.states[i]]
                   + [fmt(trace.norms[i]), fmt(trace.mu_cl[i]),
                      fmt(trace.bound_upper[i]), fmt(trace.bound_lower[i])])
            w.writerow(row)
    finally:
        if close:
            fh.close()
