"""Integral conditions on the logarithmic norm, with honest verdicts.

Asymptotic properties of ``x' = M(t) x`` follow from the behaviour of
``J(t) = int_{t0}^{t} mu[M(s)] ds``: bounded above means stable,
``J -> -inf`` means asymptotically stable, a uniform negative slope means
uniform asymptotic stability, and ``int mu[-M] -> -inf`` forces every
solution to grow.  None of these limits can be decided by sampling a
finite horizon, so every check here returns an :class:`Evidence` value
with verdict ``supported``, ``refuted`` or ``inconclusive`` together with
the measured quantities that led to it.  The heuristics (tail tests,
doubling tests, ratio grids, window checks) are deliberately simple and
their thresholds live in :class:`Heuristics`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import EvalError
from .linalg import Weighted, lognorm
from .system import ControllerSpec, SystemSpec, closed_loop_function

__all__ = [
    "QuadResult",
    "integrate",
    "integrate_mu",
    "cumulative_integral",
    "Heuristics",
    "Evidence",
    "EvidenceReport",
    "check_A1",
    "check_A2_A4",
    "check_A3",
    "classify_stability",
    "VERDICT_ORDER",
    "norm_name",
]

# taxonomy, strongest first
VERDICT_ORDER = ("UAS", "AS", "US", "S", "UNSTABLE")

A1_MIN_HORIZON = 1e4  # improper integrals get at least this much horizon


def norm_name(kind) -> str:
    return "weighted" if isinstance(kind, Weighted) else str(kind)


def json_default(obj):
    """Make numpy scalars and arrays serializable in reports."""
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


@dataclass(frozen=True)
class QuadResult:
    """Outcome of an adaptive quadrature.

    ``converged=False`` means some subinterval hit the recursion depth cap
    before meeting its error share; the value is still the best estimate
    and ``est_error`` accounts for the unconverged remainder.
    """
    value: float
    est_error: float
    evals: int
    converged: bool


class _QuadState:
    __slots__ = ("evals", "error", "converged", "f", "max_depth")

    def __init__(self, f, max_depth):
        self.f = f
        self.max_depth = max_depth
        self.evals = 0
        self.error = 0.0
        self.converged = True

    def eval(self, x):
        self.evals += 1
        v = float(self.f(x))
        if not math.isfinite(v):
            raise ValueError(f"integrand returned a non-finite value at {x!r}")
        return v


def _adapt(st: _QuadState, a, fa, m, fm, b, fb, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = st.eval(lm)
    frm = st.eval(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    # Richardson: the refined estimate is in error by about delta / 15.
    # Below the rounding noise of the panel values no further refinement
    # can help, so accept there too.
    noise = 1e-15 * (abs(left) + abs(right))
    if depth >= st.max_depth:
        st.converged = False
        st.error += abs(delta) / 15.0
        return left + right + delta / 15.0
    if abs(delta) <= max(15.0 * tol, noise):
        st.error += abs(delta) / 15.0
        return left + right + delta / 15.0
    half = 0.5 * tol
    return (_adapt(st, a, fa, lm, flm, m, fm, left, half, depth + 1)
            + _adapt(st, m, fm, rm, frm, b, fb, right, half, depth + 1))


def integrate(f: Callable[[float], float], a: float, b: float,
              tol: float = 1e-8, max_depth: int = 40) -> QuadResult:
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]``.

    The absolute error target is ``tol``; acceptance of a panel uses the
    usual Richardson comparison ``|S(fine) - S(coarse)| <= 15 tol`` with
    the tolerance halved at each split.  Exact for polynomials of degree
    three or less.  Non-finite integrand values raise.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("integration bounds must be finite")
    if b < a:
        raise ValueError(f"integration bounds must satisfy a <= b, got [{a}, {b}]")
    if not (tol > 0.0):
        raise ValueError("tol must be positive")
    if a == b:
        return QuadResult(0.0, 0.0, 0, True)
    st = _QuadState(f, max_depth)
    fa = st.eval(a)
    m = 0.5 * (a + b)
    fm = st.eval(m)
    fb = st.eval(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    value = _adapt(st, a, fa, m, fm, b, fb, whole, tol, 0)
    return QuadResult(value, st.error, st.evals, st.converged)


def integrate_mu(F: Callable[[float], np.ndarray], kind, a: float, b: float,
                 tol: float = 1e-8) -> QuadResult:
    """``int_a^b mu[F(s)] ds`` for a matrix-valued function of time."""
    return integrate(lambda s: lognorm(F(s), kind), a, b, tol)


def cumulative_integral(f: Callable[[float], float], grid,
                        tol: float = 1e-9):
    """Integrate ``f`` cell by cell over an increasing grid.

    Returns ``(values, est_error, evals, converged)`` with
    ``values[k] = int_{grid[0]}^{grid[k]} f``; each cell is integrated to
    ``tol``, so the total estimated error is roughly ``tol * (len - 1)``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or (np.diff(grid) <= 0).any():
        raise ValueError("grid must be strictly increasing with >= 2 points")
    out = np.zeros(len(grid))
    err = 0.0
    evals = 0
    ok = True
    acc = 0.0
    for k in range(len(grid) - 1):
        q = integrate(f, grid[k], grid[k + 1], tol)
        acc += q.value
        out[k + 1] = acc
        err += q.est_error
        evals += q.evals
        ok = ok and q.converged
    return out, err, evals, ok


# ---------------------------------------------------------------------------
# evidence

@dataclass(frozen=True)
class Heuristics:
    """Thresholds for the sampled limit heuristics.

    tail_abs / tail_rel : a Cauchy tail ``I(T) - I(mid)`` below
        ``max(tail_abs, tail_rel * I(T))`` counts as converged.
    ratio_limit : a ratio must fall below this at the horizon to count as
        vanishing.
    per_decade / start_frac : geometric sampling of ratio tails.
    window_frac / window_points : uniform sampling of the trailing window.
    """
    tail_abs: float = 1e-6
    tail_rel: float = 0.01
    ratio_limit: float = 0.05
    per_decade: int = 64
    start_frac: float = 0.25
    window_frac: float = 0.2
    window_points: int = 129

    def tail_grid(self, t0: float, T: float) -> np.ndarray:
        """Geometric grid over the trailing span ``[t0 + f (T - t0), T]``,
        per_decade points per decade; falls back to uniform when the span
        crosses zero."""
        start = t0 + self.start_frac * (T - t0)
        if not (T > start):
            raise ValueError("horizon too short for a tail grid")
        if start > 0.0:
            decades = math.log10(T / start)
            npts = max(17, int(self.per_decade * decades) + 1)
            return np.geomspace(start, T, npts)
        return np.linspace(start, T, 65)

    def window_grid(self, t0: float, T: float) -> np.ndarray:
        start = T - self.window_frac * (T - t0)
        return np.linspace(start, T, self.window_points)


@dataclass(frozen=True)
class Evidence:
    """One checked condition: what was measured and what it suggests.

    ``verdict`` is 'supported', 'refuted' or 'inconclusive'.  A supported
    verdict is sampled evidence, not a proof; refuted means the data
    plainly contradicts the condition; anything murky stays inconclusive.
    """
    id: str
    verdict: str
    measured: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "verdict": self.verdict,
                "measured": dict(self.measured), "note": self.note}


def _downgrade(ev: Evidence, reason: str) -> Evidence:
    if ev.verdict == "inconclusive":
        return ev
    return Evidence(ev.id, "inconclusive", ev.measured,
                    (ev.note + "; " if ev.note else "") + reason)


def check_A1(spec: SystemSpec, T: float, quad_tol: float = 1e-8,
             heuristics: Heuristics | None = None, norm=None) -> Evidence:
    """Absolute integrability of the uncertainty's logarithmic norm:
    ``int_{t0}^{inf} |mu[Delta(s)]| ds < inf``.

    Checked by comparing the integral at the horizon against the integral
    at the midpoint (Cauchy tail).  ``Delta`` absent is trivially
    supported with integral zero.  Never refuted: a heavy tail on a
    finite horizon proves nothing either way.
    """
    h = heuristics or Heuristics()
    k = norm if norm is not None else spec.norm
    if spec.Delta is None:
        return Evidence("A1", "supported", {"I": 0.0},
                        "no uncertainty declared; integral is zero")
    D = spec.Delta.compiled()
    f = lambda s: abs(lognorm(D(s), k))
    tm = spec.t0 + 0.5 * (T - spec.t0)
    try:
        q1 = integrate(f, spec.t0, tm, quad_tol)
        q2 = integrate(f, tm, T, quad_tol)
    except EvalError as exc:
        return Evidence("A1", "inconclusive", {},
                        f"could not evaluate the uncertainty: {exc}")
    I_half, I = q1.value, q1.value + q2.value
    tail = I - I_half
    measured = {"I": I, "I_half": I_half, "tail": tail, "T": T,
                "quad_error": q1.est_error + q2.est_error}
    if not (q1.converged and q2.converged):
        return Evidence("A1", "inconclusive", measured,
                        "quadrature did not converge")
    if tail <= max(h.tail_abs, h.tail_rel * abs(I)):
        return Evidence("A1", "supported", measured,
                        f"tail beyond the midpoint is {tail:.3g}")
    return Evidence("A1", "inconclusive", measured,
                    f"tail {tail:.3g} has not settled by T={T:g}")


def _doubling_evidence(id_: str, f: Callable[[float], float], t0: float,
                       T: float, quad_tol: float, description: str) -> Evidence:
    # integrate cell by cell so endpoint singularities (sqrt-type plant
    # entries at t0) cannot exhaust the recursion depth of a single panel
    grid = np.linspace(t0, T, 129)
    try:
        J_vals, err, _, ok = cumulative_integral(f, grid, quad_tol / 128.0)
    except EvalError as exc:
        return Evidence(id_, "inconclusive", {}, f"could not evaluate: {exc}")
    J_half, J = float(J_vals[64]), float(J_vals[-1])
    tm = float(grid[64])
    slack = 4.0 * err + 1e-12 * (1.0 + abs(J))
    measured = {"J_half": J_half, "J": J, "t_mid": tm, "quad_error": err}
    if not ok:
        return Evidence(id_, "inconclusive", measured,
                        "quadrature did not converge")
    if J_half < 0.0 and J <= 2.0 * J_half + slack:
        return Evidence(id_, "supported", measured,
                        f"{description}: doubling the horizon at least "
                        f"doubles the decay ({J:.6g} <= 2 x {J_half:.6g})")
    if J_half >= 0.0 and J >= J_half - slack:
        return Evidence(id_, "refuted", measured,
                        f"{description}: the integral is not decreasing")
    return Evidence(id_, "inconclusive", measured,
                    f"{description}: decreasing, but too slowly for the "
                    "doubling test")


def check_A2_A4(spec: SystemSpec, ctrl: ControllerSpec | None, T: float,
                quad_tol: float = 1e-8, heuristics: Heuristics | None = None,
                norm=None):
    """The closed-loop decay assumptions.

    A2: ``mu[A + B K](t)`` is eventually negative; checked on a trailing
    window.  A4: ``int mu[A + B K] -> -inf``; checked by the doubling
    test.  Returns ``(a2, a4)``.
    """
    h = heuristics or Heuristics()
    k = norm if norm is not None else spec.norm
    cl = closed_loop_function(spec, ctrl)
    mu = lambda t: lognorm(cl(t), k)
    try:
        window = h.window_grid(spec.t0, T)
        vals = np.array([mu(float(t)) for t in window])
    except EvalError as exc:
        a2 = Evidence("A2", "inconclusive", {}, f"could not evaluate: {exc}")
    else:
        measured = {"sup_mu_window": float(vals.max()),
                    "inf_mu_window": float(vals.min()),
                    "window_start": float(window[0]), "T": T}
        if vals.max() < 0.0:
            a2 = Evidence("A2", "supported", measured,
                          "mu is negative on the trailing window")
        elif vals.min() > 0.0:
            a2 = Evidence("A2", "refuted", measured,
                          "mu is positive on the whole trailing window")
        else:
            a2 = Evidence("A2", "inconclusive", measured,
                          "mu changes sign on the trailing window")
    a4 = _doubling_evidence("A4", mu, spec.t0, T, quad_tol,
                            "int mu of the closed loop")
    return a2, a4


def check_A3(spec: SystemSpec, ctrl: ControllerSpec | None, T: float,
             heuristics: Heuristics | None = None, norm=None) -> Evidence:
    """The disturbance envelope is dominated by the closed-loop decay:
    ``omega_bound(t) / |mu[A + B K](t)| -> 0``.

    Sampled on a geometric tail grid; supported when the ratio decreases
    and ends below the threshold.  Trivially supported when no envelope
    is declared.
    """
    h = heuristics or Heuristics()
    k = norm if norm is not None else spec.norm
    if spec.omega_bound is None:
        return Evidence("A3", "supported", {"ratio_end": 0.0},
                        "no disturbance envelope declared; ratio is zero")
    from .expr import compile_expr
    wb = compile_expr(spec.omega_bound, ("t",))
    cl = closed_loop_function(spec, ctrl)
    try:
        grid = h.tail_grid(spec.t0, T)
        r = []
        for t in grid:
            w = wb(float(t))
            m = abs(lognorm(cl(float(t)), k))
            if m == 0.0:
                r.append(0.0 if w == 0.0 else float("inf"))
            else:
                r.append(w / m)
        r = np.asarray(r)
    except EvalError as exc:
        return Evidence("A3", "inconclusive", {}, f"could not evaluate: {exc}")
    measured = {"ratio_start": float(r[0]), "ratio_end": float(r[-1]), "T": T}
    if not np.isfinite(r).all():
        t_bad = float(grid[int(np.nonzero(~np.isfinite(r))[0][0])])
        return Evidence("A3", "inconclusive", measured,
                        f"mu vanishes at sample t={t_bad:g}")
    decreasing = bool((r[1:] <= r[:-1] * 1.05 + 1e-12).all())
    if decreasing and r[-1] < h.ratio_limit:
        return Evidence("A3", "supported", measured,
                        f"ratio decreases to {r[-1]:.3g} at T={T:g}")
    if r[-1] > 1.0 and bool((r[1:] >= r[:-1] * 0.95).all()):
        return Evidence("A3", "refuted", measured,
                        "ratio is large and not decreasing")
    return Evidence("A3", "inconclusive", measured,
                    "ratio neither settles below the threshold nor "
                    "clearly grows")


@dataclass(frozen=True)
class EvidenceReport:
    """Classification of a closed loop with the evidence that produced it.

    ``entries`` maps each taxonomy member (S, US, AS, UAS, UNSTABLE) to
    its Evidence; ``strongest`` is the strongest supported member in the
    order UAS > AS > US > S > UNSTABLE, or None when nothing is
    supported.  ``a1`` gates everything: when the uncertainty fails its
    integrability check the taxonomy verdicts are downgraded to
    inconclusive because the conditions no longer transfer to the
    perturbed system.
    """
    norm: str
    T: float
    a1: Evidence
    entries: dict
    strongest: str | None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "norm": self.norm,
            "T": self.T,
            "A1": self.a1.to_dict(),
            "entries": {k: v.to_dict() for k, v in self.entries.items()},
            "strongest": self.strongest,
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True,
                          default=json_default)


def classify_stability(spec: SystemSpec, ctrl: ControllerSpec | None = None,
                       T: float | None = None, quad_tol: float = 1e-8,
                       heuristics: Heuristics | None = None,
                       norm=None) -> EvidenceReport:
    """Assess the taxonomy for ``x' = [A + Delta] x + B K x``.

    The four stability members are judged from ``J(t) = int mu[A + B K]``
    (the uncertainty enters only through the A1 gate, since
    ``int mu[A + Delta + B K] <= J + int |mu[Delta]|``); the UNSTABLE
    member integrates ``mu[-(A + Delta + B K)]``, whose divergence forces
    every solution of the perturbed system to grow.  Deterministic: no
    randomness anywhere, so two runs produce identical reports.
    """
    h = heuristics or Heuristics()
    k = norm if norm is not None else spec.norm
    if T is None:
        T = spec.t0 + 10.0
    if not (T > spec.t0):
        raise ValueError(f"horizon T={T} must exceed t0={spec.t0}")

    a1 = check_A1(spec, max(T, spec.t0 + A1_MIN_HORIZON), quad_tol, h, norm=k)

    cl_up = closed_loop_function(spec, ctrl)
    cl_dn = closed_loop_function(spec, ctrl, include_delta=True, negate=True)
    mu_up = lambda t: lognorm(cl_up(t), k)
    mu_dn = lambda t: lognorm(cl_dn(t), k)

    grid = np.linspace(spec.t0, T, 257)
    entries = {}
    try:
        J, J_err, _, J_ok = cumulative_integral(mu_up, grid, quad_tol)
    except EvalError as exc:
        note = f"could not evaluate the closed loop: {exc}"
        for key in VERDICT_ORDER:
            entries[key] = Evidence(key, "inconclusive", {}, note)
        return EvidenceReport(norm_name(k), T, a1, entries, None, note)

    span = T - spec.t0
    widx = int(np.searchsorted(grid, T - h.window_frac * span))
    slack = max(4.0 * J_err, h.tail_abs)

    # S: J bounded above.  Window growth of the running sup.
    growth = float(J[widx:].max() - J[:widx + 1].max())
    m = {"J_end": float(J[-1]), "sup_J": float(J.max()),
         "window_growth": growth}
    if growth <= max(h.tail_abs, h.tail_rel * abs(J[-1])) + slack:
        entries["S"] = Evidence("S", "supported", m,
                                "sup of int mu stopped growing")
    elif growth >= 1.0:
        entries["S"] = Evidence("S", "refuted", m,
                                "int mu is still growing at the horizon")
    else:
        entries["S"] = Evidence("S", "inconclusive", m,
                                "sup of int mu has not settled")

    # US: mu <= 0 at every sampled time (sufficient for J(t) - J(tau)
    # bounded over all pairs).  A steadily growing drawup of J refutes.
    mu_grid = np.array([mu_up(float(t)) for t in grid])
    sup_mu = float(mu_grid.max())
    drawup = J - np.minimum.accumulate(J)
    dgrowth = float(drawup[widx:].max() - drawup[:widx + 1].max())
    m = {"sup_mu": sup_mu, "max_drawup": float(drawup.max()),
         "drawup_window_growth": dgrowth}
    if sup_mu <= 1e-12:
        entries["US"] = Evidence("US", "supported", m,
                                 "mu is nonpositive at every sampled time")
    elif dgrowth >= 1.0:
        entries["US"] = Evidence("US", "refuted", m,
                                 "pairwise growth of int mu keeps increasing")
    else:
        entries["US"] = Evidence("US", "inconclusive", m,
                                 "mu is positive somewhere; pairwise growth "
                                 "has not clearly diverged either")

    # AS: J -> -inf (doubling test on the already-computed cumulative J)
    midx = int(np.searchsorted(grid, spec.t0 + 0.5 * span))
    J_half, J_end = float(J[midx]), float(J[-1])
    m = {"J_half": J_half, "J": J_end, "t_mid": float(grid[midx])}
    if not J_ok:
        entries["AS"] = Evidence("AS", "inconclusive", m,
                                 "quadrature did not converge")
    elif J_half < 0.0 and J_end <= 2.0 * J_half + slack:
        entries["AS"] = Evidence("AS", "supported", m,
                                 "int mu diverges to -inf (doubling test)")
    elif J_half >= 0.0 and J_end >= J_half - slack:
        entries["AS"] = Evidence("AS", "refuted", m,
                                 "int mu is not decreasing")
    else:
        entries["AS"] = Evidence("AS", "inconclusive", m,
                                 "int mu decreasing, but too slowly for "
                                 "the doubling test")

    # UAS: mu <= -alpha at every sampled time for the best alpha > 0;
    # that pins a uniform exponential rate, so report alpha = -sup mu
    alpha = -sup_mu
    m = {"alpha": float(alpha), "sup_mu": sup_mu}
    if alpha > 0.0:
        entries["UAS"] = Evidence("UAS", "supported", m,
                                  f"uniform decay rate alpha = {alpha:.6g}")
    elif entries["AS"].verdict == "refuted":
        entries["UAS"] = Evidence("UAS", "refuted", m,
                                  "int mu is not even decreasing")
    else:
        entries["UAS"] = Evidence("UAS", "inconclusive", m,
                                  "no uniform negative bound for mu on "
                                  "the sampled grid")

    # UNSTABLE: int mu[-(A + Delta + B K)] -> -inf
    entries["UNSTABLE"] = _doubling_evidence(
        "UNSTABLE", mu_dn, spec.t0, T, quad_tol,
        "int mu of the negated perturbed loop")

    note = ""
    if a1.verdict != "supported":
        note = ("uncertainty integrability (A1) is not established; "
                "taxonomy verdicts are downgraded to inconclusive")
        entries = {key: _downgrade(ev, "A1 not supported")
                   for key, ev in entries.items()}

    strongest = None
    for key in VERDICT_ORDER:
        if entries[key].verdict == "supported":
            strongest = key
            break
    return EvidenceReport(norm_name(k), float(T), a1, entries, strongest, note)
