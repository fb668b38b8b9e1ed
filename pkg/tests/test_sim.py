"""Integrator accuracy, transition matrices and the two-sided norm bounds."""

import csv
import math

import numpy as np
import pytest

import oracles
from lognorm_control.analysis import integrate
from lognorm_control.expr import parse_matrix
from lognorm_control.linalg import lognorm
from lognorm_control.sim import (
    StiffnessError,
    convergence_report,
    fundamental_matrix,
    simulate,
    verify_sandwich,
    write_trace_csv,
)
from lognorm_control.system import SystemSpec, closed_loop_function


def make_spec(A, x0=(1.0, 0.0), **over):
    kw = dict(n=2, A=parse_matrix(A, ("t",)), B=np.eye(2), t0=0.0,
              x0=np.array(x0, dtype=float))
    kw.update(over)
    return SystemSpec(**kw)


DECAY = [["0-1", "0"], ["0", "0-1"]]
WOBBLE = [["0-1", "sin(t)"], ["cos(t)", "0-2"]]


def wobble_rhs(t, x):
    return np.array([[-1.0, math.sin(t)], [math.cos(t), -2.0]]) @ x


# ---------------------------------------------------------------------------
# the initial value solver

def test_simulate_exponential_decay_golden():
    tr = simulate(make_spec(DECAY), None, T=1.0, tol=1e-10)
    assert tr.states[-1][0] == pytest.approx(math.exp(-1.0), abs=1e-10)
    assert tr.states[-1][1] == 0.0
    assert tr.times[0] == 0.0 and tr.times[-1] == 1.0
    assert len(tr.times) == 1001
    assert tr.norm_kind == "two"


def test_simulate_matches_rk4_oracle():
    s = make_spec(WOBBLE, x0=(1.0, -1.0))
    _, ref = oracles.rk4_solve(wobble_rhs, 0.0, np.array([1.0, -1.0]),
                               5.0, 200_000)
    tr = simulate(s, None, T=5.0, tol=1e-10, n_out=2)
    assert np.linalg.norm(tr.states[-1] - ref[-1]) < 1e-9


def test_integrator_order_at_least_four():
    # cap h_max so the error is step-limited, then halve it twice
    s = make_spec(WOBBLE, x0=(1.0, -1.0))
    _, ref = oracles.rk4_solve(wobble_rhs, 0.0, np.array([1.0, -1.0]),
                               5.0, 200_000)
    errs = []
    for h in (0.2, 0.1, 0.05):
        tr = simulate(s, None, T=5.0, tol=1e6, h_min=1e-9, h_max=h, n_out=2)
        errs.append(np.linalg.norm(tr.states[-1] - ref[-1]))
    assert errs[0] / errs[1] > 10.0
    assert errs[1] / errs[2] > 10.0
    assert errs[0] / errs[2] > 256.0  # order >= 4 over a quartered step


def test_dense_output_accuracy():
    s = make_spec(WOBBLE, x0=(1.0, -1.0))
    n = 50_000
    times, ref = oracles.rk4_solve(wobble_rhs, 0.0, np.array([1.0, -1.0]),
                                   5.0, n)
    tr = simulate(s, None, grid=times[:: n // 100], tol=1e-10)
    worst = np.max(np.abs(tr.states - ref[:: n // 100]))
    assert worst < 1e-8


def test_output_grid_is_honoured():
    g = np.linspace(0.0, 1.0, 7)
    tr = simulate(make_spec(DECAY), None, grid=g)
    assert np.array_equal(tr.times, g)
    # a grid that skips the start is allowed; states still line up
    tr2 = simulate(make_spec(DECAY), None, grid=[0.5, 1.0], tol=1e-10)
    assert tr2.states[0][0] == pytest.approx(math.exp(-0.5), abs=1e-9)


def test_simulate_validations():
    s = make_spec(DECAY)
    with pytest.raises(ValueError, match="must exceed t0"):
        simulate(s, None, T=0.0)
    with pytest.raises(ValueError, match="n_out"):
        simulate(s, None, T=1.0, n_out=1)
    with pytest.raises(ValueError, match="h_min"):
        simulate(s, None, T=1.0, h_min=0.5, h_max=0.1)
    with pytest.raises(ValueError, match="strictly increasing"):
        simulate(s, None, grid=[0.0, 1.0, 0.5])


def test_simulate_is_bitwise_reproducible(example):
    spec, ctrl = example
    a = simulate(spec, ctrl, T=10.0)
    b = simulate(spec, ctrl, T=10.0)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.bound_upper, b.bound_upper)
    assert np.array_equal(a.bound_lower, b.bound_lower)
    assert a.n_rejected == b.n_rejected


def test_mu_column_matches_direct_evaluation(example):
    spec, ctrl = example
    tr = simulate(spec, ctrl, T=10.0)
    cl = closed_loop_function(spec, ctrl, include_delta=True)
    for k in (0, 137, 500, 1000):
        assert tr.mu_cl[k] == lognorm(cl(float(tr.times[k])), spec.norm)


def test_homogeneous_bounds_contain_norm():
    # no disturbance: ||x0|| e^{J-} <= ||x(t)|| <= ||x0|| e^{J+}
    tr = simulate(make_spec(WOBBLE, x0=(1.0, -1.0)), None, T=5.0, tol=1e-10)
    assert np.all(tr.norms <= tr.bound_upper * (1.0 + 1e-8) + 1e-12)
    assert np.all(tr.norms >= tr.bound_lower * (1.0 - 1e-8) - 1e-12)
    assert tr.bound_upper[0] == tr.norms[0]


def test_constant_coefficient_bounds_are_tight():
    tr = simulate(make_spec(DECAY), None, T=2.0, tol=1e-10)
    decay = np.exp(-tr.times)
    assert np.max(np.abs(tr.bound_upper - decay)) < 1e-8
    assert np.max(np.abs(tr.bound_lower - decay)) < 1e-8


def test_example_final_norm(example):
    spec, ctrl = example
    tr = simulate(spec, ctrl, T=10.0, tol=1e-8)
    assert np.linalg.norm(tr.states[-1]) == pytest.approx(0.05614105,
                                                          abs=1e-6)


def test_stiffness_abort_reports_location(example):
    spec, ctrl = example
    with pytest.raises(StiffnessError, match="consecutive attempts near t=") \
            as exc:
        simulate(spec, ctrl, T=50.0, tol=1e-8, h_min=1e-3)
    assert "mu" in str(exc.value)
    assert exc.value.h == 1e-3
    assert exc.value.mu is not None and exc.value.mu < -100.0


# ---------------------------------------------------------------------------
# convergence summaries

def test_convergence_report_pure_decay():
    tr = simulate(make_spec(DECAY), None, T=5.0, tol=1e-10)
    cr = convergence_report(tr)
    assert cr.fitted_rate == pytest.approx(-1.0, abs=0.05)
    assert cr.tail_nonincreasing
    assert cr.final_norm == pytest.approx(math.exp(-5.0), rel=1e-6)
    assert cr.max_norm == 1.0


def test_convergence_report_constant_state():
    tr = simulate(make_spec([["0", "0"], ["0", "0"]]), None, T=5.0)
    cr = convergence_report(tr)
    assert cr.fitted_rate == pytest.approx(0.0, abs=1e-9)
    assert cr.tail_nonincreasing


# ---------------------------------------------------------------------------
# transition matrices and the two-sided estimate

def test_fundamental_matrix_diagonal_golden():
    tt = fundamental_matrix(lambda t: np.diag([-1.0, -2.0]), 0.0, 2.0,
                            tol=1e-10)
    assert np.allclose(tt.phis[0], np.eye(2), atol=0.0)
    P = tt.phis[-1]
    assert P[0, 0] == pytest.approx(math.exp(-2.0), abs=1e-8)
    assert P[1, 1] == pytest.approx(math.exp(-4.0), abs=1e-8)
    assert P[0, 1] == 0.0 and P[1, 0] == 0.0


def test_fundamental_matrix_rotation():
    F = parse_matrix([["0", "1"], ["0-1", "0"]], ("t",))
    tt = fundamental_matrix(F, 0.0, math.pi / 2.0, tol=1e-10)
    assert np.allclose(tt.phis[-1], [[0.0, 1.0], [-1.0, 0.0]], atol=1e-8)
    for P in tt.phis:
        assert abs(np.linalg.norm(P, 2) - 1.0) < 1e-8


def test_sandwich_constant_diagonal():
    F = lambda t: np.diag([-1.0, -2.0])
    rep = verify_sandwich(fundamental_matrix(F, 0.0, 2.0, tol=1e-10), F,
                          "two", phi_tol=1e-10)
    assert rep.passed
    assert rep.n_pairs == 20
    # slowest mode saturates the upper estimate
    assert 0.0 <= rep.worst_upper_margin < 1e-5
    assert rep.worst_lower_margin > 0.0
    assert rep.notes == []


def test_sandwich_rotation_is_tight_both_sides():
    F = lambda t: np.array([[0.0, 1.0], [-1.0, 0.0]])
    rep = verify_sandwich(fundamental_matrix(F, 0.0, 5.0, tol=1e-10), F,
                          "two", phi_tol=1e-10)
    assert rep.passed
    assert rep.worst_upper_margin < 1e-4
    assert rep.worst_lower_margin < 1e-4


def test_sandwich_example_closed_loop(example):
    spec, ctrl = example
    cl = closed_loop_function(spec, ctrl, include_delta=True)
    tt = fundamental_matrix(cl, 0.0, 2.0, tol=1e-10)
    rep = verify_sandwich(tt, cl, spec.norm, phi_tol=1e-10)
    assert rep.passed
    assert rep.worst_upper_margin > 0.0
    assert rep.p4_worst_margin > 0.0


def test_sandwich_random_ltv(rng):
    # smooth sinusoidal 3x3 systems; the estimate must hold in every norm
    for kind in ("one", "two", "inf"):
        for _ in range(4):
            C = rng.uniform(-0.6, 0.6, size=(3, 3, 3))
            w = rng.uniform(0.5, 3.0, size=2)

            def F(t, C=C, w=w):
                return C[0] + C[1] * math.sin(w[0] * t) \
                    + C[2] * math.cos(w[1] * t)

            tt = fundamental_matrix(F, 0.0, 5.0, tol=1e-8)
            rep = verify_sandwich(tt, F, kind, phi_tol=1e-8)
            assert rep.passed, (kind, rep.worst_upper_margin,
                                rep.worst_lower_margin)


def test_sandwich_pair_records(rng):
    F = lambda t: np.diag([-1.0, -2.0])
    rep = verify_sandwich(fundamental_matrix(F, 0.0, 2.0), F, "two")
    assert len(rep.pairs) == 20
    keys = {"t", "tau", "log_transition_norm", "int_mu_upper",
            "int_mu_lower", "upper_margin", "lower_margin", "slack"}
    for p in rep.pairs:
        assert set(p.keys()) == keys
        assert p["tau"] < p["t"]
        assert p["slack"] >= rep.slack


def test_liouville_identity(rng):
    # log|det Phi(T)| equals the integral of the trace
    C = rng.uniform(-0.5, 0.5, size=(3, 3, 3))

    def F(t):
        return C[0] + C[1] * math.sin(t) + C[2] * math.cos(2.0 * t)

    tt = fundamental_matrix(F, 0.0, 5.0, tol=1e-10)
    sign, logdet = np.linalg.slogdet(tt.phis[-1])
    q = integrate(lambda t: float(np.trace(F(t))), 0.0, 5.0, tol=1e-12)
    assert sign == 1.0
    assert abs(logdet - q.value) < 1e-6


# ---------------------------------------------------------------------------
# traces on disk

def test_trace_csv_round_trip(tmp_path):
    tr = simulate(make_spec(WOBBLE, x0=(1.0, -1.0)), None, T=1.0, n_out=9)
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x_1", "x_2", "norm_x", "mu_cl",
                       "bound_upper", "bound_lower"]
    assert len(rows) == 10
    cols = [tr.times, tr.states[:, 0], tr.states[:, 1], tr.norms,
            tr.mu_cl, tr.bound_upper, tr.bound_lower]
    for i, row in enumerate(rows[1:]):
        for j, cell in enumerate(row):
            assert float(cell) == cols[j][i]  # 17 digits round trip
