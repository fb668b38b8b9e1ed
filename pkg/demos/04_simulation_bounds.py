#!/usr/bin/env python3
"""Closed-loop simulation with running two-sided norm envelopes.

The integrator carries exp(int mu) bounds alongside the state, so each
output row has ||x0|| e^{J-} <= ||x(t)|| <= ||x0|| e^{J+} for the
homogeneous part.  With the bundled disturbance the state still decays
to ~0.056 by t=10 while the disturbance-free envelope collapses much
faster - the gap is the price of the forcing term.
"""

from dataclasses import replace

import numpy as np

from lognorm_control.presets import example_system
from lognorm_control.sim import convergence_report, simulate, write_trace_csv

spec, ctrl = example_system()
trace = simulate(spec, ctrl, T=10.0, tol=1e-8)

print("bundled example, x0 = (-5, 2), T = 10")
print(f"{'t':>5} {'||x||':>12} {'mu_cl':>12} {'hom. upper':>12}")
for k in range(0, len(trace.times), 125):
    print(f"{trace.times[k]:5.2f} {trace.norms[k]:12.6f} "
          f"{trace.mu_cl[k]:12.2f} {trace.bound_upper[k]:12.4e}")

rep = convergence_report(trace)
print(f"\nfinal norm        : {rep.final_norm:.6f}")
print(f"tail nonincreasing: {rep.tail_nonincreasing}")
print(f"fitted tail rate  : {rep.fitted_rate:.4f} per unit time")
print(f"rejected steps    : {trace.n_rejected} of {len(trace.step_sizes)}")

# without the forcing term the bounds are an actual sandwich on ||x||
quiet_spec = replace(spec, omega=None, omega_bound=None)
quiet = simulate(quiet_spec, ctrl, T=2.0, tol=1e-10)
hom = np.all((quiet.norms <= quiet.bound_upper * (1 + 1e-8)) &
             (quiet.norms >= quiet.bound_lower * (1 - 1e-8) - 1e-300))
print(f"\nhomogeneous run: bounds contain ||x(t)|| on [0, 2]: {bool(hom)}")

write_trace_csv(trace, "example_trace.csv")
print("full trace written to example_trace.csv "
      "(t, x_1, x_2, norm_x, mu_cl, bound_upper, bound_lower)")
