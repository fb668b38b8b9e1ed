#!/usr/bin/env python3
"""Stability taxonomy with numerical evidence instead of a bare label.

The classifier evaluates S / US / AS / UAS / UNSTABLE separately, each
with a supported / refuted / inconclusive verdict and the measured
quantity behind it, then reports the strongest supported certificate.
A gate on the uncertainty integral (A1) downgrades everything when the
perturbation does not settle.
"""

import numpy as np

from lognorm_control.analysis import classify_stability
from lognorm_control.expr import parse_matrix
from lognorm_control.presets import example_system
from lognorm_control.system import SystemSpec


def show(title, rep):
    print(f"\n{title}")
    print(f"  A1 gate: {rep.a1.verdict} ({rep.a1.note})")
    for name, e in rep.entries.items():
        extra = ""
        if name == "UAS" and "alpha" in e.measured:
            extra = f"  alpha={e.measured['alpha']:.4f}"
        print(f"  {name:>8}: {e.verdict}{extra}")
    print(f"  strongest: {rep.strongest}")


def plain(rows):
    return SystemSpec(n=2, A=parse_matrix(rows, ("t",)), B=np.eye(2),
                      t0=0.0, x0=np.array([1.0, 1.0]))


# 1. the bundled time-varying example with its adaptive controller
spec, ctrl = example_system()
show("bundled example, closed loop:", classify_stability(spec, ctrl, T=10.0))

# 2. a rotation: norms are conserved, so stable but not asymptotically
show("pure rotation x' = [[0,1],[-1,0]] x:",
     classify_stability(plain([["0", "1"], ["0-1", "0"]]), None, T=10.0))

# 3. growth in every direction
show("x' = x (componentwise):",
     classify_stability(plain([["1", "0"], ["0", "1"]]), None, T=10.0))

# 4. non-settling uncertainty trips the gate; no verdict survives
gated = SystemSpec(n=2, A=parse_matrix([["0-1", "0"], ["0", "0-1"]], ("t",)),
                   B=np.eye(2), t0=0.0, x0=np.array([1.0, 1.0]),
                   Delta=parse_matrix([["1", "0"], ["0", "0"]], ("t",)))
show("stable plant + constant uncertainty (A1 fails):",
     classify_stability(gated, None, T=10.0))
