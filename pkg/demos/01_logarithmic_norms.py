#!/usr/bin/env python3
"""Logarithmic norms of constant matrices in the one, two and inf norms.

The logarithmic norm mu[A] can be negative, which is what makes it
useful: a negative value certifies exponential decay of ||e^{tA}||.
This script evaluates the three classic 2x2 examples, shows the
limit-definition cross-check, and recovers decay for a matrix whose
Euclidean mu is positive by switching to a Lyapunov-weighted norm.
"""

import numpy as np

from lognorm_control.linalg import (
    Weighted,
    induced_norm,
    lognorm,
    lognorm_limit,
    lyapunov_solve,
    symmetric_eigen_max,
)

KINDS = ("one", "two", "inf")

matrices = {
    "A1": np.array([[-11.0, 10.0], [2.0, -3.0]]),
    "A2": np.array([[-11.0, 2.0], [10.0, -3.0]]),   # transpose of A1
    "A3": np.array([[-1.0, 3.0], [-3.0, -2.0]]),
}

print("mu in the three standard norms")
print(f"{'':>4} {'mu_1':>10} {'mu_2':>10} {'mu_inf':>10}")
for name, M in matrices.items():
    vals = [lognorm(M, kind) for kind in KINDS]
    print(f"{name:>4} " + " ".join(f"{v:10.6f}" for v in vals))

# transposing swaps the one- and inf-norm values but fixes mu_2
print("\nnote: A2 = A1^T swaps mu_1 and mu_inf and leaves mu_2 alone")

# the limit definition (||I + hA|| - 1)/h converges to mu as h -> 0
A = matrices["A3"]
print("\nlimit definition at shrinking h (two norm, A3):")
for h in (1e-2, 1e-4, 1e-7):
    print(f"  h={h:g}: {lognorm_limit(A, 'two', h=h): .10f}")
print(f"  exact : {lognorm(A, 'two'): .10f}")

# a Hurwitz matrix whose Euclidean mu is positive
B = np.array([[-1.0, 4.0], [0.0, -2.0]])
print(f"\nB is Hurwitz but mu_2[B] = {lognorm(B, 'two'):.4f} > 0")
H = lyapunov_solve(B)  # B^T H + H B = -2 I
muH = lognorm(B, Weighted(H))
print(f"with H from the Lyapunov equation, mu_H[B] = {muH:.6f}")
print(f"which equals -1/lambda_max(H) = {-1.0 / symmetric_eigen_max(H):.6f}")
print(f"(and the weighted induced norm of I is "
      f"{induced_norm(np.eye(2), Weighted(H)):.1f}, as it must be)")
