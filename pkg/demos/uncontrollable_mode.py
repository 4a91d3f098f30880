"""Placement with an uncontrollable mode.

Builds a three-state system whose last mode cannot be moved by feedback,
checks that the targets must contain it, and shows that it survives in the
closed loop.

Run with ``python3 demos/uncontrollable_mode.py``.
"""

import warnings

import numpy as np

from moorepp import assess_feasibility, solve
from moorepp.bench import gen_uncontrollable
from moorepp.errors import NumericalRankAmbiguity

# the uncontrollable mode sits exactly at the rank threshold
warnings.simplefilter("ignore", NumericalRankAmbiguity)

good = gen_uncontrollable(1)[0]
bad = gen_uncontrollable(1, include_mode=False)[0]
lam_u = good.meta["lambda_u"]
print(f"uncontrollable eigenvalue of A: {lam_u}")

rep = assess_feasibility(bad.system, bad.spectrum)
print("targets without it feasible?", rep.feasible, "-", rep.reasons[0])

rep = assess_feasibility(good.system, good.spectrum)
print("targets with it feasible?", rep.feasible, "; kernel dimensions", rep.nullspace_dims)

out = solve(good.system, good.spectrum)
mu = np.linalg.eigvals(good.system.A + good.system.B @ out.best.F)
print("closed-loop eigenvalues:", np.sort_complex(mu).round(8))
