"""Trading conditioning for gain with the weighted objective.

Sweeps the weight ``alpha`` of ``alpha * kappa_fro + (1 - alpha) * ||F||_fro``
on one random 10-state system. Small weights buy a smaller gain at the
price of a worse-conditioned eigenvector matrix.

Run with ``python3 demos/gain_tradeoff.py``.
"""

from moorepp import ObjectiveSpec, SearchConfig, bundle_metrics, solve
from moorepp.bench import gen_survey2
from moorepp.optimizer import ObjectiveKind

case = gen_survey2(1, n=10, m=3, rng_seed=7)[0]
cfg = SearchConfig(max_restarts=6)
print(f"{'alpha':>8} {'kappa_fro':>12} {'||F||_fro':>10}")
for alpha in (1.0, 0.1, 0.01, 0.001, 0.0):
    obj = ObjectiveSpec(ObjectiveKind.F3_WEIGHTED, alpha)
    out = solve(case.system, case.spectrum, obj, cfg)
    m = bundle_metrics(case.system, out.best, case.spectrum)
    print(f"{alpha:>8g} {m.kappa_fro:>12.4g} {m.gain_fro:>10.4g}")
