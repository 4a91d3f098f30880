"""Robustness and quality metrics for a placed closed loop."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import SingularX

__all__ = ['MetricBundle', 'eig_condition_numbers', 'condition_fro',
           'condition_2', 'accuracy', 'match_eigenvalues', 'bundle_metrics',
           'metrics_from_gain', 'DEFECTIVE_COND']

#: per-eigenvalue condition numbers above this are reported as +inf
DEFECTIVE_COND = 1e12


def _row_col_conditions(X):
    """``c_i = ||x_i|| ||y_i|| / |y_i^H x_i|`` with left vectors from ``inv(X)``."""
    try:
        Y = np.linalg.inv(X)
    except np.linalg.LinAlgError:
        return np.full(X.shape[1], np.inf)
    c = np.linalg.norm(X, axis=0) * np.linalg.norm(Y, axis=1)
    c[~np.isfinite(c) | (c > DEFECTIVE_COND)] = np.inf
    return c


def eig_condition_numbers(Aclosed):
    """Eigenvalue condition numbers of a diagonalisable matrix.

    Left eigenvectors are the rows of the inverse right eigenvector matrix,
    which keeps left/right pairing consistent. Near-defective eigenvalues
    (condition above ``DEFECTIVE_COND``) are reported as ``inf``.

    Returns
    -------
    c : ndarray
        One entry per eigenvalue, in the order of ``np.linalg.eig``.
    """
    _, X = np.linalg.eig(np.asarray(Aclosed))
    return _row_col_conditions(X)


def condition_fro(X):
    """``||X||_F ||X^{-1}||_F`` from the singular values of `X`."""
    sv = np.linalg.svd(np.asarray(X), compute_uv=False)
    if sv[-1] == 0 or sv[-1] <= len(sv) * np.finfo(float).eps * sv[0]:
        raise SingularX("X is numerically singular")
    return float(np.sqrt(np.sum(sv ** 2)) * np.sqrt(np.sum(sv ** -2.0)))


def condition_2(X):
    sv = np.linalg.svd(np.asarray(X), compute_uv=False)
    if sv[-1] == 0 or sv[-1] <= len(sv) * np.finfo(float).eps * sv[0]:
        raise SingularX("X is numerically singular")
    return float(sv[0] / sv[-1])


def match_eigenvalues(computed, targets):
    """Min-sum assignment between two equal-length complex vectors.

    Returns the matched distances, ordered like `targets`.
    """
    computed = np.asarray(computed, dtype=complex)
    targets = np.asarray(targets, dtype=complex)
    cost = np.abs(targets[:, None] - computed[None, :])
    rows, cols = linear_sum_assignment(cost)
    d = np.empty(len(targets))
    d[rows] = cost[rows, cols]
    return d, cols


def accuracy(sys, F, spec):
    """Largest matched distance between ``eig(A + B F)`` and the targets.

    Targets are expanded by multiplicity and matched by a min-sum
    assignment on ``|mu - lam|``; the maximum matched distance is returned.
    """
    F = np.asarray(F, dtype=float)
    if F.shape != (sys.m, sys.n):
        raise ValueError(f"F must have shape {(sys.m, sys.n)}, got {F.shape}")
    if not np.all(np.isfinite(F)):
        return float('inf')
    mu = np.linalg.eigvals(sys.A + sys.B @ F)
    d, _ = match_eigenvalues(mu, spec.expanded())
    return float(d.max())


@dataclass(frozen=True)
class MetricBundle:
    kappa_fro: float
    kappa_2: float
    c_inf: float
    c_per_eig: tuple
    accuracy: float
    gain_fro: float
    flags: tuple = field(default=())

    def as_dict(self):
        return {"kappa_fro": self.kappa_fro, "kappa_2": self.kappa_2,
                "c_inf": self.c_inf, "c_per_eig": list(self.c_per_eig),
                "accuracy": self.accuracy, "gain_fro": self.gain_fro,
                "flags": list(self.flags)}

    def chain_ok(self, rtol=1e-9):
        """``c_inf <= kappa_2 <= kappa_fro`` and ``kappa_fro >= n``."""
        n = len(self.c_per_eig)
        slack = 1 + rtol
        return (self.c_inf <= self.kappa_2 * slack
                and self.kappa_2 <= self.kappa_fro * slack
                and self.kappa_fro * slack >= n)


def bundle_metrics(sys, cand, spec):
    """All metrics for a candidate, from its unit-column eigenvector matrix.

    Singular `X` or near-defective eigenvalues give ``inf`` entries and a
    flag instead of an exception.
    """
    X = cand.X
    flags = []
    try:
        kf = condition_fro(X)
        k2 = condition_2(X)
    except SingularX:
        kf = k2 = float('inf')
        flags.append("singular_x")
    c = _row_col_conditions(X)
    if np.any(np.isinf(c)):
        flags.append("defective")
    if any(k > 1 for k in spec.multiplicities):
        flags.append("repeated_eigenvalues")
    return MetricBundle(
        kappa_fro=kf, kappa_2=k2, c_inf=float(np.max(c)),
        c_per_eig=tuple(float(x) for x in c),
        accuracy=accuracy(sys, cand.F, spec),
        gain_fro=float(np.linalg.norm(cand.F)),
        flags=tuple(flags))


def metrics_from_gain(sys, F, spec):
    """Metrics for an externally produced gain.

    The eigenvector matrix is taken from ``eig(A + B F)`` with unit columns;
    it is only meaningful when the closed loop is non-defective.
    """
    from .moore import RealizedCandidate

    F = np.asarray(F, dtype=float)
    if F.shape != (sys.m, sys.n):
        raise ValueError(f"F must have shape {(sys.m, sys.n)}, got {F.shape}")
    if not np.all(np.isfinite(F)):
        inf = float('inf')
        return MetricBundle(inf, inf, inf, (inf,) * sys.n, inf, inf, ("nonfinite_gain",))
    mu, X = np.linalg.eig(sys.A + sys.B @ F)
    X = X / np.linalg.norm(X, axis=0)
    cand = RealizedCandidate(X, None, None, F, np.diag(mu))
    return bundle_metrics(sys, cand, spec)
