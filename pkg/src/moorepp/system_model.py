"""Problem data: the LTI pair, the target spectrum and structural feasibility.

Systems are stored on disk as JSON objects::

    {"A": [[...], ...], "B": [[...], ...],
     "poles": [{"re": -1.0, "im": 2.0, "mult": 1}, ...]}

with row-major matrices. Every complex pole must be listed together with its
conjugate.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DimensionMismatch, MalformedFile, MultiplicityOverflow,
                     NotSelfConjugate, RankDeficientB)

__all__ = ['LtiSystem', 'SpectrumSpec', 'FeasibilityReport',
           'validate_system', 'canonicalize_spectrum', 'assess_feasibility',
           'rank_tolerance', 'numerical_rank', 'load_system_file',
           'parse_system', 'poles_to_json', 'CONJ_TOL']

EPS = np.finfo(float).eps

#: relative tolerance used to pair a complex value with its conjugate
CONJ_TOL = 1e-9


def rank_tolerance(sv, shape):
    """Default singular-value threshold ``max(shape) * eps * sigma_max``."""
    smax = sv[0] if len(sv) else 0.0
    return max(shape) * EPS * smax


def numerical_rank(M, tol=None):
    """Rank of `M` by singular-value thresholding."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if tol is None:
        tol = rank_tolerance(sv, M.shape)
    return int(np.sum(sv > tol))


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """The pair ``(A, B)`` of ``dx/dt = A x + B u``.

    Build instances with :func:`validate_system`; the constructor does not
    check anything.
    """
    A: np.ndarray
    B: np.ndarray

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def scale(self):
        """``max(1, ||A||_F + ||B||_F)``, the reference size for tolerances."""
        return max(1.0, np.linalg.norm(self.A) + np.linalg.norm(self.B))


def validate_system(A, B):
    """Check shapes and the column rank of `B` and return an `LtiSystem`.

    Parameters
    ----------
    A : (n, n) array_like
    B : (n, m) array_like
        A 1-D `B` is taken as a single input column.

    Raises
    ------
    DimensionMismatch
        `A` is not square, row counts differ, or ``m > n``.
    RankDeficientB
        `B` does not have full column rank.
    """
    A = np.array(A, dtype=float)
    B = np.array(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise DimensionMismatch(f"A must be a non-empty square matrix, got shape {A.shape}")
    if B.ndim != 2 or B.shape[0] != A.shape[0]:
        raise DimensionMismatch(
            f"B must have {A.shape[0]} rows, got shape {B.shape}")
    n, m = B.shape
    if not 1 <= m <= n:
        raise DimensionMismatch(f"need 1 <= m <= n, got n={n}, m={m}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise DimensionMismatch("A and B must be finite")
    r = numerical_rank(B, tol=None)
    if r < m:
        raise RankDeficientB(f"B has column rank {r} < m = {m}")
    A.setflags(write=False)
    B.setflags(write=False)
    return LtiSystem(A, B)


@dataclass(frozen=True)
class SpectrumSpec:
    """Self-conjugate target spectrum in canonical order.

    The first ``2 * pair_count`` entries of `values` are complex, arranged as
    ``(lam, conj(lam))`` with ``Im(lam) > 0``; the rest are real and ascending.
    """
    values: tuple
    multiplicities: tuple
    pair_count: int

    @property
    def nu(self):
        return len(self.values)

    @property
    def n(self):
        return sum(self.multiplicities)

    def is_complex(self, i):
        return i < 2 * self.pair_count

    def free_indices(self):
        """Indices whose parameter blocks are stored (first of each pair, reals)."""
        return list(range(0, 2 * self.pair_count, 2)) + \
            list(range(2 * self.pair_count, self.nu))

    def expanded(self):
        """Values repeated by multiplicity, as a complex array of length n."""
        return np.repeat(np.array(self.values, dtype=complex),
                         self.multiplicities)

    def column_slices(self):
        """Column range of each eigenvalue's block in X."""
        offsets = np.concatenate([[0], np.cumsum(self.multiplicities)])
        return [slice(int(offsets[i]), int(offsets[i + 1]))
                for i in range(self.nu)]


def _close(a, b):
    return abs(a - b) <= CONJ_TOL * max(1.0, abs(a))


def canonicalize_spectrum(values, multiplicities=None, n=None):
    """Put a self-conjugate multiset of eigenvalues in canonical order.

    Repeated entries are merged into multiplicities, so ``[-1, -1]`` and
    ``values=[-1], multiplicities=[2]`` give the same result. Values whose
    imaginary part is below the conjugacy tolerance are treated as real.

    Raises
    ------
    NotSelfConjugate
        A complex value has no conjugate partner of equal multiplicity.
    MultiplicityOverflow
        `n` is given and the multiplicities do not sum to it.
    """
    vals = [complex(v) for v in np.atleast_1d(values)]
    if multiplicities is None:
        mults = [1] * len(vals)
    else:
        mults = [int(k) for k in multiplicities]
    if len(mults) != len(vals):
        raise MultiplicityOverflow("values and multiplicities differ in length")
    if any(k <= 0 for k in mults):
        raise MultiplicityOverflow("multiplicities must be positive")

    # snap near-real values, then merge duplicates
    snapped = []
    for v in vals:
        if abs(v.imag) <= CONJ_TOL * max(1.0, abs(v)):
            v = complex(v.real, 0.0)
        snapped.append(v)
    # sorting first makes the representative of a merged cluster independent
    # of the input order
    merged_vals, merged_mult = [], []
    for v, k in sorted(zip(snapped, mults), key=lambda p: (p[0].real, p[0].imag, p[1])):
        for j, u in enumerate(merged_vals):
            if _close(u, v):
                merged_mult[j] += k
                break
        else:
            merged_vals.append(v)
            merged_mult.append(k)

    reals, uppers, lowers = [], [], []
    for v, k in zip(merged_vals, merged_mult):
        if v.imag == 0.0:
            reals.append((v.real, k))
        elif v.imag > 0:
            uppers.append((v, k))
        else:
            lowers.append((v, k))

    pairs = []
    unused = list(lowers)
    for v, k in uppers:
        for j, (u, ku) in enumerate(unused):
            if _close(v, u.conjugate()) and k == ku:
                pairs.append((v, k))
                del unused[j]
                break
        else:
            raise NotSelfConjugate(f"{v} has no conjugate partner of multiplicity {k}")
    if unused:
        raise NotSelfConjugate(f"{unused[0][0]} has no conjugate partner")

    pairs.sort(key=lambda p: (p[0].real, abs(p[0].imag)))
    reals.sort(key=lambda p: p[0])
    out_vals, out_mult = [], []
    for v, k in pairs:
        out_vals += [v, v.conjugate()]
        out_mult += [k, k]
    for r, k in reals:
        out_vals.append(complex(r, 0.0))
        out_mult.append(k)

    total = sum(out_mult)
    if n is not None and total != n:
        raise MultiplicityOverflow(f"multiplicities sum to {total}, expected {n}")
    return SpectrumSpec(tuple(out_vals), tuple(out_mult), len(pairs))


@dataclass(frozen=True)
class FeasibilityReport:
    controllable_modes: tuple
    uncontrollable_modes: tuple  # (lambda, s_i) pairs
    feasible: bool
    reasons: tuple = ()
    nullspace_dims: tuple = field(default=())


def assess_feasibility(sys, spec, scan_tol=None):
    """Check that `spec` can be placed on `sys`.

    For every target value the kernel dimension ``s_i`` of ``[A - lam I, B]``
    is computed; ``s_i > m`` marks an uncontrollable target. Eigenvalues of
    `A` are scanned for uncontrollable modes, each of which must appear in the
    target spectrum. Multiplicities must satisfy ``m_i <= s_i``.

    `scan_tol` is the relative singular-value threshold for the eigenvalue
    scan; computed eigenvalues are inexact, so it defaults to ``sqrt(eps)``.
    """
    from .moore import nullspace_basis, system_matrix

    reasons = []
    if spec.n != sys.n:
        reasons.append(f"spectrum has {spec.n} values, system has n={sys.n}")
    dims = []
    ctrl, unctrl = [], []
    for lam, mi in zip(spec.values, spec.multiplicities):
        _, s = nullspace_basis(sys, lam)
        dims.append(s)
        if s > sys.m:
            unctrl.append((lam, s))
        else:
            ctrl.append(lam)
        if mi > s:
            reasons.append(f"multiplicity {mi} of {lam} exceeds nullspace dimension {s}")

    if scan_tol is None:
        scan_tol = np.sqrt(EPS)
    for mu in np.linalg.eigvals(sys.A):
        sv = np.linalg.svd(system_matrix(sys, mu), compute_uv=False)
        if sv[-1] > scan_tol * max(sv[0], 1.0):
            continue
        if not any(abs(mu - lam) <= 1e-6 * max(1.0, abs(lam)) for lam in spec.values):
            reasons.append(f"uncontrollable mode {mu:.6g} of (A, B) is not in the target spectrum")

    return FeasibilityReport(tuple(ctrl), tuple(unctrl), not reasons,
                             tuple(dict.fromkeys(reasons)), tuple(dims))


def parse_system(obj):
    """Build ``(LtiSystem, SpectrumSpec)`` from a decoded system JSON object.

    Raises
    ------
    MalformedFile
        Missing keys or entries of the wrong type.
    """
    try:
        A = np.array(obj["A"], dtype=float)
        B = np.array(obj["B"], dtype=float)
        poles = obj["poles"]
        vals = [complex(float(p["re"]), float(p.get("im", 0.0))) for p in poles]
        mults = [int(p.get("mult", 1)) for p in poles]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"malformed system object: {exc!r}") from exc
    sys = validate_system(A, B)
    spec = canonicalize_spectrum(vals, mults, n=sys.n)
    return sys, spec


def load_system_file(path):
    """Read a system JSON file; returns ``(LtiSystem, SpectrumSpec, raw dict)``."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedFile(f"{path}: top level must be an object")
    sys, spec = parse_system(obj)
    return sys, spec, obj


def poles_to_json(spec):
    return [{"re": float(v.real), "im": float(v.imag), "mult": int(k)}
            for v, k in zip(spec.values, spec.multiplicities)]
