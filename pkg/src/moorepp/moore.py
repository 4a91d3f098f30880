"""Moore parametric form of the pole-placing gain.

For every target eigenvalue ``lam_i`` the kernel of the system matrix
``S(lam_i) = [A - lam_i I, B]`` is spanned by the orthonormal columns of
``T_i``. A block parameter matrix ``K = diag(K_1, ..., K_nu)`` with
``K_i`` of shape ``(s_i, m_i)`` gives ``M(K) = T K``; its top ``n`` rows are
the closed-loop eigenvectors ``X`` and, after realification, ``F = W V^{-1}``
places the spectrum exactly.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConjugacyViolation, DimensionMismatch, RankDeficientX
from .system_model import numerical_rank, rank_tolerance
from .errors import NumericalRankAmbiguity

__all__ = ['NullspaceFamily', 'ParameterMatrix', 'RealizedCandidate',
           'system_matrix', 'nullspace_basis', 'build_family', 'realify',
           'assemble_candidate', 'residual', 'conjugation_transform']


def system_matrix(sys, lam):
    """``[A - lam I, B]``; real when `lam` is real."""
    lam = complex(lam)
    n = sys.n
    if lam.imag == 0.0:
        return np.hstack([sys.A - lam.real * np.eye(n), sys.B])
    return np.hstack([sys.A - lam * np.eye(n), sys.B.astype(complex)])


def _kernel(S, tol=None):
    _, sv, vh = np.linalg.svd(S)
    if tol is None:
        tol = rank_tolerance(sv, S.shape)
    r = int(np.sum(sv > tol))
    ambiguous = bool(np.any((sv > tol / 10) & (sv <= tol * 10))) and tol > 0
    return vh[r:].conj().T, ambiguous


def nullspace_basis(sys, lam, tol=None):
    """Orthonormal basis of ``ker [A - lam I, B]``.

    Parameters
    ----------
    sys : LtiSystem
    lam : complex
    tol : float, optional
        Singular values at or below `tol` count as zero. Defaults to
        ``max(n, n+m) * eps * sigma_max``.

    Returns
    -------
    T : ndarray, shape (n+m, s)
        Real for real `lam`.
    s : int
        Kernel dimension; equals m unless `lam` is an uncontrollable mode.

    Warns
    -----
    NumericalRankAmbiguity
        If a singular value lies within a factor of 10 of the threshold.
    """
    T, ambiguous = _kernel(system_matrix(sys, lam), tol)
    if ambiguous:
        warnings.warn(f"numerical rank of S({lam}) is ambiguous",
                      NumericalRankAmbiguity, stacklevel=2)
    return T, T.shape[1]


@dataclass(frozen=True, eq=False)
class NullspaceFamily:
    """Kernel bases ``T_1..T_nu`` for every eigenvalue of a spectrum.

    The basis of the second member of a conjugate pair is the elementwise
    conjugate of the first, so ``K_{i+1} = conj(K_i)`` gives conjugate columns.
    """
    system: object
    spectrum: object
    bases: tuple
    dims: tuple
    ambiguous: tuple = ()

    def null_tol(self):
        return 1e-8 * self.system.scale()


def build_family(sys, spec, tol=None):
    """Compute the kernel bases for every eigenvalue in `spec`."""
    if spec.n != sys.n:
        raise DimensionMismatch(f"spectrum has {spec.n} values, system has n={sys.n}")
    bases, ambiguous = [None] * spec.nu, [False] * spec.nu
    for i in spec.free_indices():
        T, amb = _kernel(system_matrix(sys, spec.values[i]), tol)
        bases[i], ambiguous[i] = T, amb
        if spec.is_complex(i):
            bases[i + 1], ambiguous[i + 1] = T.conj(), amb
    if any(ambiguous):
        warnings.warn("numerical rank ambiguous for some target eigenvalues",
                      NumericalRankAmbiguity, stacklevel=2)
    fam = NullspaceFamily(sys, spec, tuple(bases),
                          tuple(T.shape[1] for T in bases), tuple(ambiguous))
    tol_null = fam.null_tol()
    for lam, T in zip(spec.values, bases):
        res = np.linalg.norm(system_matrix(sys, lam) @ T)
        assert res <= tol_null, f"kernel residual {res:.3g} for {lam}"
    return fam


@dataclass(frozen=True, eq=False)
class ParameterMatrix:
    """Stored blocks of ``K`` for the free eigenvalue indices.

    `blocks` follows ``spec.free_indices()``: one complex block per conjugate
    pair (its partner is the conjugate) and one real block per real
    eigenvalue.
    """
    spectrum: object
    blocks: tuple

    def full_blocks(self):
        out = []
        for i, Kb in zip(self.spectrum.free_indices(), self.blocks):
            if self.spectrum.is_complex(i):
                Kb = np.asarray(Kb, dtype=complex)
                out += [Kb, Kb.conj()]
            else:
                out.append(np.asarray(Kb, dtype=float))
        return out

    def dense(self):
        """The full block-diagonal ``K`` (sum s_i by n)."""
        return sla.block_diag(*[b.astype(complex) for b in self.full_blocks()])

    def scaled(self, c):
        return ParameterMatrix(self.spectrum, tuple(c * b for b in self.blocks))


def realify(M, spec, tol=None):
    """Replace each conjugate column pair ``(M_i, M_{i+1})`` by
    ``((M_i + M_{i+1}) / 2, (M_i - M_{i+1}) / 2j)``.

    Columns of real eigenvalues pass through. The result must be real up to
    `tol` (default ``1e-8 * max(1, ||M||_F)``), otherwise
    ``ConjugacyViolation`` is raised.
    """
    M = np.asarray(M)
    if M.shape[1] != spec.n:
        raise DimensionMismatch(f"M has {M.shape[1]} columns, spectrum has n={spec.n}")
    if tol is None:
        tol = 1e-8 * max(1.0, np.linalg.norm(M))
    out = np.array(M, dtype=complex)
    cols = spec.column_slices()
    for i in range(0, 2 * spec.pair_count, 2):
        a, b = M[:, cols[i]], M[:, cols[i + 1]]
        out[:, cols[i]] = (a + b) / 2
        out[:, cols[i + 1]] = (a - b) / 2j
    resid = np.max(np.abs(out.imag)) if out.size else 0.0
    if resid > tol:
        raise ConjugacyViolation(f"imaginary residue {resid:.3g} after realification")
    return out.real.copy()


def conjugation_transform(mi):
    """The ``2 mi x 2 mi`` matrix ``R`` with ``[V_i', V_i+1'] R = [V_i, V_i+1]``."""
    I = np.eye(mi)
    return 0.5 * np.block([[I, -1j * I], [I, 1j * I]])


@dataclass(frozen=True, eq=False)
class RealizedCandidate:
    """One point of the parametric family.

    `X` has unit-norm columns; `V` and `W` are the unnormalised real blocks
    the gain was solved from.
    """
    X: np.ndarray
    V: np.ndarray
    W: np.ndarray
    F: np.ndarray
    Lambda: np.ndarray
    K: ParameterMatrix = None


def assemble_candidate(family, K):
    """Evaluate the parametric form at `K`.

    Raises
    ------
    DimensionMismatch
        Block shapes of `K` disagree with ``(s_i, m_i)``.
    RankDeficientX
        ``X(K)`` is numerically singular.
    """
    spec = family.spectrum
    n = spec.n
    blocks = K.full_blocks()
    if len(blocks) != spec.nu:
        raise DimensionMismatch("parameter matrix has the wrong number of blocks")
    for T, Kb, mi in zip(family.bases, blocks, spec.multiplicities):
        if Kb.shape != (T.shape[1], mi):
            raise DimensionMismatch(
                f"block shape {Kb.shape}, expected {(T.shape[1], mi)}")

    M = np.hstack([T @ Kb for T, Kb in zip(family.bases, blocks)])
    X = M[:n]
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0) or numerical_rank(X / np.where(norms == 0, 1, norms)) < n:
        raise RankDeficientX("X(K) is rank deficient; choose another K")
    MR = realify(M, spec, tol=1e-8 * max(1.0, np.linalg.norm(M)))
    V, W = MR[:n], MR[n:]
    F = sla.solve(V.T, W.T).T
    Xn = X / norms
    return RealizedCandidate(Xn, V, W, F, np.diag(spec.expanded()), K)


def residual(sys, cand):
    """EPP defect ``||(A + B F) X - X Lambda||_F / max(1, ||X||_F)``."""
    X = cand.X
    R = (sys.A + sys.B @ cand.F) @ X - X @ cand.Lambda
    return float(np.linalg.norm(R) / max(1.0, np.linalg.norm(X)))
