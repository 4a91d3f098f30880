"""Multi-start descent over the free parameters of the Moore form.

The decision variable is a flat real vector holding the stored blocks of
``K`` (see :func:`free_parameters`). Conjugate blocks are derived, so the
search is unconstrained. Objectives, all on the unit-column eigenvector
matrix ``X``:

* ``f1``: ``||X||_F ||X^{-1}||_F``
* ``f2``: ``||X||_F^2 + ||X^{-1}||_F^2``
* ``f3``: ``alpha * f1 + (1 - alpha) * ||F||_F``
"""

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dsymv as _symv, dsyr as _syr, dsyr2 as _syr2
from scipy.linalg.lapack import dgetrf as _getrf, dgetri as _getri

from .errors import (BudgetExhaustedNoCandidate, Infeasible, RankDeficientX,
                     SingularX)
from .moore import (ParameterMatrix, assemble_candidate, build_family,
                    residual)
from .conditioning import condition_fro
from .system_model import assess_feasibility

__all__ = ['ObjectiveKind', 'ObjectiveSpec', 'SeedStrategy', 'GradientMode',
           'SearchConfig', 'RestartRecord', 'SearchOutcome', 'ParameterLayout',
           'free_parameters', 'evaluate', 'gradient', 'solve', 'descend',
           'seed_vector']


class ObjectiveKind(enum.Enum):
    F1_KAPPA_FRO = "f1"
    F2_SUM_SQUARES = "f2"
    F3_WEIGHTED = "f3"


class SeedStrategy(enum.Enum):
    CANONICAL = "canonical"
    RANDOM = "random"
    MIXED = "mixed"


class GradientMode(enum.Enum):
    FINITE_DIFFERENCE = "fd"
    ANALYTIC = "analytic"


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: ObjectiveKind = ObjectiveKind.F1_KAPPA_FRO
    alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def parse(cls, name, alpha=None):
        kind = ObjectiveKind(name)
        if alpha is not None and kind is not ObjectiveKind.F3_WEIGHTED:
            raise ValueError("alpha is only meaningful for f3")
        return cls(kind, 1.0 if alpha is None else float(alpha))

    def effective(self):
        """f3 with ``alpha == 1`` is exactly f1."""
        if self.kind is ObjectiveKind.F3_WEIGHTED and self.alpha == 1.0:
            return ObjectiveSpec(ObjectiveKind.F1_KAPPA_FRO)
        return self


@dataclass(frozen=True)
class SearchConfig:
    """Search settings.

    With ``time_budget=None`` the search runs exactly `max_restarts`
    restarts and is deterministic. With a time budget it stops at whichever
    limit is reached first.
    """
    max_restarts: int = 20
    time_budget: float = None
    seed_strategy: SeedStrategy = SeedStrategy.MIXED
    rng_seed: int = 0
    gradient_mode: GradientMode = GradientMode.ANALYTIC
    max_iter: int = 500
    grad_tol: float = 1e-8
    armijo_c: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 60
    stall_tol: float = 1e-13
    stall_iters: int = 5
    placement_tol: float = 1e-8


@dataclass(frozen=True)
class RestartRecord:
    restart: int
    seed: str
    initial_objective: float
    final_objective: float
    iterations: int
    grad_norm: float


@dataclass
class SearchOutcome:
    best: object
    best_objective: float
    best_vector: np.ndarray
    restarts_used: int
    trace: list = field(default_factory=list)
    failures: int = 0
    runtime: float = 0.0


class ParameterLayout:
    """Bijection between a flat real vector and a :class:`ParameterMatrix`.

    Stored blocks are laid out in ``spec.free_indices()`` order, each
    row-major; a complex block stores its real part then its imaginary part.
    """

    def __init__(self, spec, dims):
        self.spec = spec
        self.dims = tuple(dims)
        self.entries = []  # (eig index, s, mi, complex, offset)
        off = 0
        for i in spec.free_indices():
            s, mi, cplx = self.dims[i], spec.multiplicities[i], spec.is_complex(i)
            self.entries.append((i, s, mi, cplx, off))
            off += (2 if cplx else 1) * s * mi
        self.size = off

    def __len__(self):
        return self.size

    def to_matrix(self, k):
        k = np.asarray(k, dtype=float)
        if k.shape != (self.size,):
            raise ValueError(f"parameter vector must have length {self.size}")
        blocks = []
        for _, s, mi, cplx, off in self.entries:
            re = k[off:off + s * mi].reshape(s, mi)
            if cplx:
                im = k[off + s * mi:off + 2 * s * mi].reshape(s, mi)
                blocks.append(re + 1j * im)
            else:
                blocks.append(re.copy())
        return ParameterMatrix(self.spec, tuple(blocks))

    def to_vector(self, K):
        parts = []
        for (_, s, mi, cplx, _), b in zip(self.entries, K.blocks):
            b = np.asarray(b)
            parts.append(b.real.ravel())
            if cplx:
                parts.append(b.imag.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)


def free_parameters(spec, dims):
    """Layout of the free real parameters for `spec` with kernel dims `dims`."""
    return ParameterLayout(spec, dims)


class _Evaluator:
    """Vectorised objective/gradient of ``k -> f(X(k), F(k))`` in real arithmetic.

    For a conjugate pair the realified columns ``(Re x, Im x)`` equal
    ``[x, conj(x)]`` times a unitary matrix up to a factor ``sqrt(2)``, so
    ``kappa_fro`` of the unit-column ``X`` equals that of ``V D`` with ``D``
    a diagonal column scaling. One real inverse of ``V`` then serves both
    ``X^{-1}`` and ``F = W V^{-1}``.

    Blocks of equal shape are stacked so that ``T K`` is one batched product
    per group; a complex block uses ``[[Tr, -Ti], [Ti, Tr]]`` acting on
    ``[Re K; Im K]``.
    """

    #: largest dense map ``k -> vec(M)`` kept, in entries
    DENSE_LIMIT = 2_000_000

    def __init__(self, family, objective):
        self.family = family
        self.objective = objective.effective()
        spec = family.spectrum
        n, m = family.system.n, family.system.m
        self.n, self.m = n, m
        self.layout = ParameterLayout(spec, family.dims)
        self.with_gain = self.objective.kind is ObjectiveKind.F3_WEIGHTED
        rows = n + m if self.with_gain else n
        cols = spec.column_slices()
        # pair-sum operator: (v @ S)_j = v_j + v_partner(j) for paired columns
        S = np.eye(n)
        a2 = np.ones(n)
        groups = {}
        for i, s, mi, cplx, off in self.layout.entries:
            groups.setdefault((s, mi, cplx), []).append((i, off))
            if cplx:
                a, b = np.arange(cols[i].start, cols[i].stop), np.arange(cols[i + 1].start, cols[i + 1].stop)
                S[a, b] = S[b, a] = 1.0
                a2[a] = a2[b] = 2.0
        self.pair_sum, self.a2 = S, a2
        self.groups = []
        for (s, mi, cplx), members in groups.items():
            T = np.stack([family.bases[i] for i, _ in members])[:, :rows]
            if cplx:
                Tr, Ti = T.real, T.imag
                T = np.concatenate([np.concatenate([Tr, -Ti], axis=2),
                                    np.concatenate([Ti, Tr], axis=2)], axis=1)
            T = np.ascontiguousarray(T.real)
            width = (2 if cplx else 1) * s * mi
            offs = [off for _, off in members]
            if all(b - a == width for a, b in zip(offs, offs[1:])):
                # members are adjacent in k: a reshaped slice is a view
                sel = slice(offs[0], offs[0] + width * len(members))
            else:
                sel = np.stack([off + np.arange(width) for off in offs]).ravel()
            c1 = np.concatenate([np.arange(cols[i].start, cols[i].stop) for i, _ in members])
            c2 = (np.concatenate([np.arange(cols[i + 1].start, cols[i + 1].stop)
                                  for i, _ in members]) if cplx else None)
            self.groups.append((cplx, T, np.ascontiguousarray(T.transpose(0, 2, 1)),
                                sel, (len(members), width // mi, mi), c1, c2))
        self.rows = rows
        self.max_cond = 1.0 / (n * np.finfo(float).eps)
        # M(k) is linear in k; when small enough, keep it as one dense map so
        # that building M and pulling back its gradient are single products
        self.dense = None
        if rows * n * self.layout.size <= self.DENSE_LIMIT:
            eye = np.eye(self.layout.size)
            self.dense = np.stack([self._build(e).ravel() for e in eye], axis=1)

    def _build(self, k):
        """Realified ``M`` (only the top ``n`` rows unless the gain is needed)."""
        rows = self.rows
        if self.dense is not None:
            return (self.dense @ k).reshape(rows, self.n)
        MR = np.empty((rows, self.n))
        for cplx, T, _, sel, shape, c1, c2 in self.groups:
            Z = (T @ k[sel].reshape(shape)).transpose(1, 0, 2).reshape(-1, c1.size)
            if cplx:
                MR[:, c1] = Z[:rows]
                MR[:, c2] = Z[rows:]
            else:
                MR[:, c1] = Z
        return MR

    def __call__(self, k, need_grad=True):
        """Return ``(f, grad)``; ``(inf, None)`` when X is singular."""
        k = np.asarray(k, dtype=float)
        n = self.n
        MR = self._build(k)
        V = MR[:n]
        rho2 = np.einsum('ij,ij->j', V, V) @ self.pair_sum
        if not rho2.all():
            return math.inf, None
        d = np.sqrt(self.a2 / rho2)
        lu, piv, info = _getrf(V)
        if info != 0:
            return math.inf, None
        Vinv, info = _getri(lu, piv)
        if info != 0:
            return math.inf, None
        Y = Vinv / d[:, None]
        # every column of the unit-column X has norm one
        nx, ny = math.sqrt(n), math.sqrt(np.einsum('ij,ij->', Y, Y))
        if not ny * nx <= self.max_cond:
            return math.inf, None

        kind, alpha = self.objective.kind, self.objective.alpha
        f = nx * nx + ny * ny if kind is ObjectiveKind.F2_SUM_SQUARES else nx * ny
        if self.with_gain:
            F = MR[n:] @ Vinv
            gF = math.sqrt(np.einsum('ij,ij->', F, F))
            f = alpha * f + (1.0 - alpha) * gF
        if not need_grad:
            return float(f), None

        Z = V * d
        YYY = Y.T @ (Y @ Y.T)
        if kind is ObjectiveKind.F2_SUM_SQUARES:
            G = 2.0 * (Z - YYY)
        else:
            G = (ny / nx) * Z - (nx / ny) * YYY
            if self.with_gain:
                G *= alpha
        # pull back through the column scaling D(V)
        c = (np.einsum('ij,ij->j', G, Z) @ self.pair_sum) / self.a2
        GM = np.empty_like(MR)
        GM[:n] = d * (G - Z * c)
        if self.with_gain:
            if alpha < 1.0 and gF > 0:
                P = (F @ Vinv.T) * ((1.0 - alpha) / gF)
                GM[:n] -= F.T @ P
                GM[n:] = P
            else:
                GM[n:] = 0.0

        if self.dense is not None:
            return float(f), GM.ravel() @ self.dense
        grad = np.empty_like(k)
        for cplx, _, TT, sel, shape, c1, c2 in self.groups:
            Gc = np.concatenate((GM[:, c1], GM[:, c2])) if cplx else GM[:, c1]
            Gc = Gc.reshape(-1, shape[0], shape[2]).transpose(1, 0, 2)
            grad[sel] = (TT @ Gc).ravel()
        return float(f), grad

    def fd_gradient(self, k):
        k = np.asarray(k, dtype=float)
        g = np.empty_like(k)
        for j in range(k.size):
            h = 1e-6 * max(1.0, abs(k[j]))
            kp, km = k.copy(), k.copy()
            kp[j] += h
            km[j] -= h
            fp, _ = self(kp, need_grad=False)
            fm, _ = self(km, need_grad=False)
            g[j] = (fp - fm) / (kp[j] - km[j])
        return g


def evaluate(objective, cand):
    """Objective value of a realised candidate (``inf`` if X is singular)."""
    objective = objective.effective()
    try:
        kf = condition_fro(cand.X)
    except SingularX:
        return math.inf
    if objective.kind is ObjectiveKind.F1_KAPPA_FRO:
        return kf
    if objective.kind is ObjectiveKind.F2_SUM_SQUARES:
        return float(np.linalg.norm(cand.X) ** 2
                     + np.linalg.norm(np.linalg.inv(cand.X)) ** 2)
    a = objective.alpha
    return float(a * kf + (1 - a) * np.linalg.norm(cand.F))


def gradient(objective, family, k_vec, mode=GradientMode.ANALYTIC):
    """Gradient of the objective with respect to the flat parameter vector.

    Raises
    ------
    RankDeficientX
        ``X`` is singular at `k_vec`.
    """
    ev = _Evaluator(family, objective)
    f, g = ev(k_vec)
    if not math.isfinite(f):
        raise RankDeficientX("X is singular at the evaluation point")
    if GradientMode(mode) is GradientMode.FINITE_DIFFERENCE:
        return ev.fd_gradient(k_vec)
    return g


def seed_vector(layout, restart, strategy, rng_seed):
    """Initial parameter vector for a restart; returns ``(k, label)``.

    Canonical seeds give block ``j`` the columns ``e_{(d_j + t) mod s_j}``,
    ``t = 0..m_j-1``, where ``d_j`` is the ``j``-th mixed-radix digit of the
    canonical seed index over the radices ``s_j``. Imaginary parts are zero.
    """
    strategy = SeedStrategy(strategy)
    if strategy is SeedStrategy.MIXED:
        if restart % 2 == 0:
            return seed_vector(layout, restart // 2, SeedStrategy.CANONICAL, rng_seed)
        return seed_vector(layout, restart, SeedStrategy.RANDOM, rng_seed)
    if strategy is SeedStrategy.RANDOM:
        rng = np.random.default_rng([rng_seed, restart])
        return rng.standard_normal(layout.size), f"random:{restart}"
    k = np.zeros(layout.size)
    q = restart
    for _, s, mi, cplx, off in layout.entries:
        d = q % s
        q //= s
        block = np.zeros((s, mi))
        for t in range(mi):
            block[(d + t) % s, t] = 1.0
        k[off:off + s * mi] = block.ravel()
    return k, f"canonical:{restart}"


def descend(fun, k0, config, deadline=None, fd=None):
    """BFGS with Armijo backtracking from `k0`.

    `fun(k, need_grad)` returns ``(f, grad)``. Accepted steps never increase
    the objective. Stops when ``||grad|| <= grad_tol (1 + |f|)``, after
    `max_iter` iterations, when the line search fails from a steepest-descent
    direction, or after `stall_iters` consecutive steps whose decrease is
    below ``stall_tol (1 + |f|)``. Returns ``(k, f, grad, iterations, values)``.
    """
    k = np.array(k0, dtype=float)
    f, g = fun(k, True)
    if fd is not None and math.isfinite(f):
        g = fd(k)
    values = [f]
    if not math.isfinite(f):
        return k, f, g, 0, values
    # inverse Hessian approximation, upper triangle only; None is the identity
    H = None
    stall = 0
    it = 0
    for it in range(1, config.max_iter + 1):
        if math.sqrt(g @ g) <= config.grad_tol * (1 + abs(f)):
            it -= 1
            break
        if deadline is not None and time.perf_counter() > deadline:
            it -= 1
            break
        p = -g if H is None else _symv(-1.0, H, g)
        slope = g @ p
        if not slope < 0:
            H = None
            p, slope = -g, -(g @ g)
        t = 1.0
        accepted = False
        for _ in range(config.max_backtracks):
            k_new = k + p if t == 1.0 else k + t * p
            f_new, g_new = fun(k_new, fd is None)
            if f_new <= f + config.armijo_c * t * slope:
                accepted = True
                break
            t *= config.shrink
        if not accepted:
            if H is None:
                it -= 1
                break
            H = None
            continue
        if fd is not None:
            g_new = fd(k_new)
        s = k_new - k
        y = g_new - g
        sy = s @ y
        # the absolute floor keeps rho**2 finite once s and y reach underflow
        if sy > 1e-12 * math.sqrt((s @ s) * (y @ y)) and sy > 1e-150:
            if H is None:
                H = np.asfortranarray(np.eye(k.size) * (sy / (y @ y)))
            rho = 1.0 / sy
            Hy = _symv(1.0, H, y)
            H = _syr2(-rho, Hy, s, a=H, overwrite_a=1)
            H = _syr((sy + y @ Hy) * rho * rho, s, a=H, overwrite_a=1)
        decrease = f - f_new
        k, f, g = k_new, f_new, g_new
        values.append(f)
        stall = stall + 1 if decrease <= config.stall_tol * (1 + abs(f)) else 0
        if stall >= config.stall_iters:
            break
    return k, f, g, it, values


def solve(sys, spec, objective=ObjectiveSpec(), config=SearchConfig()):
    """Multi-start minimisation of `objective` over the Moore parametric form.

    Returns
    -------
    SearchOutcome
        `best` is a :class:`RealizedCandidate` with ``rank X = n`` and EPP
        residual at most ``config.placement_tol``.

    Raises
    ------
    Infeasible
        The spectrum cannot be placed, or no restart produced a usable
        candidate.
    BudgetExhaustedNoCandidate
        The time budget ran out before any candidate was found.
    """
    t0 = time.perf_counter()
    report = assess_feasibility(sys, spec)
    if not report.feasible:
        raise Infeasible("; ".join(report.reasons), report)
    family = build_family(sys, spec)
    ev = _Evaluator(family, objective)
    layout = ev.layout
    fd = ev.fd_gradient if GradientMode(config.gradient_mode) is GradientMode.FINITE_DIFFERENCE else None
    deadline = None if config.time_budget is None else t0 + config.time_budget

    best = best_k = None
    best_f = math.inf
    trace, failures, used = [], 0, 0
    timed_out = False
    for r in range(config.max_restarts):
        if deadline is not None and time.perf_counter() > deadline:
            timed_out = True
            break
        used += 1
        k0, label = seed_vector(layout, r, config.seed_strategy, config.rng_seed)
        f0, _ = ev(k0, False)
        if not math.isfinite(f0):
            failures += 1
            continue
        k, f, g, iters, _ = descend(ev, k0, config, deadline, fd)
        try:
            cand = assemble_candidate(family, layout.to_matrix(k))
        except RankDeficientX:
            failures += 1
            continue
        if residual(sys, cand) > config.placement_tol:
            failures += 1
            continue
        trace.append(RestartRecord(r, label, f0, f, iters, float(np.linalg.norm(g))))
        if f < best_f:
            best, best_f, best_k = cand, f, k

    runtime = time.perf_counter() - t0
    if best is None:
        if timed_out and failures == 0:
            raise BudgetExhaustedNoCandidate("time budget exhausted before any candidate")
        raise Infeasible(f"no usable candidate after {used} restarts "
                         f"({failures} rank-deficient or inaccurate)", report)
    return SearchOutcome(best, best_f, best_k, used, trace, failures, runtime)
