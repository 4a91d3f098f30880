"""Benchmark suites and comparison reports.

Four suites are provided: the Byers-Nash collection shipped under
``moorepp/data/byers_nash``, random 20-state systems, random three-state
systems with one uncontrollable mode, and a gain-weighting sweep over the
random systems. Competing methods are not reimplemented; their results can be
supplied as a baseline CSV with columns
``case_id,kappa_fro,c_inf,accuracy,gain_fro``.
"""

import csv
import enum
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.linalg import block_diag, solve_triangular

from .conditioning import MetricBundle, bundle_metrics, match_eigenvalues, metrics_from_gain
from .errors import MalformedFile, MissingCase, NonPositiveValue, PlacementError
from .optimizer import ObjectiveKind, ObjectiveSpec, SearchConfig, solve
from .system_model import canonicalize_spectrum, parse_system, validate_system

__all__ = ['CaseSource', 'BenchCase', 'CaseResult', 'BenchReport',
           'load_byers_nash', 'gen_survey2', 'gen_uncontrollable',
           'improvement_indices', 'run_suite', 'run_uncontrollable_suite',
           'run_mgrepp_sweep', 'audit_gain', 'load_baseline_csv',
           'report_to_json', 'report_to_csv', 'report_to_markdown',
           'sweep_to_markdown', 'INDEX_METRICS']

INDEX_METRICS = ("kappa_fro", "c_inf", "accuracy", "gain_fro")
BN_COUNT = 11


class CaseSource(enum.Enum):
    BYERS_NASH = "byers_nash"
    RANDOM_SURVEY2 = "random_survey2"
    RANDOM_UNCONTROLLABLE = "random_uncontrollable"


@dataclass(frozen=True, eq=False)
class BenchCase:
    id: str
    system: object
    spectrum: object
    source: CaseSource
    meta: dict = field(default_factory=dict)


@dataclass
class CaseResult:
    case_id: str
    metrics: MetricBundle
    F: np.ndarray
    runtime: float
    seed_info: dict


@dataclass
class BenchReport:
    label: str
    objective: ObjectiveSpec
    per_case: list
    baseline: dict = None
    indices: dict = None
    errors: dict = field(default_factory=dict)


# -- Byers-Nash collection ---------------------------------------------------

def _bn_dir(path):
    if path is not None:
        return Path(path)
    return Path(str(resources.files("moorepp") / "data" / "byers_nash"))


def _read_checksums(d):
    sums = {}
    f = d / "SHA256SUMS"
    if not f.exists():
        raise MissingCase(f"{d} has no SHA256SUMS manifest")
    for line in f.read_text().splitlines():
        if line.strip():
            digest, name = line.split()
            sums[name] = digest
    return sums


def load_byers_nash(path=None, verify=True):
    """Load the eleven Byers-Nash benchmark systems.

    Each ``bnXX.json`` file is checked against the ``SHA256SUMS`` manifest of
    its directory, so an edited benchmark is refused.

    Raises
    ------
    MissingCase
        The directory, the manifest or one of the eleven files is absent.
    MalformedFile
        A file does not parse or its checksum does not match.
    """
    d = _bn_dir(path)
    if not d.is_dir():
        raise MissingCase(f"{d} is not a directory")
    sums = _read_checksums(d) if verify else {}
    cases = []
    for k in range(1, BN_COUNT + 1):
        name = f"bn{k:02d}.json"
        f = d / name
        if not f.exists():
            raise MissingCase(f"Byers-Nash example {k} ({name}) is missing")
        raw = f.read_bytes()
        if verify:
            if name not in sums:
                raise MalformedFile(f"{name} is not listed in SHA256SUMS")
            if hashlib.sha256(raw).hexdigest() != sums[name]:
                raise MalformedFile(f"{name} does not match its recorded checksum")
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedFile(f"{name}: {exc}") from exc
        sys, spec = parse_system(obj)
        meta = {key: obj[key] for key in ("name", "provenance", "reference",
                                          "poles_verified", "poles_note")
                if key in obj}
        cases.append(BenchCase(f"bn{k:02d}", sys, spec, CaseSource.BYERS_NASH, meta))
    return cases


# -- random suites -----------------------------------------------------------

def _random_spectrum(rng, n, lo=-2.0, hi=2.0, min_gap=1e-3):
    pairs = min(math.ceil(n / 4), n // 2)
    vals = []

    def distinct(z):
        return all(abs(z - v) >= min_gap for v in vals)

    while len(vals) < 2 * pairs:
        z = complex(rng.uniform(lo, hi), rng.uniform(0.0, hi))
        if z.imag >= min_gap and distinct(z):
            vals += [z, z.conjugate()]
    while len(vals) < n:
        z = complex(rng.uniform(lo, hi), 0.0)
        if distinct(z):
            vals.append(z)
    return vals


def gen_survey2(count=500, n=20, m=2, rng_seed=0):
    """Random systems with entries of A, B and the poles uniform on [-2, 2].

    About half of each spectrum is made of conjugate pairs (``ceil(n/4)``
    pairs, imaginary parts uniform on (0, 2]); all poles are distinct. Case
    ``j`` depends only on ``(rng_seed, n, m, j)``, so a shorter suite is a
    prefix of a longer one.
    """
    cases = []
    for j in range(count):
        rng = np.random.default_rng([rng_seed, n, m, j])
        A = rng.uniform(-2, 2, (n, n))
        B = rng.uniform(-2, 2, (n, m))
        spec = canonicalize_spectrum(_random_spectrum(rng, n), n=n)
        cases.append(BenchCase(f"s2-n{n}-m{m}-{j:04d}", validate_system(A, B),
                               spec, CaseSource.RANDOM_SURVEY2,
                               {"seed": rng_seed, "index": j}))
    return cases


def _dyadic(rng, shape, lo=-2.0, hi=2.0, bits=20):
    return np.round(rng.uniform(lo, hi, shape) * 2 ** bits) / 2 ** bits


def _exact_similarity(rng, n, max_cond=10.0):
    """``P = L U`` with quarter-integer unit triangular factors.

    Triangular solves with unit diagonals involve no division, so ``P^{-1}``
    and products with dyadic data are exact in double precision.
    """
    while True:
        L = np.tril(np.round(rng.uniform(-1, 1, (n, n)) * 4) / 4, -1) + np.eye(n)
        U = np.triu(np.round(rng.uniform(-1, 1, (n, n)) * 4) / 4, 1) + np.eye(n)
        P = L @ U
        if np.linalg.cond(P) <= max_cond:
            I = np.eye(n)
            Pinv = solve_triangular(U, solve_triangular(L, I, lower=True, unit_diagonal=True),
                                    unit_diagonal=True)
            return P, Pinv


def gen_uncontrollable(count=100, rng_seed=0, include_mode=True):
    """Three-state, two-input systems with exactly one uncontrollable mode.

    The system is ``A = blockdiag(Ac, lam_u)``, ``B = [B1; 0]`` with
    invertible ``B1``, moved to random coordinates by a similarity of
    condition at most 10. Data are dyadic so that ``lam_u`` stays an exact
    uncontrollable eigenvalue. The targets are ``lam_u`` plus one random
    conjugate pair; with ``include_mode=False`` a random real value replaces
    ``lam_u`` (an infeasible negative control).
    """
    cases = []
    for j in range(count):
        rng = np.random.default_rng([rng_seed, 3, 2, j, 7])
        Ac = _dyadic(rng, (2, 2))
        while True:
            B1 = _dyadic(rng, (2, 2))
            if abs(np.linalg.det(B1)) > 0.25:
                break
        lam_u = float(_dyadic(rng, ()))
        P, Pinv = _exact_similarity(rng, 3)
        A = P @ block_diag(Ac, lam_u) @ Pinv
        B = P @ np.vstack([B1, np.zeros((1, 2))])
        re, im = float(_dyadic(rng, ())), float(_dyadic(rng, (), 0.1, 2.0))
        other = lam_u if include_mode else lam_u + 0.5 + float(rng.uniform(0, 1))
        spec = canonicalize_spectrum([complex(re, im), complex(re, -im), other], n=3)
        cases.append(BenchCase(f"unc-{j:03d}", validate_system(A, B), spec,
                               CaseSource.RANDOM_UNCONTROLLABLE,
                               {"seed": rng_seed, "index": j, "lambda_u": lam_u}))
    return cases


# -- comparison indices --------------------------------------------------------

def improvement_indices(ours, baseline, count=None):
    """Average relative improvement over a baseline.

    Returns ``ind`` with ``(1 - ind)**N == prod(ours / baseline)``; positive
    means smaller (better) values than the baseline.

    Raises
    ------
    NonPositiveValue
        If any value is zero, negative or not finite.
    """
    ours = np.asarray(ours, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    if ours.shape != baseline.shape or ours.ndim != 1 or ours.size == 0:
        raise ValueError("ours and baseline must be non-empty vectors of equal length")
    N = ours.size if count is None else int(count)
    if N != ours.size:
        raise ValueError(f"count {N} does not match {ours.size} values")
    both = np.concatenate([ours, baseline])
    if not np.all(np.isfinite(both)) or np.any(both <= 0):
        raise NonPositiveValue("improvement indices need positive finite values")
    return float(-np.expm1(np.mean(np.log(ours) - np.log(baseline))))


def _indices(report):
    if not report.baseline or not report.per_case:
        return None
    if any(r.case_id not in report.baseline for r in report.per_case):
        return None
    out = {}
    for key in INDEX_METRICS:
        ours = [getattr(r.metrics, key) for r in report.per_case]
        base = [report.baseline[r.case_id][key] for r in report.per_case]
        try:
            out[key] = improvement_indices(ours, base)
        except NonPositiveValue:
            out[key] = None
    return out


def load_baseline_csv(path):
    """Read external results: ``case_id -> {metric: value}``."""
    text = Path(path).read_text()
    rows = csv.DictReader(io.StringIO(text))
    need = {"case_id", *INDEX_METRICS}
    if rows.fieldnames is None or not need <= set(rows.fieldnames):
        raise MalformedFile(f"baseline CSV needs columns {sorted(need)}")
    out = {}
    try:
        for row in rows:
            out[row["case_id"]] = {k: float(row[k]) for k in INDEX_METRICS}
    except ValueError as exc:
        raise MalformedFile(f"baseline CSV: {exc}") from exc
    return out


# -- running suites ------------------------------------------------------------

def run_suite(cases, objective=ObjectiveSpec(), config=SearchConfig(),
              baseline=None, label="suite"):
    """Solve every case and collect metrics.

    Cases whose solve raises are listed in ``report.errors`` instead of
    ``per_case``. Improvement indices are filled in only when `baseline`
    covers every solved case.
    """
    results, errors = [], {}
    for case in cases:
        t0 = time.perf_counter()
        try:
            out = solve(case.system, case.spectrum, objective, config)
        except PlacementError as exc:
            errors[case.id] = f"{type(exc).__name__}: {exc}"
            continue
        runtime = time.perf_counter() - t0
        best = min(out.trace, key=lambda r: (r.final_objective, r.restart))
        results.append(CaseResult(
            case.id, bundle_metrics(case.system, out.best, case.spectrum),
            out.best.F, runtime,
            {"restarts_used": out.restarts_used, "failures": out.failures,
             "best_restart": best.restart, "best_seed": best.seed,
             "best_objective": out.best_objective}))
    report = BenchReport(label, objective, results, baseline, None, errors)
    report.indices = _indices(report)
    return report


def run_mgrepp_sweep(cases, alphas, config=SearchConfig(), baseline=None):
    """One weighted-objective run per `alpha`; returns ``{alpha: BenchReport}``."""
    return {a: run_suite(cases, ObjectiveSpec(ObjectiveKind.F3_WEIGHTED, a),
                         config, baseline, label=f"mgrepp-alpha-{a:g}")
            for a in alphas}


@dataclass(frozen=True)
class GainAudit:
    accuracy: float
    max_rel_deviation: float
    deviation_flag: bool
    gain_flag: bool
    metrics: MetricBundle

    @property
    def failed(self):
        return self.deviation_flag or self.gain_flag


def audit_gain(sys, spec, F, rel_dev=0.05, gain_limit=1e10):
    """Check a gain against the reliability criteria.

    Fails when a closed-loop pole is more than `rel_dev` (relative to the
    target's modulus) from its matched target, or when ``||F||_F`` is not
    finite or exceeds `gain_limit`.
    """
    F = np.asarray(F, dtype=float)
    metrics = metrics_from_gain(sys, F, spec)
    gain = metrics.gain_fro
    gain_flag = not math.isfinite(gain) or gain > gain_limit
    if not np.all(np.isfinite(F)):
        return GainAudit(math.inf, math.inf, True, True, metrics)
    mu = np.linalg.eigvals(sys.A + sys.B @ F)
    targets = spec.expanded()
    d, _ = match_eigenvalues(mu, targets)
    scale = np.where(np.abs(targets) > 0, np.abs(targets), 1.0)
    rel = float(np.max(d / scale))
    return GainAudit(float(d.max()), rel, rel > rel_dev, gain_flag, metrics)


@dataclass
class UncontrollableStats:
    failures: int
    records: list


def run_uncontrollable_suite(count=100, rng_seed=0, config=None,
                             objective=ObjectiveSpec()):
    """Place every uncontrollable-mode case and count reliability failures.

    A failure is a solver error, a closed-loop pole more than 5% from its
    target, or a gain that is undefined or above 1e10. Each record also
    notes whether the uncontrollable eigenvalue survived the feedback.
    """
    if config is None:
        config = SearchConfig(max_restarts=4)
    records = []
    for case in gen_uncontrollable(count, rng_seed):
        lam_u = case.meta["lambda_u"]
        rec = {"case_id": case.id, "lambda_u": lam_u, "failed": False}
        t0 = time.perf_counter()
        try:
            out = solve(case.system, case.spectrum, objective, config)
        except PlacementError as exc:
            rec.update(failed=True, reason=f"{type(exc).__name__}: {exc}")
            rec["runtime"] = time.perf_counter() - t0
            records.append(rec)
            continue
        rec["runtime"] = time.perf_counter() - t0
        audit = audit_gain(case.system, case.spectrum, out.best.F)
        mu = np.linalg.eigvals(case.system.A + case.system.B @ out.best.F)
        rec.update(failed=audit.failed, max_rel_deviation=audit.max_rel_deviation,
                   gain_fro=audit.metrics.gain_fro, accuracy=audit.accuracy,
                   kappa_fro=audit.metrics.kappa_fro,
                   mode_retained=bool(np.min(np.abs(mu - lam_u)) <= 1e-6 * max(1.0, abs(lam_u))))
        if audit.failed:
            rec["reason"] = "deviation" if audit.deviation_flag else "gain"
        records.append(rec)
    return UncontrollableStats(sum(r["failed"] for r in records), records)


# -- report emission -----------------------------------------------------------

def _objective_dict(obj):
    return {"kind": obj.kind.value, "alpha": obj.alpha}


def report_to_dict(report, include_timing=False):
    cases = []
    for r in report.per_case:
        entry = {"case_id": r.case_id, "metrics": r.metrics.as_dict(),
                 "F": r.F.tolist(), "seed_info": r.seed_info}
        if include_timing:
            entry["runtime"] = r.runtime
        cases.append(entry)
    return {"label": report.label, "objective": _objective_dict(report.objective),
            "cases": cases, "errors": dict(sorted(report.errors.items())),
            "indices": report.indices}


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def report_to_json(report, include_timing=False):
    """Canonical JSON text; identical inputs give identical bytes.

    Floats use Python's shortest round-trip representation. Wall-clock
    times are left out unless `include_timing` is set.
    """
    return json.dumps(_jsonable(report_to_dict(report, include_timing)),
                      indent=1, sort_keys=True) + "\n"


def report_to_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case_id", "kappa_fro", "kappa_2", "c_inf", "accuracy", "gain_fro"])
    for r in report.per_case:
        m = r.metrics
        w.writerow([r.case_id] + [repr(v) for v in
                                  (m.kappa_fro, m.kappa_2, m.c_inf, m.accuracy, m.gain_fro)])
    return buf.getvalue()


def report_to_markdown(report):
    lines = [f"### {report.label}", "",
             "| case | kappa_fro | c_inf | accuracy | ||F||_fro |",
             "|---|---|---|---|---|"]
    for r in report.per_case:
        m = r.metrics
        lines.append(f"| {r.case_id} | {m.kappa_fro:.5g} | {m.c_inf:.5g} | "
                     f"{m.accuracy:.3g} | {m.gain_fro:.5g} |")
    if report.indices:
        lines += ["", "| metric | index (%) |", "|---|---|"]
        for k in INDEX_METRICS:
            v = report.indices.get(k)
            lines.append(f"| {k} | {'n/a' if v is None else f'{100 * v:.5g}'} |")
    for cid, msg in sorted(report.errors.items()):
        lines.append(f"\n- {cid}: {msg}")
    return "\n".join(lines) + "\n"


def geometric_means(report):
    out = {}
    for key in INDEX_METRICS:
        vals = np.array([getattr(r.metrics, key) for r in report.per_case])
        vals = vals[np.isfinite(vals) & (vals > 0)]
        out[key] = float(np.exp(np.mean(np.log(vals)))) if vals.size else math.nan
    return out


def sweep_to_markdown(sweep):
    """Metric rows by weighting column, as indices when a baseline was given."""
    alphas = list(sweep)
    use_idx = all(sweep[a].indices for a in alphas)
    head = "improvement index (%)" if use_idx else "geometric mean"
    lines = [f"| metric ({head}) | " + " | ".join(f"alpha = {a:g}" for a in alphas) + " |",
             "|---|" + "---|" * len(alphas)]
    for key in INDEX_METRICS:
        cells = []
        for a in alphas:
            v = sweep[a].indices.get(key) if use_idx else geometric_means(sweep[a])[key]
            cells.append("n/a" if v is None else (f"{100 * v:.5g}" if use_idx else f"{v:.5g}"))
        lines.append(f"| {key} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
