"""Command line entry point.

Exit codes: 0 success; 1 audit failure (``check``); 2 infeasible problem;
3 malformed input; 4 time budget exhausted without a candidate.
"""

import argparse
import json
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import bench
from .conditioning import bundle_metrics
from .errors import (BudgetExhaustedNoCandidate, DimensionMismatch, Infeasible,
                     MalformedFile, MissingCase, MultiplicityOverflow,
                     NotSelfConjugate, RankDeficientB)
from .optimizer import (GradientMode, ObjectiveSpec, SearchConfig,
                        SeedStrategy, solve)
from .system_model import canonicalize_spectrum, load_system_file, poles_to_json

EXIT_OK, EXIT_AUDIT, EXIT_INFEASIBLE, EXIT_MALFORMED, EXIT_BUDGET = 0, 1, 2, 3, 4
_INPUT_ERRORS = (MalformedFile, NotSelfConjugate, MultiplicityOverflow,
                 DimensionMismatch, RankDeficientB, MissingCase)


def _parse_poles(text):
    try:
        return [complex(tok.strip().replace(" ", "")) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise MalformedFile(f"cannot parse --poles: {exc}") from exc


def _budget(value):
    if value == "n":
        return value
    return float(value)


def _add_search_args(p):
    p.add_argument("--objective", choices=["f1", "f2", "f3"], default="f1")
    p.add_argument("--alpha", type=float, default=None,
                   help="weight of the conditioning term (f3 only)")
    p.add_argument("--budget-seconds", type=_budget, default=None,
                   help="wall-clock budget per problem; 'n' means n seconds")
    p.add_argument("--budget-restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", choices=[s.value for s in SeedStrategy], default="mixed")
    p.add_argument("--grad", choices=["fd", "analytic"], default="analytic")
    p.add_argument("--format", choices=["json", "csv", "markdown"], default="json")
    p.add_argument("--out", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="moorepp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("place", help="robust placement for one system file")
    p.add_argument("--input", required=True)
    p.add_argument("--poles", default=None,
                   help="comma separated, e.g. --poles=-1+2j,-1-2j,-3 (use '=' when "
                        "the list starts with a minus sign)")
    _add_search_args(p)

    p = sub.add_parser("check", help="audit a gain against the reliability criteria")
    p.add_argument("--input", required=True, help="system file with an 'F' entry")
    p.add_argument("--poles", default=None, help="as for place")
    p.add_argument("--out", default=None)

    p = sub.add_parser("bench-bn", help="Byers-Nash collection")
    p.add_argument("--data", default=None)
    p.add_argument("--baseline", default=None)
    _add_search_args(p)

    for name in ("bench-random", "mgrepp-sweep"):
        p = sub.add_parser(name)
        p.add_argument("--count", type=int, default=500)
        p.add_argument("--n", type=int, default=20)
        p.add_argument("--m", type=int, default=2)
        p.add_argument("--baseline", default=None)
        _add_search_args(p)
        if name == "mgrepp-sweep":
            p.add_argument("--alphas", default="1,0.1,0.001,0.0001")

    p = sub.add_parser("bench-uncontrollable")
    p.add_argument("--count", type=int, default=100)
    _add_search_args(p)
    return parser


def _objective(args):
    return ObjectiveSpec.parse(args.objective, args.alpha)


def _config(args, n=None):
    seconds = args.budget_seconds
    if seconds == "n":
        seconds = None if n is None else float(n)
    restarts = args.budget_restarts
    if restarts is None:
        restarts = 10 ** 6 if seconds is not None else 20
    return SearchConfig(max_restarts=restarts, time_budget=seconds,
                        seed_strategy=SeedStrategy(args.seeds), rng_seed=args.seed,
                        gradient_mode=GradientMode(args.grad))


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        _sys.stdout.write(text)


def _load(args):
    sys, spec, raw = load_system_file(args.input)
    if args.poles is not None:
        spec = canonicalize_spectrum(_parse_poles(args.poles), n=sys.n)
    return sys, spec, raw


def _summary(line, out):
    # keep stdout clean for the result when it goes there
    print(line, file=_sys.stdout if out else _sys.stderr)


def _finite(x):
    return x if isinstance(x, float) and math.isfinite(x) else str(x)


def cmd_place(args):
    sys, spec, _ = _load(args)
    out = solve(sys, spec, _objective(args), _config(args, sys.n))
    m = bundle_metrics(sys, out.best, spec)
    result = {
        "A": sys.A.tolist(), "B": sys.B.tolist(), "poles": poles_to_json(spec),
        "F": out.best.F.tolist(),
        "metrics": {k: (_finite(v) if not isinstance(v, list) else [_finite(x) for x in v])
                    for k, v in m.as_dict().items()},
        "objective": {"kind": args.objective, "alpha": _objective(args).alpha},
        "search": {"best_objective": out.best_objective,
                   "restarts_used": out.restarts_used, "failures": out.failures,
                   "trace": [{"restart": r.restart, "seed": r.seed,
                              "final_objective": r.final_objective,
                              "iterations": r.iterations} for r in out.trace]},
    }
    _summary(f"kappa_fro = {m.kappa_fro:.6g}  c_inf = {m.c_inf:.6g}  "
             f"accuracy = {m.accuracy:.3g}  ||F||_fro = {m.gain_fro:.6g}", args.out)
    if args.format == "json":
        text = json.dumps(result, indent=1, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = ("kappa_fro,kappa_2,c_inf,accuracy,gain_fro\n"
                + ",".join(repr(getattr(m, k)) for k in
                           ("kappa_fro", "kappa_2", "c_inf", "accuracy", "gain_fro")) + "\n")
    else:
        text = (f"| kappa_fro | c_inf | accuracy | ||F||_fro |\n|---|---|---|---|\n"
                f"| {m.kappa_fro:.5g} | {m.c_inf:.5g} | {m.accuracy:.3g} | {m.gain_fro:.5g} |\n")
    _emit(text, args.out)
    return EXIT_OK


def cmd_check(args):
    sys, spec, raw = _load(args)
    try:
        F = np.array(raw["F"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"input needs a numeric 'F' entry: {exc!r}") from exc
    if F.shape != (sys.m, sys.n):
        raise MalformedFile(f"F has shape {F.shape}, expected {(sys.m, sys.n)}")
    audit = bench.audit_gain(sys, spec, F)
    report = {"failed": audit.failed, "deviation_flag": audit.deviation_flag,
              "gain_flag": audit.gain_flag, "accuracy": _finite(audit.accuracy),
              "max_rel_deviation": _finite(audit.max_rel_deviation),
              "metrics": {k: (_finite(v) if not isinstance(v, list) else [_finite(x) for x in v])
                          for k, v in audit.metrics.as_dict().items()}}
    flags = [name for name, on in (("deviation", audit.deviation_flag),
                                   ("gain", audit.gain_flag)) if on]
    print(f"accuracy = {audit.accuracy:.3g}  max relative deviation = "
          f"{audit.max_rel_deviation:.3g}  ||F||_fro = {audit.metrics.gain_fro:.6g}"
          + (f"  FAILED: {', '.join(flags)}" if flags else "  ok"))
    if args.out:
        _emit(json.dumps(report, indent=1, sort_keys=True) + "\n", args.out)
    return EXIT_AUDIT if audit.failed else EXIT_OK


def _emit_report(report, args):
    if args.format == "json":
        text = bench.report_to_json(report)
    elif args.format == "csv":
        text = bench.report_to_csv(report)
    else:
        text = bench.report_to_markdown(report)
    _emit(text, args.out)


def _baseline(args):
    return bench.load_baseline_csv(args.baseline) if args.baseline else None


def cmd_bench_bn(args):
    cases = bench.load_byers_nash(args.data)
    objective = _objective(args)
    results, errors = [], {}
    for case in cases:
        r = bench.run_suite([case], objective, _config(args, case.system.n))
        results += r.per_case
        errors.update(r.errors)
    report = bench.BenchReport("byers-nash", objective, results, _baseline(args), None, errors)
    report.indices = bench._indices(report)
    _emit_report(report, args)
    return EXIT_OK


def cmd_bench_random(args):
    cases = bench.gen_survey2(args.count, args.n, args.m, args.seed)
    report = bench.run_suite(cases, _objective(args), _config(args, args.n),
                             _baseline(args), label=f"random-n{args.n}-m{args.m}")
    _emit_report(report, args)
    return EXIT_OK


def cmd_bench_uncontrollable(args):
    stats = bench.run_uncontrollable_suite(args.count, args.seed, _config(args, 3),
                                           _objective(args))
    print(f"{stats.failures} failures out of {len(stats.records)} cases")
    recs = [{k: v for k, v in r.items() if k != "runtime"} for r in stats.records]
    _emit(json.dumps(bench._jsonable({"failures": stats.failures, "cases": recs}),
                     indent=1, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_mgrepp_sweep(args):
    if args.alpha is not None:
        raise MalformedFile("use --alphas with mgrepp-sweep")
    alphas = [float(a) for a in args.alphas.split(",")]
    cases = bench.gen_survey2(args.count, args.n, args.m, args.seed)
    sweep = bench.run_mgrepp_sweep(cases, alphas, _config(args, args.n), _baseline(args))
    if args.format == "json":
        text = json.dumps({f"{a:g}": bench._jsonable(bench.report_to_dict(r))
                           for a, r in sweep.items()}, indent=1, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = "".join(f"# alpha = {a:g}\n" + bench.report_to_csv(r) for a, r in sweep.items())
    else:
        text = bench.sweep_to_markdown(sweep)
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {"place": cmd_place, "check": cmd_check, "bench-bn": cmd_bench_bn,
            "bench-random": cmd_bench_random,
            "bench-uncontrollable": cmd_bench_uncontrollable,
            "mgrepp-sweep": cmd_mgrepp_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "alpha", None) is not None and args.objective != "f3" \
            and args.command != "mgrepp-sweep":
        print("error: --alpha is only valid with --objective f3", file=_sys.stderr)
        return EXIT_MALFORMED
    try:
        return COMMANDS[args.command](args)
    except _INPUT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_MALFORMED
    except Infeasible as exc:
        print(f"error: Infeasible: {exc}", file=_sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExhaustedNoCandidate as exc:
        print(f"error: BudgetExhaustedNoCandidate: {exc}", file=_sys.stderr)
        return EXIT_BUDGET


def run():
    _sys.exit(main())
