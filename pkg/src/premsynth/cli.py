"""premsynth command line.

Exit codes: 0 success, 2 usage or precondition error, 3 the engine reported
a failure (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .core import Domain, Histogram, QueryFamily, sample_records_from_histogram
from .evaluation import (
    ENGINES,
    EngineParams,
    audit_estimates,
    report_to_csv,
    report_to_json,
    run_engine,
    scaling_sweep,
)
from .privacy import AccountingConstants
from .workloads import KINDS, WorkloadSpec, generate_workload

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 2, 3
ESTIMATES_FORMAT = "premsynth-estimates/1"

# engine settings that may come from --config; explicit flags win
_ENGINE_DEFAULTS = {
    "engine": "prem",
    "epsilon": None,
    "delta": 1e-6,
    "beta": 0.05,
    "zeta": 0.2,
    "c_tct": AccountingConstants.c_tct,
    "bisection_tol": AccountingConstants.bisection_tol,
    "c_pure": 1.0,
    "k": None,
    "rescale": False,
}


class UsageError(Exception):
    pass


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--engine", choices=sorted(ENGINES), default=None)
    p.add_argument("--epsilon", type=float, default=None, help="total privacy budget (required)")
    p.add_argument("--delta", type=float, default=None, help="0 for pure DP (default 1e-6)")
    p.add_argument("--beta", type=float, default=None, help="failure probability (default 0.05)")
    p.add_argument("--zeta", type=float, default=None, help="relative error, in (0, 1/2) (default 0.2)")
    p.add_argument("--c-tct", dest="c_tct", type=float, default=None, help="monitor accounting constant")
    p.add_argument("--bisection-tol", dest="bisection_tol", type=float, default=None)
    p.add_argument("--c-pure", dest="c_pure", type=float, default=None, help="pure-DP alpha constant")
    p.add_argument("--k", type=int, default=None, help="support size for the expmech engine")
    p.add_argument("--rescale", action="store_true", default=None, help="rescale output mass to n")
    p.add_argument("--config", type=Path, default=None, help="JSON file with any of the settings above")


def _private_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--private", type=Path, help="private histogram (JSON)")
    p.add_argument("--data", type=Path, help="private records (CSV), needs --schema")
    p.add_argument("--schema", type=Path, help="attribute schema (JSON)")
    p.add_argument("--workload", type=Path, required=True, help="query family (JSON)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="premsynth",
        description="Differentially private synthetic histograms with relative-error guarantees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run an engine and write a synthetic histogram and trace")
    _engine_flags(g)
    _private_flags(g)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--trace", type=Path)

    e = sub.add_parser("evaluate", help="audit a synthetic histogram against the private one")
    _private_flags(e)
    e.add_argument("--synthetic", type=Path, required=True)
    e.add_argument("--zeta", type=float, required=True)
    e.add_argument("--trace", type=Path, help="generate trace, to compare against its certified alpha")
    e.add_argument("--format", choices=("json", "csv"), default="json")
    e.add_argument("--out", type=Path)

    b = sub.add_parser("bench", help="error-vs-n scaling sweep")
    _engine_flags(b)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--n-grid", default="1000,10000,100000", help="comma-separated record counts")
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--domain-size", type=int, default=64)
    b.add_argument("--kind", choices=KINDS, default="random-binary")
    b.add_argument("--count", type=int, default=32, help="number of queries")
    b.add_argument("--density", type=float, default=0.5)
    b.add_argument("--format", choices=("json", "csv"), default="json")
    b.add_argument("--out", type=Path)

    w = sub.add_parser("workload", help="emit a query family file")
    w.add_argument("--kind", choices=KINDS, required=True)
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--count", type=int)
    w.add_argument("--density", type=float, default=0.5)
    w.add_argument("--arity", type=int, default=1)
    w.add_argument("--schema", type=Path)
    w.add_argument("--domain-size", type=int)
    w.add_argument("--path", type=Path, help="source file for the explicit kind")
    w.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("sample", help="draw records from a synthetic histogram")
    s.add_argument("--synthetic", type=Path, required=True)
    s.add_argument("--m", type=int, required=True, help="number of records")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--schema", type=Path, help="write labelled CSV rows using this schema")
    s.add_argument("--out", type=Path, required=True)
    return parser


def _engine_params(args) -> tuple[str, EngineParams]:
    settings = dict(_ENGINE_DEFAULTS)
    if args.config is not None:
        cfg = json.loads(args.config.read_text())
        unknown = set(cfg) - set(settings)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        settings.update(cfg)
    for key in settings:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    if settings["engine"] not in ENGINES:
        raise UsageError(f"unknown engine {settings['engine']!r}")
    if settings["epsilon"] is None:
        raise UsageError("--epsilon is required (flag or config file)")
    engine = settings["engine"]
    if engine != "prem":
        settings["delta"] = 0.0
    acc = AccountingConstants(c_tct=settings["c_tct"], bisection_tol=settings["bisection_tol"])
    params = EngineParams(
        epsilon=float(settings["epsilon"]), delta=float(settings["delta"]), beta=float(settings["beta"]),
        zeta=float(settings["zeta"]), accounting=acc, c_pure=float(settings["c_pure"]),
        k=settings["k"], rescale=bool(settings["rescale"]),
    )
    # surface precondition errors before any work is done
    if engine in ("prem", "prem-pure"):
        params.prem_config(pure=engine == "prem-pure")
    elif not params.epsilon > 0:
        raise UsageError("epsilon must be positive")
    return engine, params


def _load_private(args) -> tuple[Histogram, Domain]:
    if args.private is not None and args.data is not None:
        raise UsageError("give either --private or --data, not both")
    if args.private is not None:
        return dataio.read_histogram(args.private)
    if args.data is not None:
        if args.schema is None:
            raise UsageError("--data needs --schema")
        domain, h = dataio.ingest_csv(args.data, args.schema)
        return h, domain
    raise UsageError("one of --private or --data is required")


def _write_text(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _cmd_generate(args) -> int:
    engine, params = _engine_params(args)
    h_star, domain = _load_private(args)
    F = dataio.read_family(args.workload)
    run = run_engine(engine, h_star, F, params, np.random.default_rng(args.seed))
    if run.synthetic is not None:
        dataio.write_histogram(run.synthetic, args.out, domain)
    else:
        body = ", ".join(format(float(x), ".17g") for x in run.estimates)
        args.out.write_text(f'{{"format": "{ESTIMATES_FORMAT}", "estimates": [{body}]}}\n')
    if args.trace is not None:
        trace = {
            "engine": engine,
            "seed": args.seed,
            "params": params.to_dict(),
            "failed": run.failed,
            "certified_alpha": run.derived_alpha,
            "budget": {"epsilon": run.budget.epsilon, "delta": run.budget.delta},
            "run": run.trace,
        }
        args.trace.write_text(json.dumps(trace, indent=2, sort_keys=True) + "\n")
    return EXIT_FAILURE if run.failed else EXIT_OK


def _cmd_evaluate(args) -> int:
    h_star, _ = _load_private(args)
    F = dataio.read_family(args.workload)
    doc = json.loads(args.synthetic.read_text())
    if "estimates" in doc:
        est = np.asarray(doc["estimates"], dtype=float)
    else:
        h_hat, _ = dataio.histogram_from_json(args.synthetic.read_text())
        est = F.answers(h_hat)
    if est.shape != (len(F),):
        raise UsageError(f"synthetic output has {est.size} estimates for {len(F)} queries")
    true = F.answers(h_star)
    a = audit_estimates(est, true, args.zeta)
    certified = None
    if args.trace is not None:
        certified = json.loads(args.trace.read_text()).get("certified_alpha")
    if args.format == "csv":
        lines = ["query_id,true,estimate,upper_slack,lower_slack,slack"]
        for j in range(len(F)):
            lines.append(f"{j},{true[j]!r},{est[j]!r},{a.upper_slacks[j]!r},{a.lower_slacks[j]!r},"
                         f"{a.per_query_slacks[j]!r}")
        _write_text(args.out, "\n".join(lines) + "\n")
    else:
        out = a.to_dict()
        out["certified_alpha"] = certified
        out["within_certificate"] = None if certified is None else a.measured_alpha <= certified
        _write_text(args.out, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_bench(args) -> int:
    engine, params = _engine_params(args)
    try:
        grid = [int(x) for x in args.n_grid.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--n-grid must be comma-separated integers, got {args.n_grid!r}") from None
    if not grid or min(grid) < 1:
        raise UsageError("--n-grid needs positive record counts")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    spec = WorkloadSpec(kind=args.kind, count=args.count, seed=args.seed, density=args.density)
    report = scaling_sweep(engine, spec, grid, args.trials, params, Domain(args.domain_size), args.seed)
    text = report_to_csv(report) if args.format == "csv" else report_to_json(report) + "\n"
    _write_text(args.out, text)
    return EXIT_OK


def _cmd_workload(args) -> int:
    if args.schema is not None:
        domain = dataio.read_schema(args.schema)
    elif args.domain_size is not None:
        domain = Domain(args.domain_size)
    else:
        raise UsageError("workload needs --schema or --domain-size")
    spec = WorkloadSpec(
        kind=args.kind, count=args.count, seed=args.seed, density=args.density,
        arity=args.arity, path=None if args.path is None else str(args.path),
    )
    F = generate_workload(spec, domain)
    dataio.write_family(F, args.out)
    return EXIT_OK


def _cmd_sample(args) -> int:
    h, domain = dataio.read_histogram(args.synthetic)
    if args.schema is not None:
        domain = dataio.read_schema(args.schema)
        if domain.size != h.size:
            raise UsageError("schema size disagrees with the synthetic histogram")
    records = sample_records_from_histogram(h, args.m, np.random.default_rng(args.seed))
    if domain.attributes is not None:
        dataio.write_records_csv(records, domain, args.out)
    else:
        args.out.write_text(json.dumps({"records": records}) + "\n")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
    "workload": _cmd_workload,
    "sample": _cmd_sample,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ValueError, TypeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"premsynth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"premsynth {args.command}: engine failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def cli_main(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
