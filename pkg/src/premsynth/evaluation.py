"""Accuracy audits, engine registry and error-vs-n sweeps."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .baselines import expmech_alpha_bound, exponential_mechanism, laplace_per_query_baseline
from .core import Domain, Histogram, QueryFamily, histogram_from_records
from .prem import PremConfig, run_prem
from .privacy import AccountingConstants, PrivacyBudget
from .reductions import run_prem_real
from .workloads import WorkloadSpec, generate_workload


@dataclass(frozen=True, eq=False)
class AccuracyAudit:
    zeta: float
    measured_alpha: float
    worst_query_id: int
    per_query_slacks: np.ndarray
    upper_slacks: np.ndarray
    lower_slacks: np.ndarray

    def to_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "measured_alpha": self.measured_alpha,
            "worst_query_id": self.worst_query_id,
            "per_query_slacks": self.per_query_slacks.tolist(),
            "upper_slacks": self.upper_slacks.tolist(),
            "lower_slacks": self.lower_slacks.tolist(),
        }


def audit_estimates(estimates, true_values, zeta: float) -> AccuracyAudit:
    """Smallest alpha making ``estimates`` (zeta, alpha)-accurate for ``true_values``.

    Upper slack is est - (1+zeta) true, lower slack is (1-zeta) true - est;
    both are kept signed so the direction of a violation stays visible.
    """
    est = np.asarray(estimates, dtype=float)
    true = np.asarray(true_values, dtype=float)
    if est.shape != true.shape:
        raise ValueError("estimates and true values differ in length")
    upper = est - (1 + zeta) * true
    lower = (1 - zeta) * true - est
    slack = np.maximum(np.maximum(upper, lower), 0.0)
    worst = int(np.argmax(slack))
    return AccuracyAudit(zeta, float(slack[worst]), worst, slack, upper, lower)


def audit(h_hat: Histogram, h_star: Histogram, F: QueryFamily, zeta: float) -> AccuracyAudit:
    return audit_estimates(F.answers(h_hat), F.answers(h_star), zeta)


# --- engines -------------------------------------------------------------


@dataclass(frozen=True)
class EngineParams:
    epsilon: float
    delta: float = 1e-6
    beta: float = 0.05
    zeta: float = 0.2
    accounting: AccountingConstants = field(default_factory=AccountingConstants)
    c_pure: float = 1.0
    k: int | None = None
    rescale: bool = False

    def prem_config(self, pure: bool) -> PremConfig:
        return PremConfig(
            epsilon=self.epsilon, delta=0.0 if pure else self.delta, beta=self.beta,
            zeta=self.zeta, accounting=self.accounting, c_pure=self.c_pure, rescale=self.rescale,
        )

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["accounting"] = dict(self.accounting.__dict__)
        return d


@dataclass(frozen=True, eq=False)
class EngineRun:
    estimates: np.ndarray
    synthetic: Histogram | None
    failed: bool
    derived_alpha: float | None
    budget: PrivacyBudget
    trace: dict | None = None


def _prem_engine(pure: bool):
    def run(h_star, F, params: EngineParams, rng) -> EngineRun:
        config = params.prem_config(pure)
        runner = run_prem if F.is_binary else run_prem_real
        result = runner(h_star, F, config, rng)
        return EngineRun(
            estimates=F.answers(result.synthetic),
            synthetic=result.synthetic,
            failed=result.failed,
            derived_alpha=result.certified_alpha,
            budget=result.ledger.composed(),
            trace=result.trace_dict(),
        )

    return run


def _expmech_engine(h_star, F, params: EngineParams, rng) -> EngineRun:
    if params.k is None:
        raise ValueError("the expmech engine needs an explicit support size k")
    h = exponential_mechanism(h_star, F, params.epsilon, params.zeta, params.k, rng)
    bound = expmech_alpha_bound(h_star.total_mass, h_star.size, len(F), params.epsilon, params.zeta, params.beta)
    return EngineRun(F.answers(h), h, False, bound, PrivacyBudget(params.epsilon, 0.0))


def _laplace_engine(h_star, F, params: EngineParams, rng) -> EngineRun:
    est = laplace_per_query_baseline(h_star, F, params.epsilon, rng)
    # (|F|/eps) ln(|F|/beta) bounds every query's noise w.p. 1 - beta
    bound = len(F) / params.epsilon * math.log(len(F) / params.beta)
    return EngineRun(est, None, False, bound, PrivacyBudget(params.epsilon, 0.0))


ENGINES: dict[str, Callable[..., EngineRun]] = {
    "prem": _prem_engine(pure=False),
    "prem-pure": _prem_engine(pure=True),
    "expmech": _expmech_engine,
    "laplace": _laplace_engine,
}


def run_engine(name: str, h_star: Histogram, F: QueryFamily, params: EngineParams, rng) -> EngineRun:
    try:
        engine = ENGINES[name]
    except KeyError:
        raise ValueError(f"unknown engine {name!r}; expected one of {sorted(ENGINES)}") from None
    if name == "prem" and not params.delta > 0:
        raise ValueError("engine 'prem' needs delta > 0; use 'prem-pure' for delta = 0")
    return engine(h_star, F, params, rng)


# --- sweeps --------------------------------------------------------------


def synthetic_population(domain_size: int, n: int, seed: int, skew: float = 1.1) -> Histogram:
    """n records from a fixed Zipf-like distribution over a shuffled domain."""
    rng = np.random.default_rng([seed, 0])
    ranks = rng.permutation(domain_size) + 1
    p = ranks.astype(float) ** -skew
    p /= p.sum()
    records = np.random.default_rng([seed, n]).choice(domain_size, size=n, p=p)
    return histogram_from_records(records, domain_size)


def _min_count_relative_error(est: np.ndarray, true: np.ndarray) -> float | None:
    nonzero = np.flatnonzero(true > 0)
    if nonzero.size == 0:
        return None
    j = nonzero[np.argmin(true[nonzero])]
    return float(abs(est[j] - true[j]) / true[j])


def scaling_sweep(
    engine: str,
    workload: WorkloadSpec,
    n_grid,
    trials: int,
    params: EngineParams,
    domain: Domain | int = 64,
    seed: int = 0,
) -> dict:
    """Per-n statistics of measured alpha over independent trials.

    Data for each n is drawn once from :func:`synthetic_population`; trial t
    reruns the engine with seed (seed, n, t). Engine errors count as failed
    trials; grid points failing more than half their trials are flagged.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {sorted(ENGINES)}")
    if isinstance(domain, int):
        domain = Domain(domain)
    F = generate_workload(workload, domain)
    grid = []
    for n in n_grid:
        n = int(n)
        h_star = synthetic_population(domain.size, n, seed)
        true = F.answers(h_star)
        rows = []
        derived = None
        for t in range(trials):
            trial_seed = [seed, n, t]
            start = time.perf_counter()
            try:
                run = run_engine(engine, h_star, F, params, np.random.default_rng(trial_seed))
            except (ValueError, ArithmeticError) as exc:
                rows.append({"seed": trial_seed, "measured_alpha": None, "runtime_ms": 0.0,
                             "failed": True, "error": str(exc)})
                continue
            elapsed = (time.perf_counter() - start) * 1000
            derived = run.derived_alpha
            a = audit_estimates(run.estimates, true, params.zeta)
            rows.append({
                "seed": trial_seed,
                "measured_alpha": a.measured_alpha,
                "runtime_ms": elapsed,
                "failed": bool(run.failed),
                "additive_error": float(np.max(np.abs(run.estimates - true))),
                "min_count_relative_error": _min_count_relative_error(run.estimates, true),
            })
        grid.append({"n": n, "trials": rows, "summary": _summarize(rows, derived)})
    return {
        "engine": engine,
        "params": {**params.to_dict(), "workload": workload.to_dict(), "domain_size": domain.size,
                   "trials": trials, "seed": seed},
        "grid": grid,
    }


def _summarize(rows: list[dict], derived_alpha) -> dict:
    alphas = [r["measured_alpha"] for r in rows if r["measured_alpha"] is not None]
    rel = [r["min_count_relative_error"] for r in rows if r.get("min_count_relative_error") is not None]
    add = [r["additive_error"] for r in rows if "additive_error" in r]
    failures = sum(r["failed"] for r in rows)
    rate = failures / len(rows) if rows else 0.0
    return {
        "median_alpha": float(np.median(alphas)) if alphas else None,
        "p90_alpha": float(np.percentile(alphas, 90)) if alphas else None,
        "median_additive_error": float(np.median(add)) if add else None,
        "median_min_count_relative_error": float(np.median(rel)) if rel else None,
        "median_runtime_ms": float(np.median([r["runtime_ms"] for r in rows])) if rows else None,
        "derived_alpha": derived_alpha,
        "failure_rate": rate,
        "flagged": rate > 0.5,
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def report_from_json(text: str) -> dict:
    report = json.loads(text)
    for key in ("engine", "params", "grid"):
        if key not in report:
            raise ValueError(f"report is missing {key!r}")
    for point in report["grid"]:
        if "n" not in point or "trials" not in point:
            raise ValueError("grid entries need 'n' and 'trials'")
        for trial in point["trials"]:
            missing = {"seed", "measured_alpha", "runtime_ms", "failed"} - trial.keys()
            if missing:
                raise ValueError(f"trial entry missing {sorted(missing)}")
    return report


def report_to_csv(report: dict) -> str:
    lines = ["engine,n,seed,measured_alpha,runtime_ms,failed,additive_error,min_count_relative_error"]
    for point in report["grid"]:
        for t in point["trials"]:
            seed = "-".join(str(s) for s in t["seed"]) if isinstance(t["seed"], list) else t["seed"]
            vals = [report["engine"], point["n"], seed, t["measured_alpha"], t["runtime_ms"], t["failed"],
                    t.get("additive_error"), t.get("min_count_relative_error")]
            lines.append(",".join("" if v is None else str(v) for v in vals))
    return "\n".join(lines) + "\n"
