"""Grid sweeps joining theory and Monte Carlo, and their CSV serialization."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .expectations import PriorSpec
from .lab import ExperimentConfig, FistaKnobs, aggregate, run_trial
from .prox import RegularizerSpec
from .solver import InfeasiblePointError, ProblemSpec, SolverError, SolverKnobs, theory_report

log = logging.getLogger(__name__)

COLUMNS = [
    "delta", "lambda", "kappa", "reg", "s",
    "th_alpha", "th_sigma2", "th_mse_raw", "th_mse_debiased", "th_e1", "th_e2", "th_residual",
    "emp_alpha_mean", "emp_alpha_se", "emp_sigma2_mean", "emp_sigma2_se",
    "emp_mse_mean", "emp_mse_se", "emp_e1_mean", "emp_e1_se", "emp_e2_mean", "emp_e2_se",
    "trials_converged", "runtime_ms", "th_status",
]

# CSV metric name -> TrialResult field
EMPIRICAL = {"alpha": "alpha_hat", "sigma2": "sigma2_hat", "mse": "mse_raw", "e1": "e1_hat", "e2": "e2_hat"}

STATUS_OK = "ok"
STATUS_NONCONVERGED = "nonconverged"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class SweepConfig:
    reg: str = "l2sq"
    kappa: float = 1.0
    sparsity: float = 1.0
    deltas: tuple = (4.0,)
    lambdas: tuple = (0.5,)
    solver: SolverKnobs = field(default_factory=SolverKnobs)
    p: int = 250
    trials: int = 0
    master_seed: int = 0
    epsilon: float = 1e-3
    fista: FistaKnobs = field(default_factory=FistaKnobs)
    workers: int = 1

    def prior(self) -> PriorSpec:
        if self.sparsity < 1:
            return PriorSpec("sparse", self.kappa, self.sparsity)
        return PriorSpec("gaussian", self.kappa)

    def spec(self, delta: float, lam: float) -> ProblemSpec:
        return ProblemSpec(self.kappa, delta, lam, RegularizerSpec(self.reg), self.prior())

    def cells(self):
        return [(d, l) for d in sorted(set(self.deltas)) for l in sorted(set(self.lambdas))]

    def validate(self):
        """Raise ValueError naming the offending field."""
        RegularizerSpec(self.reg)
        if not self.kappa > 0:
            raise ValueError("kappa: must be positive")
        if not 0 < self.sparsity <= 1:
            raise ValueError("sparsity: must lie in (0, 1]")
        if not self.deltas or any(not d > 0 for d in self.deltas):
            raise ValueError("delta: values must be positive")
        if not self.lambdas or any(not l >= 0 for l in self.lambdas):
            raise ValueError("lambda: values must be nonnegative")
        if self.reg == "l1" and any(l == 0 for l in self.lambdas):
            raise ValueError("lambda: lambda = 0 is unsupported with --reg l1; use --reg none for the unregularized fit")
        if self.reg == "none" and any(l != 0 for l in self.lambdas):
            raise ValueError("lambda: --reg none requires lambda = 0")
        if self.trials < 0:
            raise ValueError("trials: must be nonnegative")
        if self.p < 1:
            raise ValueError("p: must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon: must be positive")
        if self.workers < 1:
            raise ValueError("workers: must be positive")
        for d in self.deltas:
            if int(round(d * self.p)) < 1 and self.trials > 0:
                raise ValueError("delta: round(delta * p) must be at least 1")


@dataclass
class SweepRow:
    delta: float
    lam: float
    kappa: float
    reg: str
    s: float
    theory: dict
    status: str
    empirical: dict | None = None
    trials_converged: int | None = None
    runtime_ms: float | None = None

    def values(self, timing: bool = False) -> dict:
        out = {
            "delta": self.delta, "lambda": self.lam, "kappa": self.kappa, "reg": self.reg, "s": self.s,
            "th_status": self.status,
        }
        for k in ("alpha", "sigma2", "mse_raw", "mse_debiased", "e1", "e2", "residual"):
            out[f"th_{k}"] = self.theory.get(k)
        if self.empirical is not None:
            for k in EMPIRICAL:
                out[f"emp_{k}_mean"] = self.empirical[k][0]
                out[f"emp_{k}_se"] = self.empirical[k][1]
            out["trials_converged"] = self.trials_converged
        if timing:
            out["runtime_ms"] = self.runtime_ms
        return out


def _theory_cell(cfg: SweepConfig, delta: float, lam: float):
    t0 = time.perf_counter()
    spec = cfg.spec(delta, lam)
    try:
        rep = theory_report(spec, cfg.solver)
    except (SolverError, InfeasiblePointError) as exc:
        log.error("theory failed at delta=%g lambda=%g: %s", delta, lam, exc)
        return {}, STATUS_FAILED, (time.perf_counter() - t0) * 1e3
    th = {
        "alpha": rep.correlation, "sigma2": rep.variance, "mse_raw": rep.mse_raw,
        "mse_debiased": rep.mse_debiased, "residual": rep.residual,
    }
    if rep.support is not None:
        th["e1"], th["e2"] = rep.support.e1, rep.support.e2
    status = STATUS_OK if rep.converged else STATUS_NONCONVERGED
    return th, status, (time.perf_counter() - t0) * 1e3


def _trial_task(cfg: SweepConfig, delta: float, index: int):
    """One data draw at ``delta`` fitted along the whole lambda grid."""
    t0 = time.perf_counter()
    lambdas = sorted(set(cfg.lambdas))
    exp = ExperimentConfig(cfg.p, cfg.spec(delta, lambdas[0]), 1, cfg.master_seed, cfg.epsilon, cfg.fista)
    results = run_trial(exp, index, lambdas)
    return results, (time.perf_counter() - t0) * 1e3


def _map(fn, args, workers):
    if workers > 1 and len(args) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, *zip(*args)))
    return [fn(*a) for a in args]


def run_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """Theory (and, if ``cfg.trials`` > 0, Monte Carlo) for every (delta, lambda) cell.

    Trial ``i`` at a given delta uses the same seed for every lambda, so the
    lambda curve of one draw is traced with warm starts. Rows come back
    sorted by (delta, lambda) whatever the worker count.
    """
    cfg.validate()
    cells = cfg.cells()
    theory = _map(_theory_cell, [(cfg, d, l) for d, l in cells], cfg.workers)
    s = cfg.sparsity
    rows = [
        SweepRow(d, l, cfg.kappa, cfg.reg, s, th, status, runtime_ms=ms)
        for (d, l), (th, status, ms) in zip(cells, theory)
    ]
    if cfg.trials > 0:
        deltas = sorted(set(cfg.deltas))
        lambdas = sorted(set(cfg.lambdas))
        tasks = [(cfg, d, i) for d in deltas for i in range(cfg.trials)]
        out = _map(_trial_task, tasks, cfg.workers)
        by_delta = {d: [] for d in deltas}
        cost = {d: 0.0 for d in deltas}
        for (_, d, _), (results, ms) in zip(tasks, out):
            by_delta[d].append(results)
            cost[d] += ms
        for row in rows:
            j = lambdas.index(row.lam)
            agg = aggregate([trial[j] for trial in by_delta[row.delta]])
            row.empirical = {k: (agg.mean[f], agg.se[f]) for k, f in EMPIRICAL.items()}
            if not (cfg.reg == "l1" and s < 1):
                row.empirical["e1"] = row.empirical["e2"] = (None, None)
            row.trials_converged = agg.trials_converged
            row.runtime_ms += cost[row.delta] / len(lambdas)
    return rows


def format_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def write_csv(rows, stream, timing: bool = False) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        vals = row.values(timing)
        w.writerow([format_value(vals.get(c)) for c in COLUMNS])


def to_csv(rows, timing: bool = False) -> str:
    buf = io.StringIO()
    write_csv(rows, buf, timing)
    return buf.getvalue()


def theory_only(cfg: SweepConfig) -> SweepConfig:
    return replace(cfg, trials=0)
