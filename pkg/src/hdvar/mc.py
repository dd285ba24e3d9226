"""Monte Carlo harness: the four experiment designs, the six reported metrics,
and a seeded replication loop whose output is independent of worker count.

Replication r uses seed base_seed + r; aggregation folds results in
replication order, so reports are bit-identical for any number of workers.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import estimators, theory, var
from .errors import UnknownCombination

__all__ = [
    "EXPERIMENT_GRID",
    "ExperimentSpec",
    "McRow",
    "McReport",
    "make_dgp",
    "rmse",
    "rmsfe",
    "selection_metrics",
    "run_experiment",
    "report_to_csv",
    "report_to_json",
]

# (experiment, k) combinations the harness accepts; T varies freely.
EXPERIMENT_GRID = {
    "A": (10, 20, 50, 100),
    "B": (10, 20, 50),
    "C": (10, 20, 50),
    "D": (10, 20, 50),
}

NOISE_VARIANCE = 0.01


def make_dgp(experiment: str, k: int):
    """Model and true sparsity structure for one of the four designs.

    A: VAR(1), Phi_1 = 0.5 I (own lag only).
    B: VAR(4), 5x5 block-diagonal, Phi_1 blocks 0.15, Phi_4 blocks -0.1.
    C: VAR(5), Phi_j = (-0.95)^(j-1) Phi_1 with Phi_1 = 0.95 I.
    D: VAR(1), entry (i,j) = (-1)^|i-j| 0.4^(|i-j|+1): dense, no zeros.
    All use innovation covariance 0.01 I.
    """
    experiment = experiment.upper()
    if experiment not in EXPERIMENT_GRID or k not in EXPERIMENT_GRID[experiment]:
        raise UnknownCombination(f"experiment {experiment!r} with k={k} is not in the design")
    sigma = NOISE_VARIANCE * np.eye(k)
    if experiment == "A":
        phis = (0.5 * np.eye(k),)
    elif experiment == "B":
        block1 = 0.15 * np.ones((5, 5))
        block4 = -0.1 * np.ones((5, 5))
        eye_blocks = np.eye(k // 5)
        phis = (
            np.kron(eye_blocks, block1),
            np.zeros((k, k)),
            np.zeros((k, k)),
            np.kron(eye_blocks, block4),
        )
    elif experiment == "C":
        phi1 = 0.95 * np.eye(k)
        phis = tuple(((-0.95) ** (j - 1)) * phi1 for j in range(1, 6))
    else:  # D
        rows, cols = np.indices((k, k))
        dist = np.abs(rows - cols)
        phis = (((-1.0) ** dist) * 0.4 ** (dist + 1),)
    model = var.VarModel(phis=phis, sigma=sigma)
    truth = estimators.SparsityInfo.from_coefficients(var.coefficient_matrix(model))
    return model, truth


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    k: int
    T: int
    n_reps: int = 100
    base_seed: int = 0
    estimators: tuple = ("lasso",)
    theory_checks: bool = False
    n_lambda: int = 100
    lambda_ratio: float = 1e-4

    def __post_init__(self):
        exp = self.experiment.upper()
        if exp not in EXPERIMENT_GRID or self.k not in EXPERIMENT_GRID[exp]:
            raise UnknownCombination(f"experiment {exp!r} with k={self.k} is not in the design")
        object.__setattr__(self, "experiment", exp)
        for tag in self.estimators:
            if tag not in estimators.ESTIMATOR_TAGS:
                raise ValueError(f"unknown estimator tag {tag!r}")
        object.__setattr__(self, "estimators", tuple(self.estimators))


@dataclass
class McRow:
    estimator: str
    true_model_uncovered: float
    true_model_included: float
    share_relevant: float
    n_selected: float
    rmse: float
    rmsfe: float
    infeasible: bool
    n_failed: int


@dataclass
class McReport:
    spec: ExperimentSpec
    rows: dict
    seeds: tuple
    event_frequencies: dict | None = None
    runtime_seconds: float = field(default=0.0, compare=False)
    # runtime stays out of serialized reports so reruns are byte-identical


def rmse(fits, truth) -> float:
    """sqrt(mean over replications of ||beta_hat - beta*||_F^2) over the system."""
    if not fits:
        raise ValueError("need at least one replication")
    errs = [float(np.sum((f.coefficients - truth.beta) ** 2)) for f in fits]
    return float(math.sqrt(np.mean(errs)))


def rmsfe(forecasts, realized, k: int) -> float:
    """sqrt((1/k) * mean over replications of ||yhat_{T+1} - y_{T+1}||^2)."""
    if len(forecasts) != len(realized) or not len(forecasts):
        raise ValueError("forecast/realized length mismatch")
    errs = [float(np.sum((np.asarray(f) - np.asarray(y)) ** 2)) for f, y in zip(forecasts, realized)]
    return float(math.sqrt(np.mean(errs) / k))


def selection_metrics(fits, truth):
    """(uncovered, included, share of relevant, mean selected count) over the system."""
    if not fits:
        raise ValueError("need at least one replication")
    total_s = int(truth.s.sum())
    uncovered = []
    included = []
    share = []
    n_sel = []
    for f in fits:
        actives = [set(eq.active_set.tolist()) for eq in f.fits]
        joints = [set(J.tolist()) for J in truth.supports]
        uncovered.append(all(a == j for a, j in zip(actives, joints)))
        included.append(all(j <= a for a, j in zip(actives, joints)))
        hit = sum(len(a & j) for a, j in zip(actives, joints))
        share.append(hit / total_s if total_s else 1.0)
        n_sel.append(sum(len(a) for a in actives))
    return (
        float(np.mean(uncovered)),
        float(np.mean(included)),
        float(np.mean(share)),
        float(np.mean(n_sel)),
    )


def _run_replication(spec: ExperimentSpec, model, truth, r: int, kappa_sbar_sq):
    seed = spec.base_seed + r
    full = var.simulate(model, spec.T + 1, seed=seed)
    data = var.truncate_dataset(full, spec.T)
    realized = full.path[spec.T]
    out = {"rep": r, "seed": seed, "realized": realized, "fits": {}, "forecasts": {}}
    for tag in spec.estimators:
        fit = estimators.fit_system(
            data, tag, truth=truth, n_lambda=spec.n_lambda, ratio=spec.lambda_ratio
        )
        out["fits"][tag] = fit
        out["forecasts"][tag] = var.forecast_one_step(fit.coefficients, data)
    if spec.theory_checks:
        flags = theory.event_flags(
            data, model, truth, theory.TheoryParams(), kappa_sbar_sq=kappa_sbar_sq
        )
        out["events"] = flags
    return out


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> McReport:
    """Run all replications and aggregate the six metrics per estimator.

    Per-estimator infeasibility (singular design, oversized active set) is
    recorded, not fatal: metrics of an estimator with any failed replication
    are reported as NaN with the failure count, mirroring blank table cells.
    """
    start = time.perf_counter()
    model, truth = make_dgp(spec.experiment, spec.k)
    kappa_sbar_sq = None
    if spec.theory_checks:
        gamma = var.population_gamma(model)
        kappa_sbar_sq = theory.restricted_eigenvalue(gamma, max(int(truth.s_bar), 1))
    reps = range(spec.n_reps)
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    _run_replication,
                    *zip(*[(spec, model, truth, r, kappa_sbar_sq) for r in reps]),
                    chunksize=max(1, spec.n_reps // (4 * threads)),
                )
            )
    else:
        results = [_run_replication(spec, model, truth, r, kappa_sbar_sq) for r in reps]
    results.sort(key=lambda d: d["rep"])

    rows = {}
    for tag in spec.estimators:
        fits = [res["fits"][tag] for res in results]
        n_failed = sum(not f.feasible for f in fits)
        if n_failed:
            rows[tag] = McRow(tag, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan, True, n_failed)
            continue
        unc, inc, share, nsel = selection_metrics(fits, truth)
        rows[tag] = McRow(
            estimator=tag,
            true_model_uncovered=unc,
            true_model_included=inc,
            share_relevant=share,
            n_selected=nsel,
            rmse=rmse(fits, truth),
            rmsfe=rmsfe(
                [res["forecasts"][tag] for res in results],
                [res["realized"] for res in results],
                spec.k,
            ),
            infeasible=False,
            n_failed=0,
        )
    events = None
    if spec.theory_checks:
        flags = [res["events"] for res in results]
        events = {
            "b_t": float(np.mean([f.b_t for f in flags])),
            "c_t": float(np.mean([f.c_t for f in flags])),
            "d_t": float(np.mean([f.d_t for f in flags])),
            "max_cross_mean": float(np.mean([f.max_cross for f in flags])),
            "max_cov_dev_mean": float(np.mean([f.max_cov_dev for f in flags])),
            "max_yy_mean": float(np.mean([f.max_yy for f in flags])),
            "lambda_t": flags[0].lambda_t if flags else np.nan,
            "k_t": flags[0].k_t if flags else np.nan,
            "c_t_threshold": flags[0].c_t_threshold if flags else np.nan,
        }
    return McReport(
        spec=spec,
        rows=rows,
        seeds=tuple(spec.base_seed + r for r in reps),
        event_frequencies=events,
        runtime_seconds=time.perf_counter() - start,
    )


_CSV_COLUMNS = [
    "estimator",
    "true_model_uncovered",
    "true_model_included",
    "share_relevant",
    "n_selected",
    "rmse",
    "rmsfe",
    "infeasible",
    "n_failed",
]


def _fmt(value) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""  # infeasible entries render as blank cells
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv(report: McReport, path: str) -> None:
    """One row per estimator, columns = the six metrics plus feasibility."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for tag in report.spec.estimators:
            row = report.rows[tag]
            writer.writerow(
                [
                    _fmt(v)
                    for v in (
                        row.estimator,
                        row.true_model_uncovered,
                        row.true_model_included,
                        row.share_relevant,
                        row.n_selected,
                        row.rmse,
                        row.rmsfe,
                        row.infeasible,
                        row.n_failed,
                    )
                ]
            )


def _nan_to_none(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def report_to_json(report: McReport, path: str) -> None:
    spec = report.spec
    payload = {
        "experiment": spec.experiment,
        "k": spec.k,
        "T": spec.T,
        "n_reps": spec.n_reps,
        "base_seed": spec.base_seed,
        "n_lambda": spec.n_lambda,
        "lambda_ratio": spec.lambda_ratio,
        "seeds": list(report.seeds),
        "estimators": {
            tag: {
                "true_model_uncovered": _nan_to_none(row.true_model_uncovered),
                "true_model_included": _nan_to_none(row.true_model_included),
                "share_relevant": _nan_to_none(row.share_relevant),
                "n_selected": _nan_to_none(row.n_selected),
                "rmse": _nan_to_none(row.rmse),
                "rmsfe": _nan_to_none(row.rmsfe),
                "infeasible": row.infeasible,
                "n_failed": row.n_failed,
            }
            for tag, row in ((t, report.rows[t]) for t in spec.estimators)
        },
        "event_frequencies": report.event_frequencies,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
