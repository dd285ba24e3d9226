"""Equation-by-equation estimation pipelines and BIC penalty selection.

Estimator tags: lasso, post_lasso, adaptive_lasso_lasso, adaptive_lasso_ridge,
oracle_ols, full_ols.  Infeasible combinations (e.g. full OLS with more
regressors than observations) yield explicit infeasible markers instead of
exceptions, so reports carry blank cells instead of aborting the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import var
from .errors import SingularDesign
from .linalg import least_squares
from .solver import lambda_max, lasso_path, ridge

__all__ = [
    "ESTIMATOR_TAGS",
    "SparsityInfo",
    "EquationFit",
    "SystemFit",
    "bic",
    "fit_lasso_bic",
    "fit_post_lasso",
    "fit_adaptive_lasso",
    "fit_ridge_bic",
    "fit_oracle_ols",
    "fit_full_ols",
    "fit_equation",
    "fit_system",
    "system_fit_to_dict",
    "system_fit_from_dict",
    "save_system_fit",
    "load_system_fit",
]

ESTIMATOR_TAGS = (
    "lasso",
    "post_lasso",
    "adaptive_lasso_lasso",
    "adaptive_lasso_ridge",
    "oracle_ols",
    "full_ols",
)


@dataclass(frozen=True)
class SparsityInfo:
    """True sparsity structure of a system: supports, cardinalities, minimal signals."""

    beta: np.ndarray  # k x kp true coefficients
    supports: tuple  # per-equation index arrays J_i
    s: np.ndarray  # per-equation |J_i|
    s_bar: int
    beta_min_i: np.ndarray
    beta_min: float

    @classmethod
    def from_coefficients(cls, beta: np.ndarray) -> "SparsityInfo":
        beta = np.asarray(beta, dtype=np.float64)
        supports = tuple(np.flatnonzero(row) for row in beta)
        s = np.array([len(J) for J in supports])
        mins = np.array([np.abs(row[J]).min() if len(J) else np.inf for row, J in zip(beta, supports)])
        return cls(
            beta=beta,
            supports=supports,
            s=s,
            s_bar=int(s.max()) if len(s) else 0,
            beta_min_i=mins,
            beta_min=float(mins.min()) if len(mins) else np.inf,
        )


@dataclass
class EquationFit:
    beta: np.ndarray
    active_set: np.ndarray
    lambda_selected: float
    estimator_tag: str
    bic_value: float
    df: float
    rss: float
    converged: bool = True
    feasible: bool = True
    failure: str | None = None

    @classmethod
    def infeasible(cls, m: int, tag: str, reason: str) -> "EquationFit":
        return cls(
            beta=np.zeros(m),
            active_set=np.array([], dtype=np.intp),
            lambda_selected=np.nan,
            estimator_tag=tag,
            bic_value=np.nan,
            df=np.nan,
            rss=np.nan,
            converged=False,
            feasible=False,
            failure=reason,
        )


@dataclass
class SystemFit:
    estimator_tag: str
    fits: tuple
    coefficients: np.ndarray  # k x kp
    k: int
    p: int

    @property
    def feasible(self) -> bool:
        return all(f.feasible for f in self.fits)


def bic(rss: float, df: float, T: int) -> float:
    """log(RSS) + (log T / T) * df; a perfect fit returns the -inf sentinel."""
    if rss <= 0.0:
        return -np.inf
    return float(np.log(rss) + np.log(T) / T * df)


def _active_set(beta: np.ndarray) -> np.ndarray:
    return np.flatnonzero(beta)


def _rss(problem: var.RegressionProblem, i: int, beta: np.ndarray) -> float:
    r = problem.ys[i] - problem.X @ beta
    return float(r @ r)


def _select_by_bic(problem, i, path, T):
    """Grid argmin of BIC with df = active-set size; ties resolve to larger lambda."""
    values = []
    for lam, res in path:
        rss = _rss(problem, i, res.beta)
        values.append((bic(rss, float(len(_active_set(res.beta))), T), rss, lam, res))
    best = min(range(len(values)), key=lambda idx: values[idx][0])  # first onset = largest lambda
    return values[best]


def _ols_on(problem: var.RegressionProblem, i: int, idx: np.ndarray, tag: str) -> EquationFit:
    m = problem.m
    T = problem.T
    beta = np.zeros(m)
    if len(idx):
        coef = least_squares(problem.X[:, idx], problem.ys[i])
        beta[idx] = coef
    rss = _rss(problem, i, beta)
    return EquationFit(
        beta=beta,
        active_set=_active_set(beta),
        lambda_selected=0.0,
        estimator_tag=tag,
        bic_value=bic(rss, float(len(idx)), T),
        df=float(len(idx)),
        rss=rss,
    )


def fit_lasso_bic(
    problem: var.RegressionProblem,
    i: int,
    n_lambda: int = 100,
    ratio: float = 1e-4,
    tol: float = 1e-7,
    max_iter: int = 1000,
) -> EquationFit:
    """LASSO with the penalty chosen by BIC over a log-spaced grid."""
    path = lasso_path(problem.X, problem.ys[i], n_lambda=n_lambda, ratio=ratio, tol=tol, max_iter=max_iter)
    bval, rss, lam, res = _select_by_bic(problem, i, path, problem.T)
    active = _active_set(res.beta)
    return EquationFit(
        beta=res.beta,
        active_set=active,
        lambda_selected=lam,
        estimator_tag="lasso",
        bic_value=bval,
        df=float(len(active)),
        rss=rss,
        converged=res.converged,
    )


def fit_post_lasso(problem: var.RegressionProblem, i: int, lasso_fit: EquationFit | None = None, **opts) -> EquationFit:
    """Least squares refit on the LASSO active set (zeros elsewhere)."""
    if lasso_fit is None:
        lasso_fit = fit_lasso_bic(problem, i, **opts)
    active = lasso_fit.active_set
    if len(active) >= problem.T:
        return EquationFit.infeasible(problem.m, "post_lasso", "too_many_selected")
    try:
        fit = _ols_on(problem, i, active, "post_lasso")
    except SingularDesign:
        return EquationFit.infeasible(problem.m, "post_lasso", "singular_design")
    fit.lambda_selected = lasso_fit.lambda_selected
    return fit


def fit_ridge_bic(problem: var.RegressionProblem, i: int, n_lambda: int, ratio: float):
    """Ridge first-stage: BIC over the lasso grid scaled by T, df from the trace formula."""
    X, y, T = problem.X, problem.ys[i], problem.T
    lmax = lambda_max(X, y)
    if lmax == 0.0:
        lmax = 1.0
    grid = T * lmax * np.logspace(0.0, np.log10(ratio), n_lambda)
    best = None
    for lam in grid:
        beta, df = ridge(X, y, float(lam))
        r = y - X @ beta
        val = bic(float(r @ r), df, T)
        if best is None or val < best[0]:
            best = (val, float(lam), beta)
    return best[2], best[1]


def fit_adaptive_lasso(
    problem: var.RegressionProblem,
    i: int,
    init: str = "lasso",
    n_lambda: int = 100,
    ratio: float = 1e-4,
    tol: float = 1e-7,
    max_iter: int = 1000,
) -> EquationFit:
    """Two-stage weighted LASSO with weights 1/|first-stage coefficient|.

    Coordinates zeroed by the first stage get infinite weight (hard exclusion);
    the stage-two grid is recomputed from the weighted lambda_max and the
    penalty is again chosen by BIC.
    """
    tag = f"adaptive_lasso_{init}"
    if init == "lasso":
        first = fit_lasso_bic(problem, i, n_lambda=n_lambda, ratio=ratio, tol=tol, max_iter=max_iter)
        stage1 = first.beta
    elif init == "ridge":
        stage1, _ = fit_ridge_bic(problem, i, n_lambda, ratio)
    else:
        raise ValueError(f"unknown first-stage estimator: {init}")
    with np.errstate(divide="ignore"):
        weights = np.where(stage1 != 0.0, 1.0 / np.abs(stage1), np.inf)
    if not np.isfinite(weights).any():
        # empty first stage: nothing to refit
        return EquationFit(
            beta=np.zeros(problem.m),
            active_set=np.array([], dtype=np.intp),
            lambda_selected=0.0,
            estimator_tag=tag,
            bic_value=bic(_rss(problem, i, np.zeros(problem.m)), 0.0, problem.T),
            df=0.0,
            rss=_rss(problem, i, np.zeros(problem.m)),
        )
    path = lasso_path(
        problem.X, problem.ys[i], weights=weights, n_lambda=n_lambda, ratio=ratio, tol=tol, max_iter=max_iter
    )
    bval, rss, lam, res = _select_by_bic(problem, i, path, problem.T)
    active = _active_set(res.beta)
    return EquationFit(
        beta=res.beta,
        active_set=active,
        lambda_selected=lam,
        estimator_tag=tag,
        bic_value=bval,
        df=float(len(active)),
        rss=rss,
        converged=res.converged,
    )


def fit_oracle_ols(problem: var.RegressionProblem, i: int, truth: SparsityInfo) -> EquationFit:
    """Infeasible benchmark: least squares on the true support only."""
    J = truth.supports[i]
    if len(J) >= problem.T:
        return EquationFit.infeasible(problem.m, "oracle_ols", "support_larger_than_sample")
    try:
        return _ols_on(problem, i, J, "oracle_ols")
    except SingularDesign:
        return EquationFit.infeasible(problem.m, "oracle_ols", "singular_design")


def fit_full_ols(problem: var.RegressionProblem, i: int) -> EquationFit:
    """Least squares on all kp regressors; infeasible when the design is singular."""
    if problem.m >= problem.T:
        return EquationFit.infeasible(problem.m, "full_ols", "more_regressors_than_observations")
    try:
        return _ols_on(problem, i, np.arange(problem.m), "full_ols")
    except SingularDesign:
        return EquationFit.infeasible(problem.m, "full_ols", "singular_design")


def fit_equation(problem, i, tag, truth=None, **opts) -> EquationFit:
    if tag == "lasso":
        return fit_lasso_bic(problem, i, **opts)
    if tag == "post_lasso":
        return fit_post_lasso(problem, i, **opts)
    if tag == "adaptive_lasso_lasso":
        return fit_adaptive_lasso(problem, i, init="lasso", **opts)
    if tag == "adaptive_lasso_ridge":
        return fit_adaptive_lasso(problem, i, init="ridge", **opts)
    if tag == "oracle_ols":
        if truth is None:
            raise ValueError("oracle_ols requires the true sparsity structure")
        return fit_oracle_ols(problem, i, truth)
    if tag == "full_ols":
        return fit_full_ols(problem, i)
    raise ValueError(f"unknown estimator tag: {tag}")


def fit_system(data: var.Dataset, tag: str, truth: SparsityInfo | None = None, **opts) -> SystemFit:
    """Apply the chosen per-equation fit to all k equations."""
    problem = stack_cached(data)
    fits = tuple(fit_equation(problem, i, tag, truth=truth, **opts) for i in range(problem.k))
    coef = np.vstack([f.beta for f in fits])
    return SystemFit(estimator_tag=tag, fits=fits, coefficients=coef, k=problem.k, p=problem.p)


def stack_cached(data: var.Dataset) -> var.RegressionProblem:
    """Stack once per dataset object (fit_system is called per estimator tag)."""
    prob = data._cache.get("stacked")
    if prob is None:
        prob = var.stack(data)
        data._cache["stacked"] = prob
    return prob


def system_fit_to_dict(fit: SystemFit) -> dict:
    kp = fit.coefficients.shape[1]
    return {
        "estimator": fit.estimator_tag,
        "k": fit.k,
        "p": fit.p,
        "lambda_per_equation": [float(f.lambda_selected) for f in fit.fits],
        "beta": [float(v) for v in fit.coefficients.reshape(-1)],
        "active_sets": [[int(j) for j in f.active_set] for f in fit.fits],
        "feasible": [bool(f.feasible) for f in fit.fits],
        "kp": kp,
    }


def system_fit_from_dict(d: dict) -> SystemFit:
    k, p, kp = int(d["k"]), int(d["p"]), int(d["kp"])
    coef = np.asarray(d["beta"], dtype=np.float64).reshape(k, kp)
    fits = []
    for i in range(k):
        beta = coef[i]
        fits.append(
            EquationFit(
                beta=beta,
                active_set=np.asarray(d["active_sets"][i], dtype=np.intp),
                lambda_selected=float(d["lambda_per_equation"][i]),
                estimator_tag=d["estimator"],
                bic_value=np.nan,
                df=float(len(d["active_sets"][i])),
                rss=np.nan,
                feasible=bool(d["feasible"][i]),
            )
        )
    return SystemFit(estimator_tag=d["estimator"], fits=tuple(fits), coefficients=coef, k=k, p=p)


def save_system_fit(fit: SystemFit, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(system_fit_to_dict(fit), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_system_fit(path: str) -> SystemFit:
    with open(path) as fh:
        return system_fit_from_dict(json.load(fh))
