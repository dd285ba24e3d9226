"""VAR(p) models: companion form, simulation, population moments, stacked regression.

Time ordering convention: the design matrix rows run in ascending time
t = 1..T (estimators are invariant to row permutations and ascending order
keeps forecasting simple).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import NotStationary
from .linalg import lyapunov_doubling, spectral_radius

__all__ = [
    "VarModel",
    "CompanionForm",
    "Dataset",
    "RegressionProblem",
    "make_rng",
    "companion",
    "simulate",
    "population_gamma",
    "sigma_t",
    "stack",
    "forecast_one_step",
    "lagged_state",
    "coefficient_matrix",
    "truncate_dataset",
    "save_dataset",
    "load_dataset",
]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) seeded deterministically.

    Replication r of a Monte Carlo run uses seed = base_seed + r, which gives
    non-overlapping streams regardless of execution order.
    """
    return np.random.Generator(np.random.Philox(seed))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class VarModel:
    """Coefficient matrices Phi_1..Phi_p and innovation covariance."""

    phis: tuple
    sigma: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        phis = tuple(_freeze(P) for P in self.phis)
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "sigma", _freeze(self.sigma))
        k = self.sigma.shape[0]
        if self.sigma.shape != (k, k):
            raise ValueError("sigma must be square")
        if np.abs(self.sigma - self.sigma.T).max() > 1e-10 * max(np.abs(self.sigma).max(), 1e-300):
            raise ValueError("sigma must be symmetric")
        if len(phis) == 0:
            raise ValueError("at least one lag matrix required")
        for P in phis:
            if P.shape != (k, k):
                raise ValueError("each Phi_l must be k x k")

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    @property
    def p(self) -> int:
        return len(self.phis)


@dataclass(frozen=True)
class CompanionForm:
    """VAR(1) rewrite: state Z_t = (y_{t-1}',...,y_{t-p}')'."""

    F: np.ndarray
    omega: np.ndarray
    rho: float


@dataclass(frozen=True)
class Dataset:
    """p initial observations plus T estimation observations (rows are time points)."""

    k: int
    p: int
    T: int
    initial: np.ndarray
    path: np.ndarray
    innovations: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "initial", _freeze(self.initial))
        object.__setattr__(self, "path", _freeze(self.path))
        if self.innovations is not None:
            object.__setattr__(self, "innovations", _freeze(self.innovations))
        if self.initial.shape != (self.p, self.k):
            raise ValueError("initial block must be p x k")
        if self.path.shape != (self.T, self.k):
            raise ValueError("path must be T x k")
        if self.innovations is not None and self.innovations.shape != (self.T, self.k):
            raise ValueError("innovations must be T x k")


@dataclass(frozen=True)
class RegressionProblem:
    """Stacked per-equation regression: shared design X, responses y_1..y_k, Gramian X'X/T."""

    X: np.ndarray
    ys: np.ndarray  # k x T, row i is the response of equation i
    psi: np.ndarray
    k: int
    p: int

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]


def companion(model: VarModel) -> CompanionForm:
    """Companion matrix F, its innovation covariance, and the spectral radius."""
    cached = model._cache.get("companion")
    if cached is not None:
        return cached
    k, p = model.k, model.p
    n = k * p
    F = np.zeros((n, n))
    for l, P in enumerate(model.phis):
        F[:k, l * k : (l + 1) * k] = P
    if p > 1:
        F[k:, : k * (p - 1)] = np.eye(k * (p - 1))
    omega = np.zeros((n, n))
    omega[:k, :k] = model.sigma
    form = CompanionForm(F=_freeze(F), omega=_freeze(omega), rho=spectral_radius(F))
    model._cache["companion"] = form
    return form


def simulate(model: VarModel, T: int, burn_in: int | None = None, seed: int = 0) -> Dataset:
    """Simulate a path of p initial plus T estimation observations.

    Innovations are N(0, Sigma), drawn as standard normals through the Philox
    stream and mapped through a (symmetric PSD) square root of Sigma; the
    recursion starts from a zero state and discards ``burn_in`` steps
    (default 200 + 10 p).  Identical (seed, parameters) give bit-identical
    output.  The T innovations belonging to the estimation sample are
    retained on the dataset.
    """
    k, p = model.k, model.p
    form = companion(model)
    if form.rho >= 1.0:
        raise NotStationary(f"spectral radius {form.rho:.6f} >= 1")
    if burn_in is None:
        burn_in = 200 + 10 * p
    n_steps = burn_in + p + T
    rng = make_rng(seed)
    z = rng.standard_normal((n_steps, k))
    try:
        L = np.linalg.cholesky(model.sigma)
    except np.linalg.LinAlgError:
        # PSD but singular (e.g. Sigma = 0): symmetric square root instead
        w, V = np.linalg.eigh(model.sigma)
        L = V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
    eps = z @ L.T
    states = np.zeros((p + n_steps, k))
    for t in range(n_steps):
        acc = eps[t].copy()
        for l, P in enumerate(model.phis):
            acc += P @ states[p + t - 1 - l]
        states[p + t] = acc
    initial = states[p + burn_in : p + burn_in + p]
    path = states[p + burn_in + p :]
    innov = eps[burn_in + p :]
    return Dataset(k=k, p=p, T=T, initial=initial, path=path, innovations=innov)


def population_gamma(model: VarModel) -> np.ndarray:
    """Population covariance Gamma = E(Z_t Z_t') of the stacked regressors."""
    cached = model._cache.get("gamma")
    if cached is not None:
        return cached
    form = companion(model)
    if form.rho >= 1.0 - 1e-8:
        raise NotStationary(f"spectral radius {form.rho:.6f} too close to one")
    gamma = lyapunov_doubling(form.F, form.omega, tol=1e-12)
    gamma = _freeze(gamma)
    model._cache["gamma"] = gamma
    return gamma


def sigma_t(model: VarModel) -> float:
    """max_i (sigma_{i,y} v sigma_{i,eps}): the scale entering the penalty formulas."""
    gamma = population_gamma(model)
    sy = np.sqrt(np.clip(np.diag(gamma)[: model.k], 0.0, None))
    se = np.sqrt(np.clip(np.diag(model.sigma), 0.0, None))
    return float(max(sy.max(), se.max()))


def stack(data: Dataset) -> RegressionProblem:
    """Build the shared design (rows Z_t', ascending t) and the k responses."""
    k, p, T = data.k, data.p, data.T
    combined = np.vstack([data.initial, data.path])  # rows: y_{1-p}..y_T
    X = np.empty((T, k * p), order="F")
    for l in range(1, p + 1):
        X[:, (l - 1) * k : l * k] = combined[p - l : p - l + T]
    X.flags.writeable = False
    M = (X.T @ X) / T
    psi = (M + M.T) / 2.0
    ys = np.ascontiguousarray(data.path.T)
    return RegressionProblem(X=X, ys=_freeze(ys), psi=_freeze(psi), k=k, p=p)


def coefficient_matrix(model: VarModel) -> np.ndarray:
    """True coefficients as a k x kp matrix; row i is beta*_i of equation i."""
    return np.hstack(model.phis)


def lagged_state(data: Dataset) -> np.ndarray:
    """Z_{T+1} = (y_T', ..., y_{T-p+1}')', the regressor vector for forecasting."""
    combined = np.vstack([data.initial, data.path])
    k, p, T = data.k, data.p, data.T
    z = np.empty(k * p)
    for l in range(1, p + 1):
        z[(l - 1) * k : l * k] = combined[p + T - l]
    return z


def forecast_one_step(coefficients: np.ndarray, data: Dataset) -> np.ndarray:
    """One-step-ahead point forecast from fitted (or true) k x kp coefficients."""
    coefficients = np.asarray(coefficients, dtype=np.float64)
    return coefficients @ lagged_state(data)


def truncate_dataset(data: Dataset, T: int) -> Dataset:
    """First T estimation observations of a longer dataset (same initial block)."""
    if T > data.T:
        raise ValueError("cannot extend a dataset")
    innov = None if data.innovations is None else data.innovations[:T]
    return Dataset(k=data.k, p=data.p, T=T, initial=data.initial, path=data.path[:T], innovations=innov)


def _write_csv(path: str, header: list, rows: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def save_dataset(data: Dataset, directory: str, name: str = "dataset") -> dict:
    """Write <name>.csv (p initial rows then T path rows), sidecar metadata JSON,
    and, for simulated data, an innovations CSV.  Returns the file map."""
    os.makedirs(directory, exist_ok=True)
    header = [f"y{i + 1}" for i in range(data.k)]
    csv_path = os.path.join(directory, f"{name}.csv")
    _write_csv(csv_path, header, np.vstack([data.initial, data.path]))
    meta = {"k": data.k, "p": data.p, "T": data.T}
    files = {"data": csv_path}
    if data.innovations is not None:
        innov_path = os.path.join(directory, f"{name}.innovations.csv")
        _write_csv(innov_path, header, data.innovations)
        meta["innovations_file"] = os.path.basename(innov_path)
        files["innovations"] = innov_path
    meta_path = os.path.join(directory, f"{name}.meta.json")
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
    files["meta"] = meta_path
    return files


def _read_csv(path: str, k: int) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != k:
            raise ValueError(f"expected {k} columns, found {len(header)}")
        rows = [[float(v) for v in row] for row in reader]
    return np.asarray(rows, dtype=np.float64)


def load_dataset(directory: str, name: str = "dataset") -> Dataset:
    """Load a dataset written by save_dataset."""
    meta_path = os.path.join(directory, f"{name}.meta.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    k, p, T = int(meta["k"]), int(meta["p"]), int(meta["T"])
    values = _read_csv(os.path.join(directory, f"{name}.csv"), k)
    if values.shape[0] != p + T:
        raise ValueError("row count does not match metadata")
    innovations = None
    if "innovations_file" in meta:
        innovations = _read_csv(os.path.join(directory, meta["innovations_file"]), k)
    return Dataset(k=k, p=p, T=T, initial=values[:p], path=values[p:], innovations=innovations)
