"""Command-line interface: simulate, fit, mc, diag, paper-tables.

Exit codes: 0 success, 2 configuration error, 3 non-stationary model,
4 infeasible estimator, 5 diagnostics without innovations.  Flags override
values from an optional JSON --config file; unknown config keys are rejected.
Given identical configuration and seed, every command writes byte-identical
output files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import estimators, mc, theory, var
from .errors import ConfigError, HdvarError, MissingInnovations, NotStationary, UnknownCombination
from .solver import PenaltySpec, lasso_cd

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_ESTIMATOR = 4
EXIT_DIAG = 5


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with defaults for this command")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdvar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    parser._command_parsers = {}

    def new_command(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        parser._command_parsers[name] = p
        return p

    p_sim = new_command("simulate", help="simulate a VAR path to CSV + metadata")
    _add_common(p_sim)
    p_sim.add_argument("--experiment", choices=tuple(mc.EXPERIMENT_GRID))
    p_sim.add_argument("--k", type=int)
    p_sim.add_argument("--model", help="JSON file with {phis: [[..]..], sigma: [[..]..]}")
    p_sim.add_argument("--T", type=int, required=True)
    p_sim.add_argument("--burn-in", type=int, dest="burn_in")
    p_sim.add_argument("--name", default="dataset")

    p_fit = new_command("fit", help="fit estimators to a stored dataset")
    _add_common(p_fit)
    p_fit.add_argument("--data", required=True, help="directory containing <name>.csv/.meta.json")
    p_fit.add_argument("--name", default="dataset")
    p_fit.add_argument("--estimators", default="lasso", help="comma-separated tags")
    p_fit.add_argument("--lambda", dest="lam", type=float, help="fixed penalty override")
    p_fit.add_argument("--experiment", choices=tuple(mc.EXPERIMENT_GRID), help="DGP for oracle truth")
    p_fit.add_argument("--k", type=int)

    p_mc = new_command("mc", help="run one Monte Carlo experiment")
    _add_common(p_mc)
    p_mc.add_argument("--experiment", required=True, choices=tuple(mc.EXPERIMENT_GRID))
    p_mc.add_argument("--k", type=int, required=True)
    p_mc.add_argument("--T", type=int, required=True)
    p_mc.add_argument("--reps", type=int, default=100)
    p_mc.add_argument("--estimators", default="lasso", help="comma-separated tags")
    p_mc.add_argument("--theory-checks", action="store_true", dest="theory_checks")

    p_diag = new_command("diag", help="finite-sample diagnostics on simulated replications")
    _add_common(p_diag)
    p_diag.add_argument("--experiment", choices=tuple(mc.EXPERIMENT_GRID))
    p_diag.add_argument("--k", type=int)
    p_diag.add_argument("--T", type=int)
    p_diag.add_argument("--reps", type=int, default=20)
    p_diag.add_argument("--data", help="load this dataset instead of simulating")
    p_diag.add_argument("--name", default="dataset")
    p_diag.add_argument("--q", type=float, default=0.5)
    p_diag.add_argument("--a-const", type=float, default=1.0, dest="a_const")
    p_diag.add_argument("--skip-foc", action="store_true", help="omit sign-recovery FOC outcomes")

    p_tab = new_command("paper-tables", help="run the full experiment grid and assemble tables")
    _add_common(p_tab)
    p_tab.add_argument("--reps", type=int, default=100)
    p_tab.add_argument("--experiments", default="A,B,C,D")
    p_tab.add_argument("--k-list", default="", help="restrict k values (comma-separated)")
    p_tab.add_argument("--T-list", default="50,100,500", dest="t_list")
    p_tab.add_argument(
        "--estimators",
        default=",".join(estimators.ESTIMATOR_TAGS),
        help="comma-separated tags",
    )
    return parser


def _load_config(args: argparse.Namespace, command_parser) -> dict:
    """Validate a JSON config file against the command's known flags."""
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {
        action.dest
        for action in command_parser._actions
        if action.dest not in ("help", "config")
    }
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _estimator_list(raw: str) -> tuple:
    tags = tuple(t.strip() for t in raw.split(",") if t.strip())
    for tag in tags:
        if tag not in estimators.ESTIMATOR_TAGS:
            raise ConfigError(f"unknown estimator tag {tag!r}")
    if not tags:
        raise ConfigError("no estimators requested")
    return tags


def _load_model(args) -> tuple:
    """Model plus truth from --experiment/--k or an inline model JSON."""
    if args.experiment and args.k:
        try:
            return mc.make_dgp(args.experiment, args.k)
        except UnknownCombination as exc:
            raise ConfigError(str(exc)) from exc
    if getattr(args, "model", None):
        with open(args.model) as fh:
            payload = json.load(fh)
        phis = tuple(np.asarray(P, dtype=np.float64) for P in payload["phis"])
        sigma = np.asarray(payload["sigma"], dtype=np.float64)
        model = var.VarModel(phis=phis, sigma=sigma)
        truth = estimators.SparsityInfo.from_coefficients(var.coefficient_matrix(model))
        return model, truth
    raise ConfigError("specify --experiment with --k, or --model")


def cmd_simulate(args) -> int:
    model, _ = _load_model(args)
    form = var.companion(model)
    if form.rho >= 1.0:
        print(f"model is not stationary (rho = {form.rho:.6f})", file=sys.stderr)
        return EXIT_MODEL
    data = var.simulate(model, args.T, burn_in=args.burn_in, seed=args.seed)
    files = var.save_dataset(data, args.out, name=args.name)
    print(f"wrote {files['data']} (k={data.k}, p={data.p}, T={data.T}, rho={form.rho:.4f})")
    return EXIT_OK


def cmd_fit(args) -> int:
    tags = _estimator_list(args.estimators)
    data = var.load_dataset(args.data, name=args.name)
    truth = None
    if any(t == "oracle_ols" for t in tags):
        if not (args.experiment and args.k):
            raise ConfigError("oracle_ols needs --experiment and --k to reconstruct the truth")
        model, truth = _load_model(args)
        if truth.beta.shape != (data.k, data.k * data.p):
            raise ConfigError("truth dimensions do not match the dataset")
    os.makedirs(args.out, exist_ok=True)
    infeasible = False
    for tag in tags:
        fit = _fit_with_override(data, tag, truth, args.lam)
        path = os.path.join(args.out, f"fit_{tag}.json")
        estimators.save_system_fit(fit, path)
        sizes = ",".join(str(len(f.active_set)) for f in fit.fits)
        lams = ",".join(f"{f.lambda_selected:.6g}" for f in fit.fits)
        print(f"{tag}: active sizes [{sizes}] lambda [{lams}] -> {path}")
        if not fit.feasible:
            infeasible = True
    return EXIT_ESTIMATOR if infeasible else EXIT_OK


def _fit_with_override(data, tag, truth, lam):
    if lam is None:
        return estimators.fit_system(data, tag, truth=truth)
    problem = estimators.stack_cached(data)
    if tag not in ("lasso", "post_lasso", "adaptive_lasso_lasso", "adaptive_lasso_ridge"):
        raise ConfigError(f"--lambda does not apply to {tag}")
    fits = []
    for i in range(problem.k):
        if tag in ("lasso", "post_lasso"):
            res = lasso_cd(problem.X, problem.ys[i], PenaltySpec(lam=lam))
            base = estimators.EquationFit(
                beta=res.beta,
                active_set=np.flatnonzero(res.beta),
                lambda_selected=lam,
                estimator_tag=tag,
                bic_value=np.nan,
                df=float(np.count_nonzero(res.beta)),
                rss=float(np.sum((problem.ys[i] - problem.X @ res.beta) ** 2)),
                converged=res.converged,
            )
            fit_i = base if tag == "lasso" else estimators.fit_post_lasso(problem, i, lasso_fit=base)
        else:
            init = "lasso" if tag.endswith("_lasso") else "ridge"
            stage1 = (
                estimators.fit_lasso_bic(problem, i).beta
                if init == "lasso"
                else estimators.fit_ridge_bic(problem, i, 100, 1e-4)[0]
            )
            with np.errstate(divide="ignore"):
                w = np.where(stage1 != 0.0, 1.0 / np.abs(stage1), np.inf)
            if not np.isfinite(w).any():
                beta = np.zeros(problem.m)
            else:
                beta = lasso_cd(problem.X, problem.ys[i], PenaltySpec(lam=lam, weights=w)).beta
            fit_i = estimators.EquationFit(
                beta=beta,
                active_set=np.flatnonzero(beta),
                lambda_selected=lam,
                estimator_tag=tag,
                bic_value=np.nan,
                df=float(np.count_nonzero(beta)),
                rss=float(np.sum((problem.ys[i] - problem.X @ beta) ** 2)),
            )
        fits.append(fit_i)
    coef = np.vstack([f.beta for f in fits])
    return estimators.SystemFit(estimator_tag=tag, fits=tuple(fits), coefficients=coef, k=problem.k, p=problem.p)


def cmd_mc(args) -> int:
    tags = _estimator_list(args.estimators)
    try:
        spec = mc.ExperimentSpec(
            experiment=args.experiment,
            k=args.k,
            T=args.T,
            n_reps=args.reps,
            base_seed=args.seed,
            estimators=tags,
            theory_checks=args.theory_checks,
        )
    except (UnknownCombination, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    report = mc.run_experiment(spec, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    stem = f"{spec.experiment}_{spec.k}_{spec.T}"
    if args.format == "csv":
        path = os.path.join(args.out, f"{stem}.csv")
        mc.report_to_csv(report, path)
    else:
        path = os.path.join(args.out, f"{stem}.json")
        mc.report_to_json(report, path)
    print(f"wrote {path} ({report.runtime_seconds:.1f}s)", file=sys.stderr)
    return EXIT_OK


def cmd_diag(args) -> int:
    if args.data:
        if not (args.experiment and args.k):
            raise ConfigError("--data mode needs --experiment and --k for the generating model")
        model, truth = _load_model(args)
        datasets = [var.load_dataset(args.data, name=args.name)]
        if datasets[0].innovations is None:
            print("dataset has no innovation record; diagnostics need simulated data", file=sys.stderr)
            return EXIT_DIAG
    else:
        if not (args.experiment and args.k and args.T):
            raise ConfigError("specify --experiment, --k and --T (or --data)")
        model, truth = _load_model(args)
        datasets = [
            var.simulate(model, args.T, seed=args.seed + r) for r in range(args.reps)
        ]
    params = theory.TheoryParams(q=args.q, a_const=args.a_const)
    T, k, p = datasets[0].T, model.k, model.p
    st = var.sigma_t(model)
    lam_t = theory.lambda_theorem1(T, k, p, st)
    gamma = var.population_gamma(model)
    kappa_sbar_sq = theory.restricted_eigenvalue(gamma, max(int(truth.s_bar), 1))
    kappa_sq = np.array(
        [theory.restricted_eigenvalue(gamma, max(int(s), 1)) for s in truth.s]
    )
    fnorm = theory.f_norm_sum(model, T=T)
    zeta_sbar = theory.zeta(params.q, kappa_sbar_sq, fnorm)
    bounds = {
        "lambda_t": lam_t,
        "k_t": theory.k_t(T, k, p, st),
        "sigma_t": st,
        "thm1_probability": theory.thm1_probability(T, k, p, params.a_const),
        "pi_q_sbar": theory.pi_q(max(int(truth.s_bar), 1), k, p, T, zeta_sbar),
        "f_norm_sum": fnorm,
        "kappa_sbar_sq": kappa_sbar_sq,
        "thm3": [
            dict(zip(("pred_bound", "est_bound"), theory.thm3_bounds(int(s), lam_t, ksq, params.q)))
            for s, ksq in zip(truth.s, kappa_sq)
        ],
    }
    bounds["system_bound"] = theory.system_bound([b["est_bound"] for b in bounds["thm3"]])
    replications = []
    for idx, data in enumerate(datasets):
        problem = var.stack(data)
        flags = theory.event_flags(data, model, truth, params, lambda_t=lam_t, kappa_sbar_sq=kappa_sbar_sq)
        entry = {
            "replication": idx,
            "events": {
                "b_t": flags.b_t,
                "c_t": flags.c_t,
                "d_t": flags.d_t,
                "max_cross": flags.max_cross,
                "max_cov_dev": flags.max_cov_dev,
                "max_yy": flags.max_yy,
            },
            "iq_checks": [],
        }
        for i in range(k):
            res = lasso_cd(problem.X, problem.ys[i], PenaltySpec(lam=lam_t))
            entry["iq_checks"].append(theory.thm1_rhs_check(problem, i, res.beta, truth, lam_t))
        if not args.skip_foc:
            entry["foc"] = []
            for i in range(k):
                stage1 = estimators.fit_lasso_bic(problem, i).beta
                rep = theory.sign_recovery_conditions(
                    problem, i, stage1, lam_t, truth, params, gamma=gamma, sigma_t_value=st
                )
                entry["foc"].append({k2: _json_safe(v) for k2, v in rep.items()})
        replications.append(entry)
    payload = {"config": _diag_config(args), "bounds": bounds, "replications": replications}
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "diagnostics.json")
    with open(path, "w") as fh:
        json.dump(_json_safe(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {path}")
    return EXIT_OK


def _diag_config(args) -> dict:
    return {
        "experiment": args.experiment,
        "k": args.k,
        "T": args.T,
        "reps": args.reps,
        "seed": args.seed,
        "q": args.q,
        "a_const": args.a_const,
    }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    return obj


def cmd_paper_tables(args) -> int:
    tags = _estimator_list(args.estimators)
    exps = [e.strip().upper() for e in args.experiments.split(",") if e.strip()]
    t_values = [int(t) for t in args.t_list.split(",") if t.strip()]
    k_filter = {int(v) for v in args.k_list.split(",") if v.strip()}
    os.makedirs(args.out, exist_ok=True)
    for exp in exps:
        if exp not in mc.EXPERIMENT_GRID:
            raise ConfigError(f"unknown experiment {exp!r}")
        rows = []
        for k in mc.EXPERIMENT_GRID[exp]:
            if k_filter and k not in k_filter:
                continue
            for T in t_values:
                spec = mc.ExperimentSpec(
                    experiment=exp, k=k, T=T, n_reps=args.reps, base_seed=args.seed, estimators=tags
                )
                report = mc.run_experiment(spec, threads=args.threads)
                stem = f"{exp}_{k}_{T}"
                mc.report_to_csv(report, os.path.join(args.out, f"{stem}.csv"))
                for tag in tags:
                    row = report.rows[tag]
                    rows.append((k, T, tag, row))
                print(f"{stem} done ({report.runtime_seconds:.1f}s)", file=sys.stderr)
        table_path = os.path.join(args.out, f"table_{exp}.csv")
        with open(table_path, "w", newline="") as fh:
            import csv as _csv

            writer = _csv.writer(fh)
            writer.writerow(
                ["k", "T", "estimator", "uncovered", "included", "share", "n_selected", "rmse", "rmsfe"]
            )
            for k, T, tag, row in rows:
                writer.writerow(
                    [
                        k,
                        T,
                        tag,
                        mc._fmt(row.true_model_uncovered),
                        mc._fmt(row.true_model_included),
                        mc._fmt(row.share_relevant),
                        mc._fmt(row.n_selected),
                        mc._fmt(row.rmse),
                        mc._fmt(row.rmsfe),
                    ]
                )
        print(f"wrote {table_path}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "mc": cmd_mc,
    "diag": cmd_diag,
    "paper-tables": cmd_paper_tables,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        if args.config:
            # config supplies defaults; explicit flags win on the second parse
            cfg = _load_config(args, parser._command_parsers[args.command])
            parser._command_parsers[args.command].set_defaults(**cfg)
            args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotStationary as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except MissingInnovations as exc:
        print(f"diagnostics error: {exc}", file=sys.stderr)
        return EXIT_DIAG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HdvarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
