"""Command line interface.

Every command reads an experiment config (key = value file), applies any
flag overrides, and writes CSV with a short provenance header: package
version, config digest, and seed. Outputs are pure functions of the config
and flags; running a command twice, at any parallelism, produces identical
bytes. Exit codes: 0 on success, 1 for usage or config problems, 2 when a
numerical quality threshold is breached.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .correlation import FactorizationError
from .diagnostics import (
    fit_chisq_mle,
    fit_gamma_mle,
    kappa,
    kappa_grid,
    krippendorff_alpha,
    ks_test_chisq,
)
from .fit import likelihood_ratio, mle_ce, mle_dt
from .likelihood import JitterMatrix, loglik_ce, loglik_dt
from .model import ParamVector
from .rng import JITTER, SIMULATE, derive_seed, stream
from .specs import ExperimentConfig, config_hash, read_config, read_dataset, write_dataset

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="dgcopula",
        description="Gaussian copula models for correlated counts",
    )
    parser.add_argument(
        "--version", action="version", version=f"dgcopula {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(name: str, help_text: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--replicates", type=int, help="override replicate count")
        sp.add_argument("--jitters", type=int, help="override jitter count")
        sp.add_argument("--bootstrap", type=int, help="override bootstrap size")
        sp.add_argument("--parallelism", type=int, help="worker processes")
        sp.add_argument("--out", help="output path (overrides the config)")
        return sp

    common("simulate", "draw datasets from the configured model")

    fit = common("fit", "fit one dataset with both objectives")
    fit.add_argument("--data", required=True, help="dataset CSV")

    common("lr-experiment", "replicate simulation, fitting, and calibration")

    surface = common("surface", "log likelihood on a parameter grid")
    surface.add_argument(
        "--grid", required=True, help="axes, e.g. omega=0.4:0.95:100,lambda=1.5:5:100"
    )
    surface.add_argument("--data", help="dataset CSV (default: simulate one)")

    kap = common("kappa", "bootstrap exactness diagnostic at the fitted value")
    kap.add_argument("--data", required=True, help="dataset CSV")

    grid = common("kappa-grid", "exactness diagnostic over a parameter grid")
    grid.add_argument("--lambdas", default="1,2,3,4", help="comma-separated rates")
    grid.add_argument(
        "--omegas", default="0.6,0.7,0.8,0.9", help="comma-separated correlations"
    )
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    for field in ("seed", "replicates", "jitters", "bootstrap", "parallelism", "out"):
        value = getattr(args, field, None)
        if value is not None:
            updates[field] = value
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _out_path(cfg: ExperimentConfig) -> str:
    if not cfg.out:
        raise _UsageError("no output path: pass --out or set out in the config")
    return cfg.out


def _comments(cfg: ExperimentConfig, *extra: str) -> list[str]:
    return [
        f"dgcopula {__version__}",
        f"config {config_hash(cfg)}",
        f"seed {cfg.seed}",
        *extra,
    ]


def _write_csv(path: str, header, rows, comments) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    return repr(float(value))


def _pmap(fn, tasks, parallelism: int):
    if parallelism <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# -- simulate ---------------------------------------------------------------


def _cmd_simulate(cfg: ExperimentConfig, args) -> int:
    out_dir = _out_path(cfg)
    os.makedirs(out_dir, exist_ok=True)
    for r in range(cfg.replicates):
        y = cfg.model.simulate(cfg.theta0, stream(cfg.seed, SIMULATE, r))
        write_dataset(
            os.path.join(out_dir, f"replicate_{r:04d}.csv"),
            y,
            comments=_comments(cfg, f"replicate {r}"),
        )
    return 0


# -- fit ----------------------------------------------------------------------


_FIT_FAILED = object()


def _fit_both(model, theta_ref, y, jit):
    """Fit both objectives on one dataset; rows carry the ratio vs theta_ref."""
    dt = mle_dt(model, y)
    ce = mle_ce(model, y, jitters=jit)
    lam_dt = likelihood_ratio(
        lambda pv: loglik_dt(model, y, pv), dt.theta_hat, theta_ref
    )
    lam_ce = likelihood_ratio(
        lambda pv: loglik_ce(model, y, pv, jit), ce.theta_hat, theta_ref
    )
    return dt, ce, lam_dt, lam_ce


def _fit_rows(replicate: int, model, dt, ce, lam_dt, lam_ce):
    rows = []
    for kind, res, lam in (("dt", dt, lam_dt), ("ce", ce, lam_ce)):
        rows.append(
            [replicate, kind]
            + [_fmt(v) for v in res.theta_hat.values]
            + [_fmt(res.loglik_at_max), _fmt(lam), int(res.converged), res.iterations]
        )
    return rows


def _nan_rows(replicate: int, model):
    rows = []
    for kind in ("dt", "ce"):
        rows.append(
            [replicate, kind]
            + [_fmt(math.nan)] * len(model.param_names)
            + [_fmt(math.nan), _fmt(math.nan), 0, 0]
        )
    return rows


_FIT_HEADER_TAIL = ["loglik", "lr", "converged", "iterations"]


def _cmd_fit(cfg: ExperimentConfig, args) -> int:
    out = _out_path(cfg)
    y = read_dataset(args.data)
    if y.shape[0] != cfg.model.n:
        raise ValueError(
            f"dataset length {y.shape[0]} does not match the model dimension {cfg.model.n}"
        )
    jit = JitterMatrix.generate(cfg.jitters, cfg.model.n, derive_seed(cfg.seed, JITTER, 0))
    dt, ce, lam_dt, lam_ce = _fit_both(cfg.model, cfg.theta0, y, jit)
    header = ["replicate", "kind", *cfg.model.param_names, *_FIT_HEADER_TAIL]
    _write_csv(out, header, _fit_rows(0, cfg.model, dt, ce, lam_dt, lam_ce), _comments(cfg))
    return 0


# -- lr-experiment -------------------------------------------------------------


def _lr_replicate(task):
    cfg, r = task
    model = cfg.model
    y = model.simulate(cfg.theta0, stream(cfg.seed, SIMULATE, r))
    jit = JitterMatrix.generate(cfg.jitters, model.n, derive_seed(cfg.seed, JITTER, r))
    try:
        dt, ce, lam_dt, lam_ce = _fit_both(model, cfg.theta0, y, jit)
    except (ValueError, FactorizationError):
        return r, _nan_rows(r, model), None
    rows = _fit_rows(r, model, dt, ce, lam_dt, lam_ce)
    stats = (lam_dt, lam_ce, dt.converged, ce.converged)
    return r, rows, stats


def _cmd_lr_experiment(cfg: ExperimentConfig, args) -> int:
    out = _out_path(cfg)
    tasks = [(cfg, r) for r in range(cfg.replicates)]
    results = _pmap(_lr_replicate, tasks, cfg.parallelism)
    results.sort(key=lambda item: item[0])

    rows = []
    lam_dt, lam_ce = [], []
    failures = 0
    for _, rep_rows, stats in results:
        rows.extend(rep_rows)
        if stats is None or not (stats[2] and stats[3]):
            failures += 1
            continue
        lam_dt.append(stats[0])
        lam_ce.append(stats[1])

    header = ["replicate", "kind", *cfg.model.param_names, *_FIT_HEADER_TAIL]
    _write_csv(out, header, rows, _comments(cfg))

    base = out[:-4] if out.endswith(".csv") else out
    summary = _lr_summary(cfg, np.array(lam_dt), np.array(lam_ce), failures)
    _write_csv(base + ".summary.csv", ["metric", "value"], summary, _comments(cfg))

    failure_rate = failures / cfg.replicates
    return 2 if failure_rate > 0.05 else 0


def _lr_summary(cfg, lam_dt: np.ndarray, lam_ce: np.ndarray, failures: int):
    df_ref = len(cfg.model.param_names)
    rows = [
        ["replicates", cfg.replicates],
        ["failures", failures],
        ["failure_rate", _fmt(failures / cfg.replicates)],
        ["df_reference", df_ref],
    ]
    for kind, lam in (("dt", lam_dt), ("ce", lam_ce)):
        if lam.size >= 10 and np.all(lam > 0.0):
            d, p = ks_test_chisq(lam, df_ref)
            df_hat, (df_lo, df_hi), aic_chisq = fit_chisq_mle(lam)
            shape, scale, aic_gamma = fit_gamma_mle(lam)
            rows += [
                [f"ks_d_{kind}", _fmt(d)],
                [f"ks_p_{kind}", _fmt(p)],
                [f"chisq_df_{kind}", _fmt(df_hat)],
                [f"chisq_df_lo_{kind}", _fmt(df_lo)],
                [f"chisq_df_hi_{kind}", _fmt(df_hi)],
                [f"chisq_aic_{kind}", _fmt(aic_chisq)],
                [f"gamma_shape_{kind}", _fmt(shape)],
                [f"gamma_scale_{kind}", _fmt(scale)],
                [f"gamma_aic_{kind}", _fmt(aic_gamma)],
            ]
        else:
            rows += [[f"ks_p_{kind}", _fmt(math.nan)]]
    if lam_dt.size >= 2:
        alpha, (lo, hi) = krippendorff_alpha(lam_dt, lam_ce, seed=cfg.seed)
        rows += [
            ["alpha", _fmt(alpha)],
            ["alpha_lo", _fmt(lo)],
            ["alpha_hi", _fmt(hi)],
        ]
    return rows


# -- surface --------------------------------------------------------------------


def _parse_grid(text: str, param_names) -> list[tuple[str, np.ndarray]]:
    axes: dict[str, np.ndarray] = {}
    for part in text.split(","):
        if "=" not in part:
            raise ValueError(f"malformed grid axis {part!r}")
        name, _, span = part.partition("=")
        name = name.strip()
        pieces = span.split(":")
        if len(pieces) != 3:
            raise ValueError(f"grid axis {part!r} is not name=lo:hi:count")
        try:
            lo, hi, count = float(pieces[0]), float(pieces[1]), int(pieces[2])
        except ValueError:
            raise ValueError(f"grid axis {part!r} has non-numeric pieces") from None
        if count < 2 or hi <= lo:
            raise ValueError(f"grid axis {part!r} needs lo < hi and count >= 2")
        axes[name] = np.linspace(lo, hi, count)
    if set(axes) != set(param_names):
        raise ValueError(
            f"grid axes {sorted(axes)} must match the model parameters {list(param_names)}"
        )
    return [(name, axes[name]) for name in param_names]


def _cmd_surface(cfg: ExperimentConfig, args) -> int:
    out = _out_path(cfg)
    model = cfg.model
    if len(model.param_names) != 2:
        raise ValueError("the surface command needs a model with exactly two parameters")
    axes = _parse_grid(args.grid, model.param_names)
    if args.data:
        y = read_dataset(args.data)
        if y.shape[0] != model.n:
            raise ValueError("dataset length does not match the model dimension")
    else:
        y = model.simulate(cfg.theta0, stream(cfg.seed, SIMULATE, 0))
    jit = JitterMatrix.generate(cfg.jitters, model.n, derive_seed(cfg.seed, JITTER, 0))

    (name1, grid1), (name2, grid2) = axes
    rows = []
    for v1 in grid1:
        for v2 in grid2:
            try:
                theta = ParamVector(model.param_names, np.array([v1, v2]))
                ll_dt = loglik_dt(model, y, theta)
                ll_ce = loglik_ce(model, y, theta, jit)
                ok = 1 if math.isfinite(ll_dt) and math.isfinite(ll_ce) else 0
            except (ValueError, FactorizationError):
                ll_dt, ll_ce, ok = math.nan, math.nan, 0
            rows.append([_fmt(v1), _fmt(v2), _fmt(ll_dt), _fmt(ll_ce), ok])
    header = [name1, name2, "loglik_dt", "loglik_ce", "valid"]
    _write_csv(out, header, rows, _comments(cfg))
    return 0


# -- kappa ------------------------------------------------------------------------


def _cmd_kappa(cfg: ExperimentConfig, args) -> int:
    out = _out_path(cfg)
    y = read_dataset(args.data)
    if y.shape[0] != cfg.model.n:
        raise ValueError("dataset length does not match the model dimension")
    fitted = mle_dt(cfg.model, y)
    res = kappa(
        cfg.model,
        fitted.theta_hat,
        n_b=cfg.bootstrap,
        seed=cfg.seed,
        parallelism=cfg.parallelism,
    )
    rows = [
        ["kappa_hat", _fmt(res.kappa_hat)],
        ["n_b", res.n_b],
        ["n_dropped", res.n_dropped],
    ]
    for name, value in res.theta_used.asdict().items():
        rows.append([f"theta_{name}", _fmt(value)])
    d = len(res.theta_used.names)
    for i in range(d):
        for j in range(d):
            rows.append([f"v_{i}{j}", _fmt(res.v_hat[i, j])])
    for i in range(d):
        for j in range(d):
            rows.append([f"j_{i}{j}", _fmt(res.j_hat[i, j])])
    _write_csv(out, ["quantity", "value"], rows, _comments(cfg))
    return 0


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ValueError(f"{what} must be comma-separated numbers") from None
    if not values:
        raise ValueError(f"{what} must not be empty")
    return values


def _cmd_kappa_grid(cfg: ExperimentConfig, args) -> int:
    out = _out_path(cfg)
    lambdas = _parse_floats(args.lambdas, "--lambdas")
    omegas = _parse_floats(args.omegas, "--omegas")
    grid = kappa_grid(
        cfg.model,
        lambdas,
        omegas,
        n_b=cfg.bootstrap,
        seed=cfg.seed,
        parallelism=cfg.parallelism,
    )
    # One row per rate, one column per correlation: the table layout itself.
    header = ["lambda"] + [f"omega_{om!r}" for om in omegas]
    rows = [
        [_fmt(lam)] + [_fmt(v) for v in grid[i]] for i, lam in enumerate(lambdas)
    ]
    _write_csv(out, header, rows, _comments(cfg))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "lr-experiment": _cmd_lr_experiment,
    "surface": _cmd_surface,
    "kappa": _cmd_kappa,
    "kappa-grid": _cmd_kappa_grid,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _apply_overrides(read_config(args.config), args)
        return _COMMANDS[args.command](cfg, args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
