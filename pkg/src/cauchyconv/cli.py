"""Command-line interface: ``cauchyconv {simulate,fit,study,diagnose}``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import inference, io, simulate, study
from .kernels import Kernel, KernelError, lattice_sites, parse_sites


class ConfigError(ValueError):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"config is missing required field {key!r}")
    return cfg[key]


def _kernel(cfg):
    try:
        return Kernel.from_dict(_require(cfg, "kernel"))
    except KernelError as exc:
        raise ConfigError(f"field 'kernel': {exc}") from None


def _sites(cfg):
    if "sites" in cfg:
        try:
            return parse_sites(cfg["sites"])
        except ValueError as exc:
            raise ConfigError(f"field 'sites': {exc}") from None
    if "lattice" in cfg:
        try:
            return lattice_sites(int(cfg["lattice"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field 'lattice': {exc}") from None
    raise ConfigError("config needs either 'sites' or 'lattice'")


def _seed(args, cfg, required=False):
    if args.seed is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    if required:
        raise ConfigError("a seed is required (--seed or config field 'seed')")
    return int(np.random.SeedSequence().entropy)


def _gaussian(cfg):
    try:
        return simulate.GaussianModel(**cfg.get("gaussian", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'gaussian': {exc}") from None


def _weights(cfg):
    try:
        return inference.Weights(**cfg.get("weights", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'weights': {exc}") from None


def cmd_simulate(args):
    cfg = _load_config(args.config)
    process = _require(cfg, "process")
    if process not in ("cauchy", "mixture", "gaussian", "ev"):
        raise ConfigError(f"field 'process' must be cauchy, mixture, gaussian or ev, got {process!r}")
    sites = _sites(cfg)
    n = _require(cfg, "n")
    if not isinstance(n, int) or n < 1:
        raise ConfigError("field 'n' must be a positive integer")
    seed = _seed(args, cfg)
    m = int(cfg.get("grid_m", simulate.DEFAULT_GRID_POINTS))
    if process == "gaussian":
        out = simulate.simulate_gaussian(_gaussian(cfg), sites, n, seed)
    else:
        kernel = _kernel(cfg)
        if process == "cauchy":
            out = simulate.simulate_cauchy(kernel, sites, n, seed, m=m)
        elif process == "mixture":
            beta = float(_require(cfg, "beta"))
            model = simulate.MixtureModel(kernel, _gaussian(cfg), beta, bool(cfg.get("standardize", True)))
            out = simulate.simulate_mixture(model, sites, n, seed, m=m)
        else:
            out = simulate.simulate_ev(kernel, sites, n, seed)
    if "labels" in cfg:
        out.labels = list(cfg["labels"])
    io.save_replicates(args.output, out, {"seed": seed, "config": cfg})
    return 0


def _fit_dataset(data, cfg):
    model = cfg.get("model", "cauchy")
    family = cfg.get("family", "PowerCompact")
    weights = _weights(cfg)
    threshold = float(cfg.get("threshold", 0.95))
    u = simulate.to_uniform(data).values
    if data.d < 3:
        raise ConfigError(f"fitting needs at least 3 sites, the dataset has {data.d}")
    if model == "cauchy":
        res = inference.fit_kernel_by_scales(u, data.sites, family, weights)
    elif model == "taildep":
        res = inference.fit_kernel_by_taildep(u, data.sites, family, threshold, weights,
                                              finite_threshold=bool(cfg.get("finite_threshold", True)))
    elif model == "mixture":
        grid = cfg.get("beta_grid")
        res = inference.fit_mixture(u, data.sites, family=family, beta_grid=grid, threshold=threshold,
                                    weights=weights, free=tuple(cfg.get("gaussian_free", ["theta_G"])))
    elif model == "ev":
        res = inference.fit_ev_pairwise(u, data.sites, family, weights)
    else:
        raise ConfigError(f"field 'model' must be cauchy, taildep, mixture or ev, got {model!r}")
    return res, u


def cmd_fit(args):
    cfg = _load_config(args.config)
    data = io.load_dataset(args.data, args.sites)
    res, u = _fit_dataset(data, cfg)
    res.seed = args.seed
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "fit.json", res.to_dict())
    summ = inference.pair_summaries(u, data.sites, float(cfg.get("threshold", 0.95)))
    if res.beta is not None and res.beta > 0:
        _, bp, bm = inference.mixture_pair_summaries(u, data.sites, res.kernel, res.beta)
        for ps, a, b in zip(summ, bp, bm):
            ps.beta_plus_hat, ps.beta_minus_hat = a, b
    io.write_csv(out / "pairs.csv", ["j", "k", "label_j", "label_k", "delta", "c_hat", "lambda_hat", "rho_hat",
                                     "beta_plus_hat", "beta_minus_hat"],
                 [(p.j, p.k, data.labels[p.j], data.labels[p.k], p.delta, p.c_hat, p.lambda_hat, p.rho_hat,
                   p.beta_plus_hat, p.beta_minus_hat) for p in summ])
    return 0


def cmd_study(args):
    cfg = _load_config(args.config)
    seed = _seed(args, cfg, required=True)
    cells = cfg.get("cells", [cfg])
    common = {k: v for k, v in cfg.items() if k != "cells"}
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    reports = []
    for i, cell in enumerate(cells):
        merged = {**common, **cell, "seed": seed}
        if args.full:
            merged["N"] = 500
        try:
            conf = study.StudyConfig.from_dict(merged)
        except (TypeError, ValueError, KernelError) as exc:
            raise ConfigError(f"study cell {i}: {exc}") from None
        rep = study.run_study(conf, jobs=args.jobs)
        print(f"cell {i}: {conf.process} d={conf.d} n={conf.n} N={conf.N} "
              f"in {rep.wall_clock:.1f}s", file=sys.stderr)
        reports.append(rep.to_dict())
        rows.append((conf.process, conf.d, conf.n, conf.N, " ".join(rep.param_names),
                     " ".join(io.fmt(x) for x in rep.rmse), rep.delta_max, rep.delta_avg, rep.n_failures))
    io.write_json(out / "report.json", {"cells": reports})
    io.write_csv(out / "table.csv", ["process", "d", "n", "N", "params", "rmse", "delta_max", "delta_avg",
                                     "failures"], rows)
    return 0


def cmd_diagnose(args):
    cfg = _load_config(args.config)
    data = io.load_dataset(args.data, args.sites)
    try:
        with open(args.fit) as fh:
            fit = inference.FitResult.from_dict(json.load(fh))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read fit result {args.fit}: {exc}") from None
    seed = _seed(args, cfg)
    threshold = float(cfg.get("threshold", 0.95))
    u = simulate.to_uniform(data).values
    rows = study.empirical_curves(u, data.sites, threshold)
    dmax = cfg.get("delta_max")
    if dmax is not None:
        rows = [r for r in rows if r[0] <= dmax]
        if not rows:
            raise ConfigError(f"no site pairs within delta_max={dmax}")
    deltas = cfg.get("deltas")
    if deltas is None:
        top = max(r[0] for r in rows)
        deltas = np.linspace(0.0, top, int(cfg.get("n_deltas", 11))).tolist()
    if fit.beta is not None and fit.theta_G is not None:
        model = simulate.MixtureModel(fit.kernel, simulate.GaussianModel(**fit.theta_G), fit.beta)
    else:
        model = fit.kernel
    rows += study.dependence_curves(model, deltas, int(cfg.get("n_mc", 20000)), seed, threshold,
                                    int(cfg.get("grid_m", simulate.DEFAULT_GRID_POINTS)))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / "curves.csv", ["delta", "statistic", "value", "source"], rows)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="cauchyconv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_help="master seed"):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help=seed_help)
        sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
        sp.add_argument("--output", required=True, help="output directory")

    sp = sub.add_parser("simulate", help="simulate a field and write CSV + JSON sidecar")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit a model to a dataset")
    common(sp)
    sp.add_argument("--data", required=True, help="observations CSV (one column per site label)")
    sp.add_argument("--sites", required=True, help="sites CSV with header label,x,y")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("study", help="run a Monte Carlo study")
    common(sp, "master seed (required)")
    sp.add_argument("--full", action="store_true", help="use N = 500 repetitions per cell")
    sp.set_defaults(func=cmd_study)

    sp = sub.add_parser("diagnose", help="empirical and model dependence curves")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--sites", required=True)
    sp.add_argument("--fit", required=True, help="fit.json from the fit command")
    sp.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        return args.func(args)
    except (ConfigError, io.DatasetError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
