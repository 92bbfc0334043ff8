"""Monte Carlo simulation studies and dependence diagnostics.

A study cell simulates ``N`` datasets of ``n`` replicates on an
``m x m`` lattice, rank-transforms each column, fits the matching
estimator and reports root mean squared errors together with the
maximum and mean absolute differences between true and fitted kernel
profiles along ``x in (0, 1)``.
"""

from __future__ import annotations

import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import inference, simulate
from .kernels import FAMILIES, Kernel, lattice_sites

PROCESSES = ("cauchy", "mixture", "ev")
PROFILE_POINTS = 512


@dataclass
class StudyConfig:
    process: str = "cauchy"
    kernel: Kernel = field(default_factory=lambda: Kernel.power_compact(0.25, 1.0))
    gaussian: simulate.GaussianModel = field(default_factory=simulate.GaussianModel)
    beta: float = 2.0
    lattice: int = 3
    n: int = 500
    N: int = 100
    seed: int = 0
    grid_m: int = simulate.DEFAULT_GRID_POINTS
    threshold: float = 0.95
    weights: inference.Weights = field(default_factory=inference.Weights)

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ValueError(f"process must be one of {PROCESSES}, got {self.process!r}")
        if self.lattice < 2:
            raise ValueError("lattice side must be at least 2")
        if self.N < 1 or self.n < 2:
            raise ValueError("need N >= 1 repetitions and n >= 2 replicates")

    @property
    def d(self):
        return self.lattice ** 2

    @property
    def sites(self):
        return lattice_sites(self.lattice)

    @property
    def param_names(self):
        names = [n for n in ("eta", "r") if n in FAMILIES[self.kernel.family]] or list(FAMILIES[self.kernel.family])
        if self.process == "mixture":
            names += ["theta_G", "beta"]
        return names

    @property
    def truth(self):
        vals = [self.kernel.params[n] for n in self.param_names if n in self.kernel.params]
        if self.process == "mixture":
            vals += [self.gaussian.theta_G, self.beta]
        return np.array(vals, float)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {"process", "kernel", "gaussian", "beta", "lattice", "d", "n", "N", "seed", "grid_m",
                            "threshold", "weights"}
        if unknown:
            raise ValueError(f"unknown study config field(s): {', '.join(sorted(unknown))}")
        if "kernel" in d:
            d["kernel"] = Kernel.from_dict(d["kernel"])
        if "gaussian" in d:
            d["gaussian"] = simulate.GaussianModel(**d["gaussian"])
        if "weights" in d:
            d["weights"] = inference.Weights(**d["weights"])
        if "d" in d:
            side = int(round(math.sqrt(d["d"])))
            if side * side != d["d"]:
                raise ValueError(f"d must be a perfect square, got {d['d']}")
            d.setdefault("lattice", side)
            del d["d"]
        return cls(**d)

    def to_dict(self):
        return {"process": self.process, "kernel": self.kernel.to_dict(), "gaussian": self.gaussian.to_dict(),
                "beta": self.beta, "lattice": self.lattice, "d": self.d, "n": self.n, "N": self.N,
                "seed": self.seed, "grid_m": self.grid_m, "threshold": self.threshold,
                "weights": {"scheme": self.weights.scheme, "delta_max": self.weights.delta_max}}


@dataclass
class StudyReport:
    config: dict
    param_names: list
    truth: list
    rmse: list
    delta_max: float
    delta_avg: float
    n_failures: int
    estimates: list
    profile_errors: list
    failures: list
    wall_clock: float = 0.0

    def to_dict(self, with_timing=False):
        d = {"config": self.config, "param_names": self.param_names, "truth": self.truth, "rmse": self.rmse,
             "delta_max": self.delta_max, "delta_avg": self.delta_avg, "n_failures": self.n_failures,
             "estimates": self.estimates, "profile_errors": self.profile_errors, "failures": self.failures}
        if with_timing:
            d["wall_clock"] = self.wall_clock
        return d


def profile_errors(true_kernel, fitted_kernel, n_points=PROFILE_POINTS):
    """``(max |g - g_hat|, int_0^1 |g - g_hat| dx)`` on ``n_points`` equispaced points."""
    x = np.linspace(0.0, 1.0, n_points)
    diff = np.abs(true_kernel.g(x) - fitted_kernel.g(x))
    return float(diff.max()), float(np.trapezoid(diff, x))


def _fit(config, u):
    sites = config.sites
    if config.process == "cauchy":
        return inference.fit_kernel_by_scales(u, sites, config.kernel.family, config.weights)
    if config.process == "mixture":
        return inference.fit_mixture(u, sites, family=config.kernel.family, threshold=config.threshold,
                                     weights=config.weights)
    return inference.fit_ev_pairwise(u, sites, config.kernel.family, config.weights)


def simulate_dataset(config, seed):
    sites = config.sites
    if config.process == "cauchy":
        return simulate.simulate_cauchy(config.kernel, sites, config.n, seed, m=config.grid_m)
    if config.process == "mixture":
        model = simulate.MixtureModel(config.kernel, config.gaussian, config.beta)
        return simulate.simulate_mixture(model, sites, config.n, seed, m=config.grid_m)
    return simulate.simulate_ev(config.kernel, sites, config.n, seed)


def run_repetition(config, index):
    """Simulate, rank-transform and fit repetition ``index``; returns a dict."""
    seed = np.random.SeedSequence(config.seed).spawn(index + 1)[index]
    try:
        data = simulate_dataset(config, seed)
        u = simulate.to_uniform(data).values
        res = _fit(config, u)
        est = [res.theta_K[n] for n in config.param_names if n in res.theta_K]
        if config.process == "mixture":
            est += [res.theta_G["theta_G"], res.beta]
        dmax, davg = profile_errors(config.kernel, res.kernel)
        return {"index": index, "estimate": est, "profile": [dmax, davg], "objective": res.objective}
    except Exception as exc:  # a failed repetition is recorded, not fatal
        return {"index": index, "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc(limit=3)}


def _run_one(args):
    return run_repetition(*args)


def run_study(config, jobs=1, progress=None):
    """Run all repetitions of a study cell and aggregate RMSE and profile errors.

    Repetition ``i`` uses the ``i``-th child of the master seed, so the
    report does not depend on ``jobs``.
    """
    t0 = time.perf_counter()
    tasks = [(config, i) for i in range(config.N)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_run_one(t))
            if progress is not None:
                progress(len(results), config.N)
    ok = [r for r in results if "error" not in r]
    failed = [{"index": r["index"], "error": r["error"]} for r in results if "error" in r]
    truth = config.truth
    if ok:
        est = np.array([r["estimate"] for r in ok])
        prof = np.array([r["profile"] for r in ok])
        rmse = np.sqrt(np.mean((est - truth) ** 2, axis=0)).tolist()
        dmax, davg = prof.mean(axis=0).tolist()
    else:
        rmse = [math.nan] * len(truth)
        dmax = davg = math.nan
    return StudyReport(config=config.to_dict(), param_names=config.param_names, truth=truth.tolist(), rmse=rmse,
                       delta_max=dmax, delta_avg=davg, n_failures=len(failed),
                       estimates=[r["estimate"] for r in ok], profile_errors=[r["profile"] for r in ok],
                       failures=failed, wall_clock=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# dependence curves


def empirical_curves(u, sites, threshold=0.95):
    """Per-pair empirical Spearman's rho and tail dependence rows."""
    rows = []
    for ps in inference.pair_summaries(u, sites, threshold):
        rows.append((ps.delta, "spearman", ps.rho_hat, "empirical"))
        rows.append((ps.delta, "taildep", ps.lambda_hat, "empirical"))
    return rows


def dependence_curves(model, deltas, n_mc=20000, seed=0, threshold=0.95, m=simulate.DEFAULT_GRID_POINTS):
    """Model Spearman's rho and tail dependence on a distance grid.

    Both are estimated by Monte Carlo from one simulation with a centre
    site and one site at each distance; the limiting tail dependence is
    also reported analytically (source ``"analytic"``).
    """
    deltas = np.asarray(deltas, float)
    if deltas.ndim != 1 or deltas.size == 0:
        raise ValueError("need a non-empty 1-D distance grid")
    if np.any(deltas < 0):
        raise ValueError("distances must be nonnegative")
    kernel = model.kernel if isinstance(model, simulate.MixtureModel) else model
    pos = deltas[deltas > 0]
    rows = []
    if pos.size:
        sites = np.column_stack([np.concatenate([[0.0], pos]), np.zeros(pos.size + 1)])
        if isinstance(model, simulate.MixtureModel):
            data = simulate.simulate_mixture(model, sites, n_mc, seed, m=m)
        else:
            data = simulate.simulate_cauchy(model, sites, n_mc, seed, m=m)
        u = simulate.to_uniform(data).values
        mc = {}
        for i, d in enumerate(pos, start=1):
            mc[d] = (inference.spearman(u[:, 0], u[:, i]), inference.empirical_tail_dep(u[:, 0], u[:, i], threshold))
    analytic = inference.model_tail_dep(kernel, deltas)
    for d, lam in zip(deltas, analytic):
        if d == 0:
            rows.append((0.0, "spearman", 1.0, "model"))
            rows.append((0.0, "taildep", 1.0, "model"))
        else:
            rows.append((float(d), "spearman", mc[d][0], "model"))
            rows.append((float(d), "taildep", mc[d][1], "model"))
        rows.append((float(d), "taildep", float(lam), "analytic"))
    return rows
