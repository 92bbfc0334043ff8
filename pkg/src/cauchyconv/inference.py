"""Estimators for Cauchy convolution, mixture and moving-maximum models.

Dependence parameters are estimated from pseudo-uniform scores (ranks over
``n + 1``). Three least-squares matching fits compare model and empirical
pairwise summaries (Cauchy scales of standardized differences, tail
dependence coefficients, Gaussian scales of sums and differences); the
moving-maximum model is fitted by pairwise likelihood.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, special, stats

from . import evt
from .kernels import FAMILIES, Kernel, parse_sites
from .simulate import GaussianModel


class FitError(RuntimeError):
    """Optimizer failure after every start; carries the best trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class DegenerateScaleError(ValueError):
    pass


class PairDroppedWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# Cauchy scale estimators


def _cauchy_score(c, a2, n):
    c2 = c * c
    return np.sum(c2 / (c2 + a2)) - 0.5 * n


def cauchy_scale_mle(samples):
    """Maximum likelihood scale of a centred Cauchy sample.

    Solves ``sum c^2 / (c^2 + y_i^2) = n / 2``. The left side increases
    from ``#{y_i = 0}`` to ``n`` as ``c`` grows, so a positive root exists
    exactly when fewer than half the samples are zero; it is bracketed
    between ``min |y_i| > 0`` (halved until the score is negative) and
    ``max |y_i|`` and found with Brent's method.
    """
    y = np.asarray(samples, float).ravel()
    n = y.size
    if n < 2:
        raise ValueError("Cauchy scale MLE needs at least 2 samples")
    if not np.all(np.isfinite(y)):
        raise ValueError("samples must be finite")
    a = np.abs(y)
    n_zero = int(np.sum(a == 0))
    if 2 * n_zero >= n:
        raise DegenerateScaleError(f"{n_zero} of {n} samples are zero; the scale estimate degenerates to 0")
    a2 = a * a
    hi = float(a.max())
    lo = float(a[a > 0].min())
    while _cauchy_score(lo, a2, n) > 0:
        lo *= 0.5
    if _cauchy_score(hi, a2, n) == 0:
        return hi
    return optimize.brentq(_cauchy_score, lo, hi, args=(a2, n), xtol=1e-300, rtol=4 * np.finfo(float).eps,
                           maxiter=500)


def cauchy_scale_median(samples):
    """Median of absolute values; midpoint convention for even sample sizes."""
    y = np.asarray(samples, float).ravel()
    if y.size < 1:
        raise ValueError("need at least one sample")
    return float(np.median(np.abs(y)))


# ---------------------------------------------------------------------------
# empirical dependence summaries


def empirical_tail_dep(uj, uk, u=0.95):
    """``#{u_ij > u, u_ik > u} / (n (1 - u))``; can exceed 1 in finite samples."""
    uj = np.asarray(uj, float)
    uk = np.asarray(uk, float)
    if uj.shape != uk.shape or uj.ndim != 1 or uj.size < 1:
        raise ValueError("columns must be 1-D with equal positive length")
    if not 0 < u < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {u}")
    return float(np.sum((uj > u) & (uk > u)) / (uj.size * (1.0 - u)))


def spearman(uj, uk):
    """Pearson correlation of midranks."""
    uj = np.asarray(uj, float)
    uk = np.asarray(uk, float)
    if uj.shape != uk.shape or uj.size < 3:
        raise ValueError("Spearman correlation needs two columns of equal length >= 3")
    rj = stats.rankdata(uj)
    rk = stats.rankdata(uk)
    if np.ptp(rj) == 0 or np.ptp(rk) == 0:
        raise ValueError("Spearman correlation undefined for a constant column")
    return float(np.corrcoef(rj, rk)[0, 1])


def pair_index(sites):
    """Indices ``j < k`` and distances of every site pair."""
    sites = parse_sites(sites)
    j, k = np.triu_indices(len(sites), 1)
    delta = np.linalg.norm(sites[j] - sites[k], axis=1)
    return j, k, delta


@dataclass
class PairSummary:
    j: int
    k: int
    delta: float
    c_hat: float = math.nan
    lambda_hat: float = math.nan
    rho_hat: float = math.nan
    beta_plus_hat: float = math.nan
    beta_minus_hat: float = math.nan


def cauchy_scores(u):
    """Back-transform uniform scores to the standard Cauchy scale."""
    return np.tan(np.pi * (np.asarray(u, float) - 0.5))


def pair_summaries(u, sites, threshold=0.95):
    """Empirical ``c_hat``, ``lambda_hat`` and Spearman's rho for every pair."""
    u = np.asarray(u, float)
    z = cauchy_scores(u)
    out = []
    for j, k, d in zip(*pair_index(sites)):
        ps = PairSummary(int(j), int(k), float(d))
        try:
            ps.c_hat = cauchy_scale_mle(z[:, j] - z[:, k])
        except DegenerateScaleError:
            pass
        ps.lambda_hat = empirical_tail_dep(u[:, j], u[:, k], threshold)
        try:
            ps.rho_hat = spearman(u[:, j], u[:, k])
        except ValueError:
            pass
        out.append(ps)
    return out


# ---------------------------------------------------------------------------
# weights and fit results


@dataclass(frozen=True)
class Weights:
    """Pair weights: all ones, or ``1{delta <= delta_max}``."""

    scheme: str = "equal"
    delta_max: float = math.inf

    def __post_init__(self):
        if self.scheme not in ("equal", "distance-cutoff"):
            raise ValueError(f"unknown weight scheme {self.scheme!r}")

    def __call__(self, delta):
        delta = np.asarray(delta, float)
        if self.scheme == "equal":
            w = np.ones_like(delta)
        else:
            w = (delta <= self.delta_max).astype(float)
        if not np.any(w > 0):
            raise ValueError("all pair weights are zero")
        return w


@dataclass
class OptimizerConfig:
    """Multi-start Nelder-Mead in log-parameters.

    Starts are the ``n_starts`` best points of a ``grid_points`` per axis
    log-grid over the bounds; each is polished by Nelder-Mead.
    """

    n_starts: int = 5
    grid_points: int = 9
    maxiter: int = 4000
    xatol: float = 1e-10
    fatol: float = 1e-16
    bounds: dict = None

    def to_dict(self):
        return asdict(self)


#: default search boxes for kernel parameters
DEFAULT_BOUNDS = {
    "Indicator": {"r": (1e-3, 5.0)},
    "PowerCompact": {"r": (1e-2, 2.0), "eta": (0.05, 10.0)},
    "Exponential": {"lambda": (1e-3, 5.0)},
    "PoweredExponential": {"lambda": (1e-3, 5.0), "alpha": (0.05, 2.0)},
    "GaussianDensity": {"sigma": (1e-3, 5.0)},
}


@dataclass
class FitResult:
    family: str
    theta_K: dict
    objective: float
    theta_G: dict = None
    beta: float = None
    n_pairs_used: int = 0
    config: dict = field(default_factory=dict)
    seed: int = None
    trace: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def kernel(self):
        return Kernel(self.family, dict(self.theta_K))

    def to_dict(self, with_trace=False):
        d = {"family": self.family, "theta_K": self.theta_K, "theta_G": self.theta_G, "beta": self.beta,
             "objective": self.objective, "n_pairs_used": self.n_pairs_used, "config": self.config,
             "seed": self.seed, "diagnostics": self.diagnostics}
        if with_trace:
            d["trace"] = self.trace
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(**kw), indent=2, default=_json_default)

    @classmethod
    def from_dict(cls, d):
        return cls(family=d["family"], theta_K=dict(d["theta_K"]), objective=d["objective"],
                   theta_G=d.get("theta_G"), beta=d.get("beta"), n_pairs_used=d.get("n_pairs_used", 0),
                   config=d.get("config", {}), seed=d.get("seed"), diagnostics=d.get("diagnostics", {}))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _log_box(names, bounds):
    lo = np.log([bounds[n][0] for n in names])
    hi = np.log([bounds[n][1] for n in names])
    return lo, hi


def _minimize_multistart(objective, lo, hi, config, starts=None):
    """Grid-seeded multi-start bounded Nelder-Mead on ``[lo, hi]``."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    k = lo.size
    if starts is None:
        axes = [np.linspace(a, b, config.grid_points) for a, b in zip(lo, hi)]
        cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        vals = np.array([objective(x) for x in cand])
        order = np.argsort(vals, kind="stable")
        starts = cand[order[:config.n_starts]]
    trace = []
    best = None
    for x0 in starts:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(objective, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                                    options={"maxiter": config.maxiter, "xatol": config.xatol,
                                             "fatol": config.fatol, "adaptive": k > 2})
        trace.append({"start": np.asarray(x0).tolist(), "x": res.x.tolist(), "fun": float(res.fun),
                      "nit": int(res.nit), "success": bool(res.success)})
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitError("optimizer did not reach a finite objective from any start", trace)
    return best, trace


# ---------------------------------------------------------------------------
# model-based pairwise summaries


def model_cjk(kernel, delta):
    """Model Cauchy scale ``c_jk`` of standardized differences at distances ``delta``."""
    delta = np.asarray(delta, float)
    if kernel.family == "PowerCompact":
        return np.asarray(evt.cjk_power_compact(kernel.params["eta"], kernel.params["r"], delta))
    uniq, inv = np.unique(delta, return_inverse=True)
    vals = np.empty(uniq.size)
    for i, d in enumerate(uniq):
        if d == 0:
            vals[i] = 0.0
        elif kernel.family == "Indicator":
            vals[i] = 2.0 * (evt.stdf_marshall_olkin(kernel.params["r"], d, 1.0, 1.0) - 1.0)
        else:
            # l(1, 1) = 2 F_V(0) by symmetry of the pair
            F0 = evt.ray_cdf_pdf(kernel, d, np.array([0.0]))[0][0]
            vals[i] = 4.0 * F0 - 2.0
    return vals[inv].reshape(delta.shape)


def model_tail_dep(kernel, delta):
    """``lambda_jk = 1 - c_jk / 2``."""
    return 1.0 - 0.5 * model_cjk(kernel, delta)


def model_chi(kernel, delta, u):
    """Joint exceedance rate ``P(U_j > u, U_k > u) / (1 - u)`` under the EV copula.

    With ``C(u, u) = u^{2 - lambda}`` this is
    ``(1 - 2u + u^{2 - lambda}) / (1 - u)``, which tends to ``lambda`` as
    ``u -> 1`` and equals ``1 - u`` for independent sites.
    """
    lam = model_tail_dep(kernel, delta)
    return (1.0 - 2.0 * u + u ** (2.0 - lam)) / (1.0 - u)


def fit_kernel_from_summaries(delta, target, family, statistic="cjk", weights=None, config=None, threshold=None):
    """Least-squares match of model and empirical pairwise summaries.

    ``statistic`` is ``"cjk"`` (Cauchy scales), ``"taildep"`` (limiting
    tail dependence coefficients) or ``"chi"`` (joint exceedance rates at
    ``threshold``). Parameters are searched in log space.
    """
    delta = np.asarray(delta, float)
    target = np.asarray(target, float)
    config = config or OptimizerConfig()
    weights = weights or Weights()
    w = weights(delta)
    ok = np.isfinite(target) & (w > 0)
    if not np.any(ok):
        raise ValueError("no pairs with positive weight and a defined summary")
    delta, target, w = delta[ok], target[ok], w[ok]
    names = FAMILIES[family]
    bounds = dict(DEFAULT_BOUNDS[family])
    if config.bounds:
        bounds.update({n: tuple(config.bounds[n]) for n in names if n in config.bounds})
    lo, hi = _log_box(names, bounds)
    if statistic == "cjk":
        fn = model_cjk
    elif statistic == "taildep":
        fn = model_tail_dep
    elif statistic == "chi":
        def fn(kern, d):
            return model_chi(kern, d, threshold)
    else:
        raise ValueError(f"unknown summary statistic {statistic!r}")

    def objective(x):
        kern = Kernel(family, dict(zip(names, np.exp(x))))
        return float(np.sum(w * (fn(kern, delta) - target) ** 2))

    best, trace = _minimize_multistart(objective, lo, hi, config)
    theta = dict(zip(names, np.exp(best.x).tolist()))
    return FitResult(family, theta, float(best.fun), n_pairs_used=int(delta.size),
                     config={"statistic": statistic, "weights": asdict(weights), "optimizer": config.to_dict()},
                     trace=trace)


def _scores(u):
    u = u.values if hasattr(u, "values") else np.asarray(u, float)
    if u.ndim != 2:
        raise ValueError("uniform scores must be an n x d matrix")
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("uniform scores must lie strictly inside (0, 1)")
    return u


def _check_shape(u, sites, min_n=20, min_d=3):
    sites = parse_sites(sites)
    if u.shape[1] != len(sites):
        raise ValueError(f"{u.shape[1]} score columns but {len(sites)} sites")
    if u.shape[0] < min_n:
        raise ValueError(f"need at least {min_n} replicates, got {u.shape[0]}")
    if len(sites) < min_d:
        raise ValueError(f"need at least {min_d} sites, got {len(sites)}")
    return sites


def fit_kernel_by_scales(u, sites, family="PowerCompact", weights=None, config=None):
    """Kernel fit matching model ``c_jk`` to MLE scales of standardized differences."""
    u = _scores(u)
    sites = _check_shape(u, sites)
    z = cauchy_scores(u)
    j, k, delta = pair_index(sites)
    c_hat = np.full(delta.size, np.nan)
    for i in range(delta.size):
        try:
            c_hat[i] = cauchy_scale_mle(z[:, j[i]] - z[:, k[i]])
        except DegenerateScaleError:
            warnings.warn(f"dropping pair ({j[i]}, {k[i]}): degenerate differences", PairDroppedWarning,
                          stacklevel=2)
    res = fit_kernel_from_summaries(delta, c_hat, family, "cjk", weights, config)
    res.diagnostics["c_hat"] = c_hat.tolist()
    return res


def fit_kernel_by_taildep(u, sites, family="PowerCompact", threshold=0.95, weights=None, config=None,
                          finite_threshold=True):
    """Kernel fit matching model tail dependence to empirical joint exceedance rates.

    The empirical rate at threshold ``u`` estimates
    ``P(U_j > u, U_k > u) / (1 - u)``, which is ``1 - u`` rather than 0
    for independent sites. With ``finite_threshold`` (default) the model
    side is the same rate under the EV copula (:func:`model_chi`);
    otherwise it is the limit ``lambda_jk = 2 - l(1, 1)``.
    """
    u = _scores(u)
    sites = _check_shape(u, sites)
    j, k, delta = pair_index(sites)
    lam_hat = np.array([empirical_tail_dep(u[:, a], u[:, b], threshold) for a, b in zip(j, k)])
    statistic = "chi" if finite_threshold else "taildep"
    res = fit_kernel_from_summaries(delta, lam_hat, family, statistic, weights, config, threshold=threshold)
    res.config["threshold"] = threshold
    res.diagnostics["lambda_hat"] = lam_hat.tolist()
    return res


# ---------------------------------------------------------------------------
# Cauchy-Gaussian mixture margin

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_ZMAX = 9.0
_BASE = np.linspace(-_ZMAX, _ZMAX, 13)
_GEOM = 4.0 ** np.arange(12)
_OFFSETS = np.concatenate([-_GEOM[::-1], [0.0], _GEOM])


@dataclass(frozen=True)
class MixtureMarginal:
    """Distribution of ``gamma W + beta Z``, ``W`` standard Cauchy, ``Z`` standard normal."""

    gamma: float
    beta: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")

    def cdf(self, w):
        return mixture_cdf(w, self.gamma, self.beta)

    def pdf(self, w):
        return mixture_pdf(w, self.gamma, self.beta)

    def quantile(self, q):
        return mixture_quantile(q, self.gamma, self.beta)


def mixture_cdf(w, gamma, beta):
    """CDF of ``gamma W + beta Z``.

    ``1/2 + (1/pi) int arctan((w - beta z)/gamma) phi(z) dz``, integrated
    by composite 20-point Gauss-Legendre on ``|z| <= 9``. Panels combine
    a uniform partition with a geometric one centred on ``z = w/beta``
    (ratio 4, innermost width ``gamma/beta``), which resolves the arctan
    step however small ``gamma/beta`` is. ``beta = 0`` is the Cauchy CDF.
    """
    w = np.asarray(w, float)
    shape = w.shape
    w = w.ravel()
    if beta == 0:
        return (0.5 + np.arctan(w / gamma) / np.pi).reshape(shape)
    zs = w / beta
    pts = np.concatenate([np.broadcast_to(_BASE, (w.size, _BASE.size)),
                          zs[:, None] + (gamma / beta) * _OFFSETS[None, :]], axis=1)
    pts = np.sort(np.clip(pts, -_ZMAX, _ZMAX), axis=1)
    a = pts[:, :-1, None]
    b = pts[:, 1:, None]
    z = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
    f = np.arctan((w[:, None, None] - beta * z) / gamma) * np.exp(-0.5 * z * z)
    val = np.sum(0.5 * (b - a) * _GL_W * f, axis=(1, 2)) / math.sqrt(2.0 * math.pi)
    return np.clip(0.5 + val / np.pi, 0.0, 1.0).reshape(shape)


def mixture_pdf(w, gamma, beta):
    """Density of ``gamma W + beta Z`` (the Voigt profile)."""
    w = np.asarray(w, float)
    if beta == 0:
        return gamma / (np.pi * (w * w + gamma * gamma))
    return special.voigt_profile(w, beta, gamma)


def mixture_quantile(q, gamma, beta, tol=1e-13):
    """Inverse of :func:`mixture_cdf` by safeguarded Newton iteration.

    A bracket is grown geometrically, then Newton steps using
    :func:`mixture_pdf` are taken whenever they stay inside it and
    bisection otherwise, until ``|F(w) - q| < tol`` or the bracket
    collapses to machine precision.
    """
    q = np.asarray(q, float)
    if np.any(~((q > 0) & (q < 1))):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    shape = q.shape
    q = q.ravel()
    if beta == 0:
        return (gamma * np.tan(np.pi * (q - 0.5))).reshape(shape)
    # start from the Cauchy or normal quantile, whichever part dominates
    x = np.where(np.abs(q - 0.5) > 0.45, gamma * np.tan(np.pi * (q - 0.5)), 0.0) + \
        beta * special.ndtri(np.clip(q, 1e-12, 1 - 1e-12))
    lo = np.full_like(q, -1.0)
    hi = np.full_like(q, 1.0)
    for _ in range(200):
        bad = mixture_cdf(lo, gamma, beta) > q
        if not bad.any():
            break
        lo = np.where(bad, lo * 4.0, lo)
    for _ in range(200):
        bad = mixture_cdf(hi, gamma, beta) < q
        if not bad.any():
            break
        hi = np.where(bad, hi * 4.0, hi)
    x = np.clip(x, lo, hi)
    active = np.ones(q.size, dtype=bool)
    for _ in range(200):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        xi = x[idx]
        F = mixture_cdf(xi, gamma, beta)
        r = F - q[idx]
        done = (np.abs(r) < tol) | (hi[idx] - lo[idx] <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(xi)))
        lo[idx] = np.where(r < 0, xi, lo[idx])
        hi[idx] = np.where(r > 0, xi, hi[idx])
        f = mixture_pdf(xi, gamma, beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xi - r / f
        inside = np.isfinite(xn) & (xn > lo[idx]) & (xn < hi[idx])
        xn = np.where(inside, xn, 0.5 * (lo[idx] + hi[idx]))
        x[idx] = np.where(done, xi, xn)
        active[idx] = ~done
    return x.reshape(shape)


def mixture_beta_mle(samples, gamma, beta_max):
    """One-parameter MLE of ``beta`` in ``gamma W + beta Z`` on ``[0, beta_max]``."""
    y = np.asarray(samples, float)

    def nll(b):
        return -float(np.sum(np.log(np.maximum(mixture_pdf(y, gamma, b), 1e-300))))

    res = optimize.minimize_scalar(nll, bounds=(0.0, beta_max), method="bounded",
                                   options={"xatol": 1e-7, "maxiter": 500})
    # the boundary beta = 0 is admissible; bounded Brent never evaluates it exactly
    if nll(0.0) <= res.fun:
        return 0.0
    if not res.success:
        raise FitError(f"beta MLE did not converge: {res.message}")
    return float(res.x)


def beta_pm(theta_G, delta, beta0, alpha=1.0, tau=0.0):
    """Model Gaussian scales ``beta0 sqrt(2 +- 2 rho_G(delta))`` of sums and differences."""
    rho = GaussianModel(theta_G, alpha, tau).correlation(delta)
    return beta0 * np.sqrt(2.0 + 2.0 * rho), beta0 * np.sqrt(np.clip(2.0 - 2.0 * rho, 0.0, None))


_GAUSS_BOUNDS = {"theta_G": (1e-3, 1e3), "alpha": (0.05, 2.0), "tau": (1e-6, 1.0)}


def fit_gaussian_from_summaries(delta, bplus, bminus, beta0, free=("theta_G",), fixed=None,
                                weights_plus=None, weights_minus=None, config=None):
    """Least squares for ``theta_G`` at fixed ``beta0`` given estimated ``beta+-``.

    Returns ``(params, objective, trace)``. Positive parameters are
    searched in log space; ``tau`` uses a log scale on ``[1e-6, 1]``.
    """
    config = config or OptimizerConfig(n_starts=3, grid_points=17)
    fixed = {"theta_G": 1.0, "alpha": 1.0, "tau": 0.0, **(fixed or {})}
    delta = np.asarray(delta, float)
    wp = np.ones_like(delta) if weights_plus is None else np.asarray(weights_plus, float)
    wm = np.ones_like(delta) if weights_minus is None else np.asarray(weights_minus, float)
    okp = np.isfinite(bplus) & (wp > 0)
    okm = np.isfinite(bminus) & (wm > 0)

    def params_of(x):
        p = dict(fixed)
        p.update(zip(free, np.exp(x)))
        return p

    def objective(x):
        p = params_of(x)
        bp, bm = beta_pm(p["theta_G"], delta, beta0, p["alpha"], p["tau"])
        return float(np.sum(wp[okp] * (bp[okp] - bplus[okp]) ** 2) + np.sum(wm[okm] * (bm[okm] - bminus[okm]) ** 2))

    if not free:
        return dict(fixed), objective(np.zeros(0)), []
    lo, hi = _log_box(free, _GAUSS_BOUNDS)
    best, trace = _minimize_multistart(objective, lo, hi, config)
    return params_of(best.x), float(best.fun), trace


def mixture_pair_summaries(u, sites, kernel, beta0, beta_max=None):
    """MLEs ``beta+_jk`` (sums, Cauchy scale 2) and ``beta-_jk`` (differences, scale ``c_jk``).

    Scores are back-transformed through the ``F(.; 1, beta0)`` quantile;
    ranks over ``n + 1`` take at most ``n`` distinct values, so the
    quantile is computed once per distinct score.
    """
    j, k, delta = pair_index(sites)
    uq, inv = np.unique(u, return_inverse=True)
    z = mixture_quantile(uq, 1.0, beta0)[inv].reshape(u.shape)
    c = model_cjk(kernel, delta)
    bmax = beta_max if beta_max is not None else 4.0 * beta0 + 10.0
    bplus = np.full(delta.size, np.nan)
    bminus = np.full(delta.size, np.nan)
    for i in range(delta.size):
        zj, zk = z[:, j[i]], z[:, k[i]]
        try:
            bplus[i] = mixture_beta_mle(zj + zk, 2.0, bmax)
            if c[i] > 0:
                bminus[i] = mixture_beta_mle(zj - zk, c[i], bmax)
        except FitError:
            warnings.warn(f"dropping pair ({j[i]}, {k[i]}): beta MLE failed", PairDroppedWarning, stacklevel=2)
    return delta, bplus, bminus


def default_beta_grid():
    return np.round(np.arange(0.0, 4.0 + 1e-9, 0.25), 10)


def fit_mixture_from_summaries(delta, summaries, free=("theta_G",), fixed=None, weights=None, refine=None,
                               config=None):
    """Select ``beta`` over a grid; ``summaries(beta0)`` returns ``(bplus, bminus)``.

    ``refine`` is a callable returning extra grid values around the
    incumbent (or ``None`` to skip refinement).
    """
    weights = weights or Weights()
    w = weights(delta)
    results = {}

    def evaluate(b0):
        b0 = float(b0)
        if b0 in results:
            return
        bplus, bminus = summaries(b0)
        p, obj, trace = fit_gaussian_from_summaries(delta, bplus, bminus, b0, free, fixed, w, w, config)
        results[b0] = (obj, p, trace)

    grid = list(getattr(summaries, "grid", default_beta_grid()))
    if not grid:
        raise ValueError("beta grid is empty")
    for b0 in grid:
        evaluate(b0)
    if refine is not None:
        incumbent = min(results, key=lambda b: results[b][0])
        for b0 in refine(incumbent):
            if b0 >= 0:
                evaluate(b0)
    best_b = min(results, key=lambda b: (results[b][0], b))
    obj, p, trace = results[best_b]
    profile = [{"beta": b, "objective": results[b][0], **results[b][1]} for b in sorted(results)]
    return best_b, p, obj, trace, profile


def _refine_around(step=0.05, halfwidth=0.25):
    def refine(b):
        return [round(b + i * step, 10) for i in range(-int(round(halfwidth / step)), int(round(halfwidth / step)) + 1)]
    return refine


def fit_mixture(u, sites, theta_K=None, family="PowerCompact", beta_grid=None, free=("theta_G",), fixed=None,
                threshold=0.95, weights=None, config=None, refine=True):
    """Two-step fit of the Cauchy-Gaussian mixture.

    ``theta_K`` comes from :func:`fit_kernel_by_taildep` unless a fitted
    kernel is passed. For each ``beta0`` on the grid the scores are mapped
    to the ``F(.; 1, beta0)`` scale, per-pair ``beta+-`` are estimated by
    maximum likelihood, and ``theta_G`` is fitted by least squares; the
    ``beta0`` with the smallest objective wins, after one refinement of the
    grid around it.
    """
    u = _scores(u)
    sites = _check_shape(u, sites)
    if theta_K is None:
        kfit = fit_kernel_by_taildep(u, sites, family, threshold, weights, config)
        kernel = kfit.kernel
    else:
        kfit = None
        kernel = theta_K if isinstance(theta_K, Kernel) else Kernel(family, dict(theta_K))
    grid = default_beta_grid() if beta_grid is None else np.asarray(beta_grid, float)
    if len(grid) == 0:
        raise ValueError("beta grid is empty")
    _, _, delta = pair_index(sites)

    def summaries(b0):
        return mixture_pair_summaries(u, sites, kernel, b0)[1:]

    summaries.grid = list(grid)
    best_b, p, obj, trace, profile = fit_mixture_from_summaries(
        delta, summaries, free, fixed, weights, _refine_around() if refine else None)
    res = FitResult(kernel.family, dict(kernel.params), obj, theta_G=p, beta=best_b,
                    n_pairs_used=int(delta.size),
                    config={"beta_grid": list(map(float, grid)), "free": list(free), "threshold": threshold,
                            "weights": asdict(weights or Weights())},
                    trace=trace, diagnostics={"beta_profile": profile})
    if kfit is not None:
        res.diagnostics["kernel_objective"] = kfit.objective
        res.diagnostics["lambda_hat"] = kfit.diagnostics.get("lambda_hat")
    return res


# ---------------------------------------------------------------------------
# pairwise likelihood for the moving-maximum model


def pairwise_loglik(kernel, u, sites, weights=None, pairs=None, step=0.05):
    """Weighted pairwise log-likelihood of EV-copula scores and the floor count.

    Pairs at or beyond twice the support radius of a compact kernel are
    independent and contribute zero.
    """
    u = np.asarray(u, float)
    if pairs is None:
        j, k, delta = pair_index(sites)
    else:
        j, k, delta = pairs
    w = (weights or Weights())(delta)
    x = -np.log(u)
    total = 0.0
    floored = 0
    reach = 2.0 * kernel.support_radius() if kernel.is_compact else math.inf
    if kernel.family == "Indicator":
        raise ValueError("the indicator kernel has a singular EV copula; pairwise likelihood undefined")
    for d in np.unique(delta[(w > 0) & (delta < reach)]):
        sel = np.nonzero((delta == d) & (w > 0))[0]
        x1 = x[:, j[sel]].ravel()
        x2 = x[:, k[sel]].ravel()
        ww = np.repeat(w[sel][None, :], u.shape[0], axis=0).ravel()
        vmax = float(np.max(np.abs(np.log(x1) - np.log(x2))))
        provider = evt.KernelPairStdf(kernel, d, vmax=vmax, step=step)
        ld = evt.ev_log_density(provider, np.exp(-x1), np.exp(-x2))
        bad = ~np.isfinite(ld) | (ld < math.log(1e-300))
        floored += int(bad.sum())
        ld = np.where(bad, math.log(1e-300), ld)
        total += float(np.sum(ww * ld))
    return total, floored


def fit_ev_pairwise(u, sites, family="PowerCompact", weights=None, config=None, start=None, step=0.05):
    """Maximum pairwise likelihood for the moving-maximum copula.

    Nelder-Mead is started from the tail-dependence fit on the same scores
    (or ``start``) and from the best ``n_starts`` points of a coarse
    ``grid_points`` per axis log-grid; the objective is the negative
    weighted pairwise log-likelihood divided by ``n``.
    """
    if family == "Indicator":
        raise ValueError("the indicator kernel has a singular EV copula; pairwise likelihood undefined")
    u = _scores(u)
    sites = _check_shape(u, sites)
    config = config or OptimizerConfig(n_starts=1, grid_points=4, xatol=1e-4, fatol=1e-7, maxiter=400)
    names = FAMILIES[family]
    bounds = dict(DEFAULT_BOUNDS[family])
    if config.bounds:
        bounds.update({n: tuple(config.bounds[n]) for n in names if n in config.bounds})
    lo, hi = _log_box(names, bounds)
    pairs = pair_index(sites)
    if start is None:
        init = fit_kernel_by_taildep(u, sites, family, weights=weights)
        start = init.theta_K
    n = u.shape[0]
    floors = {}

    def objective(x):
        kern = Kernel(family, dict(zip(names, np.exp(x))))
        ll, fl = pairwise_loglik(kern, u, sites, weights, pairs, step)
        floors[tuple(x)] = fl
        return -ll / n

    starts = [np.clip(np.log([start[nm] for nm in names]), lo, hi)]
    if config.n_starts > 0:
        axes = [np.linspace(a, b, config.grid_points + 2)[1:-1] for a, b in zip(lo, hi)]
        cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(names))
        vals = np.array([objective(x) for x in cand])
        starts += list(cand[np.argsort(vals, kind="stable")[:config.n_starts]])
    best, trace = _minimize_multistart(objective, lo, hi, config, starts=starts)
    theta = dict(zip(names, np.exp(best.x).tolist()))
    return FitResult(family, theta, float(best.fun), n_pairs_used=int(pairs[2].size),
                     config={"weights": asdict(weights or Weights()), "optimizer": config.to_dict(),
                             "start": dict(start)},
                     trace=trace, diagnostics={"floored_densities": floors.get(tuple(best.x), 0)})
