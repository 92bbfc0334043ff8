"""Simulation of Cauchy convolution fields, their Gaussian mixture and EV limit.

All simulators are pure functions of their inputs and an integer seed.
Replicates are generated in fixed-size chunks, each chunk drawing from its
own child of a :class:`numpy.random.SeedSequence`, so the output does not
depend on how chunks are later distributed across workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .kernels import Kernel, parse_sites

#: grids coarser than this trigger a :class:`CoarseGridWarning`
MIN_GRID_POINTS = 50
DEFAULT_GRID_POINTS = 200
#: replicates per seed chunk
CHUNK = 64
#: default cap on Poisson points per replicate in the exact EV simulator
EV_POINT_CAP = 10_000_000


class SimulationError(RuntimeError):
    pass


class CoarseGridWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SimGrid:
    """Regular ``m x m`` grid of cell centres on ``[a1, b1] x [a2, b2]``."""

    extent: tuple
    m: int

    def __post_init__(self):
        a1, b1, a2, b2 = map(float, self.extent)
        if not (b1 > a1 and b2 > a2):
            raise ValueError(f"degenerate grid extent {self.extent}")
        if self.m < 2:
            raise ValueError("grid needs m >= 2")
        object.__setattr__(self, "extent", (a1, b1, a2, b2))
        object.__setattr__(self, "m", int(self.m))

    @property
    def spacing(self):
        a1, b1, a2, b2 = self.extent
        return (b1 - a1) / self.m, (b2 - a2) / self.m

    @property
    def cell_area(self):
        hx, hy = self.spacing
        return hx * hy

    def centers(self):
        a1, b1, a2, b2 = self.extent
        hx, hy = self.spacing
        xs = a1 + hx * (np.arange(self.m) + 0.5)
        ys = a2 + hy * (np.arange(self.m) + 0.5)
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def covers(self, sites, radius):
        sites = parse_sites(sites)
        a1, b1, a2, b2 = self.extent
        tol = 1e-12 * max(1.0, abs(a1), abs(b1), abs(a2), abs(b2))
        return bool(np.all(sites[:, 0] - radius >= a1 - tol) and np.all(sites[:, 0] + radius <= b1 + tol)
                    and np.all(sites[:, 1] - radius >= a2 - tol) and np.all(sites[:, 1] + radius <= b2 + tol))

    def to_dict(self):
        return {"extent": list(self.extent), "m": self.m}


def default_grid(kernel, sites, m=DEFAULT_GRID_POINTS):
    """Bounding box of ``sites`` dilated by the kernel's support radius."""
    sites = parse_sites(sites)
    R = kernel.support_radius()
    lo = sites.min(axis=0) - R
    hi = sites.max(axis=0) + R
    return SimGrid((lo[0], hi[0], lo[1], hi[1]), m)


@dataclass(frozen=True)
class GaussianModel:
    """Gaussian field with correlation ``(1 - tau) exp(-theta_G delta^alpha)`` between distinct sites."""

    theta_G: float = 1.0
    alpha: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if not (self.theta_G > 0 and math.isfinite(self.theta_G)):
            raise ValueError(f"theta_G must be positive, got {self.theta_G}")
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not 0 <= self.tau <= 1:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    def correlation(self, delta):
        delta = np.asarray(delta, float)
        rho = (1.0 - self.tau) * np.exp(-self.theta_G * delta ** self.alpha)
        return np.where(delta == 0, 1.0, rho)

    def correlation_matrix(self, sites):
        sites = parse_sites(sites)
        D = np.linalg.norm(sites[:, None, :] - sites[None, :, :], axis=-1)
        C = self.correlation(D)
        np.fill_diagonal(C, 1.0)
        return C

    def to_dict(self):
        return {"theta_G": self.theta_G, "alpha": self.alpha, "tau": self.tau}


@dataclass(frozen=True)
class MixtureModel:
    """``Z(s) + beta Z_G(s)`` with independent Cauchy and Gaussian parts.

    With ``standardize`` (the default) the Cauchy part is divided by its
    marginal scale, so ``beta`` is measured against a unit Cauchy
    variable; this is the parameterization the mixture fit estimates.
    """

    kernel: Kernel
    gaussian: GaussianModel
    beta: float
    standardize: bool = True

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be nonnegative, got {self.beta}")


@dataclass
class ReplicateMatrix:
    """``n x d`` replicates at a site set, on the declared scale."""

    values: np.ndarray
    sites: np.ndarray
    scale: str = "raw"
    labels: list = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        self.sites = parse_sites(self.sites)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError("replicate matrix must be n x d with n >= 1")
        if self.values.shape[1] != len(self.sites):
            raise ValueError(f"{self.values.shape[1]} columns but {len(self.sites)} sites")
        if self.scale not in ("raw", "uniform", "standard-cauchy", "frechet"):
            raise ValueError(f"unknown scale {self.scale!r}")
        if self.labels is None:
            self.labels = [f"s{j + 1}" for j in range(len(self.sites))]
        if len(self.labels) != len(self.sites) or len(set(self.labels)) != len(self.labels):
            raise ValueError("site labels must be unique, one per site")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _chunks(n, seed):
    """Yield ``(start, stop, generator)`` for each replicate chunk."""
    if n < 1:
        raise ValueError("number of replicates must be at least 1")
    n_chunks = -(-n // CHUNK)
    children = _seed_sequence(seed).spawn(n_chunks)
    for i, child in enumerate(children):
        yield i * CHUNK, min(n, (i + 1) * CHUNK), np.random.default_rng(child)


def grid_weights(kernel, sites, grid):
    """Cell weights ``k(s_j, cell) * cell_area`` restricted to cells that matter.

    Returns ``(weights, n_cells)`` where ``weights`` is ``(d, n_active)``.
    """
    sites = parse_sites(sites)
    R = kernel.support_radius()
    if not grid.covers(sites, R):
        raise SimulationError(
            f"grid extent {grid.extent} does not cover the sites dilated by the support radius {R:.6g}")
    if grid.m < MIN_GRID_POINTS:
        warnings.warn(f"grid with m={grid.m} < {MIN_GRID_POINTS} points per axis is coarse",
                      CoarseGridWarning, stacklevel=3)
    cells = grid.centers()
    K = kernel.eval(sites[:, None, :], cells[None, :, :]) * grid.cell_area
    active = np.any(K > 0, axis=0)
    return K[:, active], cells.shape[0]


def grid_scale(kernel, sites, grid):
    """Exact marginal Cauchy scale ``sum_cells k * cell_area`` of the grid approximation."""
    K, _ = grid_weights(kernel, sites, grid)
    return K.sum(axis=1)


def simulate_cauchy(kernel, sites, n, seed, grid=None, m=DEFAULT_GRID_POINTS):
    """Grid approximation of the Cauchy convolution field.

    Each replicate is ``sum_cells k(s_j, cell) cell_area W_cell`` with
    i.i.d. standard Cauchy ``W``; cells outside every site's support are
    skipped since they contribute exactly zero.
    """
    sites = parse_sites(sites)
    if grid is None:
        grid = default_grid(kernel, sites, m)
    K, _ = grid_weights(kernel, sites, grid)
    out = np.empty((n, len(sites)))
    for lo, hi, rng in _chunks(n, seed):
        W = rng.standard_cauchy((hi - lo, K.shape[1]))
        out[lo:hi] = W @ K.T
    meta = {"process": "cauchy", "kernel": kernel.to_dict(), "grid": grid.to_dict(),
            "seed": _seed_meta(seed)}
    return ReplicateMatrix(out, sites, "raw", meta=meta)


def simulate_gaussian(model, sites, n, seed):
    """Multivariate normal replicates with unit variances via Cholesky factorization."""
    sites = parse_sites(sites)
    C = model.correlation_matrix(sites)
    try:
        L = linalg.cholesky(C, lower=True)
    except linalg.LinAlgError:
        raise SimulationError(
            f"correlation matrix not positive definite for theta_G={model.theta_G}, "
            f"alpha={model.alpha}, tau={model.tau}") from None
    out = np.empty((n, len(sites)))
    for lo, hi, rng in _chunks(n, seed):
        out[lo:hi] = rng.standard_normal((hi - lo, len(sites))) @ L.T
    meta = {"process": "gaussian", "gaussian": model.to_dict(), "seed": _seed_meta(seed)}
    return ReplicateMatrix(out, sites, "raw", meta=meta)


def simulate_mixture(model, sites, n, seed, grid=None, m=DEFAULT_GRID_POINTS):
    """Cauchy field plus ``beta`` times an independent Gaussian field."""
    sites = parse_sites(sites)
    if grid is None:
        grid = default_grid(model.kernel, sites, m)
    ss_cauchy, ss_gauss = _seed_sequence(seed).spawn(2)
    zc = simulate_cauchy(model.kernel, sites, n, ss_cauchy, grid=grid)
    values = zc.values
    if model.standardize:
        values = values / grid_scale(model.kernel, sites, grid)
    if model.beta > 0:
        values = values + model.beta * simulate_gaussian(model.gaussian, sites, n, ss_gauss).values
    meta = {"process": "mixture", "kernel": model.kernel.to_dict(), "gaussian": model.gaussian.to_dict(),
            "beta": model.beta, "standardize": model.standardize, "grid": grid.to_dict(),
            "seed": _seed_meta(seed)}
    return ReplicateMatrix(values, sites, "raw", meta=meta)


def simulate_ev(kernel, sites, n, seed, point_cap=EV_POINT_CAP, batch=16):
    """Exact moving-maximum simulation with unit Fréchet margins.

    Poisson points are generated in decreasing order,
    ``xi_i = |A| / (E_1 + ... + E_i)``, with locations uniform on the box
    ``A`` covering the sites dilated by the support radius. Each site
    keeps the running maximum of ``xi_i zeta(s_j, x_i)``. A replicate
    stops once ``|A| zeta_max / Gamma`` is no larger than its smallest
    running maximum, since no later point can change any maximum.
    Replicates of a chunk advance in lockstep, ``batch`` points at a time.
    """
    sites = parse_sites(sites)
    R = kernel.support_radius()
    lo_xy = sites.min(axis=0) - R
    hi_xy = sites.max(axis=0) + R
    span = hi_xy - lo_xy
    area = float(span[0] * span[1])
    c = kernel.normalizing_constant()
    zmax = kernel.g0 / c
    out = np.empty((n, len(sites)))
    for lo, hi, rng in _chunks(n, seed):
        nc = hi - lo
        Z = np.zeros((nc, len(sites)))
        gamma = np.zeros(nc)
        used = np.zeros(nc, dtype=np.int64)
        live = np.arange(nc)
        while live.size:
            E = rng.exponential(size=(live.size, batch))
            G = gamma[live, None] + np.cumsum(E, axis=1)
            X = lo_xy + span * rng.random((live.size, batch, 2))
            dist = np.linalg.norm(X[:, :, None, :] - sites[None, None, :, :], axis=-1)
            vals = (area / G)[:, :, None] * kernel.g(dist) / c
            Z[live] = np.maximum(Z[live], vals.max(axis=1))
            gamma[live] = G[:, -1]
            used[live] += batch
            done = area * zmax / gamma[live] <= Z[live].min(axis=1)
            if np.any(used[live] > point_cap):
                raise SimulationError(f"exact EV simulation exceeded {point_cap} points in a replicate")
            live = live[~done]
        out[lo:hi] = Z
    meta = {"process": "ev", "kernel": kernel.to_dict(), "seed": _seed_meta(seed),
            "region": [float(lo_xy[0]), float(hi_xy[0]), float(lo_xy[1]), float(hi_xy[1])]}
    return ReplicateMatrix(out, sites, "frechet", meta=meta)


def to_uniform(matrix):
    """Column-wise ranks divided by ``n + 1``, midranks for ties."""
    values = matrix.values if isinstance(matrix, ReplicateMatrix) else np.asarray(matrix, float)
    n = values.shape[0]
    if n < 2:
        raise ValueError("rank transform needs at least 2 replicates")
    u = stats.rankdata(values, method="average", axis=0) / (n + 1.0)
    if isinstance(matrix, ReplicateMatrix):
        return ReplicateMatrix(u, matrix.sites, "uniform", labels=list(matrix.labels), meta=dict(matrix.meta))
    return u


def frechet_to_uniform(matrix):
    """Exact probability integral transform ``exp(-1/z)`` of unit Fréchet values."""
    values = matrix.values if isinstance(matrix, ReplicateMatrix) else np.asarray(matrix, float)
    u = np.exp(-1.0 / values)
    if isinstance(matrix, ReplicateMatrix):
        return ReplicateMatrix(u, matrix.sites, "uniform", labels=list(matrix.labels), meta=dict(matrix.meta))
    return u


def _seed_meta(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": str(seed.entropy), "spawn_key": list(seed.spawn_key)}
    return seed
