"""Isotropic kernel families for Cauchy convolution processes.

Every kernel is of the form ``k(s, s*) = g(||s - s*||)`` with ``g``
nonincreasing and bounded. The normalized kernel
``zeta(s, s*) = k(s, s*) / int k(s, s*) ds*`` drives the dependence
structure of the field, its extreme-value limit and every estimator in
:mod:`cauchyconv.inference`.

Families and parameters
-----------------------
``Indicator(r)``                 ``g(t) = 1{t < r}``
``PowerCompact(r, eta)``         ``g(t) = (1 - t/r)_+^eta``
``Exponential(lambda)``          ``g(t) = exp(-t/lambda)``
``PoweredExponential(lambda, alpha)``  ``g(t) = exp(-(t/lambda)^alpha)``
``GaussianDensity(sigma)``       bivariate isotropic normal density
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

#: relative level below which an infinite-support kernel is treated as zero
EFFECTIVE_CUTOFF = 5e-5

FAMILIES = {
    "Indicator": ("r",),
    "PowerCompact": ("r", "eta"),
    "Exponential": ("lambda",),
    "PoweredExponential": ("lambda", "alpha"),
    "GaussianDensity": ("sigma",),
}

COMPACT_FAMILIES = ("Indicator", "PowerCompact")


class KernelError(ValueError):
    """Invalid kernel family or parameters."""


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class KernelProfile:
    distances: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class Kernel:
    """Immutable parametric isotropic kernel.

    Parameters are validated once here; every other function assumes a
    valid kernel.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        names = FAMILIES[self.family]
        missing = [n for n in names if n not in self.params]
        if missing:
            raise KernelError(f"{self.family} kernel missing parameter(s): {', '.join(missing)}")
        extra = set(self.params) - set(names)
        if extra:
            raise KernelError(f"{self.family} kernel got unexpected parameter(s): {', '.join(sorted(extra))}")
        clean = {}
        for n in names:
            try:
                v = float(self.params[n])
            except (TypeError, ValueError):
                raise KernelError(f"parameter {n!r} must be a number") from None
            if not math.isfinite(v) or v <= 0:
                raise KernelError(f"parameter {n!r} must be finite and strictly positive, got {v}")
            clean[n] = v
        if self.family == "PoweredExponential" and clean["alpha"] > 2:
            raise KernelError(f"parameter 'alpha' must lie in (0, 2], got {clean['alpha']}")
        object.__setattr__(self, "params", clean)

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    # -- constructors -------------------------------------------------------

    @classmethod
    def indicator(cls, r):
        return cls("Indicator", {"r": r})

    @classmethod
    def power_compact(cls, r, eta):
        return cls("PowerCompact", {"r": r, "eta": eta})

    @classmethod
    def exponential(cls, lam):
        return cls("Exponential", {"lambda": lam})

    @classmethod
    def powered_exponential(cls, lam, alpha):
        return cls("PoweredExponential", {"lambda": lam, "alpha": alpha})

    @classmethod
    def gaussian_density(cls, sigma):
        return cls("GaussianDensity", {"sigma": sigma})

    @classmethod
    def from_dict(cls, obj):
        if not isinstance(obj, dict) or "family" not in obj or "params" not in obj:
            raise KernelError('kernel must be an object {"family": ..., "params": {...}}')
        if not isinstance(obj["params"], dict):
            raise KernelError("kernel 'params' must be an object")
        return cls(obj["family"], dict(obj["params"]))

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params)}

    def to_json(self):
        return json.dumps(self.to_dict())

    def with_params(self, values):
        """Same family, new parameter values in :data:`FAMILIES` order."""
        return Kernel(self.family, dict(zip(FAMILIES[self.family], values)))

    @property
    def param_vector(self):
        return np.array([self.params[n] for n in FAMILIES[self.family]])

    @property
    def is_compact(self):
        return self.family in COMPACT_FAMILIES

    # -- radial profile -----------------------------------------------------

    def g(self, t):
        """Radial profile ``g(t)`` for distances ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        p = self.params
        f = self.family
        if f == "Indicator":
            return (t < p["r"]).astype(float)
        if f == "PowerCompact":
            base = np.clip(1.0 - t / p["r"], 0.0, None)
            with np.errstate(divide="ignore"):
                return np.where(base > 0, base ** p["eta"], 0.0)
        if f == "Exponential":
            return np.exp(-t / p["lambda"])
        if f == "PoweredExponential":
            return np.exp(-((t / p["lambda"]) ** p["alpha"]))
        s2 = p["sigma"] ** 2
        return np.exp(-0.5 * t * t / s2) / (2.0 * np.pi * s2)

    @property
    def g0(self):
        return float(self.g(0.0))

    def g_inverse(self, y):
        """Radius at which ``g`` falls to ``y``.

        Returns the radius ``t`` such that ``{g > y}`` is the open disc of
        radius ``t``: 0 for ``y >= g(0)`` and ``inf`` for ``y <= 0`` on
        infinite-support families.
        """
        y = np.asarray(y, dtype=float)
        p = self.params
        f = self.family
        g0 = self.g0
        yr = np.clip(y / g0, 1e-300, 1.0)
        if f == "Indicator":
            out = np.where(y < g0, p["r"], 0.0)
        elif f == "PowerCompact":
            out = p["r"] * (1.0 - yr ** (1.0 / p["eta"]))
        elif f == "Exponential":
            out = -p["lambda"] * np.log(yr)
        elif f == "PoweredExponential":
            out = p["lambda"] * (-np.log(yr)) ** (1.0 / p["alpha"])
        else:
            out = p["sigma"] * np.sqrt(-2.0 * np.log(yr))
        out = np.where(y >= g0, 0.0, out)
        if self.is_compact:
            out = np.where(y <= 0, self.support_radius(), out)
        else:
            out = np.where(y <= 0, np.inf, out)
        return out

    def tau_g_over_gprime(self, tau):
        """``tau * g(tau) / g'(tau)`` (nonpositive) for strictly decreasing families."""
        tau = np.asarray(tau, dtype=float)
        p = self.params
        f = self.family
        if f == "PowerCompact":
            return -tau * (p["r"] - tau) / p["eta"]
        if f == "Exponential":
            return -p["lambda"] * tau
        if f == "PoweredExponential":
            a = p["alpha"]
            return -(p["lambda"] ** a) * tau ** (2.0 - a) / a
        if f == "GaussianDensity":
            return np.full_like(tau, -p["sigma"] ** 2)
        raise KernelError("Indicator kernel is not strictly decreasing")

    # -- spatial evaluation ---------------------------------------------------

    def eval(self, s, s_star):
        """Kernel value ``g(||s - s_star||)``; broadcasts over leading axes."""
        d = np.linalg.norm(np.asarray(s, float) - np.asarray(s_star, float), axis=-1)
        return self.g(d)

    def normalizing_constant(self):
        """``int_{R^2} k(s, s*) ds*``, closed form where the family has one."""
        p = self.params
        f = self.family
        if f == "Indicator":
            return math.pi * p["r"] ** 2
        if f == "PowerCompact":
            eta = p["eta"]
            return 2.0 * math.pi * p["r"] ** 2 / ((eta + 1.0) * (eta + 2.0))
        if f == "Exponential":
            return 2.0 * math.pi * p["lambda"] ** 2
        if f == "GaussianDensity":
            return 1.0
        if p["alpha"] == 1.0:
            return 2.0 * math.pi * p["lambda"] ** 2
        if p["alpha"] == 2.0:
            return math.pi * p["lambda"] ** 2
        return radial_integral(self)

    def zeta(self, s, s_star):
        return self.eval(s, s_star) / self.normalizing_constant()

    def zeta_radial(self, t):
        return self.g(t) / self.normalizing_constant()

    def support_radius(self, level=EFFECTIVE_CUTOFF):
        """Exact support radius, or where ``g`` drops below ``level * g(0)``."""
        if self.is_compact:
            return self.params["r"]
        return float(self.g_inverse(level * self.g0))

    def profile(self, n_points):
        """Profile ``g`` along ``x in (0, 1)`` on the grid ``i / (n_points + 1)``."""
        if n_points < 2:
            raise KernelError("profile needs at least 2 points")
        x = np.arange(1, n_points + 1) / (n_points + 1.0)
        return KernelProfile(distances=x, values=self.g(x))

    def __repr__(self):
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family}({args})"


def radial_integral(kernel, epsabs=1e-8):
    """``2 pi int_0^inf t g(t) dt`` by adaptive quadrature."""
    upper = kernel.support_radius(level=1e-16) if not kernel.is_compact else kernel.params["r"]
    # break at the effective radius so quad samples the bulk of the mass
    mid = kernel.support_radius()
    val, err = integrate.quad(lambda t: t * float(kernel.g(t)), 0.0, upper,
                              points=[mid] if mid < upper else None,
                              epsabs=epsabs / (2 * math.pi), epsrel=1e-12, limit=200)
    if err > epsabs / (2 * math.pi):
        raise QuadratureError("radial normalizing constant did not converge", 2 * math.pi * err)
    return 2.0 * math.pi * val


def parse_sites(sites):
    """Coerce a site list into a ``(d, 2)`` float array."""
    arr = np.asarray(sites, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"sites must have shape (d, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("site coordinates must be finite")
    return arr


def lattice_sites(m):
    """Regular ``m x m`` lattice ``(j/(m+1), k/(m+1))`` on the unit square."""
    if m < 2:
        raise ValueError("lattice side must be at least 2")
    ax = np.arange(1, m + 1) / (m + 1.0)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])
