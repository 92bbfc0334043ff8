"""Extreme-value dependence of Cauchy convolution processes.

The stable tail dependence function of the field at sites ``s_1..s_d`` is

    l(w) = int max_j w_j zeta(s_j, s*) ds*

and the tail dependence coefficient of a pair is ``2 - l(1, 1)``.

Three independent numerical routes are provided so they can check one
another:

* :func:`stdf_numeric` uses the layer-cake identity
  ``l(w) = int_0^inf |union_j {w_j zeta_j > y}| dy``; for isotropic
  kernels each level set is a disc, so the integrand is the area of a
  union of discs and the problem reduces to a 1-D integral.
* :func:`cjk_numeric` integrates ``|zeta_1 - zeta_2|`` over the plane in
  Cartesian coordinates split along the perpendicular bisector.
* :func:`cjk_power_compact` is the 1-D angular formula for the compact
  power kernel.

:class:`KernelPairStdf` is the fast bivariate evaluator used by the
pairwise likelihood. It writes ``dl/dw_1 = Pr{V < log(w_1/w_2)}`` where
``V = log(zeta_2/zeta_1)(S)`` and ``S ~ zeta_1``, which gives ``l`` and
all partial derivatives needed by the copula density from one radial
integral.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .kernels import Kernel, QuadratureError, parse_sites

# ---------------------------------------------------------------------------
# geometry


def lens_area(r1, r2, d):
    """Area of the intersection of two discs with radii ``r1, r2`` at distance ``d``."""
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    d = np.asarray(d, float)
    r1, r2, d = np.broadcast_arrays(r1, r2, d)
    out = np.zeros(r1.shape)
    small = np.minimum(r1, r2)
    inside = d <= np.abs(r1 - r2)
    out[inside] = np.pi * small[inside] ** 2
    part = (~inside) & (d < r1 + r2)
    if np.any(part):
        a, b, dd = r1[part], r2[part], d[part]
        c1 = np.clip((dd * dd + a * a - b * b) / (2 * dd * a), -1, 1)
        c2 = np.clip((dd * dd + b * b - a * a) / (2 * dd * b), -1, 1)
        tri = (-dd + a + b) * (dd + a - b) * (dd - a + b) * (dd + a + b)
        out[part] = a * a * np.arccos(c1) + b * b * np.arccos(c2) - 0.5 * np.sqrt(np.clip(tri, 0, None))
    return out if out.ndim else float(out)


def disc_union_area(centers, radii):
    """Area of a union of discs, exact, via Green's theorem on the boundary arcs."""
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    keep = radii > 0
    centers, radii = centers[keep], radii[keep]
    n = len(radii)
    if n == 0:
        return 0.0
    if n == 2:
        d = float(np.hypot(*(centers[0] - centers[1])))
        return float(np.pi * (radii[0] ** 2 + radii[1] ** 2) - lens_area(radii[0], radii[1], d))
    # drop discs contained in (or equal to) another one
    order = np.argsort(-radii, kind="stable")
    kept = []
    for i in order:
        if any(np.hypot(*(centers[i] - centers[j])) + radii[i] <= radii[j] + 1e-15 for j in kept):
            continue
        kept.append(i)
    total = 0.0
    for i in kept:
        cx, cy = centers[i]
        ri = radii[i]
        covered = []
        for j in kept:
            if j == i:
                continue
            dx, dy = centers[j] - centers[i]
            d = math.hypot(dx, dy)
            if d >= ri + radii[j]:
                continue
            phi = math.atan2(dy, dx)
            half = math.acos(max(-1.0, min(1.0, (ri * ri + d * d - radii[j] ** 2) / (2 * ri * d))))
            lo, hi = phi - half, phi + half
            lo = lo % (2 * math.pi)
            hi = lo + 2 * half
            if hi > 2 * math.pi:
                covered.append((lo, 2 * math.pi))
                covered.append((0.0, hi - 2 * math.pi))
            else:
                covered.append((lo, hi))
        covered.sort()
        free = []
        cur = 0.0
        for lo, hi in covered:
            if lo > cur:
                free.append((cur, lo))
            cur = max(cur, hi)
        if cur < 2 * math.pi:
            free.append((cur, 2 * math.pi))
        for t1, t2 in free:
            total += 0.5 * (ri * ri * (t2 - t1) + cx * ri * (math.sin(t2) - math.sin(t1))
                            - cy * ri * (math.cos(t2) - math.cos(t1)))
    return total


def interval_union_length(centers, half_widths):
    """Total length of a union of intervals ``[c - h, c + h]``."""
    iv = sorted((c - h, c + h) for c, h in zip(centers, half_widths) if h > 0)
    total = 0.0
    cur_lo = cur_hi = None
    for lo, hi in iv:
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def line_normalizing_constant(kernel):
    """``int_R g(|x|) dx`` for the 1-D version of an isotropic kernel."""
    p = kernel.params
    f = kernel.family
    if f == "Indicator":
        return 2 * p["r"]
    if f == "PowerCompact":
        return 2 * p["r"] / (p["eta"] + 1)
    if f == "Exponential":
        return 2 * p["lambda"]
    if f == "PoweredExponential":
        return 2 * p["lambda"] * math.gamma(1 + 1 / p["alpha"])
    return 1.0 / (math.sqrt(2 * math.pi) * p["sigma"])


# ---------------------------------------------------------------------------
# stable tail dependence function, generic route


def stdf_numeric(kernel, sites, w, tol=1e-5):
    """Stable tail dependence function ``l(w)`` at the given sites.

    ``sites`` is a ``(d, 2)`` array for planar fields, or a 1-D array of
    positions for kernels on the line (used with the closed-form 1-D
    oracles). Raises :class:`QuadratureError` when the absolute error
    estimate exceeds ``tol``.
    """
    w = np.asarray(w, float)
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be nonnegative with at least one positive entry")
    arr = np.asarray(sites, float)
    if arr.ndim == 1:
        pos = arr
        if len(pos) != len(w):
            raise ValueError("need one weight per site")
        c = line_normalizing_constant(kernel)

        def measure(radii):
            return interval_union_length(pos, radii)
    else:
        pos = parse_sites(arr)
        if len(pos) != len(w):
            raise ValueError("need one weight per site")
        c = kernel.normalizing_constant()

        def measure(radii):
            return disc_union_area(pos, radii)

    g0 = kernel.g0
    active = w > 0
    levels = w[active] * g0 / c
    ymax = levels.max()

    def integrand(s):
        y = ymax * math.exp(-s)
        if y <= 0.0:
            return 0.0
        radii = np.zeros(len(w))
        radii[active] = kernel.g_inverse(y * c / w[active])
        return measure(radii) * y

    jumps = sorted({float(np.log(ymax / lv)) for lv in levels if lv < ymax})
    s_split = (jumps[-1] if jumps else 0.0) + 1.0
    val1, err1 = integrate.quad(integrand, 0.0, s_split, points=jumps or None,
                                epsabs=1e-12, epsrel=1e-12, limit=500)
    val2, err2 = integrate.quad(integrand, s_split, np.inf, epsabs=1e-12, epsrel=1e-12, limit=500)
    err = err1 + err2
    if err > tol:
        raise QuadratureError("stable tail dependence integral did not converge", err)
    return val1 + val2


def _pair_sites(delta):
    return np.array([[0.0, 0.0], [float(delta), 0.0]])


def tail_dep(kernel, delta, tol=1e-5):
    """Tail dependence coefficient ``2 - l(1, 1)`` of two sites at distance ``delta``."""
    if delta == 0:
        return 1.0
    return 2.0 - stdf_numeric(kernel, _pair_sites(delta), [1.0, 1.0], tol=tol)


# ---------------------------------------------------------------------------
# pairwise Cauchy scale c_jk


def cjk_numeric(kernel, delta, tol=1e-6):
    """``int |zeta(s_1, s*) - zeta(s_2, s*)| ds*`` by nested adaptive quadrature.

    The sites sit at ``(-delta/2, 0)`` and ``(delta/2, 0)``; the integrand
    is symmetric about the bisector ``x = 0`` so twice the left half-plane
    is integrated, with the support circles passed as breakpoints.
    """
    delta = float(delta)
    if delta == 0:
        return 0.0
    R = kernel.support_radius(level=1e-13)
    c = kernel.normalizing_constant()
    h = delta / 2

    def zdiff(x, y):
        t1 = math.hypot(x + h, y)
        t2 = math.hypot(x - h, y)
        return abs(float(kernel.g(t1)) - float(kernel.g(t2))) / c

    def inner(y):
        half = math.sqrt(max(R * R - y * y, 0.0))
        lo = -h - half
        hi = 0.0
        if lo >= hi:
            return 0.0
        pts = [p for p in (-h + half, h - half, -h) if lo < p < hi]
        v, _ = integrate.quad(zdiff, lo, hi, args=(y,), points=pts or None,
                              epsabs=tol * 1e-3, epsrel=1e-10, limit=200)
        return v

    ypts = [0.0]
    if delta < 2 * R:
        ypts.append(math.sqrt(R * R - h * h))
    v, err = integrate.quad(inner, 0.0, R, points=ypts[1:] or None,
                            epsabs=tol * 0.1, epsrel=1e-10, limit=200)
    if err > tol:
        raise QuadratureError("c_jk quadrature did not converge", err)
    # symmetric in y and across the bisector
    return 4.0 * v


_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def cjk_power_compact(eta, r, delta):
    """Pairwise Cauchy scale for the compact power kernel ``(1 - t/r)_+^eta``.

    In polar coordinates around one site, the set of points closer to
    that site than to the other is cut by the bisector at distance
    ``delta / (2 |sin phi|)`` for ``phi`` in ``(pi, 2 pi)``. Integrating
    the kernel radially up to ``min(r, delta/(2|sin phi|))`` gives

        c = 2 - (2 (eta+1)(eta+2) / pi) int_pi^{2 pi} h(u(phi)) dphi,
        h(u) = u^{eta+1}/(eta+1) - u^{eta+2}/(eta+2),
        u(phi) = max{0, 1 + delta / (2 r sin phi)}.

    ``u`` vanishes unless ``|sin phi| > sin(a) = delta/(2r)``, where it
    equals ``1 - sin(a)/|sin phi|``. That piece is mapped by
    ``sin(a)/|sin phi| = sin(a) cosh(w)``, which removes the endpoint
    singularity, and integrated by 80-point Gauss-Legendre. Vectorized
    over ``delta``.
    """
    eta = float(eta)
    r = float(r)
    delta = np.asarray(delta, float)
    scalar = delta.ndim == 0
    delta = np.atleast_1d(delta)
    e1, e2 = eta + 1.0, eta + 2.0

    def h(u):
        u = np.clip(u, 0.0, 1.0)
        return u ** e1 / e1 - u ** e2 / e2

    out = np.full(delta.shape, 2.0)
    sa = delta / (2.0 * r)
    mid = (sa > 0) & (sa < 1)
    out[delta <= 0] = 0.0
    if np.any(mid):
        s = sa[mid]
        U = np.arccosh(1.0 / s)
        w = 0.5 * U[:, None] * (_GL_X[None, :] + 1.0)
        u = 1.0 - s[:, None] * np.cosh(w)
        # the two symmetric halves of the arc where the bisector cuts the support
        total = 2.0 * 0.5 * U * np.sum(_GL_W[None, :] * h(u) / np.cosh(w), axis=1)
        out[mid] = 2.0 - 2.0 * e1 * e2 / np.pi * total
    return float(out[0]) if scalar else out


def tail_dep_power_compact(eta, r, delta):
    """``1 - c_jk / 2`` for the compact power kernel."""
    return 1.0 - 0.5 * cjk_power_compact(eta, r, delta)


# ---------------------------------------------------------------------------
# closed-form bivariate oracles


def stdf_husler_reiss(sigma, delta, w1, w2):
    """Stable tail dependence function of the 1-D Gaussian-density kernel."""
    w1 = np.asarray(w1, float)
    w2 = np.asarray(w2, float)
    a = float(delta) / float(sigma)
    if a == 0:
        return np.maximum(w1, w2)
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(w1) - np.log(w2)
        out = w1 * special.ndtr(a / 2 + lr / a) + w2 * special.ndtr(a / 2 - lr / a)
    out = np.where(w2 == 0, w1, out)
    out = np.where(w1 == 0, w2, out)
    return out if out.ndim else float(out)


def stdf_laplace(lam, delta, w1, w2):
    """Stable tail dependence function of the 1-D Laplace kernel."""
    w1 = np.asarray(w1, float)
    w2 = np.asarray(w2, float)
    G = math.exp(float(delta) / float(lam))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = w1 / w2
        wedge = w1 + w2 - np.sqrt(w1 * w2 / G)
    out = np.where(ratio > G, w1, np.where(ratio < 1 / G, w2, wedge))
    return out if out.ndim else float(out)


def stdf_marshall_olkin(r, delta, w1, w2):
    """Stable tail dependence function of the planar indicator kernel of radius ``r``."""
    w1 = np.asarray(w1, float)
    w2 = np.asarray(w2, float)
    area = math.pi * r * r
    frac = lens_area(r, r, float(delta)) / area
    out = (1 - frac) * (w1 + w2) + frac * np.maximum(w1, w2)
    return out if out.ndim else float(out)


def support_bound(kernel, delta):
    """Ratio ``G(delta)`` beyond which ``l(w1, w2) = max(w1, w2)``.

    Exact for the exponential kernel, an upper envelope for powered
    exponential kernels with ``alpha <= 1``, and infinite otherwise.
    """
    delta = float(delta)
    if delta == 0:
        return 1.0
    f = kernel.family
    if f == "Exponential":
        return math.exp(delta / kernel.params["lambda"])
    if f == "PoweredExponential" and kernel.params["alpha"] <= 1:
        return math.exp((delta / kernel.params["lambda"]) ** kernel.params["alpha"])
    return math.inf


# ---------------------------------------------------------------------------
# stdf providers for copula evaluation


class HuslerReissStdf:
    """Closed-form provider with analytic partial derivatives."""

    def __init__(self, sigma, delta):
        self.a = float(delta) / float(sigma)
        self.sigma = float(sigma)
        self.delta = float(delta)

    def __call__(self, w1, w2):
        return stdf_husler_reiss(self.sigma, self.delta, w1, w2)

    def partials(self, x1, x2):
        a = self.a
        lr = np.log(x1) - np.log(x2)
        z1 = a / 2 + lr / a
        z2 = a / 2 - lr / a
        l1 = special.ndtr(z1)
        l2 = special.ndtr(z2)
        l12 = -np.exp(-0.5 * z1 * z1) / math.sqrt(2 * math.pi) / (a * x2)
        return x1 * l1 + x2 * l2, l1, l2, l12


class LaplaceStdf:
    def __init__(self, lam, delta):
        self.lam = float(lam)
        self.delta = float(delta)

    def __call__(self, w1, w2):
        return stdf_laplace(self.lam, self.delta, w1, w2)


class MarshallOlkinStdf:
    def __init__(self, r, delta):
        self.r = float(r)
        self.delta = float(delta)

    def __call__(self, w1, w2):
        return stdf_marshall_olkin(self.r, self.delta, w1, w2)


class NumericStdf:
    """Generic provider backed by :func:`stdf_numeric` (slow, any family)."""

    def __init__(self, kernel, delta):
        self.kernel = kernel
        self.sites = _pair_sites(delta)

    def __call__(self, w1, w2):
        w1, w2 = np.broadcast_arrays(np.asarray(w1, float), np.asarray(w2, float))
        out = np.array([stdf_numeric(self.kernel, self.sites, [a, b], tol=1e-8)
                        for a, b in zip(w1.ravel(), w2.ravel())]).reshape(w1.shape)
        return out if out.ndim else float(out)


_CS_X, _CS_W = np.polynomial.legendre.leggauss(24)
# nodes for t = a + (b - a)(1 - cos theta)/2, theta in [0, pi]
_CS_THETA = 0.5 * np.pi * (_CS_X + 1.0)
_CS_WT = 0.5 * np.pi * _CS_W * np.sin(_CS_THETA) * 0.5
_CS_FRAC = 0.5 * (1.0 - np.cos(_CS_THETA))


def _ray_kappa(kernel, delta, t, v):
    """``kappa(t, v)`` and the mask where the level set is a proper disc."""
    g0 = kernel.g0
    y = np.exp(v) * kernel.g(t)
    inside = y < g0
    tau = np.where(inside, kernel.g_inverse(np.where(inside, y, 0.5 * g0)), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = (t * t + delta * delta - tau * tau) / (2.0 * t * delta)
    kappa = np.where(inside, kappa, np.inf)
    return kappa, tau, inside


def _kappa_breakpoints(kernel, delta, v, R, n_scan=400, kmax=8):
    """Distances where ``kappa = +-1`` for each ``v``; padded with ``R``."""
    if kernel.is_compact:
        grid = R * np.linspace(0.0, 1.0, n_scan + 1)[1:]
    else:
        grid = R * np.concatenate([np.geomspace(1e-6, 1e-2, 60, endpoint=False),
                                   np.linspace(1e-2, 1.0, n_scan - 60)])
    grid = np.concatenate([[R * 1e-12], grid])
    V = v[:, None]
    kap, _, _ = _ray_kappa(kernel, delta, grid[None, :], V)
    out = np.full((len(v), kmax), R)
    count = np.zeros(len(v), dtype=int)
    for target in (1.0, -1.0):
        h = kap - target
        # boolean sides so a grid point landing exactly on a root still counts
        sgn = np.where(np.isnan(h), True, h > 0)
        rows, cols = np.nonzero(sgn[:, :-1] != sgn[:, 1:])
        if rows.size == 0:
            continue
        lo = grid[cols].copy()
        hi = grid[cols + 1].copy()
        vv = v[rows]
        slo = sgn[rows, cols]
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            km, _, _ = _ray_kappa(kernel, delta, mid, vv)
            same = (km > target) == slo
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        root = 0.5 * (lo + hi)
        for rr, val in zip(rows, root):
            if count[rr] < kmax:
                out[rr, count[rr]] = val
                count[rr] += 1
    return out


def ray_cdf_pdf(kernel, delta, v):
    """CDF and density of ``V = log(zeta_2 / zeta_1)(S)`` with ``S ~ zeta_1``.

    ``F(v) = dl/dw_1`` at ``log(w_1/w_2) = v`` and ``f = F'``. Integrates
    over the distance ``t`` from site 1; the angular part is closed form.
    Panels are split where ``kappa = +-1`` and mapped with a cosine
    substitution that removes the inverse square-root endpoint behaviour.
    """
    if kernel.family == "Indicator":
        raise ValueError("ray evaluator needs a strictly decreasing kernel")
    delta = float(delta)
    v = np.atleast_1d(np.asarray(v, float))
    c = kernel.normalizing_constant()
    g0 = kernel.g0
    if kernel.is_compact:
        R = kernel.support_radius()
        base = R * np.linspace(0.0, 1.0, 9)
    else:
        R = kernel.support_radius(level=1e-15)
        base = np.concatenate([[0.0], R * 2.0 ** -np.arange(12, -1, -1)])
    roots = _kappa_breakpoints(kernel, delta, v, R)
    # distance where the level e^v g(t) reaches g(0)
    tz = np.where(v > 0, kernel.g_inverse(g0 * np.exp(-np.clip(v, 0, None))), 0.0)
    pts = np.concatenate([np.broadcast_to(base, (len(v), len(base))),
                          np.full((len(v), 1), min(delta, R)), roots, tz[:, None]], axis=1)
    pts = np.sort(np.clip(pts, 0.0, R), axis=1)
    a = pts[:, :-1, None]
    b = pts[:, 1:, None]
    T = a + (b - a) * _CS_FRAC
    wts = (b - a) * _CS_WT
    V = v[:, None, None]
    kap, tau, inside = _ray_kappa(kernel, delta, T, V)
    q = 2.0 * np.pi * T * kernel.g(T) / c
    kc = np.clip(kap, -1.0, 1.0)
    P = 1.0 - np.arccos(kc) / np.pi
    live = inside & (np.abs(kap) < 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dk = -kernel.tau_g_over_gprime(np.where(live, tau, 0.0)) / (T * delta)
        dP = np.where(live, dk / (np.pi * np.sqrt(np.clip(1.0 - kc * kc, 1e-300, None))), 0.0)
    F = np.sum(wts * q * P, axis=(1, 2))
    f = np.sum(wts * q * dP, axis=(1, 2))
    return np.clip(F, 0.0, 1.0), f


class KernelPairStdf:
    """Bivariate stdf of an isotropic strictly decreasing kernel at distance ``delta``.

    With ``vmax`` set, ``F`` and ``f`` are tabulated on ``[-vmax, vmax]``
    and interpolated (Hermite for ``F`` using ``f`` as slope, cubic spline
    for ``f``); values outside the table are computed directly.
    """

    def __init__(self, kernel, delta, vmax=None, step=0.04):
        self.kernel = kernel
        self.delta = float(delta)
        self._table = None
        if vmax is not None:
            n = max(int(math.ceil(2 * vmax / step)) + 1, 8)
            grid = np.linspace(-vmax, vmax, n)
            F, f = ray_cdf_pdf(kernel, self.delta, grid)
            self._table = (grid[0], grid[-1], CubicHermiteSpline(grid, F, f), CubicSpline(grid, f))

    def cdf_pdf(self, v):
        v = np.asarray(v, float)
        if self._table is None:
            return ray_cdf_pdf(self.kernel, self.delta, v.ravel())
        lo, hi, Fi, fi = self._table
        v = v.ravel()
        F = Fi(v)
        f = fi(v)
        out = (v < lo) | (v > hi)
        if np.any(out):
            F[out], f[out] = ray_cdf_pdf(self.kernel, self.delta, v[out])
        return np.clip(F, 0.0, 1.0), np.clip(f, 0.0, None)

    def partials(self, x1, x2):
        x1 = np.asarray(x1, float)
        x2 = np.asarray(x2, float)
        shape = np.broadcast(x1, x2).shape
        x1, x2 = np.broadcast_arrays(x1, x2)
        v = (np.log(x1) - np.log(x2)).ravel()
        F, f = self.cdf_pdf(np.concatenate([v, -v]))
        n = v.size
        l1 = F[:n].reshape(shape)
        l2 = F[n:].reshape(shape)
        l12 = -f[:n].reshape(shape) / x2
        return x1 * l1 + x2 * l2, l1, l2, l12

    def __call__(self, w1, w2):
        w1 = np.asarray(w1, float)
        w2 = np.asarray(w2, float)
        w1, w2 = np.broadcast_arrays(w1, w2)
        out = np.where(w1 == 0, w2, np.where(w2 == 0, w1, 0.0))
        both = (w1 > 0) & (w2 > 0)
        if np.any(both):
            out = out.copy()
            out[both] = self.partials(w1[both], w2[both])[0]
        return out if out.ndim else float(out)


def pair_stdf(kernel, delta, vmax=None):
    """Best available bivariate stdf provider for ``kernel`` at distance ``delta``."""
    if kernel.family == "Indicator":
        return MarshallOlkinStdf(kernel.params["r"], delta)
    return KernelPairStdf(kernel, delta, vmax=vmax)


# ---------------------------------------------------------------------------
# extreme-value copula


def ev_copula_cdf(stdf, u1, u2):
    """``C(u1, u2) = exp{-l(-log u1, -log u2)}``."""
    u1 = np.asarray(u1, float)
    u2 = np.asarray(u2, float)
    return np.exp(-np.asarray(stdf(-np.log(u1), -np.log(u2))))


def _fd_partials(stdf, x1, x2, h=1e-4):
    """Central differences of ``l`` with one Richardson step, in w-space."""
    def d1(f, hh):
        return (f(x1 + hh, x2) - f(x1 - hh, x2)) / (2 * hh)

    def d2(f, hh):
        return (f(x1, x2 + hh) - f(x1, x2 - hh)) / (2 * hh)

    def d12(f, hh):
        return (f(x1 + hh, x2 + hh) - f(x1 + hh, x2 - hh)
                - f(x1 - hh, x2 + hh) + f(x1 - hh, x2 - hh)) / (4 * hh * hh)

    def rich(op):
        return (4 * op(stdf, h / 2) - op(stdf, h)) / 3

    return stdf(x1, x2), rich(d1), rich(d2), rich(d12)


def ev_log_density(stdf, u1, u2):
    """Log density of the bivariate extreme-value copula; ``-inf`` where it vanishes."""
    u1 = np.asarray(u1, float)
    u2 = np.asarray(u2, float)
    x1 = -np.log(u1)
    x2 = -np.log(u2)
    if hasattr(stdf, "partials"):
        l, l1, l2, l12 = stdf.partials(x1, x2)
    else:
        l, l1, l2, l12 = _fd_partials(stdf, x1, x2)
    core = l1 * l2 - l12
    with np.errstate(divide="ignore"):
        return np.where(core > 0, -l + x1 + x2 + np.log(np.where(core > 0, core, 1.0)), -np.inf)


def ev_copula_density(stdf, u1, u2):
    """``d^2 C / du1 du2``, clipped at zero.

    Uses analytic partial derivatives when the provider has a
    ``partials`` method and central finite differences (step ``1e-4``,
    Richardson-extrapolated) otherwise.
    """
    return np.exp(ev_log_density(stdf, u1, u2))
