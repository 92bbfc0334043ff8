import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchyconv import evt
from cauchyconv.kernels import Kernel

PC = Kernel.power_compact(0.25, 1.0)

# Reference values from an independent 30-digit polar quadrature
# (mpmath), computed once and frozen.
CJK_REFERENCE = [
    (1.0, 0.25, 0.125, 0.89707616092294225),
    (1.0, 0.25, 0.05, 0.3770975023109147),
    (0.5, 0.25, 0.3, 1.6130354767189803),
    (2.5, 0.25, 0.2, 1.6487919404104786),
    (1.0, 0.25, 0.01, 0.076338976847749232),
]


def pair(delta):
    return np.array([[0.0, 0.0], [delta, 0.0]])


def test_stdf_unit_vector_and_trivial_pairs():
    sites = np.array([[0.0, 0.0], [0.1, 0.0], [0.3, 0.2]])
    assert evt.stdf_numeric(PC, sites, [1, 0, 0]) == pytest.approx(1.0, abs=1e-8)
    assert evt.stdf_numeric(PC, pair(0.0), [1, 1]) == pytest.approx(1.0, abs=1e-8)
    assert evt.stdf_numeric(PC, pair(0.6), [1, 1]) == pytest.approx(2.0, abs=1e-8)


def test_stdf_rejects_bad_weights():
    with pytest.raises(ValueError):
        evt.stdf_numeric(PC, pair(0.1), [-1, 1])
    with pytest.raises(ValueError):
        evt.stdf_numeric(PC, pair(0.1), [0, 0])


def test_tail_dep_limits():
    assert evt.tail_dep(PC, 0.0) == 1.0
    assert evt.tail_dep(PC, 0.5) == pytest.approx(0.0, abs=1e-8)
    assert evt.tail_dep(PC, 0.125) == pytest.approx(1 - CJK_REFERENCE[0][3] / 2, abs=1e-5)


def test_cjk_numeric_limits_and_consistency():
    assert evt.cjk_numeric(PC, 0.0) == 0.0
    assert evt.cjk_numeric(PC, 0.6) == pytest.approx(2.0, abs=1e-6)
    for d in (0.05, 0.125, 0.3):
        l11 = evt.stdf_numeric(PC, pair(d), [1, 1])
        assert evt.cjk_numeric(PC, d) == pytest.approx(2 * (l11 - 1), abs=2e-5)


@pytest.mark.parametrize("eta, r, delta, ref", CJK_REFERENCE)
def test_cjk_power_compact_reference(eta, r, delta, ref):
    assert evt.cjk_power_compact(eta, r, delta) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("eta, delta", [(0.5, 0.1), (2.5, 0.2), (1.0, 0.125)])
def test_cjk_power_compact_matches_quadrature(eta, delta):
    k = Kernel.power_compact(0.25, eta)
    assert evt.cjk_power_compact(eta, 0.25, delta) == pytest.approx(evt.cjk_numeric(k, delta), abs=1e-4)


def test_cjk_power_compact_limits_and_vectorization():
    assert evt.cjk_power_compact(1.0, 0.25, 0.0) == 0.0
    assert evt.cjk_power_compact(1.0, 0.25, 0.5) == 2.0
    assert evt.cjk_power_compact(1.0, 0.25, 0.7) == 2.0
    d = np.array([0.0, 0.125, 0.6])
    np.testing.assert_allclose(evt.cjk_power_compact(1.0, 0.25, d),
                               [evt.cjk_power_compact(1.0, 0.25, x) for x in d])


def test_husler_reiss_values():
    assert evt.stdf_husler_reiss(0.1, 0.0, 1, 1) == 1.0
    assert evt.stdf_husler_reiss(0.1, 0.1, 1, 1) == pytest.approx(1.3829249225480262, abs=1e-14)
    assert evt.stdf_husler_reiss(0.1, 0.1, 0.7, 0.0) == pytest.approx(0.7)


def test_laplace_values():
    assert evt.stdf_laplace(0.05, 0.125, 1, 1) == pytest.approx(2 - math.exp(-0.125 / 0.1), abs=1e-14)
    G = math.exp(2.5)
    assert evt.stdf_laplace(0.05, 0.125, 1.01 * G, 1) == pytest.approx(1.01 * G)
    assert evt.stdf_laplace(0.05, 0.0, 1, 1) == pytest.approx(1.0)


def test_marshall_olkin_values():
    assert evt.stdf_marshall_olkin(0.25, 0.6, 1, 2) == pytest.approx(3.0)
    assert evt.stdf_marshall_olkin(0.25, 0.0, 1, 2) == pytest.approx(2.0)
    assert evt.stdf_marshall_olkin(0.25, 0.2, 1, 1) == pytest.approx(1.4953684245313091, abs=1e-14)
    ind = Kernel.indicator(0.25)
    for w in ([1, 1], [0.3, 1.7]):
        assert evt.stdf_numeric(ind, pair(0.2), w) == pytest.approx(evt.stdf_marshall_olkin(0.25, 0.2, *w), abs=1e-4)


def test_support_bound():
    assert evt.support_bound(Kernel.exponential(0.05), 0.125) == pytest.approx(12.182, abs=1e-3)
    assert evt.support_bound(Kernel.exponential(0.05), 0.0) == 1.0
    assert evt.support_bound(PC, 0.125) == math.inf


class _Sum:
    def __call__(self, a, b):
        return np.asarray(a) + np.asarray(b)


class _Max:
    def __call__(self, a, b):
        return np.maximum(a, b)


def test_copula_cdf_limits_and_max_stability():
    u1, u2 = 0.3, 0.8
    assert evt.ev_copula_cdf(_Sum(), u1, u2) == pytest.approx(u1 * u2)
    assert evt.ev_copula_cdf(_Max(), u1, u2) == pytest.approx(min(u1, u2))
    hr = evt.HuslerReissStdf(0.1, 0.1)
    c = evt.ev_copula_cdf(hr, u1, u2)
    assert c == pytest.approx(evt.ev_copula_cdf(hr, math.sqrt(u1), math.sqrt(u2)) ** 2, abs=1e-8)


def test_density_independence_and_laplace_exterior():
    u = np.array([0.2, 0.5, 0.9])
    np.testing.assert_allclose(evt.ev_copula_density(_Sum(), u, u[::-1]), 1.0, atol=1e-5)
    lap = evt.LaplaceStdf(0.05, 0.125)
    G = math.exp(2.5)
    u2 = 0.9
    assert evt.ev_copula_density(lap, u2 ** (G * 1.5), u2) == 0.0
    assert evt.ev_copula_density(lap, u2, u2) > 0


def _integrate_density(stdf):
    # x = -log u, then x1 = s p, x2 = s (1 - p) with p = 1/(1 + e^-v);
    # the density varies smoothly in (s, v) so a tensor Gauss rule suffices
    xs, ws = np.polynomial.legendre.leggauss(40)
    s_edges = np.array([0.0, 0.5, 2.0, 6.0, 15.0, 40.0])
    s = np.concatenate([0.5 * (b - a) * xs + 0.5 * (a + b) for a, b in zip(s_edges[:-1], s_edges[1:])])
    sw = np.concatenate([0.5 * (b - a) * ws for a, b in zip(s_edges[:-1], s_edges[1:])])
    xv, wv = np.polynomial.legendre.leggauss(200)
    v, vw = 12.0 * xv, 12.0 * wv
    S, V = np.meshgrid(s, v, indexing="ij")
    P = 1.0 / (1.0 + np.exp(-V))
    x1, x2 = S * P, S * (1 - P)
    jac = S * P * (1 - P) * np.exp(-x1 - x2)
    dens = evt.ev_copula_density(stdf, np.exp(-x1), np.exp(-x2))
    return float(np.sum(np.outer(sw, vw) * jac * dens))


@pytest.mark.parametrize("stdf", [evt.HuslerReissStdf(0.1, 0.1), evt.pair_stdf(PC, 0.125, vmax=30)])
def test_density_integrates_to_one(stdf):
    assert _integrate_density(stdf) == pytest.approx(1.0, abs=1e-2)


@pytest.mark.parametrize("kernel", [PC, Kernel.exponential(0.05), Kernel.gaussian_density(0.08)])
def test_ray_evaluator_matches_layer_cake(kernel):
    st_ = evt.KernelPairStdf(kernel, 0.1)
    for w in ([1, 1], [0.4, 1.3], [2.0, 0.5]):
        assert st_(*w) == pytest.approx(evt.stdf_numeric(kernel, pair(0.1), w), abs=2e-6)


def test_ray_density_identity():
    # F(v) = dl/dw1 and the symmetric pair give f(-v) = e^v f(v)
    v = np.array([-1.0, -0.3, 0.2, 0.9])
    _, f = evt.ray_cdf_pdf(PC, 0.1, v)
    _, fm = evt.ray_cdf_pdf(PC, 0.1, -v)
    np.testing.assert_allclose(fm, np.exp(v) * f, rtol=1e-6)


def test_analytic_partials_match_finite_differences():
    hr = evt.HuslerReissStdf(0.1, 0.07)
    x1, x2 = np.array([0.4, 1.1]), np.array([0.9, 0.8])
    a = hr.partials(x1, x2)
    b = evt._fd_partials(hr, x1, x2)
    for p, q in zip(a, b):
        np.testing.assert_allclose(p, q, rtol=1e-6, atol=1e-8)
    kp = evt.KernelPairStdf(PC, 0.1)
    a = kp.partials(x1, x2)
    b = evt._fd_partials(evt.NumericStdf(PC, 0.1), x1, x2, h=1e-3)
    for p, q in zip(a, b):
        np.testing.assert_allclose(p, q, rtol=1e-3, atol=1e-4)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 0.6), st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_stdf_bounds_and_homogeneity(delta, w1, w2):
    l = evt.stdf_numeric(PC, pair(delta), [w1, w2])
    assert max(w1, w2) - 1e-5 <= l <= w1 + w2 + 1e-5
    assert evt.stdf_numeric(PC, pair(delta), [2 * w1, 2 * w2]) == pytest.approx(2 * l, rel=2e-5)


def test_indicator_has_no_ray_evaluator():
    with pytest.raises(ValueError):
        evt.ray_cdf_pdf(Kernel.indicator(0.25), 0.1, [0.0])
