import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cauchyconv import inference as inf
from cauchyconv import simulate
from cauchyconv.kernels import Kernel, lattice_sites

PC = Kernel.power_compact(0.25, 1.0)
SITES = lattice_sites(3)


# ---------------------------------------------------------------------------
# scale estimators


def test_cauchy_mle_examples():
    assert inf.cauchy_scale_mle([-1.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
    assert inf.cauchy_scale_mle([2.5, -2.5, 2.5]) == pytest.approx(2.5, abs=1e-12)
    with pytest.raises(inf.DegenerateScaleError):
        inf.cauchy_scale_mle([0.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-6), min_size=3, max_size=200))
def test_cauchy_mle_solves_estimating_equation(y):
    y = np.asarray(y)
    c = inf.cauchy_scale_mle(y)
    resid = np.sum(2 * c * c / (y * y + c * c)) - y.size
    assert abs(resid) < 1e-8 * y.size


def test_cauchy_median_examples():
    assert inf.cauchy_scale_median([-3, 0.5, 1, -2]) == 1.5
    assert inf.cauchy_scale_median([-0.7]) == 0.7
    y = stats.cauchy.rvs(size=20001, random_state=np.random.default_rng(0))
    assert inf.cauchy_scale_median(y) == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------------------------------
# dependence summaries


def test_empirical_tail_dep_examples():
    uj = np.arange(1, 11) / 11
    uk = uj.copy()
    uk[[7, 8]] = uk[[8, 7]]          # rank 9 swapped with rank 8: one joint exceedance of 0.8
    assert inf.empirical_tail_dep(uj, uk, 0.8) == pytest.approx(0.5)
    assert inf.empirical_tail_dep(uj, uj, 0.8) == pytest.approx(1.0)
    assert inf.empirical_tail_dep(uj, 1 - uj, 0.8) == 0.0


def test_spearman_examples():
    u = np.arange(1, 21) / 21
    assert inf.spearman(u, u) == pytest.approx(1.0)
    assert inf.spearman(u, u[::-1]) == pytest.approx(-1.0)
    rng = np.random.default_rng(1)
    assert abs(inf.spearman(rng.random(10_000), rng.random(10_000))) < 0.03


def test_pair_index():
    j, k, d = inf.pair_index(SITES)
    assert len(d) == 36 and np.all(j < k)
    assert d.min() == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# noiseless fixed points


@pytest.mark.parametrize("statistic", ["cjk", "taildep", "chi"])
def test_noiseless_kernel_fit(statistic):
    _, _, delta = inf.pair_index(lattice_sites(5))
    truth = Kernel.power_compact(0.3, 1.5)
    fn = {"cjk": inf.model_cjk, "taildep": inf.model_tail_dep,
          "chi": lambda k, d: inf.model_chi(k, d, 0.95)}[statistic]
    res = inf.fit_kernel_from_summaries(delta, fn(truth, delta), "PowerCompact", statistic, threshold=0.95)
    assert res.objective < 1e-12
    assert res.theta_K["r"] == pytest.approx(0.3, rel=1e-3)
    assert res.theta_K["eta"] == pytest.approx(1.5, rel=1e-2)


def test_zero_weights_rejected():
    _, _, delta = inf.pair_index(SITES)
    with pytest.raises(ValueError):
        inf.fit_kernel_from_summaries(delta, inf.model_cjk(PC, delta), "PowerCompact",
                                      weights=inf.Weights("distance-cutoff", 0.1))


def test_noiseless_mixture_fit():
    _, _, delta = inf.pair_index(SITES)
    bp, bm = inf.beta_pm(1.0, delta, 2.0)

    def summaries(b0):
        return bp, bm

    summaries.grid = [1.0, 1.5, 2.0, 2.5, 3.0]
    best_b, p, obj, _, profile = inf.fit_mixture_from_summaries(delta, summaries)
    assert best_b == 2.0
    assert obj < 1e-12
    assert p["theta_G"] == pytest.approx(1.0, rel=1e-6)
    assert len(profile) == 5


def test_beta_pm_example():
    bp, bm = inf.beta_pm(1e9, 0.0, 2.0)
    assert float(bp) == pytest.approx(4.0) and float(bm) == pytest.approx(0.0)


# ---------------------------------------------------------------------------
# mixture margin


def test_mixture_cdf_examples():
    assert float(inf.mixture_cdf(0.0, 1.0, 2.0)) == pytest.approx(0.5, abs=1e-14)
    assert float(inf.mixture_cdf(1.0, 1.0, 0.0)) == pytest.approx(0.75, abs=1e-14)
    w = np.linspace(-20, 20, 41)
    np.testing.assert_allclose(inf.mixture_cdf(-w, 0.7, 1.3), 1 - inf.mixture_cdf(w, 0.7, 1.3), atol=1e-10)


def test_mixture_pdf_is_cdf_derivative():
    w = np.array([-4.0, -0.3, 0.0, 1.1, 6.0])
    h = 1e-5
    fd = (inf.mixture_cdf(w + h, 1.0, 2.0) - inf.mixture_cdf(w - h, 1.0, 2.0)) / (2 * h)
    np.testing.assert_allclose(inf.mixture_pdf(w, 1.0, 2.0), fd, rtol=1e-6)


def test_mixture_cdf_matches_monte_carlo():
    rng = np.random.default_rng(3)
    x = rng.standard_cauchy(200_000) + 2.0 * rng.standard_normal(200_000)
    for q in (-3.0, 0.7, 5.0):
        assert float(inf.mixture_cdf(q, 1.0, 2.0)) == pytest.approx(np.mean(x <= q), abs=5e-3)


def test_mixture_beta_mle_recovers_beta():
    rng = np.random.default_rng(5)
    x = 2.0 * rng.standard_cauchy(5000) + 1.5 * rng.standard_normal(5000)
    assert inf.mixture_beta_mle(x, 2.0, 10.0) == pytest.approx(1.5, abs=0.2)
    assert inf.mixture_beta_mle(rng.standard_cauchy(5000), 1.0, 10.0) < 0.3


# ---------------------------------------------------------------------------
# data-driven fits


def test_fit_by_scales_round_trip():
    u = simulate.to_uniform(simulate.simulate_cauchy(PC, SITES, 2000, seed=21)).values
    res = inf.fit_kernel_by_scales(u, SITES)
    assert res.theta_K["r"] == pytest.approx(0.25, abs=0.05)
    assert len(res.diagnostics["c_hat"]) == 36


def test_fit_needs_three_sites():
    u = simulate.to_uniform(simulate.simulate_cauchy(PC, SITES[:2], 100, seed=1)).values
    with pytest.raises(ValueError):
        inf.fit_kernel_by_scales(u, SITES[:2])


def test_scores_must_be_inside_unit_interval():
    with pytest.raises(ValueError):
        inf.fit_kernel_by_scales(np.ones((50, 9)), SITES)


def test_pairwise_likelihood_prefers_truth():
    u = simulate.frechet_to_uniform(simulate.simulate_ev(PC, SITES, 1000, seed=31)).values
    ll0, _ = inf.pairwise_loglik(PC, u, SITES)
    for other in (Kernel.power_compact(0.35, 1.0), Kernel.power_compact(0.25, 3.0), Kernel.power_compact(0.2, 0.5)):
        assert ll0 > inf.pairwise_loglik(other, u, SITES)[0]


def test_pairwise_likelihood_rejects_indicator():
    with pytest.raises(ValueError):
        inf.pairwise_loglik(Kernel.indicator(0.25), np.full((30, 9), 0.5), SITES)


def test_fit_result_json_round_trip():
    res = inf.FitResult("PowerCompact", {"eta": 1.0, "r": 0.25}, 0.0, theta_G={"theta_G": 1.0}, beta=2.0)
    back = inf.FitResult.from_dict(res.to_dict())
    assert back.kernel == PC and back.beta == 2.0
