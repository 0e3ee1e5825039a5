import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from spcd.mixture_em import (
    DegenerateFitError,
    InitSpec,
    InsufficientDataError,
    MixtureFit,
    em_fit,
    identifiability_diagnostics,
    posterior_responsibility,
)


def two_component(seed, n=2000, mu=(0.0, 1.0), sd=0.25, p=0.5):
    rng = np.random.default_rng(seed)
    l = rng.random(n) < p
    return rng.normal(np.where(l, mu[1], mu[0]), sd)


def manual_fit(p=0.5, mu0=0.0, mu1=1.0, sigma=0.25):
    return MixtureFit(p, mu0, mu1, sigma, loglik=0.0, iterations=1, converged=True, n=10)


@pytest.mark.parametrize("seed", range(20))
def test_recovery_and_monotone_loglik(seed):
    fit = em_fit(two_component(seed))
    assert fit.converged
    assert abs(fit.p_hat - 0.5) <= 0.05
    assert abs(fit.mu0) <= 0.05
    assert abs(fit.mu1 - 1.0) <= 0.05
    assert np.all(np.diff(fit.loglik_trace) >= -1e-9)


@given(st.integers(0, 2**32), st.floats(0.1, 0.9), st.floats(0.5, 3))
def test_mixture_mean_identity(seed, p, gap):
    x = two_component(seed, n=300, mu=(0.0, gap), sd=0.5, p=p)
    fit = em_fit(x)
    assert fit.mu0 <= fit.mu1
    assert abs(fit.p_hat * fit.mu1 + (1 - fit.p_hat) * fit.mu0 - x.mean()) <= 1e-8


@given(st.integers(0, 2**32), st.floats(-50, 50))
def test_shift_equivariance(seed, k):
    x = two_component(seed, n=400)
    a, b = em_fit(x), em_fit(x + k)
    assert b.mu0 == pytest.approx(a.mu0 + k, abs=1e-8)
    assert b.mu1 == pytest.approx(a.mu1 + k, abs=1e-8)
    assert b.p_hat == pytest.approx(a.p_hat, abs=1e-8)
    assert b.sigma_hat == pytest.approx(a.sigma_hat, abs=1e-8)


def test_label_swap_gives_same_ordered_fit():
    x = two_component(4)
    a = em_fit(x, InitSpec(p=0.5, mu0=0.2, mu1=0.8, sigma=0.4))
    b = em_fit(x, InitSpec(p=0.5, mu0=0.8, mu1=0.2, sigma=0.4))
    for key in ("p_hat", "mu0", "mu1", "sigma_hat"):
        assert getattr(a, key) == pytest.approx(getattr(b, key), abs=1e-10)


def test_constant_data_is_degenerate():
    with pytest.raises(DegenerateFitError):
        em_fit([2.0] * 50)


def test_too_few_points():
    with pytest.raises(InsufficientDataError):
        em_fit([1.0, 2.0, 3.0])


def test_single_normal_is_weak_in_most_seeds():
    weak = 0
    for seed in range(20):
        x = np.random.default_rng(500 + seed).normal(0.0, 1.0, 2000)
        weak += identifiability_diagnostics(em_fit(x)).weak
    assert weak >= 18


def test_well_separated_not_weak():
    fit = em_fit(two_component(1))
    d = identifiability_diagnostics(fit)
    assert not d.weak
    assert d.separation > 3


def test_diagnostic_rules():
    assert not identifiability_diagnostics(manual_fit(0.5, 0.0, 1.0, 0.25)).weak
    assert identifiability_diagnostics(manual_fit(0.5, 0.0, 0.2, 1.0)).weak
    assert identifiability_diagnostics(manual_fit(0.01, 0.0, 4.0, 1.0)).weak
    assert identifiability_diagnostics(manual_fit(0.5, 0.0, 4.0, 1.0)).p_boundary_distance == 0.5


def test_posterior_examples():
    fit = manual_fit(0.5, 0.0, 1.0, 0.25)
    assert posterior_responsibility(fit, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert posterior_responsibility(fit, 1e3) == 1.0
    assert posterior_responsibility(fit, -1e3) == 0.0


def test_posterior_matches_density_ratio():
    fit = em_fit(two_component(0))
    f1 = fit.p_hat * norm.pdf(0.0, fit.mu1, fit.sigma_hat)
    f0 = (1 - fit.p_hat) * norm.pdf(0.0, fit.mu0, fit.sigma_hat)
    assert abs(posterior_responsibility(fit, 0.0) - f1 / (f0 + f1)) <= 1e-10


@given(st.floats(-1e3, 1e3))
def test_posterior_in_unit_interval(d):
    r = posterior_responsibility(manual_fit(0.3, -1.0, 2.0, 0.7), d)
    assert 0.0 <= r <= 1.0 and not math.isnan(r)


def test_placebo_arm_changes_recover_prevalence():
    # the statistic the package fits: stage-1 placebo changes, noise sd sqrt(2)*sigma
    rng = np.random.default_rng(9)
    l = rng.random(4000) < 0.3
    d = 3.0 * l + rng.normal(0, math.sqrt(2) * 0.5, 4000)
    fit = em_fit(d)
    assert abs(fit.p_hat - 0.3) < 0.03
    assert abs(fit.mu1 - fit.mu0 - 3.0) < 0.1
