import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spcd.analytic import (
    change_cdf,
    change_mean,
    expected_estimates,
    misclass_q1,
    norm_cdf,
    population_threshold,
    unbiasedness_conditions,
)
from spcd.classify import ClassifierSpec
from spcd.trial import TrialParams

QUANT = ClassifierSpec.quantile(0.5)
ORACLE = ClassifierSpec.oracle()
DP_GRID = [i / 10 for i in range(11)]


def test_norm_cdf_against_reference_values():
    # reference values from mpmath at 30 digits
    import mpmath

    mpmath.mp.dps = 30
    for x in (-8.0, -3.2, -1.0, -1e-3, 0.0, 0.7, 2.5, 6.0):
        ref = float(mpmath.ncdf(x))
        assert abs(norm_cdf(x) - ref) <= 1e-12 * max(ref, 1e-300) + 1e-300


@given(st.floats(0, 2), st.floats(0.001, 10), st.floats(0, 1), st.floats(0.05, 0.95))
def test_threshold_residual(dp, s, p_l, p_r):
    p = TrialParams(delta_placebo=dp, sigma_eps=s, p_l=p_l, responder_quantile=p_r)
    q = population_threshold(p)
    assert abs(change_cdf(q, p) - p_r) <= 1e-12


def test_threshold_examples():
    assert population_threshold(TrialParams(delta_placebo=0.0, sigma_eps=3.0)) == pytest.approx(0.0, abs=1e-12)
    for s in (0.001, 0.1, 1.0, 7.0):
        q = population_threshold(TrialParams(delta_placebo=1.0, sigma_eps=s, p_l=0.5))
        assert q == pytest.approx(0.5, abs=1e-9)


def test_threshold_against_simulated_quantile():
    p = TrialParams(delta_placebo=1.0, p_l=0.3, sigma_eps=1.0)
    q = population_threshold(p)
    assert q == pytest.approx(0.2857873354257663, abs=1e-12)
    rng = np.random.default_rng(12345)
    n = 10**7
    d = (rng.random(n) < 0.3) * 1.0 + rng.normal(0.0, 1.0, n)
    # SE of the sample median here is about 4.4e-4
    assert abs(np.quantile(d, 0.5) - q) <= 2e-3


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 5), st.floats(0, 1))
def test_change_cdf_nondecreasing(a, b, s, p_l):
    p = TrialParams(delta_placebo=1.0, sigma_eps=s, p_l=p_l)
    lo, hi = sorted((a, b))
    assert change_cdf(lo, p) <= change_cdf(hi, p)


def test_q1_without_placebo_effect_is_prevalence():
    for p_l in (0.0, 0.2, 0.5, 0.9):
        for s in (0.01, 1.0, 5.0):
            q1, npv = misclass_q1(TrialParams(delta_placebo=0.0, p_l=p_l, sigma_eps=s))
            assert q1 == pytest.approx(p_l, abs=1e-12)
            assert npv == pytest.approx(1 - p_l, abs=1e-12)


def test_q1_noise_free_near_zero():
    q1, npv = misclass_q1(TrialParams(delta_placebo=1.0, sigma_eps=0.001))
    assert q1 < 1e-100 and npv == 1.0


def test_npv_high_noise_near_baseline():
    _, npv = misclass_q1(TrialParams(delta_placebo=1.0, sigma_eps=10.0))
    # threshold sits at 0.5, so q1 = Phi(-0.05) and npv = Phi(0.05) = 0.51994...
    assert npv == pytest.approx(norm_cdf(0.05), abs=1e-12)
    assert npv == pytest.approx(0.5199388058383725, abs=1e-12)
    assert abs(npv - 0.5) <= 0.02


def test_q1_against_simulation():
    p = TrialParams(delta_placebo=1.0, sigma_eps=2.0, p_l=0.5)
    q1, _ = misclass_q1(p)
    rng = np.random.default_rng(3)
    n = 4_000_000
    l = rng.random(n) < 0.5
    d = l + rng.normal(0.0, 2.0, n)
    below = d < population_threshold(p)
    emp = l[below].mean()
    assert abs(emp - q1) <= 4 * math.sqrt(q1 * (1 - q1) / below.sum())


@pytest.mark.parametrize("s", [0.001, 0.1, 1.0, 2.0, 5.0, 10.0])
@pytest.mark.parametrize("p_l", [0.2, 0.5, 0.8])
def test_q1_nonincreasing_in_placebo_effect(s, p_l):
    q1s = [misclass_q1(TrialParams(delta_placebo=dp, sigma_eps=s, p_l=p_l))[0] for dp in DP_GRID]
    # flat stretches wobble at the root-finder's 1e-12 residual
    assert all(b <= a + 1e-10 for a, b in zip(q1s, q1s[1:]))


@pytest.mark.parametrize("dp", [d for d in DP_GRID if d > 0])
def test_npv_ordering_in_noise(dp):
    lo = misclass_q1(TrialParams(delta_placebo=dp, sigma_eps=0.1))[1]
    hi = misclass_q1(TrialParams(delta_placebo=dp, sigma_eps=10.0))[1]
    assert lo >= hi


def test_change_mean_identity():
    for dp, p_l in ((1.0, 0.5), (0.3, 0.2), (-2.0, 0.7)):
        p = TrialParams(delta_placebo=dp, p_l=p_l)
        assert change_mean(p) == p_l * dp + (1 - p_l) * 0.0


@given(st.floats(-2, 2), st.floats(0, 2), st.floats(0.01, 5), st.floats(0, 1), st.floats(0, 1))
def test_expectation_invariants(dnr, dp, s, p_l, w):
    p = TrialParams(delta_nr=dnr, delta_placebo=dp, sigma_eps=s, p_l=p_l, weight_w=w)
    for clf in (QUANT, ORACLE):
        a = expected_estimates(p, clf)
        assert a.npv == 1 - a.q1
        assert a.e_theta1 == pytest.approx(p.delta_all, abs=1e-12)
        assert a.e_theta2 == pytest.approx(dnr - a.q1 * dp, abs=1e-12)
        assert a.e_theta_w == pytest.approx(w * a.e_theta1 + (1 - w) * a.e_theta2, abs=1e-12)


def test_oracle_expectations():
    a = expected_estimates(TrialParams(delta_nr=0.5, delta_placebo=1.0, p_l=0.5, weight_w=0.5), ORACLE)
    assert a.e_theta2 == 0.5
    assert a.e_theta_w == 0.25
    assert math.isnan(a.threshold_c)


def test_w_one_targets_population_effect():
    p = TrialParams(delta_nr=0.5, delta_placebo=1.0, sigma_eps=2.0, weight_w=1.0)
    assert expected_estimates(p, QUANT).e_theta_w == pytest.approx(p.delta_all, abs=1e-15)


def test_unsupported_classifier():
    with pytest.raises(ValueError):
        expected_estimates(TrialParams(), ClassifierSpec.fixed(0.0))


def test_unbiasedness_conditions():
    r = unbiasedness_conditions(TrialParams(delta_placebo=0.0), QUANT)
    assert r.no_placebo_effect and r.r_independent_of_l and r.target == "both"

    r = unbiasedness_conditions(TrialParams(delta_nr=0.5, delta_placebo=1.0), ORACLE, w=0.0)
    assert r.w_zero_and_perfect_npv and r.target == "delta_nr"

    r = unbiasedness_conditions(TrialParams(delta_nr=0.5, delta_placebo=1.0, sigma_eps=1.0), QUANT, w=0.5)
    assert r.target == "neither"
    assert not any((r.no_responders, r.no_placebo_effect, r.r_independent_of_l, r.w_is_one))

    r = unbiasedness_conditions(TrialParams(delta_nr=0.5, delta_placebo=1.0), QUANT, w=1.0)
    assert r.w_is_one and r.target == "delta_all"

    r = unbiasedness_conditions(TrialParams(delta_nr=0.5, delta_placebo=1.0, p_l=0.0), QUANT)
    assert r.no_responders and r.target == "both"
