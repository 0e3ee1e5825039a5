"""Closed-form expectations under the linear-Gaussian SPCD model.

In the placebo arm the stage-1 change is ``D = delta_placebo * L + eps``, a
two-component normal mixture. A change-score threshold ``q`` classifies
``R = 0`` exactly when ``D < q``, which gives

    q1 = P(L=1 | R=0) = p_l * Phi((q - delta_placebo) / sigma) / F_D(q)

and the estimator expectations follow by linearity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .classify import ORACLE, QUANTILE, ClassifierSpec
from .trial import TrialParams

_SQRT2 = math.sqrt(2.0)


def norm_cdf(x: float) -> float:
    """Standard normal CDF through ``math.erfc`` (relative error near 1e-16)."""
    return 0.5 * math.erfc(-x / _SQRT2)


def change_cdf(d: float, params: TrialParams) -> float:
    """CDF of the placebo-arm stage-1 change score."""
    s = params.sigma_eps
    return (1.0 - params.p_l) * norm_cdf(d / s) + params.p_l * norm_cdf((d - params.delta_placebo) / s)


def change_mean(params: TrialParams) -> float:
    return params.p_l * params.delta_placebo


class RootFindingError(RuntimeError):
    pass


def population_threshold(params: TrialParams, p_r: float | None = None, tol: float = 1e-12) -> float:
    """Population ``p_r`` quantile of the placebo change score, by bisection."""
    if p_r is None:
        p_r = params.responder_quantile
    s, dp = params.sigma_eps, params.delta_placebo
    lo = min(0.0, dp) - 10.0 * s
    hi = max(0.0, dp) + 10.0 * s
    # p_r close to 0 or 1 can put the root outside the default bracket
    for _ in range(200):
        if change_cdf(lo, params) <= p_r:
            break
        lo -= hi - lo
    for _ in range(200):
        if change_cdf(hi, params) >= p_r:
            break
        hi += hi - lo
    best, best_res = lo, abs(change_cdf(lo, params) - p_r)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        f = change_cdf(mid, params) - p_r
        if abs(f) < best_res:
            best, best_res = mid, abs(f)
        if best_res <= tol or mid in (lo, hi):
            break
        if f < 0:
            lo = mid
        else:
            hi = mid
    if best_res > tol:
        raise RootFindingError(f"threshold residual {best_res:.3g} above {tol:g}")
    return best


def misclass_q1(params: TrialParams, threshold: float | None = None) -> tuple[float, float]:
    """``(q1, npv)`` for the rule ``R = 1`` iff change >= threshold.

    The threshold defaults to the population quantile at ``responder_quantile``.
    """
    q = population_threshold(params) if threshold is None else threshold
    below = change_cdf(q, params)
    if below <= 0.0:
        raise ValueError("threshold leaves no classified non-responders")
    q1 = params.p_l * norm_cdf((q - params.delta_placebo) / params.sigma_eps) / below
    q1 = min(max(q1, 0.0), 1.0)
    return q1, 1.0 - q1


@dataclass(frozen=True)
class AnalyticCell:
    q1: float
    npv: float
    e_theta1: float
    e_theta2: float
    e_theta_w: float
    threshold_c: float


def expected_estimates(params: TrialParams, classifier: ClassifierSpec) -> AnalyticCell:
    """Expectations of the three estimators for a quantile or oracle classifier.

    The quantile case assumes the threshold sits at the population quantile;
    the empirical threshold used in simulation differs by O(n^-1/2). For the
    oracle ``threshold_c`` is NaN.
    """
    if classifier.kind == ORACLE:
        q1, c = 0.0, math.nan
    elif classifier.kind == QUANTILE:
        c = population_threshold(params, classifier.p_r)
        q1, _ = misclass_q1(params, c)
    else:
        raise ValueError(f"no closed form for classifier kind {classifier.kind!r}")
    w, dp = params.weight_w, params.delta_placebo
    return AnalyticCell(
        q1=q1,
        npv=1.0 - q1,
        e_theta1=params.delta_nr - params.p_l * dp,
        e_theta2=params.delta_nr - q1 * dp,
        e_theta_w=params.delta_nr - dp * (w * params.p_l + (1.0 - w) * q1),
        threshold_c=c,
    )


@dataclass(frozen=True)
class UnbiasednessReport:
    no_responders: bool
    no_placebo_effect: bool
    r_independent_of_l: bool
    w_is_one: bool
    w_zero_and_perfect_npv: bool
    target: str  # "both", "delta_all", "delta_nr" or "neither"


def unbiasedness_conditions(
    params: TrialParams, classifier: ClassifierSpec, w: float | None = None, atol: float = 1e-12
) -> UnbiasednessReport:
    """Which sufficient conditions make the weighted estimator unbiased.

    Any of the first four flags makes it unbiased for the population effect;
    ``w == 0`` with ``q1 == 0`` makes it unbiased for the non-responder effect.
    """
    if w is None:
        w = params.weight_w
    q1 = expected_estimates(params, classifier).q1
    flags = dict(
        no_responders=params.p_l == 0.0,
        no_placebo_effect=params.delta_placebo == 0.0,
        r_independent_of_l=abs(q1 - params.p_l) <= atol,
        w_is_one=w == 1.0,
        w_zero_and_perfect_npv=w == 0.0 and q1 <= atol,
    )
    hits_all = any(flags[k] for k in ("no_responders", "no_placebo_effect", "r_independent_of_l", "w_is_one"))
    hits_nr = flags["w_zero_and_perfect_npv"]
    coincide = params.p_l * params.delta_placebo == 0.0
    if (hits_all or hits_nr) and coincide:
        target = "both"
    elif hits_all:
        target = "delta_all"
    elif hits_nr:
        target = "delta_nr"
    else:
        target = "neither"
    return UnbiasednessReport(target=target, **flags)
