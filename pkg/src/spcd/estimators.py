"""Conventional SPCD effect estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmptyArmError(ValueError):
    """An estimator needs a treatment arm that has no participants."""


@dataclass(frozen=True)
class EstimateSet:
    theta1: float
    theta2: float
    theta_w: float
    w: float
    n_a: int
    n_p: int
    n_nr: int
    n_pr: int
    n_pa: int
    n_pp: int


def _diff_in_means(change: np.ndarray, treated: np.ndarray, control: np.ndarray, what: str) -> float:
    n_t, n_c = int(treated.sum()), int(control.sum())
    if n_t == 0 or n_c == 0:
        raise EmptyArmError(f"{what}: arm sizes {n_t} (active) and {n_c} (placebo)")
    return float(change[treated].sum() / n_t - change[control].sum() / n_c)


def theta1(dataset) -> float:
    """Stage-1 difference in mean change ``Y1 - Y0`` between arms."""
    change = dataset.y1 - dataset.y0
    return _diff_in_means(change, dataset.a1 == 1, dataset.a1 == 0, "stage 1")


def theta2(dataset) -> float:
    """Stage-2 difference in mean change ``Y2 - Y1`` among classified non-responders."""
    change = dataset.y2 - dataset.y1
    nonresp = (dataset.a1 == 0) & (dataset.r == 0)
    return _diff_in_means(change, nonresp & (dataset.a2 == 1), nonresp & (dataset.a2 == 0), "stage 2")


def theta_weighted(theta1: float, theta2: float, w: float) -> float:
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {w}")
    return w * theta1 + (1.0 - w) * theta2


def estimate(dataset, w: float | None = None) -> EstimateSet:
    """All three estimators plus the arm counts; ``w`` defaults to the trial's weight."""
    if w is None:
        w = dataset.params.weight_w
    t1 = theta1(dataset)
    t2 = theta2(dataset)
    placebo = dataset.a1 == 0
    nonresp = placebo & (dataset.r == 0)
    n_nr = int(nonresp.sum())
    n_pa = int((nonresp & (dataset.a2 == 1)).sum())
    return EstimateSet(
        theta1=t1,
        theta2=t2,
        theta_w=theta_weighted(t1, t2, w),
        w=w,
        n_a=int((dataset.a1 == 1).sum()),
        n_p=int(placebo.sum()),
        n_nr=n_nr,
        n_pr=int((placebo & (dataset.r == 1)).sum()),
        n_pa=n_pa,
        n_pp=n_nr - n_pa,
    )
