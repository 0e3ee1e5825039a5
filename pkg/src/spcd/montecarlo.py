"""Monte Carlo bias and NPV study over a (placebo effect, residual SD) grid.

Every replicate is seeded as ``derive_seed(cell_seed, r)`` and every cell as
``derive_seed(master_seed, cell_index)``, where the cell index counts the
sorted ``(delta_placebo, sigma_eps)`` coordinates. All classifiers in a cell
share the same replicate seeds, so they see the same stage-1 data. Means and
SDs use ``math.fsum`` (exactly rounded), so aggregates do not depend on the
order in which replicates finish.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analytic import AnalyticCell, expected_estimates
from .classify import ORACLE, QUANTILE, ClassifierSpec, empirical_npv
from .estimators import EmptyArmError, theta1, theta2, theta_weighted
from .trial import TrialParams, derive_seed, simulate_trial

ESTIMATORS = ("theta1", "theta2", "theta_w")
SKIP_FLAG_RATE = 0.01


@dataclass(frozen=True)
class GridSpec:
    """A null-design grid: ``delta_all`` is fixed and ``delta_nr`` is derived per cell."""

    base: TrialParams
    delta_placebo_values: Tuple[float, ...]
    sigma_values: Tuple[float, ...]
    n_reps: int
    master_seed: int
    classifiers: Tuple[ClassifierSpec, ...] = (ClassifierSpec.quantile(0.5), ClassifierSpec.oracle())
    delta_all: float = 0.0

    def __post_init__(self):
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if not self.delta_placebo_values or not self.sigma_values or not self.classifiers:
            raise ValueError("grid value lists must be non-empty")

    def coordinates(self) -> List[Tuple[float, float]]:
        return sorted(set(itertools.product(map(float, self.delta_placebo_values), map(float, self.sigma_values))))

    def cell_params(self, delta_placebo: float, sigma_eps: float) -> TrialParams:
        return self.base.with_null(self.delta_all, delta_placebo, sigma_eps)


@dataclass(frozen=True)
class ReplicateResults:
    """Per-replicate estimates for the replicates that produced all estimators."""

    theta1: np.ndarray
    theta2: np.ndarray
    theta_w: np.ndarray
    npv: np.ndarray
    seeds: np.ndarray
    n_reps: int

    @property
    def used(self) -> int:
        return int(self.theta1.size)

    @property
    def skipped(self) -> int:
        return self.n_reps - self.used


def run_replicates(params: TrialParams, classifier: ClassifierSpec, n_reps: int, cell_seed: int) -> ReplicateResults:
    """Simulate and estimate ``n_reps`` trials; empty stage-2 arms are skipped."""
    t1, t2, tw, npv, seeds = [], [], [], [], []
    w = params.weight_w
    for rep in range(n_reps):
        seed = derive_seed(cell_seed, rep)
        ds = simulate_trial(params, seed, classifier)
        try:
            a = theta1(ds)
            b = theta2(ds)
        except EmptyArmError:
            continue
        t1.append(a)
        t2.append(b)
        tw.append(theta_weighted(a, b, w))
        npv.append(empirical_npv(ds))
        seeds.append(seed)
    return ReplicateResults(
        theta1=np.array(t1),
        theta2=np.array(t2),
        theta_w=np.array(tw),
        npv=np.array(npv),
        seeds=np.array(seeds, dtype=np.uint64),
        n_reps=n_reps,
    )


def mean_se(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and Monte Carlo SE (sample SD over sqrt(count)); NaN where undefined."""
    m = len(values)
    if m == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / m
    if m < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


@dataclass(frozen=True)
class EstimatorSummary:
    mean: float
    se: float
    bias_all: float
    bias_nr: float
    expected: float  # analytic expectation, NaN when no closed form


@dataclass(frozen=True)
class CellSummary:
    delta_placebo: float
    sigma_eps: float
    classifier: str
    params: TrialParams
    n_reps: int
    skipped: int
    estimators: Dict[str, EstimatorSummary]
    npv_mean: float
    npv_se: float
    analytic: Optional[AnalyticCell] = field(default=None)

    @property
    def used(self) -> int:
        return self.n_reps - self.skipped

    @property
    def flagged(self) -> bool:
        return self.skipped > SKIP_FLAG_RATE * self.n_reps

    def sort_key(self):
        return (self.delta_placebo, self.sigma_eps, self.classifier)


def summarize(params: TrialParams, classifier: ClassifierSpec, reps: ReplicateResults) -> CellSummary:
    d_all = params.delta_all
    d_nr = params.delta_nr
    analytic = expected_estimates(params, classifier) if classifier.kind in (QUANTILE, ORACLE) else None
    expected = {
        "theta1": d_all,
        "theta2": analytic.e_theta2 if analytic else math.nan,
        "theta_w": analytic.e_theta_w if analytic else math.nan,
    }
    est = {}
    for name in ESTIMATORS:
        mean, se = mean_se(getattr(reps, name).tolist())
        est[name] = EstimatorSummary(mean, se, mean - d_all, mean - d_nr, expected[name])
    npv_mean, npv_se = mean_se(reps.npv.tolist())
    return CellSummary(
        delta_placebo=params.delta_placebo,
        sigma_eps=params.sigma_eps,
        classifier=classifier.label,
        params=params,
        n_reps=reps.n_reps,
        skipped=reps.skipped,
        estimators=est,
        npv_mean=npv_mean,
        npv_se=npv_se,
        analytic=analytic,
    )


def run_cell(params: TrialParams, classifier: ClassifierSpec, n_reps: int, cell_seed: int) -> CellSummary:
    return summarize(params, classifier, run_replicates(params, classifier, n_reps, cell_seed))


def _run_cell_task(task):
    return run_cell(*task)


def grid_tasks(spec: GridSpec):
    tasks = []
    for idx, (dp, s) in enumerate(spec.coordinates()):
        params = spec.cell_params(dp, s)
        cell_seed = derive_seed(spec.master_seed, idx)
        for clf in spec.classifiers:
            tasks.append((params, clf, spec.n_reps, cell_seed))
    return tasks


def run_grid(spec: GridSpec, parallelism: int = 1) -> List[CellSummary]:
    """One summary per (delta_placebo, sigma_eps, classifier), sorted by those keys."""
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    tasks = grid_tasks(spec)
    if parallelism == 1:
        cells = [_run_cell_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            cells = list(pool.map(_run_cell_task, tasks))
    return sorted(cells, key=CellSummary.sort_key)
