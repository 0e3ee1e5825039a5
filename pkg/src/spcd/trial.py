"""Trial parameters, estimands and the SPCD data-generating process.

Random numbers come from numpy's counter-based Philox generator keyed by a
``SeedSequence`` built from the trial seed. Each trial owns its own stream and
draws its variables in a fixed order, so a dataset depends only on
``(params, seed, classifier)`` and never on which worker produced it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .classify import NOT_APPLICABLE, ClassifierSpec, classify_placebo


class InvalidParamsError(ValueError):
    def __init__(self, keys):
        self.keys = tuple(keys)
        super().__init__(f"invalid trial parameter(s): {', '.join(self.keys)}")


class AllocationError(ValueError):
    """Raised when exact-count allocation would leave a stage-1 arm empty."""


@dataclass(frozen=True)
class TrialParams:
    """True generative quantities for one SPCD trial.

    Parameters
    ----------
    delta_nr : float
        Treatment effect among placebo non-responders.
    delta_placebo : float
        Average placebo effect (responders minus non-responders, placebo arm).
    sigma_eps : float
        Residual SD at baseline, stage 1 and stage 2.
    p_l : float
        Prevalence of latent placebo responders.
    n : int
        Total participants.
    active_frac_stage1, active_frac_stage2 : float
        Share allocated to active treatment at each stage (stage 2 counts
        classified non-responders only).
    responder_quantile : float
        Quantile used by the default threshold classifier.
    weight_w : float
        Weight on the stage-1 estimator in the weighted estimator.
    """

    delta_nr: float = 0.0
    delta_placebo: float = 0.0
    sigma_eps: float = 1.0
    p_l: float = 0.5
    n: int = 300
    active_frac_stage1: float = 1.0 / 3.0
    active_frac_stage2: float = 0.5
    responder_quantile: float = 0.5
    weight_w: float = 0.5

    def __post_init__(self):
        checks = {
            "sigma_eps": self.sigma_eps > 0 and math.isfinite(self.sigma_eps),
            "p_l": 0.0 <= self.p_l <= 1.0,
            "weight_w": 0.0 <= self.weight_w <= 1.0,
            "active_frac_stage1": 0.0 < self.active_frac_stage1 < 1.0,
            "active_frac_stage2": 0.0 < self.active_frac_stage2 < 1.0,
            "responder_quantile": 0.0 < self.responder_quantile < 1.0,
            "n": isinstance(self.n, (int, np.integer)) and self.n >= 6,
            "delta_nr": math.isfinite(self.delta_nr),
            "delta_placebo": math.isfinite(self.delta_placebo),
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise InvalidParamsError(bad)

    @property
    def delta_all(self) -> float:
        return self.delta_nr - self.p_l * self.delta_placebo

    @property
    def n_active(self) -> int:
        return math.floor(self.n * self.active_frac_stage1)

    def with_null(self, delta_all: float, delta_placebo: float, sigma_eps: float) -> "TrialParams":
        """Copy with ``delta_nr`` chosen so the population effect equals ``delta_all``."""
        return replace(
            self,
            delta_placebo=delta_placebo,
            sigma_eps=sigma_eps,
            delta_nr=delta_all + self.p_l * delta_placebo,
        )


@dataclass(frozen=True)
class EstimandSet:
    delta_all: float
    delta_nr: float
    delta_pr: float
    delta_placebo: float


def true_estimands(params: TrialParams) -> EstimandSet:
    """Population effects implied by ``params``.

    Responders differ from non-responders only through the placebo arm, so
    ``delta_pr = delta_nr - delta_placebo`` and the population effect mixes
    the two strata with weight ``p_l``.
    """
    return EstimandSet(
        delta_all=params.delta_nr - params.p_l * params.delta_placebo,
        delta_nr=params.delta_nr,
        delta_pr=params.delta_nr - params.delta_placebo,
        delta_placebo=params.delta_placebo,
    )


@dataclass(frozen=True)
class Participant:
    y0: float
    l: int
    a1: int
    y1: float
    r: Optional[int]
    a2: int
    y2: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TrialDataset:
    """One simulated trial stored column-wise.

    ``r`` holds ``-1`` for active-arm rows, where no classification happens.
    Arrays are read-only.
    """

    params: TrialParams
    seed: int
    classifier: ClassifierSpec
    y0: np.ndarray
    l: np.ndarray
    a1: np.ndarray
    y1: np.ndarray
    r: np.ndarray
    a2: np.ndarray
    y2: np.ndarray

    @property
    def n(self) -> int:
        return int(self.y0.size)

    @property
    def participants(self) -> Tuple[Participant, ...]:
        return tuple(
            Participant(
                y0=float(self.y0[i]),
                l=int(self.l[i]),
                a1=int(self.a1[i]),
                y1=float(self.y1[i]),
                r=None if self.r[i] == NOT_APPLICABLE else int(self.r[i]),
                a2=int(self.a2[i]),
                y2=float(self.y2[i]),
            )
            for i in range(self.n)
        )

    def columns(self):
        return {k: getattr(self, k) for k in ("y0", "l", "a1", "y1", "r", "a2", "y2")}

    def identical_to(self, other: "TrialDataset") -> bool:
        """Bitwise equality of every column."""
        return all(
            a.dtype == b.dtype and a.tobytes() == b.tobytes()
            for a, b in zip(self.columns().values(), other.columns().values())
        )


def trial_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def derive_seed(parent: int, *keys: int) -> int:
    """Child 64-bit seed ``h(parent, keys...)`` via ``SeedSequence`` hashing."""
    ss = np.random.SeedSequence(int(parent), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _smallest(keys: np.ndarray, k: int) -> np.ndarray:
    # ties have probability zero, stable sort settles them anyway
    return np.argsort(keys, kind="stable")[:k]


def simulate_trial(params: TrialParams, seed: int, classifier: ClassifierSpec) -> TrialDataset:
    """Draw one SPCD trial.

    Allocation is by exact counts: ``floor(n * active_frac_stage1)`` active at
    stage 1 and ``floor(n_nr * active_frac_stage2)`` active among classified
    non-responders at stage 2, chosen by per-participant uniform keys. Stage-2
    outcomes are generated for everyone; participants who are not
    re-randomized stay on their stage-1 arm.
    """
    n = params.n
    n_active = params.n_active
    if n_active < 1 or n - n_active < 1:
        raise AllocationError(
            f"n={n} with active_frac_stage1={params.active_frac_stage1} leaves an empty arm"
        )
    sd = params.sigma_eps
    dnr, dpl = params.delta_nr, params.delta_placebo

    rng = trial_rng(seed)
    y0 = rng.normal(0.0, sd, n)
    l = (rng.random(n) < params.p_l).astype(np.int8)
    key1 = rng.random(n)
    eps1 = rng.normal(0.0, sd, n)
    key2 = rng.random(n)
    eps2 = rng.normal(0.0, sd, n)

    a1 = np.zeros(n, dtype=np.int8)
    a1[_smallest(key1, n_active)] = 1
    y1 = y0 + dnr * a1 + dpl * l * (1 - a1) + eps1

    r = classify_placebo(classifier, y0, y1, l, a1)

    a2 = a1.copy()
    nonresp = np.flatnonzero((a1 == 0) & (r == 0))
    n_a2 = math.floor(nonresp.size * params.active_frac_stage2)
    a2[nonresp[_smallest(key2[nonresp], n_a2)]] = 1
    y2 = y1 + dnr * a2 + dpl * l * (1 - a2) + eps2

    return TrialDataset(
        params=params,
        seed=int(seed),
        classifier=classifier,
        y0=_frozen(y0),
        l=_frozen(l),
        a1=_frozen(a1),
        y1=_frozen(y1),
        r=_frozen(r),
        a2=_frozen(a2),
        y2=_frozen(y2),
    )
