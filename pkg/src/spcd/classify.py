"""Placebo-response classification rules.

Only stage-1 placebo participants are ever classified; active-arm rows carry
``R = -1`` (not applicable) throughout the package.

Boundary convention: a participant is a responder when the statistic is
*greater than or equal to* the cut-off. Quantiles use linear interpolation
between order statistics (``numpy.quantile``'s default, "type 7").
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

FIXED_CHANGE = "fixed-threshold-change"
FIXED_LEVEL = "fixed-threshold-level"
QUANTILE = "quantile-change"
ORACLE = "oracle"
KINDS = (FIXED_CHANGE, FIXED_LEVEL, QUANTILE, ORACLE)

NOT_APPLICABLE = -1


class NoNonRespondersError(ValueError):
    """Raised when a dataset has no classified placebo non-responders."""


@dataclass(frozen=True)
class ClassifierSpec:
    """A classification rule ``C_R(y0, y1)``.

    ``c`` is used by the fixed-threshold kinds, ``p_r`` by the quantile kind,
    and the oracle takes neither.
    """

    kind: str
    c: Optional[float] = None
    p_r: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in (FIXED_CHANGE, FIXED_LEVEL):
            if self.c is None or self.p_r is not None:
                raise ValueError(f"{self.kind} takes exactly a threshold c")
            if not np.isfinite(self.c):
                raise ValueError("threshold c must be finite")
        elif self.kind == QUANTILE:
            if self.p_r is None or self.c is not None:
                raise ValueError(f"{self.kind} takes exactly a quantile p_r")
            if not 0.0 < self.p_r < 1.0:
                raise ValueError("p_r must lie in (0, 1)")
        elif self.c is not None or self.p_r is not None:
            raise ValueError("oracle classifier takes no parameters")

    @classmethod
    def fixed(cls, c: float, mode: str = "change") -> "ClassifierSpec":
        return cls(FIXED_CHANGE if mode == "change" else FIXED_LEVEL, c=float(c))

    @classmethod
    def quantile(cls, p_r: float) -> "ClassifierSpec":
        return cls(QUANTILE, p_r=float(p_r))

    @classmethod
    def oracle(cls) -> "ClassifierSpec":
        return cls(ORACLE)

    @property
    def label(self) -> str:
        if self.kind in (FIXED_CHANGE, FIXED_LEVEL):
            return f"{self.kind}({self.c!r})"
        return self.kind


def classify_fixed(y0, y1, c: float, mode: str = "change"):
    """Fixed cut-off rule; works elementwise on arrays.

    ``mode="change"`` flags ``y1 - y0 >= c``; ``mode="level"`` flags ``y1 >= c``.
    """
    if mode == "change":
        stat = np.subtract(y1, y0)
    elif mode == "level":
        stat = np.asarray(y1)
    else:
        raise ValueError(f"mode must be 'change' or 'level', got {mode!r}")
    out = (stat >= c).astype(np.int8)
    return int(out) if out.ndim == 0 else out


def quantile_threshold(placebo_changes, p_r: float) -> float:
    """Empirical ``p_r`` quantile of the placebo-arm change scores (type 7)."""
    x = np.asarray(placebo_changes, dtype=float)
    if x.size == 0:
        raise ValueError("cannot take a quantile of an empty list")
    if not 0.0 < p_r < 1.0:
        raise ValueError("p_r must lie in (0, 1)")
    return float(np.quantile(x, p_r))


def oracle_classify(l):
    """Return the latent responder status itself."""
    out = np.asarray(l, dtype=np.int8)
    if np.any((out != 0) & (out != 1)):
        raise ValueError("latent status must be 0 or 1")
    return int(out) if out.ndim == 0 else out.copy()


def classify_placebo(spec: ClassifierSpec, y0, y1, l, a1) -> np.ndarray:
    """Classify every stage-1 placebo row; active rows get ``NOT_APPLICABLE``.

    For the quantile rule the cut-off is estimated from the placebo rows only.
    """
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    placebo = np.asarray(a1) == 0
    r = np.full(y0.shape, NOT_APPLICABLE, dtype=np.int8)
    if spec.kind == ORACLE:
        r[placebo] = oracle_classify(np.asarray(l)[placebo])
    elif spec.kind == QUANTILE:
        change = y1[placebo] - y0[placebo]
        r[placebo] = classify_fixed(0.0, change, quantile_threshold(change, spec.p_r))
    elif spec.kind == FIXED_CHANGE:
        r[placebo] = classify_fixed(y0[placebo], y1[placebo], spec.c, "change")
    else:
        r[placebo] = classify_fixed(y0[placebo], y1[placebo], spec.c, "level")
    return r


def empirical_npv(dataset) -> float:
    """Share of classified placebo non-responders who are true non-responders."""
    nonresp = (dataset.a1 == 0) & (dataset.r == 0)
    count = int(nonresp.sum())
    if count == 0:
        raise NoNonRespondersError("no classified placebo non-responders")
    return float(np.sum(nonresp & (dataset.l == 0))) / count
