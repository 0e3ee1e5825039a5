"""Two-component, equal-variance normal mixture fitted by EM.

Used to recover the placebo-responder prevalence and the two component means
from placebo-arm change scores. The upper component is the responder class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

SIGMA_FLOOR = 1e-8
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class InsufficientDataError(ValueError):
    pass


class DegenerateFitError(ValueError):
    """The shared component SD collapsed to the floor."""


@dataclass(frozen=True)
class InitSpec:
    """Starting values; any field left as None comes from the median split."""

    p: Optional[float] = None
    mu0: Optional[float] = None
    mu1: Optional[float] = None
    sigma: Optional[float] = None


@dataclass(frozen=True)
class MixtureFit:
    p_hat: float
    mu0: float
    mu1: float
    sigma_hat: float
    loglik: float
    iterations: int
    converged: bool
    n: int
    loglik_single: float = math.nan
    loglik_trace: Tuple[float, ...] = field(default=(), repr=False)


def _median_split(x: np.ndarray):
    xs = np.sort(x)
    lower, upper = xs[: x.size // 2], xs[x.size // 2 :]
    ss = np.sum((lower - lower.mean()) ** 2) + np.sum((upper - upper.mean()) ** 2)
    return 0.5, float(lower.mean()), float(upper.mean()), math.sqrt(ss / x.size)


def _log_joint(x, p, mu0, mu1, sigma):
    """Per-observation log of ``(1-p) f0`` and ``p f1``, shape (n, 2)."""
    base = -math.log(sigma) - _LOG_SQRT_2PI
    with np.errstate(divide="ignore"):
        lp = np.log([1.0 - p, p])
    z0 = (x - mu0) / sigma
    z1 = (x - mu1) / sigma
    return np.column_stack((lp[0] + base - 0.5 * z0 * z0, lp[1] + base - 0.5 * z1 * z1))


def mixture_loglik(x, p, mu0, mu1, sigma) -> float:
    return float(np.sum(logsumexp(_log_joint(np.asarray(x, float), p, mu0, mu1, sigma), axis=1)))


def em_fit(changes, init: InitSpec | None = None, tol: float = 1e-8, max_iter: int = 500) -> MixtureFit:
    """Fit the mixture by EM, stopping once the log-likelihood gain drops below ``tol``.

    Raises
    ------
    InsufficientDataError
        Fewer than four observations.
    DegenerateFitError
        The data (or an iterate) have no spread left.
    """
    x = np.asarray(changes, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise InsufficientDataError(f"need at least 4 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("observations must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")

    p, mu0, mu1, sigma = _median_split(x)
    if init is not None:
        p = p if init.p is None else init.p
        mu0 = mu0 if init.mu0 is None else init.mu0
        mu1 = mu1 if init.mu1 is None else init.mu1
        sigma = sigma if init.sigma is None else init.sigma
    if not 0.0 < p < 1.0:
        raise ValueError("initial p must lie in (0, 1)")
    if sigma <= SIGMA_FLOOR:
        raise DegenerateFitError("data have no spread")

    n = x.size
    ll = mixture_loglik(x, p, mu0, mu1, sigma)
    trace = [ll]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        lj = _log_joint(x, p, mu0, mu1, sigma)
        resp1 = np.exp(lj[:, 1] - logsumexp(lj, axis=1))
        resp0 = 1.0 - resp1
        w1, w0 = resp1.sum(), resp0.sum()
        if w1 <= 0.0 or w0 <= 0.0:
            raise DegenerateFitError("one component lost all its weight")
        p = w1 / n
        mu1 = float(resp1 @ x / w1)
        mu0 = float(resp0 @ x / w0)
        var = (resp1 @ (x - mu1) ** 2 + resp0 @ (x - mu0) ** 2) / n
        sigma = math.sqrt(var)
        if sigma <= SIGMA_FLOOR:
            raise DegenerateFitError(f"component SD collapsed after {it} iterations")
        new_ll = mixture_loglik(x, p, mu0, mu1, sigma)
        trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain < tol:
            converged = True
            break

    if mu0 > mu1:
        mu0, mu1, p = mu1, mu0, 1.0 - p
    return MixtureFit(
        p_hat=float(p),
        mu0=mu0,
        mu1=mu1,
        sigma_hat=sigma,
        loglik=ll,
        iterations=it,
        converged=converged,
        n=n,
        loglik_single=mixture_loglik(x, 0.5, x.mean(), x.mean(), float(x.std())),
        loglik_trace=tuple(trace),
    )


def posterior_responsibility(fit: MixtureFit, d):
    """``P(L=1 | D=d)`` under the fitted mixture; vectorised over ``d``."""
    lj = _log_joint(np.atleast_1d(np.asarray(d, float)), fit.p_hat, fit.mu0, fit.mu1, fit.sigma_hat)
    out = np.exp(lj[:, 1] - logsumexp(lj, axis=1))
    return float(out[0]) if np.ndim(d) == 0 else out


@dataclass(frozen=True)
class IdentifiabilityReport:
    separation: float
    p_boundary_distance: float
    lr_stat: float
    weak: bool
    reasons: Tuple[str, ...]


def identifiability_diagnostics(
    fit: MixtureFit, min_separation: float = 1.0, p_band: float = 0.05, min_lr: float = 10.0
) -> IdentifiabilityReport:
    """Flag weak identification of the fitted mixture.

    The fit is weak when the standardized separation ``(mu1 - mu0) / sigma``
    is below ``min_separation``, when ``p_hat`` leaves ``[p_band, 1 - p_band]``,
    or when twice the log-likelihood gain over a single normal is below
    ``min_lr`` (skipped when the fit carries no single-normal baseline). The last rule catches single-normal samples whose EM iterates
    drift to a moderate separation without improving the fit; under a single
    normal with n=2000 the statistic stays below 10 in about 99% of samples.
    """
    sep = (fit.mu1 - fit.mu0) / fit.sigma_hat
    lr = 2.0 * (fit.loglik - fit.loglik_single)
    reasons = []
    if sep < min_separation:
        reasons.append(f"separation {sep:.3g} < {min_separation:g}")
    if not p_band <= fit.p_hat <= 1.0 - p_band:
        reasons.append(f"p_hat {fit.p_hat:.3g} outside [{p_band:g}, {1 - p_band:g}]")
    if math.isfinite(lr) and lr < min_lr:
        reasons.append(f"likelihood-ratio gain {lr:.3g} < {min_lr:g}")
    return IdentifiabilityReport(
        separation=sep,
        p_boundary_distance=min(fit.p_hat, 1.0 - fit.p_hat),
        lr_stat=lr,
        weak=bool(reasons),
        reasons=tuple(reasons),
    )
