"""Quantile-error convergence diagnostics and log-log slope fits.

Convergence of an ensemble of replica chains is measured through the error
of an empirical quantile of the projected states against the exact quantile
of the projected target: the quantile mixing time is the first iteration at
which the relative error drops below delta.  Scaling studies then regress
log(evaluations) on log(dimension) by ordinary least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .samplers import ChainTrace
from .targets import GaussianTarget

NOT_MIXED = None  # sentinel returned when the error never drops below delta

# Rational minimax coefficients of Wichura's PPND16 inverse normal CDF.
_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coeffs, x):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def normal_quantile(p: float) -> float:
    """Standard normal inverse CDF by Wichura's PPND16 rational approximation.

    Accurate to well below 1e-9 over (0, 1); endpoints map to +-inf.
    """
    if not (0 <= p <= 1):
        raise ValueError("p must lie in [0, 1]")
    if p == 0:
        return -math.inf
    if p == 1:
        return math.inf
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0 else val


def empirical_quantile(samples, level: float) -> float:
    """Type-7 (interpolated order statistic) quantile estimator.

    Linear interpolation at position 1 + level (n - 1) of the sorted sample.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("samples must be nonempty")
    if not (0 < level <= 1):
        raise ValueError("level must lie in (0, 1]")
    h = level * (n - 1)
    lo = int(math.floor(h))
    if lo >= n - 1:
        return float(x[-1])
    frac = h - lo
    return float(x[lo] + frac * (x[lo + 1] - x[lo]))


@dataclass
class QuantileSpec:
    """Which quantile to track and when it counts as mixed.

    ``direction`` must be a unit vector; ``truth`` is the exact quantile of
    the target projected onto it.
    """

    truth: float
    direction: Optional[np.ndarray] = None
    level: float = 0.75
    delta: float = 0.04

    def __post_init__(self):
        if not (0 < self.level < 1):
            raise ValueError("level must lie in (0, 1)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float)
            if abs(np.linalg.norm(d) - 1.0) > 1e-10:
                raise ValueError("direction must be a unit vector")
            self.direction = d
        if not math.isfinite(self.truth):
            raise ValueError("truth must be finite")


def quantile_mixing_time(
    per_iteration_samples,
    spec: QuantileSpec,
    max_iters: Optional[int] = None,
    absolute: bool = False,
) -> Optional[int]:
    """First iteration whose cross-replica quantile error is below delta.

    Args:
        per_iteration_samples: Array of shape (iterations, replicas) holding
            the projected state of every replica at every iteration.
        spec: Quantile level, tolerance and exact value.
        max_iters: Restrict the search to the first ``max_iters + 1`` rows.
        absolute: Use |estimate - truth| < delta instead of the relative
            error; required when truth = 0.

    Returns:
        The iteration index, or ``NOT_MIXED`` (None) if never within range.
    """
    rows = np.asarray(per_iteration_samples, dtype=float)
    if rows.ndim != 2 or rows.shape[1] < 2:
        raise ValueError("need a (iterations, replicas) matrix with >= 2 replicas")
    if spec.truth == 0 and not absolute:
        raise ValueError("relative error undefined for truth = 0; pass absolute=True")
    stop = rows.shape[0] if max_iters is None else min(rows.shape[0], max_iters + 1)
    for t in range(stop):
        est = empirical_quantile(rows[t], spec.level)
        err = abs(est - spec.truth)
        if not absolute:
            err /= abs(spec.truth)
        if err < spec.delta:
            return t
    return NOT_MIXED


def gaussian_projected_truth(
    target: GaussianTarget, level: float, direction=None
) -> float:
    """Exact quantile of the target projected onto ``direction``.

    Defaults to the max-variance eigenvector, the least favorable direction.
    """
    if direction is None:
        direction = target.max_variance_direction()
    sigma = target.directional_std(direction)
    return normal_quantile(level) * sigma


@dataclass(frozen=True)
class FitResult:
    slope: float
    stderr: float
    intercept: float
    n_points: int


def fit_loglog_slope(points: Sequence[tuple]) -> FitResult:
    """OLS fit of log y on log x with the usual slope standard error.

    Requires at least three points with distinct positive x and positive y.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points for a slope fit")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("log-log fit needs strictly positive coordinates")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    if np.ptp(lx) == 0:
        raise ValueError("x values must not all coincide")
    n = len(pts)
    mx, my = lx.mean(), ly.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    sigma2 = float(resid @ resid) / (n - 2)
    return FitResult(
        slope=slope,
        stderr=math.sqrt(sigma2 / sxx),
        intercept=float(intercept),
        n_points=n,
    )


def acceptance_rate(trace: ChainTrace) -> float:
    """Accepted moves over non-lazy iterations; nan when nothing was attempted."""
    attempts = int(np.sum(~trace.lazy_hold))
    if attempts == 0:
        return float("nan")
    return float(np.sum(trace.accepted)) / attempts
