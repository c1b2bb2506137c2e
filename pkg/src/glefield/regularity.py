"""Pathwise roughness estimation through variograms.

The empirical variogram of a field at lag h along an axis is the ensemble
and volume average of squared increments; on a log-log scale its slope is
twice the Hoelder exponent of the sample paths.  This module computes
empirical and quadrature-exact theoretical variograms and fits the exponent
with a bootstrap confidence interval over ensemble members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral
from .cm_kernel import KernelMeasure
from .field_assembly import FieldSample
from .spectral import Mode, SpectralDensity


class DegenerateFit(Exception):
    """Variogram values unusable for a log-log fit."""


@dataclass(eq=False)
class VariogramCurve:
    """Mean squared increments at a set of lags along one axis.

    Lags are in physical units, strictly increasing, at least 4 of them, and
    the largest must exceed the smallest by a factor of 16 or more (two
    dyadic decades) so a slope is identifiable.  member_values, when present,
    holds the per-ensemble-member curves used for bootstrap resampling.
    """

    lags: np.ndarray
    values: np.ndarray
    axis: str
    stderr: np.ndarray | None = None
    member_values: np.ndarray | None = None

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.axis not in ("time", "space"):
            raise ValueError(f"axis {self.axis!r} must be 'time' or 'space'")
        if self.lags.ndim != 1 or self.lags.shape != self.values.shape:
            raise ValueError("lags and values must be matching 1d arrays")
        if len(self.lags) < 4:
            raise ValueError(f"need at least 4 lags, got {len(self.lags)}")
        if np.any(np.diff(self.lags) <= 0.0) or self.lags[0] <= 0.0:
            raise ValueError("lags must be positive and strictly increasing")
        if self.lags[-1] < 16.0 * self.lags[0]:
            raise ValueError(
                f"lag span {self.lags[-1] / self.lags[0]:.3g} < 16; "
                "slope not identifiable"
            )


@dataclass(frozen=True)
class ExponentFit:
    """Log-log OLS fit of a variogram: estimate, bootstrap CI, diagnostics.

    flagged means r_squared < 0.9: the curve is not a clean power law and the
    estimate should not be trusted silently.
    """

    gamma_hat: float
    ci_low: float
    ci_high: float
    r_squared: float
    slope: float
    intercept: float
    n_members: int
    flagged: bool


def _loglog_fit(lags: np.ndarray, values: np.ndarray) -> tuple[float, float, float]:
    if np.any(values <= 0.0):
        raise DegenerateFit("variogram has nonpositive values; cannot take logs")
    lx = np.log(lags)
    ly = np.log(values)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(((ly - fitted) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r_sq = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), float(intercept), r_sq


def fit_exponent(curve: VariogramCurve, bootstrap: int = 200, seed: int = 0) -> ExponentFit:
    """Fit gamma = slope/2 on log lags vs log variogram values.

    The confidence interval is a percentile bootstrap over ensemble members
    (resampling member curves with replacement); without member curves the
    interval collapses to the point estimate.
    """
    slope, intercept, r_sq = _loglog_fit(curve.lags, curve.values)
    gamma = 0.5 * slope
    if curve.member_values is None or bootstrap < 1:
        return ExponentFit(gamma, gamma, gamma, r_sq, slope, intercept, 0, r_sq < 0.9)
    members = np.asarray(curve.member_values, dtype=float)
    if members.ndim != 2 or members.shape[1] != len(curve.lags):
        raise ValueError("member_values must have shape (m, len(lags))")
    m = members.shape[0]
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    draws = np.empty(bootstrap)
    lx = np.log(curve.lags)
    for b in range(bootstrap):
        resampled = members[rng.integers(0, m, size=m)].mean(axis=0)
        if np.any(resampled <= 0.0):
            raise DegenerateFit("bootstrap resample produced nonpositive variogram")
        s, _ = np.polyfit(lx, np.log(resampled), 1)
        draws[b] = 0.5 * s
    lo, hi = np.percentile(draws, [2.5, 97.5])
    return ExponentFit(gamma, float(lo), float(hi), r_sq, slope, intercept, m, r_sq < 0.9)


def empirical_variogram(sample: FieldSample, axis: str, lag_steps) -> VariogramCurve:
    """Mean squared increments of a sampled field along time or space.

    lag_steps are positive integers in grid units; averaging runs over
    ensemble members, the full orthogonal axis, and all admissible offsets.
    Standard errors come from the spread of per-member means.
    """
    steps = np.asarray(lag_steps, dtype=int)
    if steps.ndim != 1 or np.any(steps <= 0):
        raise ValueError("lag steps must be positive integers")
    values = sample.values
    m = values.shape[0]
    if axis == "time":
        size = values.shape[1]
        spacing = sample.grid.dt
    elif axis == "space":
        size = values.shape[2]
        xs = sample.x
        dx = np.diff(xs)
        if len(xs) < 2 or not np.allclose(dx, dx[0], rtol=1e-9, atol=0.0):
            raise ValueError("space variogram needs a uniform x grid")
        spacing = float(dx[0])
    else:
        raise ValueError(f"axis {axis!r} must be 'time' or 'space'")
    if np.any(steps >= size):
        raise ValueError(f"lag step {steps.max()} >= axis length {size}")

    member_curves = np.empty((m, len(steps)))
    for col, j in enumerate(steps):
        if axis == "time":
            diff = values[:, j:, :] - values[:, :-j, :]
        else:
            diff = values[:, :, j:] - values[:, :, :-j]
        member_curves[:, col] = (diff * diff).reshape(m, -1).mean(axis=1)
    vals = member_curves.mean(axis=0)
    stderr = member_curves.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.zeros(len(steps))
    return VariogramCurve(
        lags=steps * spacing,
        values=vals,
        axis=axis,
        stderr=stderr,
        member_values=member_curves,
    )


def theoretical_variogram(
    kernel: KernelMeasure, mode: Mode, lags, rel_tol: float = 1e-8
) -> VariogramCurve:
    """Quadrature-exact single-mode time variogram E|u(t+h) - u(t)|^2."""
    lag_arr = np.asarray(lags, dtype=float)
    sd = SpectralDensity(kernel, mode)
    vals = np.array([spectral.increment_second_moment(sd, h, rel_tol) for h in lag_arr])
    return VariogramCurve(lags=lag_arr, values=vals, axis="time", stderr=np.zeros(len(lag_arr)))


def theoretical_field_variogram(
    kernel: KernelMeasure,
    basis,
    weights,
    n_modes: int,
    x: float,
    lags,
    dynamics: str = "gle",
    rel_tol: float = 1e-8,
) -> VariogramCurve:
    """Truncated-series time variogram of the field,
    sum_k E|u_k(t+h) - u_k(t)|^2 * e_k(x)^2, with e_k(x)^2 averaged over x
    when an array of probe positions is given."""
    lag_arr = np.asarray(lags, dtype=float)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros(len(lag_arr))
    for k in range(1, n_modes + 1):
        alpha = basis.alpha(k)
        lam = weights.weight(basis, k)
        ek_sq = float(np.mean(np.square(basis.eval(k, x_arr))))
        if ek_sq == 0.0 or lam == 0.0:
            continue
        if dynamics == "heat":
            inc = (lam * lam / alpha) * (1.0 - np.exp(-alpha * lag_arr))
        else:
            mode = Mode(index=k, alpha_k=alpha, lambda_k=lam)
            sd = SpectralDensity(kernel, mode)
            inc = np.array(
                [spectral.increment_second_moment(sd, h, rel_tol) for h in lag_arr]
            )
        total += inc * ek_sq
    return VariogramCurve(lags=lag_arr, values=total, axis="time", stderr=np.zeros(len(lag_arr)))


def theoretical_space_variogram(
    basis, weights, n_modes: int, x, lag_steps, dynamics: str = "gle"
) -> VariogramCurve:
    """Stationary spatial variogram of the truncated field on a uniform grid.

    At equilibrium each mode contributes its stationary variance times the
    squared eigenfunction increment, averaged over the anchors the empirical
    estimator uses:

        E|u(t, x+h) - u(t, x)|^2 = sum_k v_k * mean_x (e_k(x+h) - e_k(x))^2

    with v_k = lambda_k^2 / alpha_k for the memory dynamics (the variance
    identity) and lambda_k^2 / (2 alpha_k) for the memoryless baseline.
    """
    if dynamics not in ("gle", "heat", "spectral"):
        raise ValueError(f"unknown dynamics {dynamics!r}")
    xs = np.asarray(x, dtype=float)
    dx = np.diff(xs)
    if len(xs) < 2 or not np.allclose(dx, dx[0], rtol=1e-9, atol=0.0):
        raise ValueError("space variogram needs a uniform x grid")
    steps = np.asarray(lag_steps, dtype=int)
    if steps.ndim != 1 or np.any(steps <= 0) or np.any(steps >= len(xs)):
        raise ValueError("lag steps must be positive and shorter than the grid")
    total = np.zeros(len(steps))
    for k in range(1, n_modes + 1):
        lam = weights.weight(basis, k)
        if lam == 0.0:
            continue
        v_k = lam * lam / basis.alpha(k)
        if dynamics == "heat":
            v_k *= 0.5
        ek = basis.eval(k, xs)
        for col, j in enumerate(steps):
            d = ek[j:] - ek[:-j]
            total[col] += v_k * float(np.mean(d * d))
    return VariogramCurve(
        lags=steps * float(dx[0]),
        values=total,
        axis="space",
        stderr=np.zeros(len(steps)),
    )
