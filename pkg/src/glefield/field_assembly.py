"""Assembling the spatial field from independently sampled modes.

The field on an interval with absorbing ends is the eigenfunction series

    u(t, x) = sum_{k=1}^{N} u_k(t) e_k(x)

where each scalar trajectory u_k carries the noise weight through its
spectral density and the eigenfunctions are orthonormal in L^2.  This module
owns the basis and weight-rule descriptions, the summability gates that make
the series well defined, and the truncated synthesis itself.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cm_kernel import KernelMeasure
from . import mode_sampler
from .mode_sampler import PathEnsemble, TimeGrid
from .spectral import Mode


class Divergent(Exception):
    """The mode series fails its summability test; the field does not exist."""


class TailBudgetExceeded(Exception):
    """Truncating at n_modes leaves more variance than the caller allows."""


@dataclass(frozen=True)
class DirichletInterval:
    """Sine eigenbasis on (0, L) with absorbing ends.

    e_k(x) = sqrt(2/L) sin(k pi x / L), eigenvalue alpha_k = (k pi / L)^2,
    sup-norm constant c_k = sqrt(2/L); the gradient obeys
    |e_k'(x)| <= alpha_k^(1/2) * c_k.
    """

    length: float

    def __post_init__(self):
        if not (self.length > 0.0 and np.isfinite(self.length)):
            raise ValueError(f"interval length {self.length} must be positive")

    def alpha(self, k: int) -> float:
        return (k * math.pi / self.length) ** 2

    def sup_const(self, k: int) -> float:
        return math.sqrt(2.0 / self.length)

    def eval(self, k: int, x) -> np.ndarray:
        x_arr = np.asarray(x, dtype=float)
        return math.sqrt(2.0 / self.length) * np.sin(k * math.pi * x_arr / self.length)


@dataclass(frozen=True)
class CustomBasis:
    """Explicit eigenvalue/constant sequences with a user evaluation rule.

    Sequences must be nondecreasing: modes are ordered by stiffness and the
    tail estimates rely on it.
    """

    alphas: tuple
    sup_consts: tuple
    eval_fn: object = None

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        c = np.asarray(self.sup_consts, dtype=float)
        if a.ndim != 1 or a.shape != c.shape or a.size == 0:
            raise ValueError("alphas and sup_consts must be equal-length sequences")
        if np.any(a <= 0.0) or np.any(c <= 0.0):
            raise ValueError("eigenvalues and sup-norm constants must be positive")
        if np.any(np.diff(a) < 0.0) or np.any(np.diff(c) < 0.0):
            raise ValueError("alpha_k and c_k sequences must be nondecreasing")
        object.__setattr__(self, "alphas", tuple(float(v) for v in a))
        object.__setattr__(self, "sup_consts", tuple(float(v) for v in c))

    def alpha(self, k: int) -> float:
        return self.alphas[k - 1]

    def sup_const(self, k: int) -> float:
        return self.sup_consts[k - 1]

    def eval(self, k: int, x) -> np.ndarray:
        if self.eval_fn is None:
            raise ValueError("this basis has no eigenfunction evaluation rule")
        return np.asarray(self.eval_fn(k, x), dtype=float)


@dataclass(frozen=True)
class Flat:
    """Constant noise weights lambda_k = lam."""

    lam: float = 1.0

    def __post_init__(self):
        if not (self.lam >= 0.0 and np.isfinite(self.lam)):
            raise ValueError(f"lam {self.lam} must be nonnegative")

    def weight(self, basis, k: int) -> float:
        return self.lam


@dataclass(frozen=True)
class PowerDecay:
    """Spectrally tied weights lambda_k = alpha_k^(-s)."""

    s: float

    def __post_init__(self):
        if not np.isfinite(self.s):
            raise ValueError("decay exponent must be finite")

    def weight(self, basis, k: int) -> float:
        return basis.alpha(k) ** (-self.s)


@dataclass(frozen=True)
class Explicit:
    """Explicit weight list lambda_1..lambda_N."""

    values: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("weights must be a nonempty sequence")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    def weight(self, basis, k: int) -> float:
        if k > len(self.values):
            raise ValueError(f"mode {k} beyond the {len(self.values)} explicit weights")
        return self.values[k - 1]


def _series_terms(basis, weights, exponent: float, count: int, use_sup: bool) -> np.ndarray:
    """Terms lambda_k^2 [c_k^2] / alpha_k^exponent for k = 1..count."""
    out = np.empty(count)
    for k in range(1, count + 1):
        lam = weights.weight(basis, k)
        term = lam * lam / basis.alpha(k) ** exponent
        if use_sup:
            term *= basis.sup_const(k) ** 2
        out[k - 1] = term
    return out


def _tail_by_fitted_power(terms: np.ndarray) -> tuple[float, float]:
    """(tail estimate, fitted decay power) from the last decade of terms.

    Fits terms ~ C k^(-p) on the final decade and integrates the fit past the
    probe end (midpoint rule), the standard closure for p-series partial sums.
    Returns (inf, p) when p <= 1 up to fit noise: the critical series fits to
    p = 1 + O(eps) and must not be certified convergent.
    """
    n = len(terms)
    lo = max(n // 10 * 9, 1)
    ks = np.arange(lo, n + 1, dtype=float)
    vals = terms[lo - 1 :]
    if np.any(vals <= 0.0):
        return 0.0, math.inf
    slope, intercept = np.polyfit(np.log(ks), np.log(vals), 1)
    p = -slope
    if p <= 1.0 + 1e-6:
        return math.inf, p
    c = math.exp(intercept)
    tail = c * (n + 0.5) ** (1.0 - p) / (p - 1.0)
    return tail, p


@dataclass(frozen=True)
class SummabilityReport:
    """Outcome of a series gate: partial sum, tail estimate, and the verdict."""

    partial_sum: float
    tail_estimate: float
    decay_power: float
    n_probe: int
    convergent: bool

    @property
    def total(self) -> float:
        return self.partial_sum + self.tail_estimate


def check_wellposedness(
    basis, weights, n_probe: int = 2000, raise_on_divergent: bool = True
) -> SummabilityReport:
    """Gate the stationary variance series sum_k lambda_k^2 / alpha_k.

    Built-in weight rules on built-in bases decay like a power of k, so the
    tail is closed analytically from the fitted power; convergence requires
    that power to exceed 1.  For Explicit weights the same partial-sum plus
    decay-fit heuristic applies to however many weights were given.  With
    raise_on_divergent (the default for simulation entry points) a divergent
    series raises Divergent instead of returning.
    """
    if isinstance(weights, Explicit):
        n_probe = min(n_probe, len(weights.values))
    if n_probe < 10:
        raise ValueError("need at least 10 probe terms")
    terms = _series_terms(basis, weights, 1.0, n_probe, use_sup=False)
    tail, p = _tail_by_fitted_power(terms)
    convergent = p > 1.0 and math.isfinite(tail)
    report = SummabilityReport(float(terms.sum()), tail, p, n_probe, convergent)
    if raise_on_divergent and not convergent:
        raise Divergent(
            f"variance series diverges: fitted decay power {p:.3f} <= 1 "
            f"(partial sum {report.partial_sum:.6g} after {n_probe} terms)"
        )
    return report


def check_regularity_assumption(
    basis, weights, eta: float, n_probe: int = 2000
) -> SummabilityReport:
    """Gate the smoothness series sum_k lambda_k^2 c_k^2 / alpha_k^eta.

    Convergence at a given eta in (0, 1) certifies time regularity of every
    exponent below 1 - eta.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta {eta} must lie in (0, 1)")
    if isinstance(weights, Explicit):
        n_probe = min(n_probe, len(weights.values))
    if n_probe < 10:
        raise ValueError("need at least 10 probe terms")
    terms = _series_terms(basis, weights, eta, n_probe, use_sup=True)
    tail, p = _tail_by_fitted_power(terms)
    convergent = p > 1.0 and math.isfinite(tail)
    return SummabilityReport(float(terms.sum()), tail, p, n_probe, convergent)


def minimal_admissible_eta(
    basis, weights, grid=None, n_probe: int = 2000
) -> tuple[float, tuple[float, float]]:
    """Smallest grid eta whose smoothness series converges, with the implied
    open interval (0, 1 - eta) of certified time exponents."""
    etas = np.round(np.arange(0.05, 1.0, 0.05), 2) if grid is None else np.asarray(grid)
    for eta in etas:
        if check_regularity_assumption(basis, weights, float(eta), n_probe).convergent:
            return float(eta), (0.0, 1.0 - float(eta))
    raise Divergent("smoothness series diverges for every eta on the grid")


@dataclass(eq=False)
class FieldSample:
    """Ensemble of field trajectories: values[i, j, l] = u_i(t_j, x_l)."""

    grid: TimeGrid
    x: np.ndarray
    values: np.ndarray  # shape (m, n_t, n_x)
    n_modes: int
    dynamics: str
    seed: int
    clipped_masses: tuple = ()

    @property
    def m(self) -> int:
        return self.values.shape[0]


def tail_variance_bound(basis, weights, n_modes: int, n_probe: int = 4000) -> float:
    """Analytic bound on the pointwise variance lost to truncation,
    sum_{k > n_modes} lambda_k^2 c_k^2 / alpha_k."""
    probe = max(n_probe, 2 * n_modes)
    if isinstance(weights, Explicit):
        probe = len(weights.values)
        if n_modes >= probe:
            return 0.0
    terms = _series_terms(basis, weights, 1.0, probe, use_sup=True)
    tail_past_probe, p = _tail_by_fitted_power(terms)
    if not math.isfinite(tail_past_probe):
        return math.inf
    return float(terms[n_modes:].sum()) + tail_past_probe


def assemble_field(
    kernel: KernelMeasure,
    basis,
    weights,
    n_modes: int,
    grid: TimeGrid,
    x,
    m: int,
    seed: int,
    dynamics: str = "gle",
    tail_budget: float = 1e-2,
    workers: int = 1,
    node_count: int = 4096,
) -> FieldSample:
    """Sample the truncated eigenfunction series on a time grid and x points.

    Modes are sampled independently (streams keyed by mode index, so results
    do not depend on worker count) and combined in fixed k order.  dynamics
    selects the trajectory law: "gle" for the kernel-driven paths, "heat" for
    the memoryless baseline, "spectral" for the superposition cross-check
    route.

    Raises Divergent if the variance series fails its gate and
    TailBudgetExceeded if truncation leaves more than tail_budget of
    pointwise variance (by the analytic bound).
    """
    if n_modes < 1:
        raise ValueError("n_modes must be positive")
    if dynamics not in ("gle", "heat", "spectral"):
        raise ValueError(f"unknown dynamics {dynamics!r}")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if x_arr.ndim != 1 or x_arr.size == 0:
        raise ValueError("x must be a nonempty 1d array of positions")
    check_wellposedness(basis, weights)
    tail = tail_variance_bound(basis, weights, n_modes)
    if tail > tail_budget:
        raise TailBudgetExceeded(
            f"truncation at {n_modes} modes leaves variance bound {tail:.3e} "
            f"> budget {tail_budget:.3e}"
        )

    def run_mode(k: int) -> PathEnsemble:
        mode = Mode(
            index=k,
            alpha_k=basis.alpha(k),
            lambda_k=weights.weight(basis, k),
            c_k=basis.sup_const(k),
        )
        if dynamics == "heat":
            return mode_sampler.sample_ou_mode(mode, grid, m, seed)
        if dynamics == "spectral":
            return mode_sampler.sample_gle_mode_spectral(
                kernel, mode, grid, m, seed, node_count=node_count
            )
        return mode_sampler.sample_gle_mode(kernel, mode, grid, m, seed)

    out = np.zeros((m, grid.n, x_arr.size))
    clipped = []
    # sample in bounded batches (memory) but accumulate in fixed k order
    batch = max(workers, 1)
    for start in range(1, n_modes + 1, batch):
        ks = range(start, min(start + batch, n_modes + 1))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                ensembles = list(pool.map(run_mode, ks))
        else:
            ensembles = [run_mode(k) for k in ks]
        for k, ens in zip(ks, ensembles):
            shape = basis.eval(k, x_arr)
            for ix in range(x_arr.size):
                out[:, :, ix] += ens.values * shape[ix]
            clipped.append(getattr(ens, "clipped_mass", 0.0))
    return FieldSample(grid, x_arr, out, n_modes, dynamics, seed, tuple(clipped))
