"""Paired bootstrap, jackknife, and percentile / BC / BCa intervals.

All three interval methods read order statistics off the sorted bootstrap
vector through one rank convention: a lower tail probability ``q`` maps to
rank ``ceil(q * B)`` and an upper tail probability to ``floor(q * B)``,
1-based and clipped to ``[1, B]``. Sharing the convention makes
BCa(accel=0) == BC and BC(z0=0) == percentile hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np
from scipy import special

from .core import (
    PATHS,
    ConfidenceInterval,
    Dataset,
    DegenerateData,
    Method,
    SingularDesign,
)
from .regress import paths_from_moments, row_moments

# q * B within this distance of an integer is treated as that integer, so
# round-off in 0.025 * 1000 and the like cannot shift a rank by one
_RANK_SNAP = 1e-9


@dataclass(frozen=True)
class PathDistribution:
    """Bootstrap estimates, one row per path in ``PATHS`` order."""

    values: np.ndarray  # shape (5, B)
    degenerate_redraws: int = 0

    def __getitem__(self, path: str) -> np.ndarray:
        return self.values[PATHS.index(path)]

    @property
    def B(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class JackknifeSet:
    values: np.ndarray  # shape (5, n)

    def __getitem__(self, path: str) -> np.ndarray:
        return self.values[PATHS.index(path)]


def normal_cdf(x):
    return special.ndtr(x)


def normal_quantile(p):
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0.0) & (p_arr < 1.0))):
        raise ValueError("normal_quantile needs 0 < p < 1")
    return special.ndtri(p)


def resample(d: Dataset, rng: np.random.Generator) -> Dataset:
    """Draw ``n`` rows with replacement, keeping (x, m, y) triples together."""
    return d.take(rng.integers(0, d.n, size=d.n))


def _centred_rows(d: Dataset) -> np.ndarray:
    return row_moments(d.x - d.x.mean(), d.m - d.m.mean(), d.y - d.y.mean())


def _resample_moments(rows: np.ndarray, rng: np.random.Generator, k: int) -> np.ndarray:
    n = rows.shape[0]
    idx = rng.integers(0, n, size=(k, n))
    flat = idx + (np.arange(k) * n)[:, None]
    counts = np.bincount(flat.ravel(), minlength=k * n).reshape(k, n)
    return counts.astype(float) @ rows


def bootstrap_distribution(d: Dataset, B: int, rng: np.random.Generator) -> PathDistribution:
    """Estimate all five paths on ``B`` paired resamples.

    Resamples whose design is rank deficient are redrawn in place, so every
    path vector keeps length ``B``. The draw order matches repeated calls of
    :func:`resample` on the same generator.
    """
    if B < 1:
        raise ValueError("B must be positive")
    rows = _centred_rows(d)
    paths, degenerate = paths_from_moments(_resample_moments(rows, rng, B))
    redraws = 0
    streak = 0
    while degenerate.any():
        bad = np.flatnonzero(degenerate)
        redraws += bad.size
        streak += bad.size
        if streak >= 10 * B:
            raise DegenerateData(f"{streak} consecutive degenerate resamples")
        new_paths, new_deg = paths_from_moments(_resample_moments(rows, rng, bad.size))
        paths[bad] = new_paths
        degenerate[bad] = new_deg
        if not new_deg.all():
            streak = int(new_deg.sum())
    return PathDistribution(np.ascontiguousarray(paths.T), degenerate_redraws=redraws)


def jackknife_estimates(d: Dataset) -> JackknifeSet:
    """Leave-one-out path estimates, one column per omitted row."""
    if d.n < 5:
        raise ValueError("jackknife needs n >= 5")
    rows = _centred_rows(d)
    loo = rows.sum(axis=0) - rows
    paths, degenerate = paths_from_moments(loo)
    if degenerate.any():
        raise SingularDesign(f"leave-one-out design singular at rows {np.flatnonzero(degenerate).tolist()}")
    return JackknifeSet(np.ascontiguousarray(paths.T))


def acceleration(jack) -> float:
    """Skewness-based acceleration constant from jackknife estimates."""
    jack = np.asarray(jack, dtype=float)
    if jack.size < 3:
        raise ValueError("acceleration needs at least 3 jackknife values")
    dev = jack.mean() - jack
    ss = dev @ dev
    if ss == 0.0:
        return 0.0
    return float((dev**3).sum() / (6.0 * ss**1.5))


def bias_correction(values, point: float) -> float:
    """z0: normal quantile of the share of bootstrap values below ``point``.

    Values equal to ``point`` count half. The share is clamped to
    ``[1/(2B), 1 - 1/(2B)]``.
    """
    values = np.asarray(values, dtype=float)
    B = values.size
    if B < 1:
        raise ValueError("empty bootstrap vector")
    below = np.count_nonzero(values < point) + 0.5 * np.count_nonzero(values == point)
    p = min(max(below / B, 0.5 / B), 1.0 - 0.5 / B)
    return float(normal_quantile(p))


def _snap(r: float) -> float:
    nearest = round(r)
    return float(nearest) if abs(r - nearest) < _RANK_SNAP else r


def _order_stats(sorted_vals: np.ndarray, q_lo: float, q_hi: float):
    B = sorted_vals.size
    lo = min(max(math.ceil(_snap(q_lo * B)), 1), B)
    hi = min(max(math.floor(_snap(q_hi * B)), 1), B)
    if lo > hi:
        lo, hi = hi, lo
    return float(sorted_vals[lo - 1]), float(sorted_vals[hi - 1])


def _adjusted_prob(z0: float, accel: float, z_tail: float, B: int) -> float:
    shift = z0 + z_tail
    lo_clamp, hi_clamp = 0.5 / B, 1.0 - 0.5 / B
    denom = 1.0 - accel * shift
    if denom <= 0.0:
        return hi_clamp if shift > 0 else lo_clamp
    prob = float(normal_cdf(z0 + shift / denom))
    if abs(accel * shift) >= 1.0:
        prob = min(max(prob, lo_clamp), hi_clamp)
    return prob


def _tail_probs(z0: float, accel: float, alpha: float, B: int):
    if z0 == 0.0 and accel == 0.0:
        return alpha / 2.0, 1.0 - alpha / 2.0
    z_lo = float(normal_quantile(alpha / 2.0))
    z_hi = float(normal_quantile(1.0 - alpha / 2.0))
    return _adjusted_prob(z0, accel, z_lo, B), _adjusted_prob(z0, accel, z_hi, B)


def _check(values, alpha: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("need a bootstrap vector of length >= 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return values


def ci_percentile(values, alpha: float = 0.05) -> ConfidenceInterval:
    values = _check(values, alpha)
    lower, upper = _order_stats(np.sort(values), alpha / 2.0, 1.0 - alpha / 2.0)
    return ConfidenceInterval(lower, upper, Method.PER, alpha)


def ci_bca(
    values, point: float, accel: float, alpha: float = 0.05, z0: Optional[float] = None
) -> ConfidenceInterval:
    """Bias-corrected and accelerated interval.

    ``z0`` defaults to :func:`bias_correction` of ``values`` at ``point``;
    pass it explicitly to pin the bias correction.
    """
    values = _check(values, alpha)
    if z0 is None:
        z0 = bias_correction(values, point)
    q_lo, q_hi = _tail_probs(z0, accel, alpha, values.size)
    lower, upper = _order_stats(np.sort(values), q_lo, q_hi)
    return ConfidenceInterval(lower, upper, Method.BCA, alpha)


def ci_bc(values, point: float, alpha: float = 0.05, z0: Optional[float] = None) -> ConfidenceInterval:
    ci = ci_bca(values, point, 0.0, alpha, z0=z0)
    return ConfidenceInterval(ci.lower, ci.upper, Method.BC, alpha)


def intervals(
    values: np.ndarray,
    point: float,
    alpha: float,
    methods: Iterable[Method],
    accel: float = 0.0,
) -> Dict[Method, ConfidenceInterval]:
    """All requested intervals for one bootstrap vector, sorting it once."""
    sorted_vals = np.sort(values)
    B = sorted_vals.size
    out = {}
    z0 = None
    for method in methods:
        if method is Method.PER:
            q = (alpha / 2.0, 1.0 - alpha / 2.0)
        else:
            if z0 is None:
                z0 = bias_correction(sorted_vals, point)
            q = _tail_probs(z0, accel if method is Method.BCA else 0.0, alpha, B)
        lower, upper = _order_stats(sorted_vals, *q)
        out[method] = ConfidenceInterval(lower, upper, method, alpha)
    return out
