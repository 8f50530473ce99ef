"""Closed-form least squares for the three mediation regressions.

Every fit carries an intercept. The simulated variables have mean one, so
dropping the intercept would bias the slopes and break the exact identity
``c_hat - c_prime_hat == a_hat * b_hat``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, PathEstimates, SingularDesign

RANK_TOL = 1e-12

# column layout of a moment vector: count and raw sums of the listed terms
MOMENT_TERMS = ("1", "x", "m", "y", "xx", "mm", "xm", "xy", "my")


@dataclass(frozen=True)
class SimpleFit:
    intercept: float
    slope: float


@dataclass(frozen=True)
class BivariateFit:
    intercept: float
    coef_x: float
    coef_m: float


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional vector")
    return arr


def fit_simple(predictor, response) -> SimpleFit:
    """Regress ``response`` on ``predictor`` with an intercept."""
    x = _as_vector(predictor)
    y = _as_vector(response)
    if x.shape != y.shape:
        raise ValueError("predictor and response lengths differ")
    if x.shape[0] < 3:
        raise ValueError("need at least 3 rows")
    x_mean = x.mean()
    y_mean = y.mean()
    xc = x - x_mean
    sxx = xc @ xc
    if not sxx > RANK_TOL * (x @ x):
        raise SingularDesign("predictor has zero variance")
    slope = (xc @ (y - y_mean)) / sxx
    return SimpleFit(intercept=y_mean - slope * x_mean, slope=slope)


def fit_bivariate(x, m, y) -> BivariateFit:
    """Regress ``y`` on ``x`` and ``m`` with an intercept."""
    x = _as_vector(x)
    m = _as_vector(m)
    y = _as_vector(y)
    if not x.shape == m.shape == y.shape:
        raise ValueError("x, m and y lengths differ")
    if x.shape[0] < 4:
        raise ValueError("need at least 4 rows")
    means = x.mean(), m.mean(), y.mean()
    xc, mc, yc = x - means[0], m - means[1], y - means[2]
    sxx, smm, sxm = xc @ xc, mc @ mc, xc @ mc
    sxy, smy = xc @ yc, mc @ yc
    det = sxx * smm - sxm * sxm
    if not det > RANK_TOL * max(sxx, smm) ** 2:
        raise SingularDesign("x and m are collinear")
    coef_x = (smm * sxy - sxm * smy) / det
    coef_m = (sxx * smy - sxm * sxy) / det
    intercept = means[2] - coef_x * means[0] - coef_m * means[1]
    return BivariateFit(intercept=intercept, coef_x=coef_x, coef_m=coef_m)


def estimate_paths(d: Dataset) -> PathEstimates:
    a_hat = fit_simple(d.x, d.m).slope
    direct = fit_bivariate(d.x, d.m, d.y)
    c_hat = fit_simple(d.x, d.y).slope
    return PathEstimates(
        a_hat=a_hat,
        b_hat=direct.coef_m,
        c_hat=c_hat,
        c_prime_hat=direct.coef_x,
        ab_hat=a_hat * direct.coef_m,
    )


def row_moments(x: np.ndarray, m: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row terms whose column sums are the moment vector, shape (n, 9)."""
    return np.column_stack([np.ones_like(x), x, m, y, x * x, m * m, x * m, x * y, m * y])


def paths_from_moments(mom: np.ndarray):
    """Path estimates from stacked moment vectors.

    Parameters
    ----------
    mom : ndarray, shape (..., 9)
        Row count and raw sums laid out as :data:`MOMENT_TERMS`. Data should
        be roughly centred beforehand to keep the raw sums well conditioned.

    Returns
    -------
    paths : ndarray, shape (..., 5)
        Columns ``a, b, c, c_prime, ab``. Rows flagged degenerate hold NaN.
    degenerate : ndarray of bool, shape (...)
        Rows whose design is rank deficient at the shared tolerance.
    """
    cnt, sx, sm, sy, sxx, smm, sxm, sxy, smy = np.moveaxis(mom, -1, 0)
    cxx = sxx - sx * sx / cnt
    cmm = smm - sm * sm / cnt
    cxm = sxm - sx * sm / cnt
    cxy = sxy - sx * sy / cnt
    cmy = smy - sm * sy / cnt
    det = cxx * cmm - cxm * cxm
    degenerate = ~((cxx > RANK_TOL * sxx) & (det > RANK_TOL * np.maximum(cxx, cmm) ** 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = cxm / cxx
        c = cxy / cxx
        c_prime = (cmm * cxy - cxm * cmy) / det
        b = (cxx * cmy - cxm * cxy) / det
        paths = np.stack([a, b, c, c_prime, a * b], axis=-1)
    paths[degenerate] = np.nan
    return paths, degenerate
