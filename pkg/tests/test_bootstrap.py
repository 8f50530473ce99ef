import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from medpower.bootstrap import (
    acceleration,
    bias_correction,
    bootstrap_distribution,
    ci_bc,
    ci_bca,
    ci_percentile,
    intervals,
    jackknife_estimates,
    normal_cdf,
    normal_quantile,
    resample,
)
from medpower.core import PATHS, Dataset, DegenerateData, Method, SingularDesign
from medpower.regress import estimate_paths

mpmath.mp.dps = 30


def mp_quantile(p):
    return mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1)


def oracle_ranks(B, z0, accel, alpha):
    """Independent high-precision evaluation of the adjusted tail ranks."""
    out = []
    for tail, rounding in ((alpha / 2, mpmath.ceil), (1 - alpha / 2, mpmath.floor)):
        zt = mp_quantile(tail)
        q = mpmath.ncdf(z0 + (z0 + zt) / (1 - accel * (z0 + zt)))
        out.append(int(min(max(rounding(q * B), 1), B)))
    return out


@pytest.fixture
def toy():
    rng = np.random.default_rng(21)
    return Dataset(*rng.normal(1, 1, (3, 12)))


# -- resampling ---------------------------------------------------------------

def test_resample_shape_determinism_membership(toy):
    r1 = resample(toy, np.random.default_rng(3))
    r2 = resample(toy, np.random.default_rng(3))
    assert r1.n == toy.n
    np.testing.assert_array_equal(r1.x, r2.x)
    rows = set(zip(toy.x, toy.m, toy.y))
    assert all(t in rows for t in zip(r1.x, r1.m, r1.y))


def test_distribution_length(toy):
    dist = bootstrap_distribution(toy, 1000, np.random.default_rng(0))
    assert dist.values.shape == (5, 1000)
    assert all(dist[p].shape == (1000,) for p in PATHS)
    assert np.isfinite(dist.values).all()


def test_single_resample_matches_direct_fit(toy):
    dist = bootstrap_distribution(toy, 1, np.random.default_rng(17))
    ref = estimate_paths(resample(toy, np.random.default_rng(17))).as_dict()
    for p in PATHS:
        assert dist[p][0] == pytest.approx(ref[p], abs=1e-10)


def test_resamples_follow_sequential_draws(toy):
    rng = np.random.default_rng(5)
    dist = bootstrap_distribution(toy, 20, np.random.default_rng(5))
    for j in range(20):
        ref = estimate_paths(resample(toy, rng))
        assert dist["ab"][j] == pytest.approx(ref.ab_hat, abs=1e-10)


def test_bootstrap_mean_converges_to_exact_expectation():
    rng = np.random.default_rng(9)
    d = Dataset(*rng.normal(1, 1, (3, 6)))
    # exact oracle: enumerate all 6**6 ordered resamples, dropping singular ones
    total, count = 0.0, 0
    for idx in itertools.product(range(6), repeat=6):
        try:
            total += estimate_paths(d.take(list(idx))).ab_hat
        except SingularDesign:
            continue
        count += 1
    exact = total / count
    dist = bootstrap_distribution(d, 100_000, np.random.default_rng(1))
    se = dist["ab"].std() / math.sqrt(dist.B)
    assert abs(dist["ab"].mean() - exact) < 3 * se
    assert dist.degenerate_redraws > 0


def test_degenerate_data_raises():
    # x constant on every resample: never fittable
    d_bad = Dataset([1.0] * 5, [0.0, 1.0, 2.0, 3.0, 4.0], [1.0, 0.0, 1.0, 0.0, 1.0])
    with pytest.raises(DegenerateData):
        bootstrap_distribution(d_bad, 5, np.random.default_rng(0))
    # x constant unless row 4 is drawn: frequent redraws, but still completes
    d = Dataset([1.0, 1.0, 1.0, 1.0, 2.0], [0.0, 1.0, 2.0, 3.0, 4.0], [1.0, 0.0, 1.0, 0.0, 1.0])
    dist = bootstrap_distribution(d, 50, np.random.default_rng(0))
    assert dist.B == 50 and dist.degenerate_redraws > 0


# -- jackknife ----------------------------------------------------------------

def test_jackknife_matches_brute_force():
    rng = np.random.default_rng(6)
    d = Dataset(*rng.normal(1, 1, (3, 6)))
    jack = jackknife_estimates(d)
    assert jack.values.shape == (5, 6)
    for i in range(6):
        ref = estimate_paths(d.take([j for j in range(6) if j != i])).as_dict()
        for p in PATHS:
            assert jack[p][i] == pytest.approx(ref[p], abs=1e-10)


def test_jackknife_duplicate_row():
    x = np.array([0.1, 0.9, 2.2, 2.8, 4.1, 0.9])
    m = np.array([1.0, 0.2, 2.5, 1.1, 3.0, 0.2])
    y = np.array([0.3, 1.5, 0.7, 2.2, 1.9, 1.5])
    d = Dataset(x, m, y)
    ref = estimate_paths(d.take([0, 1, 2, 3, 4])).as_dict()
    jack = jackknife_estimates(d)
    for p in PATHS:
        assert jack[p][5] == pytest.approx(ref[p], abs=1e-12)
        assert jack[p][1] == pytest.approx(ref[p], abs=1e-12)


def test_jackknife_needs_five_rows():
    with pytest.raises(ValueError):
        jackknife_estimates(Dataset(*np.eye(3, 4)))


# -- acceleration and bias correction -------------------------------------------

def test_acceleration_values():
    assert acceleration([2.0, 2.0, 2.0, 2.0]) == 0.0
    assert acceleration([-1.0, 0.0, 1.0, -3.0, 3.0]) == pytest.approx(0.0, abs=1e-15)
    ref = mpmath.mpf(-18) / (6 * mpmath.mpf(14) ** 1.5)
    assert acceleration([1.0, 2.0, 6.0]) == pytest.approx(float(ref), abs=1e-15)
    assert float(ref) == pytest.approx(-0.05727, abs=1e-5)


@given(arrays(np.float64, 10, elements=st.floats(-50, 50, allow_nan=False)), st.floats(0.01, 100))
def test_acceleration_scale_invariant(jack, s):
    if np.ptp(jack) < 1e-6:
        return
    assert acceleration(jack * s) == pytest.approx(acceleration(jack), abs=1e-12)


def test_bias_correction_cases():
    values = np.arange(1.0, 1001.0)
    assert bias_correction(values, 500.5) == 0.0
    assert bias_correction(values, 600.5) == pytest.approx(float(mp_quantile(0.6)), abs=1e-12)
    assert bias_correction(values, 600.5) == pytest.approx(0.2533, abs=1e-4)
    assert bias_correction(values, 5000.0) == pytest.approx(float(mp_quantile(0.9995)), abs=1e-12)
    assert bias_correction(values, -5.0) == pytest.approx(float(mp_quantile(0.0005)), abs=1e-12)
    # ties count half: 1 below + 0.5 equal of 3
    assert bias_correction([1.0, 2.0, 3.0], 2.0) == 0.0


# -- normal helpers -------------------------------------------------------------

def test_normal_helpers():
    assert normal_cdf(0.0) == 0.5
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
    for p in (1e-7, 1e-3, 0.01, 0.1, 0.6, 0.99, 1 - 1e-7):
        assert normal_quantile(p) == pytest.approx(float(mp_quantile(p)), abs=1e-9)
    for p in (0.01, 0.1, 0.6, 0.99):
        assert normal_cdf(normal_quantile(p)) == pytest.approx(p, abs=1e-8)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            normal_quantile(bad)


# -- intervals ------------------------------------------------------------------

def test_percentile_rank_convention():
    values = np.arange(1.0, 1001.0)
    ci = ci_percentile(values, 0.05)
    assert (ci.lower, ci.upper) == (25.0, 975.0)
    ci = ci_percentile(values, 0.5)
    assert (ci.lower, ci.upper) == (250.0, 750.0)
    ci = ci_percentile(np.full(40, 7.0), 0.05)
    assert (ci.lower, ci.upper) == (7.0, 7.0)


def test_bc_worked_example():
    values = np.arange(1.0, 1001.0)
    z0 = mp_quantile(0.6)
    assert oracle_ranks(1000, z0, 0, 0.05) == [74, 993]
    assert float(mpmath.ncdf(2 * z0 + mp_quantile(0.025))) == pytest.approx(0.0731, abs=1e-3)
    ci = ci_bc(values, 600.5, 0.05)
    assert (ci.lower, ci.upper) == (74.0, 993.0)
    assert ci.method is Method.BC


def test_bc_zero_bias_equals_percentile():
    values = np.arange(1.0, 1001.0)
    bc = ci_bc(values, 500.5, 0.05)
    per = ci_percentile(values, 0.05)
    assert (bc.lower, bc.upper) == (per.lower, per.upper)


def test_bc_point_below_everything():
    values = np.arange(1.0, 1001.0)
    ci = ci_bc(values, -10.0, 0.05)
    assert ci.lower == 1.0 and ci.upper <= 2.0


def test_bca_worked_example():
    values = np.arange(1.0, 1001.0)
    z0, accel = 0.2533, -0.0573
    lo, hi = oracle_ranks(1000, mpmath.mpf(z0), mpmath.mpf(accel), 0.05)
    ci = ci_bca(values, 0.0, accel, 0.05, z0=z0)
    assert (ci.lower, ci.upper) == (float(lo), float(hi))


def test_bca_accel_zero_nests():
    rng = np.random.default_rng(1)
    values = rng.gamma(2.0, size=999)
    point = float(np.median(values)) + 0.3
    bca = ci_bca(values, point, 0.0, 0.05)
    bc = ci_bc(values, point, 0.05)
    assert (bca.lower, bca.upper) == (bc.lower, bc.upper)
    bca0 = ci_bca(values, point, 0.0, 0.05, z0=0.0)
    per = ci_percentile(values, 0.05)
    assert (bca0.lower, bca0.upper) == (per.lower, per.upper)


def test_bca_extreme_acceleration_clamps():
    values = np.arange(1.0, 101.0)
    ci = ci_bca(values, 50.5, 0.9, 0.05)
    assert ci.lower <= ci.upper
    ci = ci_bca(values, 50.5, -0.9, 0.05)
    assert ci.lower <= ci.upper


def test_intervals_helper_matches_public_functions():
    rng = np.random.default_rng(4)
    values = rng.normal(0.2, 1, 500)
    out = intervals(values, 0.35, 0.1, (Method.PER, Method.BC, Method.BCA), accel=0.04)
    for got, want in (
        (out[Method.PER], ci_percentile(values, 0.1)),
        (out[Method.BC], ci_bc(values, 0.35, 0.1)),
        (out[Method.BCA], ci_bca(values, 0.35, 0.04, 0.1)),
    ):
        assert (got.lower, got.upper) == (want.lower, want.upper)


boot_vec = arrays(np.float64, st.integers(2, 300), elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=80)
@given(boot_vec, st.floats(-1e3, 1e3), st.floats(-0.3, 0.3), st.sampled_from([0.01, 0.05, 0.1, 0.5]), st.randoms())
def test_interval_properties(values, point, accel, alpha, rnd):
    per = ci_percentile(values, alpha)
    bc = ci_bc(values, point, alpha)
    bca = ci_bca(values, point, accel, alpha)
    for ci in (per, bc, bca):
        assert ci.lower <= ci.upper
    perm = values.copy()
    rnd.shuffle(perm)
    assert (ci_bca(perm, point, accel, alpha).lower, ci_bca(perm, point, accel, alpha).upper) == (bca.lower, bca.upper)
    assert (ci_percentile(perm, alpha).lower, ci_percentile(perm, alpha).upper) == (per.lower, per.upper)
    assert (ci_bca(values, point, 0.0, alpha).lower, ci_bca(values, point, 0.0, alpha).upper) == (bc.lower, bc.upper)


@settings(max_examples=60)
@given(arrays(np.int64, st.integers(2, 200), elements=st.integers(-1000, 1000)),
       st.integers(-1000, 1000), st.integers(-10**6, 10**6))
def test_translation_equivariance(values, point, k):
    # integer-valued data keeps the shift exact in floating point
    values = values.astype(float)
    for shifted, base in (
        (ci_bc(values + k, point + k, 0.05), ci_bc(values, point, 0.05)),
        (ci_bca(values + k, point + k, 0.1, 0.05), ci_bca(values, point, 0.1, 0.05)),
        (ci_percentile(values + k, 0.05), ci_percentile(values, 0.05)),
    ):
        assert shifted.lower == base.lower + k
        assert shifted.upper == base.upper + k
