"""Monte Carlo power: simulate, fit, bootstrap, test, count."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .bootstrap import acceleration, bootstrap_distribution, intervals, jackknife_estimates
from .core import (
    PATHS,
    DegenerateData,
    Method,
    PathEstimates,
    PowerResult,
    Scenario,
    ScenarioFailed,
    SingularDesign,
    ci_excludes_zero,
)
from .regress import estimate_paths
from .simulate import SeedRecipe, derive_seed, generate_dataset, make_rng

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.01


@dataclass
class RepeatOutcome:
    repeat_index: int
    point: PathEstimates
    significant: Dict[Tuple[Method, str], bool] = field(default_factory=dict)
    degenerate_redraws: int = 0


def run_repeat(s: Scenario, repeat_index: int) -> RepeatOutcome:
    """One simulate -> fit -> bootstrap -> interval cycle.

    Every method is evaluated on the same bootstrap distribution, so method
    comparisons within a repeat are paired.
    """
    seed = derive_seed(SeedRecipe(s.master_seed, s.id, repeat_index))
    rng = make_rng(seed)
    data = generate_dataset(s.weights, s.n, rng)
    try:
        point = estimate_paths(data)
    except SingularDesign as exc:
        raise DegenerateData(f"simulated dataset is singular: {exc}") from exc
    dist = bootstrap_distribution(data, s.resamples, rng)

    accel = dict.fromkeys(PATHS, 0.0)
    if Method.BCA in s.methods:
        try:
            jack = jackknife_estimates(data)
        except SingularDesign as exc:
            raise DegenerateData(f"jackknife failed: {exc}") from exc
        accel = {path: acceleration(jack[path]) for path in PATHS}

    outcome = RepeatOutcome(repeat_index, point, degenerate_redraws=dist.degenerate_redraws)
    estimates = point.as_dict()
    for path in PATHS:
        cis = intervals(dist[path], estimates[path], s.alpha, s.methods, accel[path])
        for method, ci in cis.items():
            outcome.significant[(method, path)] = ci_excludes_zero(ci)
    return outcome


def _count_repeats(s: Scenario, indices) -> Tuple[Dict[Tuple[Method, str], int], int, int, int]:
    counts = {(m, p): 0 for m in s.methods for p in PATHS}
    completed = failed = redraws = 0
    for r in indices:
        try:
            out = run_repeat(s, r)
        except DegenerateData as exc:
            log.warning("scenario %d repeat %d failed: %s", s.id, r, exc)
            failed += 1
            continue
        completed += 1
        redraws += out.degenerate_redraws
        for key, flag in out.significant.items():
            counts[key] += flag
    return counts, completed, failed, redraws


def _count_chunk(args):
    return _count_repeats(*args)


def run_scenario(s: Scenario, workers: int = 1) -> PowerResult:
    """Run all ``s.repeats`` repeats and aggregate significance rates.

    With ``workers > 1`` repeats are split across processes. Aggregation is
    a sum of integer counts, so the result does not depend on ``workers``.
    """
    result = PowerResult(scenario_id=s.id)
    result.significant_count = {(m, p): 0 for m in s.methods for p in PATHS}
    if workers <= 1:
        parts = [_count_repeats(s, range(s.repeats))]
    else:
        chunks = [c for c in np.array_split(np.arange(s.repeats), workers) if c.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_count_chunk, [(s, c.tolist()) for c in chunks]))
    for counts, completed, failed, redraws in parts:
        for key, value in counts.items():
            result.significant_count[key] += value
        result.repeats_completed += completed
        result.failed_repeats += failed
        result.degenerate_resample_count += redraws
    if result.failed_repeats > MAX_FAILED_FRACTION * s.repeats:
        raise ScenarioFailed(
            f"scenario {s.id}: {result.failed_repeats} of {s.repeats} repeats failed"
        )
    return result
