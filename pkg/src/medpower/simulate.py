"""Seed derivation and synthetic dataset generation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import Dataset, PathWeights

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

SeedLike = Union[int, np.random.Generator]


@dataclass(frozen=True)
class SeedRecipe:
    master_seed: int
    scenario_id: int
    repeat_index: int


def _mix64(z: int) -> int:
    # splitmix64 finalizer; a bijection on 64-bit words
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(recipe: SeedRecipe) -> int:
    """Stream seed for one repeat of one scenario.

    The master seed, scenario id and repeat index are folded in one at a
    time through the splitmix64 finalizer. The result depends only on the
    three integers, never on execution order.

    >>> derive_seed(SeedRecipe(0, 0, 0))
    2558736989570252433
    """
    h = _mix64((recipe.master_seed + GOLDEN_GAMMA) & MASK64)
    h = _mix64((h + (recipe.scenario_id + 1) * GOLDEN_GAMMA) & MASK64)
    return _mix64((h + (recipe.repeat_index + 1) * GOLDEN_GAMMA) & MASK64)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def derive_seeds(master_seed: int, scenario_ids, repeat_indices) -> np.ndarray:
    """Vectorised :func:`derive_seed` over broadcast id / repeat arrays."""
    sid = np.asarray(scenario_ids, dtype=np.uint64)
    rep = np.asarray(repeat_indices, dtype=np.uint64)
    gamma = np.uint64(GOLDEN_GAMMA)
    # uint64 wraparound is the intended modular arithmetic
    with np.errstate(over="ignore"):
        h = _mix64_array(np.asarray([(master_seed + GOLDEN_GAMMA) & MASK64], dtype=np.uint64))
        h = _mix64_array(h + (sid + np.uint64(1)) * gamma)
        return _mix64_array(h + (rep + np.uint64(1)) * gamma)


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed)))


def generate_dataset(w: PathWeights, n: int, seed: SeedLike) -> Dataset:
    """Draw one synthetic dataset of ``n`` participants.

    Three base vectors are drawn from Normal(1, 1) in the order X, M, Y.
    M receives ``a * X``; Y receives ``b * M + c_prime * X``, so the total
    effect of X on Y is ``c_prime + a * b``.

    Passing a ``Generator`` consumes draws from it; passing an integer
    builds a fresh PCG64 stream.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed)
    e_x = rng.normal(1.0, 1.0, n)
    e_m = rng.normal(1.0, 1.0, n)
    e_y = rng.normal(1.0, 1.0, n)
    x = e_x
    m = e_m + w.a * x
    y = e_y + w.b * m + w.c_prime * x
    return Dataset(x, m, y)
