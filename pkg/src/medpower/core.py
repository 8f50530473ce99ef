"""Domain types and path algebra for the single-mediator model.

X affects M with weight ``a``; M affects Y with weight ``b`` (holding X);
X affects Y directly with weight ``c_prime`` (holding M). The total effect
of X on Y is ``c = c_prime + a * b``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np


class SingularDesign(ValueError):
    """A regression design matrix is rank deficient."""


class DegenerateData(RuntimeError):
    """Bootstrap resampling kept producing rank-deficient designs."""


class ScenarioFailed(RuntimeError):
    """Too many repeats of a scenario failed."""


class Method(str, enum.Enum):
    PER = "PER"
    BC = "BC"
    BCA = "BCA"

    def __str__(self) -> str:
        return self.value


METHODS: Tuple[Method, ...] = (Method.PER, Method.BC, Method.BCA)
PATHS: Tuple[str, ...] = ("a", "b", "c", "c_prime", "ab")


@dataclass(frozen=True)
class PathWeights:
    a: float
    b: float
    c_prime: float

    def __post_init__(self):
        for name in ("a", "b", "c_prime"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"path weight {name} must be finite")


@dataclass(frozen=True)
class Scenario:
    """One grid cell plus the controls for simulating it.

    ``methods`` narrows which interval constructions are evaluated; the
    default evaluates all three.
    """

    id: int
    weights: PathWeights
    n: int
    resamples: int = 1000
    repeats: int = 1000
    alpha: float = 0.05
    master_seed: int = 0
    methods: Tuple[Method, ...] = METHODS

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if self.resamples < 1 or self.repeats < 1:
            raise ValueError("resamples and repeats must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    m: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(v, dtype=float) for v in (self.x, self.m, self.y)]
        if any(v.ndim != 1 for v in arrays):
            raise ValueError("dataset columns must be one-dimensional")
        if not arrays[0].shape == arrays[1].shape == arrays[2].shape:
            raise ValueError("dataset columns must share one length")
        if not all(np.isfinite(v).all() for v in arrays):
            raise ValueError("dataset entries must be finite")
        for name, v in zip(("x", "m", "y"), arrays):
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def take(self, rows) -> "Dataset":
        """Return the dataset restricted to ``rows`` (pairing preserved)."""
        return Dataset(self.x[rows], self.m[rows], self.y[rows])


@dataclass(frozen=True)
class PathEstimates:
    a_hat: float
    b_hat: float
    c_hat: float
    c_prime_hat: float
    ab_hat: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "a": self.a_hat,
            "b": self.b_hat,
            "c": self.c_hat,
            "c_prime": self.c_prime_hat,
            "ab": self.ab_hat,
        }


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    method: Method
    alpha: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("interval lower bound exceeds upper bound")


@dataclass
class PowerResult:
    """Significance counts for one scenario across methods and paths."""

    scenario_id: int
    repeats_completed: int = 0
    degenerate_resample_count: int = 0
    failed_repeats: int = 0
    significant_count: Dict[Tuple[Method, str], int] = field(default_factory=dict)

    def power(self, method, path: str) -> float:
        if self.repeats_completed == 0:
            return 0.0
        return self.significant_count[(Method(method), path)] / self.repeats_completed

    @property
    def methods(self) -> Tuple[Method, ...]:
        return tuple(m for m in METHODS if (m, "ab") in self.significant_count)


def total_effect(w: PathWeights) -> float:
    """Total effect of X on Y implied by the path weights."""
    return w.c_prime + w.a * w.b


def ci_excludes_zero(ci: ConfidenceInterval) -> bool:
    """True when the interval lies strictly on one side of zero.

    An endpoint sitting exactly on zero counts as overlapping.
    """
    return ci.lower > 0.0 or ci.upper < 0.0
