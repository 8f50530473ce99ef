"""Monte Carlo power analysis for simple mediation models."""

from .core import (
    METHODS,
    PATHS,
    ConfidenceInterval,
    Dataset,
    DegenerateData,
    Method,
    PathEstimates,
    PathWeights,
    PowerResult,
    Scenario,
    ScenarioFailed,
    SingularDesign,
    ci_excludes_zero,
    total_effect,
)
from .power import run_repeat, run_scenario

__version__ = "0.1.0"
