"""Density estimation at a point from two communicating parties.

Alice holds ``X`` samples and Bob ``Y`` samples.  They binarize around the
query point, run a few rounds of shared-randomness refinement, and Bob turns
the transcript into an unbiased estimate of the correlation offset, hence of
``p(x0, y0)``.
"""

from .density import DensityConfig, TestDensity, estimate_density, plan
from .estimator import build_score_table, estimate
from .prob_core import BernoulliFamily, make_family
from .protocol import SharedRandomness, run_session, simulate_session
from .schedules import Schedule, one_way_schedule, predicted_bounds, tetration_schedule

__version__ = "0.1.0"

__all__ = [
    "BernoulliFamily", "DensityConfig", "Schedule", "SharedRandomness", "TestDensity",
    "build_score_table", "estimate", "estimate_density", "make_family", "one_way_schedule",
    "plan", "predicted_bounds", "run_session", "simulate_session", "tetration_schedule",
]
