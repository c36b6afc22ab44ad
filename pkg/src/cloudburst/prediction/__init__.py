"""Operational forecast layer: motion, ensemble nowcast, downscaling."""

from .downscale import DownscaleError, coarsen, downscale
from .ensemble import (EnsembleForecast, ForecastError, ProbabilityGrid,
                       advect, exceedance_probability, nowcast_ensemble)
from .motion import MotionField, estimate_motion

__all__ = [
    "DownscaleError", "EnsembleForecast", "ForecastError", "MotionField",
    "ProbabilityGrid", "advect", "coarsen", "downscale",
    "estimate_motion", "exceedance_probability", "nowcast_ensemble",
]
