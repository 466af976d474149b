"""Monte Carlo and mean-field tools for SIS malware spread among random
walkers on a torus."""

__version__ = "0.1.0"

from .core import SimParams, World, advance, infected_fraction, init_uniform, tick
from .meanfield import MeanFieldParams, solve_fmf, threshold_q0
from .rng import RngStream, derive
from .stats import TimeSeries, estimate_equilibrium, integrated_autocorrelation_time

__all__ = [
    "__version__",
    "SimParams",
    "World",
    "advance",
    "infected_fraction",
    "init_uniform",
    "tick",
    "MeanFieldParams",
    "solve_fmf",
    "threshold_q0",
    "RngStream",
    "derive",
    "TimeSeries",
    "estimate_equilibrium",
    "integrated_autocorrelation_time",
]
