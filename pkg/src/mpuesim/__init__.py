"""Discrete-time FR2 mobility simulator for multi-panel UEs with receive beamforming."""

from .config import RunConfig, load_config, make_config
from .engine import run_campaign, run_simulation, simulate
from .mobility import APPROACHES, ApproachConfig

__all__ = ["APPROACHES", "ApproachConfig", "RunConfig", "load_config", "make_config", "run_campaign",
           "run_simulation", "simulate"]
__version__ = "0.1.0"
