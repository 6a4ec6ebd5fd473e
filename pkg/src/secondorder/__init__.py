"""Second-order interference of chaotic light through two remote double-slit masks.

Analytic correlation model, Monte Carlo speckle engine, streaming correlator,
fringe analysis and the scenario runner behind the ``secondorder`` CLI.
"""

from .analytic import correlation_map, first_order_intensity, g1_pair, g1_total, sensing_phase, source_spectrum
from .config import ScenarioConfig, parse_config, serialize_config
from .correlator import CorrelationAccumulator, CorrelationResult, accumulate, finalize, merge
from .fringes import FringeFit, SensingEstimate, estimate_displacement, fit_fringe, fringe_shift, invert_period
from .geometry import DetectorSpec, DoubleSlitMask, OpticalSetup, ScanGrid, SingleSlitMask, SourceProfile
from .scenarios import run_scenario
from .speckle import sample_source, simulate

__version__ = "0.1.0"

__all__ = [
    "CorrelationAccumulator",
    "CorrelationResult",
    "DetectorSpec",
    "DoubleSlitMask",
    "FringeFit",
    "OpticalSetup",
    "ScanGrid",
    "ScenarioConfig",
    "SensingEstimate",
    "SingleSlitMask",
    "SourceProfile",
    "accumulate",
    "correlation_map",
    "estimate_displacement",
    "finalize",
    "first_order_intensity",
    "fit_fringe",
    "fringe_shift",
    "g1_pair",
    "g1_total",
    "invert_period",
    "merge",
    "parse_config",
    "run_scenario",
    "sample_source",
    "sensing_phase",
    "serialize_config",
    "simulate",
    "source_spectrum",
]
