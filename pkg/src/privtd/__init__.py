"""Privacy-preserving truth discovery for crowd-sensed continuous data."""

from .core import (
    AggregateResult,
    CSVFormatError,
    GroundTruth,
    ObservationTable,
    TableError,
    WeightVector,
    mae,
)
from .discovery import DiscoveryConfig, baseline_aggregate, crh_weights, run, weighted_aggregate
from .perturb import NoiseLevel, NoiseProfile, noise_level, sample_variances
from .synth import SynthConfig, generate, true_weights

__version__ = "0.1.0"
