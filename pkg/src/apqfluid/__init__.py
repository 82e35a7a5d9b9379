"""Accumulating priority queues, their maximum priority process, and the matched tandem fluid queue."""

from .apq import ApqParams, CustomerRecord, EventLog, StabilityError, next_customer, \
    priority_of, simulate_apq
from .estimation import EmbeddedDistribution, EmbeddedDistributionEstimator, TildeTransformer, \
    estimate_embedded
from .fluid import FluidPath, TandemParams, down_phase_decrements, embedded_at_down_to_up, \
    simulate_tandem
from .mapping import compare_embedded, map_exponential, map_phase_type, simulate_matched, \
    verify_lemma_during, verify_lemma_jumps
from .mpp import EmbeddedSampleSet, JumpRecord, JumpType, MppPath, Region, build_mpp, \
    classify_jump, embedded_samples, region_of, transform_tilde
from .stattests import TestReport, ks_two_sample
from .stochastics import PhaseType, RandomStream, erlang_ph, exp_ph, ph_mean, ph_sample, \
    ph_validate

__all__ = [
    "ApqParams",
    "build_mpp",
    "classify_jump",
    "compare_embedded",
    "CustomerRecord",
    "down_phase_decrements",
    "embedded_at_down_to_up",
    "embedded_samples",
    "EmbeddedDistribution",
    "EmbeddedDistributionEstimator",
    "EmbeddedSampleSet",
    "erlang_ph",
    "estimate_embedded",
    "EventLog",
    "exp_ph",
    "FluidPath",
    "JumpRecord",
    "JumpType",
    "ks_two_sample",
    "map_exponential",
    "map_phase_type",
    "MppPath",
    "next_customer",
    "ph_mean",
    "ph_sample",
    "ph_validate",
    "PhaseType",
    "priority_of",
    "RandomStream",
    "Region",
    "region_of",
    "simulate_apq",
    "simulate_matched",
    "simulate_tandem",
    "StabilityError",
    "TandemParams",
    "TestReport",
    "TildeTransformer",
    "transform_tilde",
    "verify_lemma_during",
    "verify_lemma_jumps",
]

__version__ = "0.1.0"
