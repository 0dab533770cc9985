"""Multi-subband aperture-synthesis imaging simulator for noise-illuminated scenes."""

from .errors import AimError
from .geometry import ArrayLayout, build_circular_array, default_layout, place_transmitters
from .sampling import (DEFAULT_SUBBANDS, TABLE_SUBBANDS, SamplingFunction, SubbandSet, UVGrid,
                       additive_sampling, sampling_function, unique_sample_count)
from .scenes import DirectionGrid, IntensityGrid, Scatterer, ScattererScene
from .visibility import VisibilityGrid, additive_visibility, sample_visibility, visibility_of
from .reconstruction import PsfReport, ReconstructedImage, psf, reconstruct
from .signal_sim import NoiseConfig, simulate_capture, simulate_correlation
from .calibration import WeightSet, apply_weights, solve_weights
from .metrics import ImprovementReport, SsimParams, evaluate_scene, ssim

__all__ = [
    "AimError", "ArrayLayout", "build_circular_array", "default_layout", "place_transmitters",
    "DEFAULT_SUBBANDS", "TABLE_SUBBANDS", "SamplingFunction", "SubbandSet", "UVGrid",
    "additive_sampling", "sampling_function", "unique_sample_count",
    "DirectionGrid", "IntensityGrid", "Scatterer", "ScattererScene",
    "VisibilityGrid", "additive_visibility", "sample_visibility", "visibility_of",
    "PsfReport", "ReconstructedImage", "psf", "reconstruct",
    "NoiseConfig", "simulate_capture", "simulate_correlation",
    "WeightSet", "apply_weights", "solve_weights",
    "ImprovementReport", "SsimParams", "evaluate_scene", "ssim",
]
