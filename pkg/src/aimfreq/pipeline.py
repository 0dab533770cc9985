"""End-to-end chains from a scene to per-subband and additive reconstructions.

Two chains share one output shape, a dict keyed by carrier frequency (Hz)
plus the key ``"additive"``:

* analytic: intensity raster -> visibility -> sampling -> reconstruction
* signal: scatterer scene -> simulated noise correlations -> u-v gridding
  -> reconstruction
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from .calibration import WeightSet, apply_weights
from .geometry import ArrayLayout
from .reconstruction import ReconstructedImage, reconstruct
from .sampling import UVGrid, default_uv_grid, sampling_function
from .scenes import DirectionGrid, IntensityGrid, ScattererScene
from .signal_sim import (NoiseConfig, VisibilityEstimate, estimate_to_grid, expected_correlation,
                         simulate_correlation)
from .visibility import (VisibilityGrid, additive_visibility, sample_visibility,
                         visibility_of)

ADDITIVE = "additive"


def analytic_visibilities(scene: IntensityGrid, layout: ArrayLayout, subbands: Sequence[float],
                          uv: UVGrid | None = None, include_zero: bool = True,
                          weighting: str = "presence", normalize: bool = True
                          ) -> dict:
    uv = uv or default_uv_grid(layout, subbands)
    full = visibility_of(scene, uv)
    out = {}
    for f in subbands:
        out[f] = sample_visibility(full, sampling_function(layout, f, uv, include_zero), weighting)
    out[ADDITIVE] = additive_visibility([out[f] for f in subbands], normalize)
    return out


def analytic_images(scene: IntensityGrid, layout: ArrayLayout, subbands: Sequence[float],
                    uv: UVGrid | None = None, include_zero: bool = True,
                    weighting: str = "presence", normalize: bool = True
                    ) -> dict:
    vis = analytic_visibilities(scene, layout, subbands, uv, include_zero, weighting, normalize)
    return {k: reconstruct(v, scene.grid) for k, v in vis.items()}


def signal_visibilities(layout: ArrayLayout, scene: ScattererScene, config: NoiseConfig,
                        subbands: Sequence[float], uv: UVGrid | None = None,
                        include_zero: bool = True, snr_db: float = math.inf,
                        gains: Mapping[float, object] | None = None,
                        weights: Mapping[float, WeightSet] | None = None,
                        threads: int = 1, expected: bool = False) -> dict:
    """Grid per-subband correlation estimates and their additive sum.

    Every subband reuses ``config.seed``. ``weights`` (per subband) are applied
    to the estimates before gridding. With ``expected`` the noise-free
    ensemble-mean correlation replaces the simulation.
    """
    uv = uv or default_uv_grid(layout, subbands)
    out: dict = {}
    for f in subbands:
        cfg = config.with_(carrier=f)
        if expected:
            est = VisibilityEstimate(expected_correlation(layout, scene, cfg), cfg.duration)
        else:
            g = None if gains is None else gains[f]
            est = simulate_correlation(layout, scene, cfg, snr_db, g, threads)
        if weights is not None:
            est = apply_weights(est, weights[f])
        out[f] = estimate_to_grid(est, layout, f, uv, include_zero)
    out[ADDITIVE] = additive_visibility([out[f] for f in subbands], normalize=True)
    return out


def signal_images(layout: ArrayLayout, scene: ScattererScene, config: NoiseConfig,
                  subbands: Sequence[float], grid: DirectionGrid, **kwargs) -> dict:
    vis = signal_visibilities(layout, scene, config, subbands, **kwargs)
    return {k: reconstruct(v, grid) for k, v in vis.items()}


def images_from(visibilities: Mapping[object, VisibilityGrid], grid: DirectionGrid
                ) -> dict[object, ReconstructedImage]:
    return {k: reconstruct(v, grid) for k, v in visibilities.items()}
