"""Structural similarity and the per-subband versus additive improvement statistic."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, DimensionError, InvalidArgumentError
from .geometry import ArrayLayout
from .pipeline import ADDITIVE, analytic_images
from .sampling import UVGrid
from .scenes import IntensityGrid


@dataclass(frozen=True)
class SsimParams:
    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise InvalidArgumentError("window_size must be odd and >= 3")
        if not (self.k1 > 0 and self.k2 > 0):
            raise InvalidArgumentError("k1 and k2 must be positive")
        if not (self.window_sigma > 0 and self.dynamic_range > 0):
            raise InvalidArgumentError("window_sigma and dynamic_range must be positive")

    def window(self) -> np.ndarray:
        """Normalised 1-D Gaussian taps; the 2-D window is their outer product."""
        r = np.arange(self.window_size) - self.window_size // 2
        w = np.exp(-0.5 * (r / self.window_sigma) ** 2)
        return w / w.sum()


def _as_array(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, IntensityGrid) else x, dtype=float)


def _valid_filter(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable weighted mean over windows lying fully inside the image."""
    h = len(taps) // 2
    y = ndimage.correlate1d(x, taps, axis=0, mode="constant")
    y = ndimage.correlate1d(y, taps, axis=1, mode="constant")
    return y[h:x.shape[0] - h, h:x.shape[1] - h]


def ssim_map(reference, test, params: SsimParams = SsimParams()) -> np.ndarray:
    """Local SSIM for every window position inside the image."""
    x, y = _as_array(reference), _as_array(test)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape) < params.window_size:
        raise DimensionError(f"image {x.shape} smaller than window {params.window_size}")
    taps = params.window()
    mx, my = _valid_filter(x, taps), _valid_filter(y, taps)
    vx = _valid_filter(x * x, taps) - mx * mx
    vy = _valid_filter(y * y, taps) - my * my
    cxy = _valid_filter(x * y, taps) - mx * my
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    # rounding in the variance terms can push |s| a hair past 1
    if np.any(np.abs(s) > 1 + 1e-9):
        raise AssertionError("local SSIM outside [-1, 1]")
    return np.clip(s, -1.0, 1.0)


def ssim(reference, test, params: SsimParams = SsimParams()) -> float:
    """Mean local SSIM; inputs are expected in [0, 1] (see :func:`normalize_unit`)."""
    return float(ssim_map(reference, test, params).mean())


def normalize_unit(img) -> IntensityGrid | np.ndarray:
    """Affine map to [0, 1]; returns the same kind it was given."""
    vals = _as_array(img)
    lo, hi = vals.min(), vals.max()
    if hi - lo <= 1e-12 * max(abs(hi), abs(lo), 1e-300):
        raise DegenerateInputError("cannot normalise a constant image")
    out = (vals - lo) / (hi - lo)
    out[vals == lo] = 0.0
    out[vals == hi] = 1.0
    if isinstance(img, IntensityGrid):
        return IntensityGrid(img.grid, out)
    return out


@dataclass(frozen=True)
class ImprovementReport:
    per_subband_ssim: dict[float, float]
    added_ssim: float
    percent_increase: float = field(init=False)
    scene: str = ""

    def __post_init__(self):
        if not self.per_subband_ssim:
            raise InvalidArgumentError("report needs at least one subband")
        mean = float(np.mean(list(self.per_subband_ssim.values())))
        object.__setattr__(self, "percent_increase", 100.0 * (self.added_ssim - mean) / mean)

    @property
    def mean_subband_ssim(self) -> float:
        return float(np.mean(list(self.per_subband_ssim.values())))

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "per_subband_ssim": {f"{f:.0f}": v for f, v in sorted(self.per_subband_ssim.items())},
            "added_ssim": self.added_ssim,
            "percent_increase": self.percent_increase,
        }


def evaluate_scene(scene: IntensityGrid, layout: ArrayLayout, subbands: Sequence[float],
                   uv: UVGrid | None = None, include_zero: bool = True,
                   params: SsimParams = SsimParams(), name: str = "") -> ImprovementReport:
    """SSIM of each normalised subband reconstruction and of the additive one."""
    ref = normalize_unit(scene)
    imgs = analytic_images(scene, layout, subbands, uv, include_zero)
    per = {float(f): ssim(ref, normalize_unit(imgs[f].values), params) for f in subbands}
    if len(subbands) == 1:
        # the additive image of one subband is that subband's image
        added = next(iter(per.values()))
    else:
        added = ssim(ref, normalize_unit(imgs[ADDITIVE].values), params)
    return ImprovementReport(per, added, name)


def table_header(subbands: Sequence[float]) -> list[str]:
    return ["scene"] + [f"{f / 1e9:g}GHz" for f in subbands] + ["Added", "Increase%"]


def reports_to_csv(reports: Sequence[ImprovementReport]) -> str:
    """One row per scene: per-frequency SSIM, Added, Increase%."""
    if not reports:
        return ""
    freqs = sorted(reports[0].per_subband_ssim)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table_header(freqs))
    for r in reports:
        if sorted(r.per_subband_ssim) != freqs:
            raise InvalidArgumentError("all reports must share one subband set")
        w.writerow([r.scene] + [f"{r.per_subband_ssim[f]:.6f}" for f in freqs]
                   + [f"{r.added_ssim:.6f}", f"{r.percent_increase:.4f}"])
    return buf.getvalue()


def write_report(report: ImprovementReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return path
