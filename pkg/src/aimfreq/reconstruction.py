"""Image formation from sampled visibilities and point-spread-function analysis."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError
from .sampling import SamplingFunction, UVGrid
from .scenes import DirectionGrid, to_raster, write_pgm
from .visibility import VisibilityGrid

MAIN_LOBE_DB = -3.0


@dataclass(frozen=True, eq=False)
class ReconstructedImage:
    """Magnitude of the complex reconstruction plus the raw complex map."""

    grid: DirectionGrid
    complex_values: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.abs(self.complex_values)

    @property
    def residual_imag(self) -> float:
        peak = np.abs(self.complex_values).max()
        if peak == 0:
            return 0.0
        return float(np.abs(self.complex_values.imag).max() / peak)


@dataclass(frozen=True)
class PsfReport:
    psf: ReconstructedImage
    main_lobe_width: float
    peak_sidelobe_db: float

    def to_dict(self) -> dict:
        g = self.psf.grid
        return {
            "main_lobe_width": self.main_lobe_width,
            # JSON has no infinity; a PSF without sidelobes reports null
            "peak_sidelobe_db": (None if math.isinf(self.peak_sidelobe_db)
                                 else self.peak_sidelobe_db),
            "residual_imag": self.psf.residual_imag,
            "peak_value": float(self.psf.values.max()),
            "grid": g.to_dict(),
        }


def reconstruct(v: VisibilityGrid, grid: DirectionGrid | None = None) -> ReconstructedImage:
    """Inverse transform over occupied bins, scaled by the bin area.

    ``I(a, b) = du dv sum V(u_n, v_m) exp(-j2pi(u_n a + v_m b))``, evaluated
    separably as two matrix products.
    """
    grid = grid or DirectionGrid()
    coords = v.grid.coords
    ea = np.exp(-2j * np.pi * np.outer(grid.alpha, coords))
    eb = np.exp(-2j * np.pi * np.outer(grid.beta, coords))
    vals = np.where(v.support, v.values, 0)
    img = ea @ vals @ eb.T * v.grid.bin_size**2
    return ReconstructedImage(grid, img)


def reconstruct_direct(v: VisibilityGrid, grid: DirectionGrid | None = None) -> np.ndarray:
    """Complex reconstruction by an explicit sum over occupied bins (test oracle)."""
    grid = grid or DirectionGrid()
    a, b = grid.mesh()
    out = np.zeros(grid.shape, dtype=complex)
    H = v.grid.half_extent
    for iu, iv in zip(*np.nonzero(v.support)):
        u = (iu - H) * v.grid.bin_size
        w = (iv - H) * v.grid.bin_size
        out += v.values[iu, iv] * np.exp(-2j * np.pi * (u * a + w * b))
    return out * v.grid.bin_size**2


def psf_image(s: SamplingFunction, grid: DirectionGrid | None = None) -> ReconstructedImage:
    return reconstruct(VisibilityGrid(s.grid, s.mask.astype(complex), "sampled", s.mask), grid)


def _peak_index(values: np.ndarray, grid: DirectionGrid) -> tuple[int, int]:
    top = values.max()
    ties = np.argwhere(values >= top * (1 - 1e-12))
    if len(ties) == 1:
        return tuple(ties[0])
    o = np.array(grid.origin)
    return tuple(ties[np.argmin(np.sum((ties - o) ** 2, axis=1))])


def lobe_statistics(img: ReconstructedImage) -> tuple[float, float]:
    """``(main_lobe_width, peak_sidelobe_db)`` of a magnitude image.

    The main lobe is the 8-connected region around the peak within -3 dB
    (amplitude, 20 log10); its width is measured along alpha through the
    peak. Ties for the peak resolve to the pixel nearest the grid origin.
    Returns ``-inf`` dB when nothing lies outside the main lobe.
    """
    vals = img.values
    top, low = vals.max(), vals.min()
    if top <= 0 or top - low <= 1e-12 * top:
        raise DegenerateInputError("image has no unique peak")
    pi, pj = _peak_index(vals, img.grid)
    above = vals >= top * 10 ** (MAIN_LOBE_DB / 20)
    labels, _ = ndimage.label(above, structure=np.ones((3, 3)))
    main = labels == labels[pi, pj]
    column = main[:, pj]
    lo = pi
    while lo > 0 and column[lo - 1]:
        lo -= 1
    hi = pi
    while hi < len(column) - 1 and column[hi + 1]:
        hi += 1
    width = (hi - lo + 1) * img.grid.d_alpha
    outside = vals[~main]
    side = outside.max() if outside.size else 0.0
    sidelobe_db = 20 * math.log10(side / top) if side > 0 else -math.inf
    return float(width), float(sidelobe_db)


def psf(s: SamplingFunction, grid: DirectionGrid | None = None) -> PsfReport:
    """PSF (reconstruction of unit visibility on occupied bins) with lobe statistics.

    A flat PSF, e.g. from a lone origin bin, reports the full alpha extent
    as main-lobe width and ``-inf`` sidelobes.
    """
    img = psf_image(s, grid)
    vals = img.values
    if vals.max() - vals.min() <= 1e-12 * max(vals.max(), 1e-300):
        return PsfReport(img, img.grid.n_alpha * img.grid.d_alpha, -math.inf)
    width, side = lobe_statistics(img)
    return PsfReport(img, width, side)


def local_peaks(img: ReconstructedImage, count: int, neighbourhood: int = 5) -> np.ndarray:
    """``(count, 2)`` direction cosines of the strongest local maxima, strongest first."""
    vals = img.values
    is_max = vals == ndimage.maximum_filter(vals, size=neighbourhood, mode="nearest")
    idx = np.argwhere(is_max & (vals > 0))
    order = np.argsort(-vals[idx[:, 0], idx[:, 1]], kind="stable")[:count]
    idx = idx[order]
    return np.column_stack([img.grid.alpha[idx[:, 0]], img.grid.beta[idx[:, 1]]])


def circular_convolution_direct(intensity: np.ndarray, kernel: np.ndarray,
                                origin: tuple[int, int]) -> np.ndarray:
    """``out[i] = sum_j I[j] K[(i - j) + origin]`` with periodic wrap (test oracle)."""
    n1, n2 = intensity.shape
    out = np.zeros(intensity.shape, dtype=complex)
    centred = np.roll(kernel, (-origin[0], -origin[1]), axis=(0, 1))
    for j1 in range(n1):
        for j2 in range(n2):
            if intensity[j1, j2] != 0:
                out += intensity[j1, j2] * np.roll(centred, (j1, j2), axis=(0, 1))
    return out


def parseval_constant(grid: DirectionGrid, uv: UVGrid) -> float:
    """``sum |V_s|^2 = C * sum |I_complex|^2`` on matched grids."""
    return 1.0 / (uv.bin_size**4 * grid.n_alpha * grid.n_beta)


# --- export ---------------------------------------------------------------


def image_to_csv(img: ReconstructedImage) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "beta", "value"])
    for i, a in enumerate(img.grid.alpha):
        for j, b in enumerate(img.grid.beta):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(img.values[i, j]))])
    return buf.getvalue()


def write_image(img: ReconstructedImage, stem) -> list[Path]:
    """Write ``<stem>.pgm`` (min-max normalised) and ``<stem>.csv`` (raw magnitudes)."""
    stem = Path(stem)
    pgm = write_pgm(stem.with_suffix(".pgm"), to_raster(img.values))
    csv_path = stem.with_suffix(".csv")
    csv_path.write_text(image_to_csv(img))
    return [pgm, csv_path]


def write_psf_report(report: PsfReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return path
