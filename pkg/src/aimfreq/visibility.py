"""Analytic visibilities of intensity scenes, sampling, and additive combination.

Sign convention: the forward transform uses ``exp(+j 2 pi (u alpha + v beta))``
and reconstruction uses ``exp(-j 2 pi ...)``.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (DegenerateInputError, DimensionError, IncompatibleGridError,
                     InvalidArgumentError)
from .sampling import SamplingFunction, UVGrid
from .scenes import DirectionGrid, IntensityGrid

KINDS = ("full", "sampled", "additive")
VIS_MAGIC = b"AIMVIS01"


@dataclass(frozen=True, eq=False)
class VisibilityGrid:
    """Complex samples on a :class:`UVGrid`, indexed ``[u, v]``.

    ``support`` marks the bins that carry measurements (all bins for
    ``kind == "full"``).
    """

    grid: UVGrid
    values: np.ndarray
    kind: str = "full"
    support: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown visibility kind {self.kind!r}")
        vals = np.array(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise DimensionError(f"values shape {vals.shape} != grid {self.grid.shape}")
        sup = np.ones(self.grid.shape, bool) if self.support is None else np.array(self.support, bool)
        if sup.shape != self.grid.shape:
            raise DimensionError("support shape does not match grid")
        if np.any(vals[~sup] != 0):
            raise InvalidArgumentError("values must be zero outside the support")
        vals.flags.writeable = False
        sup.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "support", sup)

    def scaled(self, factor) -> "VisibilityGrid":
        return VisibilityGrid(self.grid, self.values * factor, self.kind, self.support)


def _fourier_matrix(coords, freqs, sign):
    return np.exp(sign * 2j * np.pi * np.outer(coords, freqs))


def check_nyquist(dgrid: DirectionGrid, uv: UVGrid) -> None:
    umax = uv.half_extent * uv.bin_size
    if umax * max(dgrid.d_alpha, dgrid.d_beta) > 0.5 + 1e-12:
        raise DimensionError(
            f"u-v extent {umax:g} aliases on a raster with spacing "
            f"{max(dgrid.d_alpha, dgrid.d_beta):g} (need |u| * d_alpha <= 1/2)")


def matched_uv_grid(dgrid: DirectionGrid) -> UVGrid:
    """u-v grid forming an exact DFT pair with a square, odd-sized direction grid."""
    if dgrid.n_alpha != dgrid.n_beta or dgrid.alpha_span != dgrid.beta_span:
        raise DimensionError("matched grids need a square direction grid")
    if dgrid.n_alpha % 2 == 0:
        raise DimensionError("matched grids need an odd pixel count (odd u-v bin count)")
    return UVGrid(1.0 / (2 * dgrid.alpha_span), dgrid.n_alpha // 2)


def visibility_of(intensity: IntensityGrid, grid: UVGrid,
                  allow_aliasing: bool = False) -> VisibilityGrid:
    """Riemann-sum visibility ``sum I exp(+j2pi(u a + v b)) da db`` on every bin.

    ``allow_aliasing`` skips the Nyquist guard, for operator identities that
    hold on any raster.
    """
    dg = intensity.grid
    if np.any(intensity.values < 0):
        raise InvalidArgumentError("intensity must be non-negative")
    if not allow_aliasing:
        check_nyquist(dg, grid)
    ea = _fourier_matrix(dg.alpha, grid.coords, +1)
    eb = _fourier_matrix(dg.beta, grid.coords, +1)
    vals = ea.T @ intensity.values @ eb * (dg.d_alpha * dg.d_beta)
    return VisibilityGrid(grid, vals, "full")


def visibility_direct(intensity: IntensityGrid, grid: UVGrid, bins=None) -> np.ndarray:
    """Brute-force double sum over pixels, one bin at a time (test oracle).

    ``bins`` is an optional ``(K, 2)`` list of bin indices; returns a complex
    array of shape ``(K,)`` or the full grid when omitted.
    """
    dg = intensity.grid
    a, b = dg.mesh()
    if bins is None:
        iu, iv = np.meshgrid(grid.indices, grid.indices, indexing="ij")
        bins = np.column_stack([iu.ravel(), iv.ravel()])
        shape = grid.shape
    else:
        shape = (len(bins),)
    out = np.empty(len(bins), dtype=complex)
    for k, (iu, iv) in enumerate(bins):
        u, v = iu * grid.bin_size, iv * grid.bin_size
        out[k] = np.sum(intensity.values * np.exp(2j * np.pi * (u * a + v * b)))
    return out.reshape(shape) * dg.d_alpha * dg.d_beta


def point_source_visibility(grid: UVGrid, alpha0: float = 0.0, beta0: float = 0.0,
                            power: float = 1.0) -> VisibilityGrid:
    """Exact visibility of a point source: ``power * exp(+j2pi(u a0 + v b0))``."""
    u, v = np.meshgrid(grid.coords, grid.coords, indexing="ij")
    return VisibilityGrid(grid, power * np.exp(2j * np.pi * (u * alpha0 + v * beta0)), "full")


def sample_visibility(v: VisibilityGrid, s: SamplingFunction,
                      weighting: str = "presence") -> VisibilityGrid:
    """Multiply by the sampling function.

    ``weighting="presence"`` uses the occupancy clipped to {0, 1};
    ``"multiplicity"`` weights each bin by its baseline count.
    """
    if v.grid != s.grid:
        raise IncompatibleGridError(f"visibility grid {v.grid} != sampling grid {s.grid}")
    if weighting == "presence":
        w = s.mask.astype(float)
    elif weighting == "multiplicity":
        w = s.occupancy.astype(float)
    else:
        raise InvalidArgumentError(f"unknown weighting {weighting!r}")
    return VisibilityGrid(v.grid, v.values * w, "sampled", s.mask & v.support)


def measure_subband_power(v: VisibilityGrid) -> float:
    """RMS magnitude over the occupied bins."""
    if v.kind == "full":
        raise InvalidArgumentError("subband power is defined for sampled visibilities")
    n = int(np.count_nonzero(v.support))
    if n == 0:
        raise DegenerateInputError("visibility has no occupied bins")
    return float(np.sqrt(np.sum(np.abs(v.values[v.support]) ** 2) / n))


def additive_visibility(parts: Sequence[VisibilityGrid], normalize: bool = True) -> VisibilityGrid:
    """Bin-wise complex sum of per-subband sampled visibilities.

    With ``normalize`` each part is first divided by its RMS over occupied
    bins, so every subband contributes with equal weight.
    """
    if not parts:
        raise InvalidArgumentError("additive visibility needs at least one part")
    grid = parts[0].grid
    total = np.zeros(grid.shape, dtype=complex)
    support = np.zeros(grid.shape, dtype=bool)
    for p in parts:
        if p.grid != grid:
            raise IncompatibleGridError("all parts must share one u-v grid")
        if p.kind == "full":
            raise InvalidArgumentError("additive combination takes sampled visibilities")
        scale = 1.0 / measure_subband_power(p) if normalize else 1.0
        total += p.values * scale
        support |= p.support
    return VisibilityGrid(grid, total, "additive", support)


def hermitian_error(v: VisibilityGrid) -> float:
    """``max |V(-u,-v) - conj V(u,v)| / max |V|``."""
    vals = v.values
    peak = np.abs(vals).max()
    if peak == 0:
        return 0.0
    return float(np.abs(vals[::-1, ::-1] - np.conj(vals)).max() / peak)


# --- export ---------------------------------------------------------------


def visibility_to_csv(v: VisibilityGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u_bin", "v_bin", "re", "im"])
    H = v.grid.half_extent
    for iu, iv in zip(*np.nonzero(v.support)):
        z = v.values[iu, iv]
        w.writerow([int(iu) - H, int(iv) - H, repr(float(z.real)), repr(float(z.imag))])
    return buf.getvalue()


def write_visibility_binary(v: VisibilityGrid, path) -> Path:
    """``AIMVIS01`` | u32 half_extent | f64 bin_size | u8 kind | values (f64 re, im) | support bytes."""
    header = VIS_MAGIC + struct.pack("<IdB", v.grid.half_extent, v.grid.bin_size,
                                     KINDS.index(v.kind))
    body = np.ascontiguousarray(v.values).astype("<c16").tobytes()
    path = Path(path)
    path.write_bytes(header + body + v.support.astype(np.uint8).tobytes())
    return path


def read_visibility_binary(path) -> VisibilityGrid:
    data = Path(path).read_bytes()
    if data[:8] != VIS_MAGIC:
        raise InvalidArgumentError("not an AIMVIS01 file")
    half, bin_size, kind = struct.unpack_from("<IdB", data, 8)
    grid = UVGrid(bin_size, half)
    n = grid.size * grid.size
    off = 8 + struct.calcsize("<IdB")
    vals = np.frombuffer(data, "<c16", count=n, offset=off).reshape(grid.shape)
    sup = np.frombuffer(data, np.uint8, count=n, offset=off + 16 * n).reshape(grid.shape)
    return VisibilityGrid(grid, vals.copy(), KINDS[kind], sup.astype(bool))
