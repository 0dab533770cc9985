"""Spatial-frequency (u-v) sampling functions for single subbands and their
additive union across carrier frequencies.

Bins live on one absolute, dimensionless u-v grid shared by every subband, so
combining subbands is a bin-wise sum. A baseline ``(Dx, Dy)`` at wavelength
``lam`` lands in bin ``floor(Dx / (lam * bin_size) + 0.5)`` on each axis
(round to nearest, ties toward +inf).
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import GridOverflowError, IncompatibleGridError, InvalidArgumentError
from .geometry import ArrayLayout, Baseline, baseline_arrays, wavelength

DEFAULT_SUBBANDS = (37e9, 38e9, 39e9, 40e9)
TABLE_SUBBANDS = tuple(float(f) * 1e9 for f in range(35, 46))


@dataclass(frozen=True)
class SubbandSet:
    carrier_frequencies: tuple[float, ...]
    noise_bandwidth: float = 50e6

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.carrier_frequencies)
        if not freqs:
            raise InvalidArgumentError("a subband set needs at least one carrier")
        if any(f <= 0 for f in freqs):
            raise InvalidArgumentError("carrier frequencies must be positive")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise InvalidArgumentError("carrier frequencies must be strictly increasing")
        if not self.noise_bandwidth > 0:
            raise InvalidArgumentError("noise bandwidth must be positive")
        object.__setattr__(self, "carrier_frequencies", freqs)

    def __len__(self):
        return len(self.carrier_frequencies)

    def __iter__(self):
        return iter(self.carrier_frequencies)


@dataclass(frozen=True)
class UVGrid:
    """Square u-v raster of ``2 * half_extent + 1`` bins per axis, origin centred."""

    bin_size: float = 0.5
    half_extent: int = 64

    def __post_init__(self):
        if not self.bin_size > 0:
            raise InvalidArgumentError("bin_size must be positive")
        if int(self.half_extent) != self.half_extent or self.half_extent < 0:
            raise InvalidArgumentError("half_extent must be a non-negative integer")
        object.__setattr__(self, "half_extent", int(self.half_extent))
        object.__setattr__(self, "bin_size", float(self.bin_size))

    @property
    def size(self) -> int:
        return 2 * self.half_extent + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.size, self.size)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.half_extent, self.half_extent + 1)

    @property
    def coords(self) -> np.ndarray:
        """Bin-centre spatial frequencies in wavelengths."""
        return self.indices * self.bin_size

    def bin_index(self, value):
        return np.floor(np.asarray(value) / self.bin_size + 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {"bin_size": self.bin_size, "half_extent": self.half_extent}


def default_uv_grid(layout: ArrayLayout, frequencies: Sequence[float], bin_size: float = 0.5,
                    guard: int = 2) -> UVGrid:
    """Smallest grid holding the longest baseline at the highest frequency plus guard bins."""
    dx, dy, _, _ = baseline_arrays(layout)
    lam_min = wavelength(max(frequencies))
    longest = max(np.abs(dx).max(), np.abs(dy).max()) / lam_min
    return UVGrid(bin_size, int(math.ceil(longest / bin_size)) + guard)


WavelengthTag = Union[float, str]


@dataclass(frozen=True, eq=False)
class SamplingFunction:
    grid: UVGrid
    occupancy: np.ndarray
    wavelength_tag: WavelengthTag

    def __post_init__(self):
        occ = np.array(self.occupancy, dtype=np.int64)
        if occ.shape != self.grid.shape:
            raise IncompatibleGridError(
                f"occupancy shape {occ.shape} does not match grid {self.grid.shape}"
            )
        if np.any(occ < 0):
            raise InvalidArgumentError("occupancy must be non-negative")
        occ.flags.writeable = False
        object.__setattr__(self, "occupancy", occ)

    @property
    def mask(self) -> np.ndarray:
        return self.occupancy > 0

    @property
    def is_additive(self) -> bool:
        return self.wavelength_tag == "additive"

    def occupied_bins(self) -> np.ndarray:
        """``(K, 2)`` integer bin indices ``(iu, iv)`` of occupied bins, sorted."""
        iu, iv = np.nonzero(self.occupancy)
        return np.column_stack([iu, iv]) - self.grid.half_extent


def sampling_function(layout: ArrayLayout, frequency: float, grid: UVGrid,
                      include_zero: bool = False) -> SamplingFunction:
    """Bin every directed baseline of ``layout`` at ``frequency``.

    Each directed pair adds one to the multiplicity of its bin. The zero
    baseline, when requested, contributes a single count at the origin.
    """
    lam = wavelength(frequency)
    dx, dy, a, b = baseline_arrays(layout, include_conjugates=True, include_zero=include_zero)
    iu = np.floor(dx / (lam * grid.bin_size) + 0.5).astype(np.int64)
    iv = np.floor(dy / (lam * grid.bin_size) + 0.5).astype(np.int64)
    H = grid.half_extent
    outside = (np.abs(iu) > H) | (np.abs(iv) > H)
    if np.any(outside):
        k = int(np.argmax(outside))
        bl = Baseline(float(dx[k]), float(dy[k]), int(a[k]), int(b[k]))
        raise GridOverflowError(
            f"baseline {bl.rx_a}->{bl.rx_b} ({bl.dx:.6g}, {bl.dy:.6g}) m = "
            f"({dx[k] / lam:.4g}, {dy[k] / lam:.4g}) wavelengths exceeds grid half-extent "
            f"{H} x {grid.bin_size}",
            baseline=bl,
        )
    occ = np.zeros(grid.shape, dtype=np.int64)
    np.add.at(occ, (iu + H, iv + H), 1)
    return SamplingFunction(grid, occ, lam)


def additive_sampling(parts: Sequence[SamplingFunction]) -> SamplingFunction:
    """Bin-wise sum of per-subband sampling functions."""
    if not parts:
        raise InvalidArgumentError("additive sampling needs at least one part")
    grid = parts[0].grid
    for p in parts[1:]:
        if p.grid != grid:
            raise IncompatibleGridError(f"grid {p.grid} differs from {grid}")
    return SamplingFunction(grid, sum(p.occupancy for p in parts), "additive")


def unique_sample_count(s: SamplingFunction) -> int:
    return int(np.count_nonzero(s.occupancy))


def redundancy_histogram(s: SamplingFunction) -> dict[int, int]:
    """Map multiplicity -> number of bins carrying it (occupied bins only)."""
    values = s.occupancy[s.occupancy > 0]
    return dict(sorted(Counter(values.tolist()).items()))


def subband_sampling(layout: ArrayLayout, subbands: Sequence[float], grid: UVGrid,
                     include_zero: bool = False) -> dict[float, SamplingFunction]:
    return {f: sampling_function(layout, f, grid, include_zero) for f in subbands}


def sampling_to_csv(s: SamplingFunction) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["u_bin_index", "v_bin_index", "multiplicity"])
    for iu, iv in s.occupied_bins():
        writer.writerow([int(iu), int(iv), int(s.occupancy[iu + s.grid.half_extent,
                                                          iv + s.grid.half_extent])])
    return buf.getvalue()


def sampling_metadata(s: SamplingFunction) -> dict:
    tag = s.wavelength_tag
    return {
        "grid": s.grid.to_dict(),
        "wavelength": tag if isinstance(tag, str) else float(tag),
        "unique_samples": unique_sample_count(s),
        "total_multiplicity": int(s.occupancy.sum()),
    }


def write_sampling(s: SamplingFunction, stem) -> list[Path]:
    """Write ``<stem>.csv`` and ``<stem>.json``; returns the paths."""
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    csv_path.write_text(sampling_to_csv(s))
    json_path.write_text(json.dumps(sampling_metadata(s), indent=2, sort_keys=True) + "\n")
    return [csv_path, json_path]


def read_sampling(stem) -> SamplingFunction:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    grid = UVGrid(**meta["grid"])
    occ = np.zeros(grid.shape, dtype=np.int64)
    with stem.with_suffix(".csv").open() as fh:
        for row in csv.DictReader(fh):
            occ[int(row["u_bin_index"]) + grid.half_extent,
                int(row["v_bin_index"]) + grid.half_extent] = int(row["multiplicity"])
    return SamplingFunction(grid, occ, meta["wavelength"])
