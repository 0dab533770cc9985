"""Scene intensity rasters on direction-cosine grids.

Pixel ``i`` of an axis with ``n`` pixels and half-span ``a`` sits at
``(i - n // 2) * (2 * a / n)``, so every grid has a pixel exactly at the
origin. Arrays are indexed ``[alpha, beta]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import ArtifactIOError, InvalidArgumentError
from .geometry import ArrayLayout, min_adjacent_spacing, wavelength


class FieldOfViewWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DirectionGrid:
    n_alpha: int = 128
    n_beta: int = 128
    alpha_span: float = 0.5
    beta_span: float = 0.5

    def __post_init__(self):
        if self.n_alpha < 2 or self.n_beta < 2:
            raise InvalidArgumentError("direction grids need at least 2 pixels per axis")
        for span in (self.alpha_span, self.beta_span):
            if not 0 < span <= 1:
                raise InvalidArgumentError(f"direction-cosine span {span} outside (0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_alpha, self.n_beta)

    @property
    def d_alpha(self) -> float:
        return 2 * self.alpha_span / self.n_alpha

    @property
    def d_beta(self) -> float:
        return 2 * self.beta_span / self.n_beta

    @property
    def origin(self) -> tuple[int, int]:
        return (self.n_alpha // 2, self.n_beta // 2)

    @property
    def alpha(self) -> np.ndarray:
        return (np.arange(self.n_alpha) - self.n_alpha // 2) * self.d_alpha

    @property
    def beta(self) -> np.ndarray:
        return (np.arange(self.n_beta) - self.n_beta // 2) * self.d_beta

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.alpha, self.beta, indexing="ij")

    def nearest_pixel(self, alpha: float, beta: float) -> tuple[int, int]:
        i = int(np.floor(alpha / self.d_alpha + 0.5)) + self.n_alpha // 2
        j = int(np.floor(beta / self.d_beta + 0.5)) + self.n_beta // 2
        return i, j

    def to_dict(self) -> dict:
        return {"n_alpha": self.n_alpha, "n_beta": self.n_beta,
                "alpha_span": self.alpha_span, "beta_span": self.beta_span}


@dataclass(frozen=True, eq=False)
class IntensityGrid:
    grid: DirectionGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise InvalidArgumentError(f"values shape {vals.shape} != grid {self.grid.shape}")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise InvalidArgumentError("intensity must be finite and non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "IntensityGrid") -> "IntensityGrid":
        if other.grid != self.grid:
            raise InvalidArgumentError("cannot add intensities on different grids")
        return IntensityGrid(self.grid, self.values + other.values)


@dataclass(frozen=True)
class Scatterer:
    x: float
    y: float
    z: float
    reflectivity: float = 1.0
    radius: float = 0.0

    def __post_init__(self):
        if self.reflectivity < 0:
            raise InvalidArgumentError("reflectivity must be non-negative")
        if self.radius < 0:
            raise InvalidArgumentError("radius must be non-negative")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class ScattererScene:
    """Point/disc reflectors in front of the array (array plane is ``z = 0``).

    ``subband_reflectivity`` optionally maps a carrier frequency to a
    per-scatterer multiplicative factor, a hook for frequency-dependent
    specular returns.
    """

    scatterers: tuple[Scatterer, ...]
    range: float
    subband_reflectivity: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        if not self.range > 0:
            raise InvalidArgumentError("scene range must be positive")
        for f, factors in self.subband_reflectivity.items():
            if len(factors) != len(self.scatterers):
                raise InvalidArgumentError(
                    f"reflectivity factors at {f} Hz: expected {len(self.scatterers)}")

    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.scatterers], dtype=float).reshape(-1, 3)

    def reflectivities(self, frequency: float | None = None) -> np.ndarray:
        rho = np.array([s.reflectivity for s in self.scatterers], dtype=float)
        if frequency is not None and frequency in self.subband_reflectivity:
            rho = rho * np.asarray(self.subband_reflectivity[frequency], dtype=float)
        return rho

    def direction_cosines(self) -> np.ndarray:
        """``(S, 2)`` array of ``(alpha, beta)`` per scatterer."""
        p = self.positions()
        if np.any(p[:, 2] <= 0):
            raise InvalidArgumentError("scatterer at or behind the array plane (z <= 0)")
        r = np.linalg.norm(p, axis=1)
        return p[:, :2] / r[:, None]


# --- generators -----------------------------------------------------------


def scene_smooth_blob(grid: DirectionGrid, center=(0.0, 0.0), width: float = 0.04) -> IntensityGrid:
    """Gaussian blob with peak 1 (low spatial-frequency content)."""
    if not width > 0:
        raise InvalidArgumentError("blob width must be positive")
    a, b = grid.mesh()
    vals = np.exp(-((a - center[0]) ** 2 + (b - center[1]) ** 2) / (2 * width**2))
    return IntensityGrid(grid, vals / vals.max())


def _fill_square(vals, grid, cx, cy, side):
    a, b = grid.mesh()
    half = side / 2 + 1e-12
    vals[(np.abs(a - cx) <= half) & (np.abs(b - cy) <= half)] = 1.0


def scene_fractal_squares(grid: DirectionGrid, depth: int = 4, side: float = 0.12) -> IntensityGrid:
    """T-square fractal: each level adds half-size squares on the previous level's corners."""
    if depth < 1:
        raise InvalidArgumentError("fractal depth must be >= 1")
    vals = np.zeros(grid.shape)
    level = [(0.0, 0.0)]
    s = side
    for _ in range(depth):
        for cx, cy in level:
            _fill_square(vals, grid, cx, cy, s)
        level = [(cx + dx * s / 2, cy + dy * s / 2)
                 for cx, cy in level for dx in (-1, 1) for dy in (-1, 1)]
        s /= 2
    return IntensityGrid(grid, vals)


def linear_square_sides(n_squares: int, largest: float, smallest: float) -> np.ndarray:
    if n_squares == 1:
        return np.array([largest])
    return np.linspace(largest, smallest, n_squares)


def scene_linear_squares(grid: DirectionGrid, n_squares: int = 5, largest: float = 0.04,
                         smallest: float = 0.01, pitch: float | None = None) -> IntensityGrid:
    """Row of squares along alpha whose sides decrease linearly.

    ``pitch`` is the centre-to-centre spacing; it defaults to 1.25 x ``largest``.
    """
    if n_squares < 1:
        raise InvalidArgumentError("n_squares must be >= 1")
    if not 0 < smallest <= largest:
        raise InvalidArgumentError("need 0 < smallest <= largest")
    sides = linear_square_sides(n_squares, largest, smallest)
    if pitch is None:
        pitch = 1.25 * largest
    for k in range(n_squares - 1):
        if pitch < (sides[k] + sides[k + 1]) / 2:
            raise InvalidArgumentError(
                f"squares {k} and {k + 1} overlap: pitch {pitch} < {(sides[k] + sides[k + 1]) / 2}")
    centres = (np.arange(n_squares) - (n_squares - 1) / 2) * pitch
    vals = np.zeros(grid.shape)
    for cx, s in zip(centres, sides):
        _fill_square(vals, grid, cx, 0.0, s)
    return IntensityGrid(grid, vals)


def scene_helmet(grid: DirectionGrid, size: float = 0.11) -> IntensityGrid:
    """Procedural helmet-like silhouette with shading, a crest and a visor slot.

    Stand-in for a real-world raster with mixed low and high spatial
    frequencies; use :func:`scene_from_raster` for actual images.
    """
    a, b = grid.mesh()
    a, b = a / size, b / size
    dome = (a**2 + (b / 0.9) ** 2) <= 1.0
    shade = np.clip(0.55 + 0.45 * (b + 0.3 * a), 0.2, 1.0)
    vals = np.where(dome, shade, 0.0)
    cheek = (np.abs(a - 0.45) <= 0.35) & (b >= -1.15) & (b <= -0.2)
    vals[cheek] = 0.8
    visor = (a >= -0.55) & (a <= 0.75) & (b >= -0.25) & (b <= -0.05)
    vals[visor] = 0.05
    crest = (np.abs(b - 0.95 + 0.25 * (a + 0.3) ** 2) <= 0.12) & (a >= -0.9) & (a <= 0.6)
    vals[crest] = 1.0
    return IntensityGrid(grid, vals)


def scene_from_raster(path, grid: DirectionGrid) -> IntensityGrid:
    """Load a grayscale PGM and resample it onto ``grid`` (bilinear), scaled by maxval."""
    try:
        raw, maxval = read_pgm(path)
    except (OSError, ValueError) as exc:
        raise ArtifactIOError(f"cannot read raster {path}: {exc}") from exc
    img = raw.astype(float) / maxval
    # raster rows run top (+beta) to bottom; columns run along +alpha
    img = img[::-1, :].T
    rows, cols = img.shape
    ia = (np.arange(grid.n_alpha) + 0.5) * rows / grid.n_alpha - 0.5
    ib = (np.arange(grid.n_beta) + 0.5) * cols / grid.n_beta - 0.5
    ca, cb = np.meshgrid(np.clip(ia, 0, rows - 1), np.clip(ib, 0, cols - 1), indexing="ij")
    vals = ndimage.map_coordinates(img, [ca, cb], order=1, mode="nearest")
    return IntensityGrid(grid, np.clip(vals, 0.0, 1.0))


def project_scatterers(scene: ScattererScene, grid: DirectionGrid, footprint: float = 0.0,
                       frequency: float | None = None) -> IntensityGrid:
    """Render scatterers as discs at their direction cosines.

    Disc angular radius is ``max(footprint, radius / range)``; amplitude is
    the reflectivity. Discs narrower than a pixel occupy the nearest pixel.
    """
    if footprint < 0:
        raise InvalidArgumentError("footprint must be non-negative")
    dc = scene.direction_cosines()
    rho = scene.reflectivities(frequency)
    a, b = grid.mesh()
    vals = np.zeros(grid.shape)
    for (al, be), r, s in zip(dc, rho, scene.scatterers):
        rng = float(np.linalg.norm(s.position))
        ang = max(footprint, s.radius / rng)
        disc = (a - al) ** 2 + (b - be) ** 2 <= ang**2
        if not disc.any():
            i, j = grid.nearest_pixel(al, be)
            if 0 <= i < grid.n_alpha and 0 <= j < grid.n_beta:
                disc[i, j] = True
        vals[disc] += r
    return IntensityGrid(grid, vals)


def four_spheres(range_m: float = 1.5, pitch: float = 0.15, diameter: float = 0.10,
                 reflectivity: float = 1.0) -> ScattererScene:
    """Four spheres in an L formation, centred near boresight."""
    offsets = [(0.0, pitch), (0.0, 0.0), (0.0, -pitch), (pitch, -pitch)]
    shift = -pitch / 4
    return ScattererScene(
        tuple(Scatterer(x + shift, y, range_m, reflectivity, diameter / 2) for x, y in offsets),
        range_m)


def two_cylinders(range_m: float = 1.8, spacing: float = 0.31, points_per_cylinder: int = 25,
                  reflectivity: float = 1.0) -> ScattererScene:
    """Left cylinder 37 cm x 8 cm, right 47 cm x 10 cm, as vertical columns of reflectors.

    The default column spacing (1.5 to 2 cm) sits below the resolution cell at
    1.8 m so each cylinder images as a line rather than separate dots.
    """
    scatterers = []
    for x, height, diameter in ((-spacing / 2, 0.37, 0.08), (spacing / 2, 0.47, 0.10)):
        for y in np.linspace(-height / 2, height / 2, points_per_cylinder):
            scatterers.append(Scatterer(x, float(y), range_m,
                                        reflectivity / points_per_cylinder, diameter / 2))
    return ScattererScene(tuple(scatterers), range_m)


def scene_from_dict(spec: dict, grid: DirectionGrid) -> IntensityGrid | ScattererScene:
    """Build a scene from its JSON description (``{"type": ..., params}``)."""
    params = {k: v for k, v in spec.items() if k != "type"}
    kind = spec.get("type")
    if kind == "blob":
        return scene_smooth_blob(grid, **params)
    if kind == "fractal":
        return scene_fractal_squares(grid, **params)
    if kind == "squares":
        return scene_linear_squares(grid, **params)
    if kind == "helmet":
        return scene_helmet(grid, **params)
    if kind == "raster":
        return scene_from_raster(params["path"], grid)
    if kind == "scatterers":
        preset = params.pop("preset", None)
        if preset == "four_spheres":
            return four_spheres(**params)
        if preset == "two_cylinders":
            return two_cylinders(**params)
        items = [Scatterer(**s) for s in params["scatterers"]]
        return ScattererScene(tuple(items), float(params.get("range", items[0].z)))
    raise InvalidArgumentError(f"unknown scene type {kind!r}")


# --- field of view --------------------------------------------------------


def fov_limit(layout: ArrayLayout, frequency: float) -> float:
    """Unambiguous field of view half-width in direction cosine."""
    return wavelength(frequency) / (2 * min_adjacent_spacing(layout))


def check_field_of_view(scene: IntensityGrid, layout: ArrayLayout,
                        frequencies: Sequence[float], floor: float = 0.01) -> bool:
    """Warn (and return False) when scene support exceeds the FOV at the highest carrier.

    Support is where intensity exceeds ``floor`` times the peak, so smooth
    tails do not count.
    """
    limit = min(fov_limit(layout, f) for f in frequencies)
    a, b = scene.grid.mesh()
    support = scene.values > floor * scene.values.max()
    if not support.any():
        return True
    extent = float(max(np.abs(a[support]).max(), np.abs(b[support]).max()))
    if extent > limit:
        warnings.warn(
            f"scene extends to |direction cosine| {extent:.3f}, beyond the unambiguous "
            f"field of view {limit:.3f}", FieldOfViewWarning, stacklevel=2)
        return False
    return True


# --- portable graymap -----------------------------------------------------


def _pgm_tokens(data: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(int(data[start:pos]))
    return tokens, pos


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary (P5) or ASCII (P2) PGM; returns ``(rows x cols array, maxval)``."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise ValueError("not a PGM file")
    (width, height, maxval), pos = _pgm_tokens(data, 3)
    if not 0 < maxval < 65536 or width < 1 or height < 1:
        raise ValueError("invalid PGM header")
    if magic == b"P2":
        vals = np.array(data[pos:].split(), dtype=np.int64)[: width * height]
    else:
        dtype = ">u1" if maxval < 256 else ">u2"
        vals = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos + 1)
    if vals.size != width * height:
        raise ValueError("PGM pixel data truncated")
    return vals.reshape(height, width).astype(np.int64), maxval


def write_pgm(path, pixels: np.ndarray, maxval: int = 255) -> Path:
    """Write an integer ``rows x cols`` array as binary PGM (8- or 16-bit)."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise InvalidArgumentError("PGM needs a 2-D array")
    dtype = ">u1" if maxval < 256 else ">u2"
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n{maxval}\n".encode()
    path = Path(path)
    path.write_bytes(header + np.clip(pixels, 0, maxval).astype(dtype).tobytes())
    return path


def to_raster(values: np.ndarray, maxval: int = 255) -> np.ndarray:
    """Min-max scale an ``[alpha, beta]`` map to raster orientation (top row = largest beta)."""
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    scaled = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    return np.rint(scaled * maxval).astype(np.int64).T[::-1, :]


def export_intensity(scene: IntensityGrid, path, bits: int = 8) -> Path:
    return write_pgm(path, to_raster(scene.values, 255 if bits == 8 else 65535),
                     255 if bits == 8 else 65535)

