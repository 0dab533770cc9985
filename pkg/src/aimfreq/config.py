"""Experiment specification: strict JSON schema, validation diagnostics, and builders."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import pydantic
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import AimError, ValidationError
from .geometry import ArrayLayout, build_circular_array, place_transmitters
from .sampling import SubbandSet, UVGrid, default_uv_grid
from .scenes import DirectionGrid, IntensityGrid, ScattererScene, scene_from_dict
from .signal_sim import NoiseConfig

BUNDLED_SPECS = {"paper-defaults": "paper_defaults.json"}
ARTIFACTS = ("sampling", "psf", "images", "visibility", "report", "weights")
SCENE_TYPES = ("blob", "fractal", "squares", "helmet", "raster", "scatterers")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LayoutSpec(_Strict):
    file: Optional[str] = None
    radius: float = Field(0.101, gt=0)
    n_elements: int = Field(24, ge=2)
    start_angle_deg: float = 0.0
    n_transmitters: int = Field(4, ge=0)
    tx_radius: float = Field(0.3, gt=0)


class GridSpec(_Strict):
    n_alpha: int = Field(129, ge=3)
    n_beta: int = Field(129, ge=3)
    alpha_span: float = Field(0.25, gt=0, le=1)
    beta_span: float = Field(0.25, gt=0, le=1)
    uv_bin: float = Field(0.5, gt=0)
    uv_half_extent: Optional[int] = Field(None, ge=1)
    include_zero: bool = True


class SignalSpec(_Strict):
    duration: float = Field(1e-3, gt=0)
    sample_rate: float = Field(100e6, gt=0)
    snr_db: Optional[float] = None
    block_size: int = Field(1 << 15, ge=2)


class CalibrationSpec(_Strict):
    enabled: bool = False
    perturb_gains: bool = True
    gain_low: float = Field(0.5, gt=0)
    gain_high: float = Field(2.0, gt=0)
    beacon: tuple[float, float, float] = (0.0, 0.0, 1.83)
    snr_db: float = 30.0

    @model_validator(mode="after")
    def _gain_order(self):
        if self.gain_high < self.gain_low:
            raise ValueError("gain_high must be >= gain_low")
        return self


class SceneSpec(BaseModel):
    # scene parameters vary by type and are checked when the scene is built
    model_config = ConfigDict(extra="allow", frozen=True)
    type: Literal[SCENE_TYPES]
    name: str = ""


class ExperimentSpec(_Strict):
    name: str = "experiment"
    layout: LayoutSpec = LayoutSpec()
    subbands: list[float] = [37e9, 38e9, 39e9, 40e9]
    noise_bandwidth: float = Field(50e6, gt=0)
    grid: GridSpec = GridSpec()
    scene: Optional[SceneSpec] = None
    table_scenes: list[SceneSpec] = []
    table_subbands: list[float] = [float(f) * 1e9 for f in range(35, 46)]
    pipeline: Literal["analytic", "signal_sim"] = "analytic"
    signal: SignalSpec = SignalSpec()
    calibration: CalibrationSpec = CalibrationSpec()
    outputs: list[Literal[ARTIFACTS]] = list(ARTIFACTS)
    seed: Optional[int] = None

    @field_validator("subbands", "table_subbands")
    @classmethod
    def _subbands(cls, v):
        SubbandSet(tuple(v))  # raises on empty, non-positive or unsorted
        return v

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.pipeline == "signal_sim" and self.seed is None:
            raise ValueError("seed is required when pipeline is signal_sim")
        if self.layout.file is not None and not Path(self.layout.file).is_file():
            raise ValueError(f"layout file not found: {self.layout.file}")
        for sc in [self.scene, *self.table_scenes]:
            path = getattr(sc, "path", None) if sc is not None else None
            if path is not None and not Path(path).is_file():
                raise ValueError(f"scene raster not found: {path}")
        return self

    # --- builders ---------------------------------------------------------

    def build_layout(self) -> ArrayLayout:
        ls = self.layout
        if ls.file is not None:
            return ArrayLayout.load(ls.file)
        rx = build_circular_array(ls.radius, ls.n_elements, ls.start_angle_deg)
        if ls.n_transmitters == 0:
            return rx
        return place_transmitters(rx, ls.tx_radius, ls.n_transmitters)

    def subband_set(self) -> SubbandSet:
        return SubbandSet(tuple(self.subbands), self.noise_bandwidth)

    def direction_grid(self) -> DirectionGrid:
        g = self.grid
        return DirectionGrid(g.n_alpha, g.n_beta, g.alpha_span, g.beta_span)

    def uv_grid(self, layout: ArrayLayout, subbands=None) -> UVGrid:
        if self.grid.uv_half_extent is not None:
            return UVGrid(self.grid.uv_bin, self.grid.uv_half_extent)
        return default_uv_grid(layout, subbands or self.subbands, self.grid.uv_bin)

    def noise_config(self) -> NoiseConfig:
        s = self.signal
        return NoiseConfig(n_transmitters=max(self.layout.n_transmitters, 1),
                           bandwidth=self.noise_bandwidth, carrier=self.subbands[0],
                           duration=s.duration, sample_rate=s.sample_rate,
                           seed=self.seed or 0, block_size=s.block_size)

    @property
    def snr_db(self) -> float:
        return math.inf if self.signal.snr_db is None else self.signal.snr_db

    def build_scene(self, spec: SceneSpec | None = None) -> IntensityGrid | ScattererScene:
        spec = spec or self.scene
        if spec is None:
            raise ValidationError(["scene: required for this command"])
        params = spec.model_dump(exclude={"name"})
        return scene_from_dict(params, self.direction_grid())


def _line_of(text: str, loc: tuple) -> int | None:
    """Best-effort 1-based line of the innermost named key in ``loc``."""
    keys = [k for k in loc if isinstance(k, str)]
    if not keys:
        return None
    pos = 0
    for key in keys:
        hit = text.find(f'"{key}"', pos)
        if hit < 0:
            break
        pos = hit
    return text.count("\n", 0, pos) + 1 if pos else None


def parse_spec(text: str, overrides: dict | None = None) -> ExperimentSpec:
    """Validate JSON text; raises :class:`ValidationError` with field (and line) diagnostics."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"line {exc.lineno}: invalid JSON ({exc.msg})"]) from None
    if not isinstance(data, dict):
        raise ValidationError(["top level must be a JSON object"])
    data.update(overrides or {})
    try:
        return ExperimentSpec.model_validate(data)
    except pydantic.ValidationError as exc:
        problems = []
        for err in exc.errors():
            field = ".".join(str(p) for p in err["loc"]) or "<root>"
            line = _line_of(text, err["loc"])
            where = f"line {line}: " if line else ""
            problems.append(f"{where}{field}: {err['msg']}")
        raise ValidationError(problems) from None
    except AimError as exc:
        raise ValidationError([str(exc)]) from None


def bundled_spec_text(name: str) -> str:
    return resources.files("aimfreq.data").joinpath(BUNDLED_SPECS[name]).read_text()


def load_spec(ref: str | Path | None, overrides: dict | None = None) -> ExperimentSpec:
    """Load a spec from a path or a bundled name (default ``paper-defaults``)."""
    ref = "paper-defaults" if ref is None else str(ref)
    text = bundled_spec_text(ref) if ref in BUNDLED_SPECS else Path(ref).read_text()
    return parse_spec(text, overrides)
