"""Per-receiver complex weights from a point-source (beacon) measurement."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidArgumentError, UnrecoverableChannelError
from .geometry import SPEED_OF_LIGHT, ArrayLayout
from .signal_sim import (BEACON_STREAM, NoiseConfig, SignalCapture, VisibilityEstimate,
                         receiver_noise)

DEFAULT_BEACON = (0.0, 0.0, 1.83)


class LowSnrWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class WeightSet:
    weights: np.ndarray
    subband: float
    reference_index: int = 0
    residual: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=complex)
        if not 0 <= self.reference_index < len(w):
            raise InvalidArgumentError("reference index out of range")
        if w[self.reference_index] != 1:
            raise InvalidArgumentError("reference weight must be exactly 1")
        if not np.all(np.isfinite(w)) or np.any(np.abs(w) == 0):
            raise InvalidArgumentError("weights must be finite and non-zero")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    def inverse(self) -> "WeightSet":
        return WeightSet(1.0 / self.weights, self.subband, self.reference_index)

    def to_dict(self) -> dict:
        return {
            "subband_hz": self.subband,
            "reference": self.reference_index,
            "weights": [[float(z.real), float(z.imag)] for z in self.weights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WeightSet":
        w = np.array([complex(re, im) for re, im in data["weights"]])
        return cls(w, float(data["subband_hz"]), int(data["reference"]))


def save_weights(ws: WeightSet, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(ws.to_dict(), indent=2) + "\n")
    return path


def load_weights(path) -> WeightSet:
    return WeightSet.from_dict(json.loads(Path(path).read_text()))


def beacon_phasors(layout: ArrayLayout, beacon: Sequence[float], frequency: float) -> np.ndarray:
    """Ideal unit phasors ``exp(-j k |beacon - r_i|)`` with spherical wavefronts."""
    bx, by, bz = beacon
    if bz <= 0:
        raise InvalidArgumentError("beacon must be in front of the array plane (z > 0)")
    d = np.sqrt((layout.receivers[:, 0] - bx) ** 2 + (layout.receivers[:, 1] - by) ** 2 + bz**2)
    return np.exp(-2j * np.pi * frequency / SPEED_OF_LIGHT * d)


def simulate_beacon_capture(layout: ArrayLayout, beacon: Sequence[float], config: NoiseConfig,
                            gains=None, snr_db: float = 30.0) -> SignalCapture:
    """Continuous-wave tone at the subband centre (DC at baseband) seen by every receiver.

    Receiver noise is added at ``snr_db`` and the per-channel ``gains`` are
    applied to signal plus noise.
    """
    p = beacon_phasors(layout, beacon, config.carrier)
    n = layout.n_receivers
    g = np.ones(n, dtype=complex) if gains is None else np.asarray(gains, dtype=complex)
    if g.shape != (n,):
        raise DimensionError(f"expected {n} gains, got {g.shape}")
    noise_std = 0.0 if snr_db == math.inf else 10 ** (-snr_db / 20)
    out = np.empty((n, config.n_samples), dtype=complex)
    for idx, length in config.blocks():
        start = idx * config.block_size
        y = np.repeat(p[:, None], length, axis=1)
        if noise_std:
            y = y + noise_std * receiver_noise(config, n, idx, length, stream=BEACON_STREAM)
        out[:, start:start + length] = g[:, None] * y
    return SignalCapture(out, config, layout.label)


def channel_phasors(capture: SignalCapture) -> tuple[np.ndarray, np.ndarray]:
    """Principal eigenvector of the channel covariance and the eigenvalues (descending)."""
    y = capture.channels
    cov = y @ y.conj().T / y.shape[1]
    vals, vecs = np.linalg.eigh(cov)
    return vecs[:, -1], vals[::-1]


def solve_weights(capture: SignalCapture, layout: ArrayLayout, beacon: Sequence[float],
                  subband: float, reference_index: int = 0,
                  min_dominance_db: float = 10.0) -> WeightSet:
    """Closed-form per-channel fit ``w_i = p_i / m_i`` normalised to the reference.

    ``m`` is the measured phasor (principal eigen-direction of the channel
    covariance) and ``p`` the ideal point-source phasor. This minimises
    ``sum |w_i m_i - p_i|^2`` exactly; ``residual`` on the result is the
    fraction of captured power outside the rank-one point-source model.
    """
    if capture.n_channels != layout.n_receivers:
        raise DimensionError("capture channel count does not match the layout")
    power = np.mean(np.abs(capture.channels) ** 2, axis=1)
    dead = np.nonzero(power <= 1e-12 * power.max())[0] if power.max() > 0 else [0]
    if len(dead):
        raise UnrecoverableChannelError(int(dead[0]))
    m, eig = channel_phasors(capture)
    if np.any(np.abs(m) <= 1e-9 * np.abs(m).max()):
        raise UnrecoverableChannelError(int(np.argmin(np.abs(m))))
    residual = float(1.0 - eig[0] / eig.sum())
    if len(eig) > 1 and eig[1] > 0 and 10 * math.log10(eig[0] / eig[1]) < min_dominance_db:
        warnings.warn(f"beacon dominance only {10 * math.log10(eig[0] / eig[1]):.1f} dB; "
                      "weights may be unreliable", LowSnrWarning, stacklevel=2)
    p = beacon_phasors(layout, beacon, subband)
    w = p / m
    w = w / w[reference_index]
    w[reference_index] = 1.0
    return WeightSet(w, float(subband), reference_index, residual)


def apply_weights(obj, ws: WeightSet):
    """Weight a capture (channel ``i`` times ``w_i``) or an estimate (``w_a conj(w_b)``)."""
    w = ws.weights
    if isinstance(obj, SignalCapture):
        if obj.n_channels != len(w):
            raise DimensionError(f"{obj.n_channels} channels vs {len(w)} weights")
        return SignalCapture(obj.channels * w[:, None], obj.config, obj.layout_ref)
    if isinstance(obj, VisibilityEstimate):
        if obj.values.shape != (len(w), len(w)):
            raise DimensionError(f"estimate {obj.values.shape} vs {len(w)} weights")
        return VisibilityEstimate(obj.values * np.outer(w, w.conj()), obj.integration_time)
    raise InvalidArgumentError(f"cannot apply weights to {type(obj).__name__}")


def random_gains(n: int, rng: np.random.Generator, low: float = 0.5, high: float = 2.0
                 ) -> np.ndarray:
    """Per-channel gains with magnitude uniform in ``[low, high]`` and uniform phase."""
    return rng.uniform(low, high, n) * np.exp(2j * np.pi * rng.uniform(0, 1, n))


def calibrate_subbands(layout: ArrayLayout, subbands: Sequence[float], config: NoiseConfig,
                       gains_by_subband=None, beacon=DEFAULT_BEACON, snr_db: float = 30.0
                       ) -> dict[float, WeightSet]:
    """Beacon simulation and weight solve for each subband."""
    out = {}
    for f in subbands:
        cfg = config.with_(carrier=f)
        gains = None if gains_by_subband is None else gains_by_subband[f]
        cap = simulate_beacon_capture(layout, beacon, cfg, gains, snr_db)
        out[f] = solve_weights(cap, layout, beacon, f)
    return out


GAIN_STREAM = 3


def perturbation_gains(seed: int, subbands: Sequence[float], n: int, low: float = 0.5,
                       high: float = 2.0) -> dict[float, np.ndarray]:
    """Seeded random channel gains per subband, drawn from their own RNG stream."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(GAIN_STREAM,)))
    return {f: random_gains(n, rng, low, high) for f in subbands}
