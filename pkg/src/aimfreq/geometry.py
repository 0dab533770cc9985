"""Receiver/transmitter layouts and antenna-pair baselines."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConstraintViolationError, InvalidArgumentError

SPEED_OF_LIGHT = 299_792_458.0


def wavelength(frequency: float) -> float:
    if frequency <= 0:
        raise InvalidArgumentError(f"frequency must be positive, got {frequency}")
    return SPEED_OF_LIGHT / frequency


@dataclass(frozen=True)
class Baseline:
    dx: float
    dy: float
    rx_a: int
    rx_b: int


@dataclass(frozen=True, eq=False)
class ArrayLayout:
    """Planar element positions in meters.

    ``receivers`` and ``transmitters`` are ``(N, 2)`` float arrays; they are
    made read-only on construction. ``require_outer_transmitters=False``
    lifts the wider-ring rule for negative-control experiments.
    """

    receivers: np.ndarray
    transmitters: np.ndarray
    label: str = ""
    require_outer_transmitters: bool = field(default=True, repr=False)

    def __post_init__(self):
        rx = np.array(self.receivers, dtype=float).reshape(-1, 2)
        tx = np.array(self.transmitters, dtype=float).reshape(-1, 2)
        if len(rx) < 2:
            raise InvalidArgumentError("a layout needs at least two receivers")
        if len({(x, y) for x, y in rx.tolist()}) != len(rx):
            raise InvalidArgumentError("two receivers share identical coordinates")
        if len(tx) and self.require_outer_transmitters:
            span = receiver_radius(rx)
            r_tx = np.hypot(*(tx - rx.mean(axis=0)).T)
            if np.any(r_tx <= span):
                raise ConstraintViolationError(
                    f"transmitters must lie outside the receiver span (radius {span:.6g} m)"
                )
        rx.flags.writeable = False
        tx.flags.writeable = False
        object.__setattr__(self, "receivers", rx)
        object.__setattr__(self, "transmitters", tx)

    @property
    def n_receivers(self) -> int:
        return len(self.receivers)

    @property
    def n_transmitters(self) -> int:
        return len(self.transmitters)

    def __eq__(self, other):
        if not isinstance(other, ArrayLayout):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.receivers, other.receivers)
            and np.array_equal(self.transmitters, other.transmitters)
        )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "receivers": self.receivers.tolist(),
            "transmitters": self.transmitters.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArrayLayout":
        return cls(
            receivers=np.asarray(data["receivers"], dtype=float),
            transmitters=np.asarray(data.get("transmitters") or [], dtype=float),
            label=str(data.get("label", "")),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ArrayLayout":
        return cls.from_dict(json.loads(Path(path).read_text()))


def receiver_radius(receivers: np.ndarray) -> float:
    """Radius of the smallest centroid-centred circle containing all receivers."""
    rx = np.asarray(receivers, dtype=float)
    return float(np.max(np.hypot(*(rx - rx.mean(axis=0)).T)))


def _ring(radius: float, n: int, start_angle: float) -> np.ndarray:
    angles = np.deg2rad(start_angle + np.arange(n) * (360.0 / n))
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])


def build_circular_array(
    radius: float, n_elements: int, start_angle: float = 0.0, label: str | None = None
) -> ArrayLayout:
    """Receivers uniformly spaced on a circle (the O-shaped array)."""
    if not radius > 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius}")
    if n_elements < 2:
        raise InvalidArgumentError(f"need at least 2 elements, got {n_elements}")
    if label is None:
        label = f"O-array r={radius:g} m n={n_elements}"
    return ArrayLayout(_ring(radius, n_elements, start_angle), np.empty((0, 2)), label)


def place_transmitters(
    layout: ArrayLayout, radius: float, n_tx: int, start_angle: float = 0.0
) -> ArrayLayout:
    """Return a copy of ``layout`` with ``n_tx`` transmitters on a wider circle."""
    span = receiver_radius(layout.receivers)
    if not radius > span:
        raise ConstraintViolationError(
            f"transmitter radius {radius} m does not exceed receiver span {span:.6g} m"
        )
    if n_tx < 1:
        raise InvalidArgumentError("n_tx must be at least 1")
    centre = layout.receivers.mean(axis=0)
    return ArrayLayout(layout.receivers, _ring(radius, n_tx, start_angle) + centre, layout.label)


def baseline_arrays(
    layout: ArrayLayout, include_conjugates: bool = True, include_zero: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised form of :func:`enumerate_baselines`: ``(dx, dy, rx_a, rx_b)``."""
    n = layout.n_receivers
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    keep = (a != b) if include_conjugates else (a < b)
    a, b = a[keep], b[keep]
    if include_zero:
        a = np.concatenate([[0], a])
        b = np.concatenate([[0], b])
    rx = layout.receivers
    dx = rx[b, 0] - rx[a, 0]
    dy = rx[b, 1] - rx[a, 1]
    return dx, dy, a, b


def enumerate_baselines(
    layout: ArrayLayout, include_conjugates: bool = True, include_zero: bool = False
) -> list[Baseline]:
    """Directed antenna-pair separations ``r_b - r_a``.

    The zero (autocorrelation) baseline is excluded unless ``include_zero``;
    when included it is emitted once, as the pair ``(0, 0)``.
    """
    dx, dy, a, b = baseline_arrays(layout, include_conjugates, include_zero)
    return [Baseline(float(x), float(y), int(i), int(j)) for x, y, i, j in zip(dx, dy, a, b)]


def min_adjacent_spacing(layout: ArrayLayout) -> float:
    """Smallest distance between any two receivers."""
    rx = layout.receivers
    d = np.hypot(rx[:, None, 0] - rx[None, :, 0], rx[:, None, 1] - rx[None, :, 1])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def default_layout(n_tx: int = 4, tx_radius: float = 0.3, start_angle: float = 0.0) -> ArrayLayout:
    """24-element, 101 mm O-array with ``n_tx`` transmitters on a wider ring."""
    rx = build_circular_array(0.101, 24, start_angle, label="O-array 24x101mm")
    if n_tx == 0:
        return rx
    return place_transmitters(rx, tx_radius, n_tx)
