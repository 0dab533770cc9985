"""Time-domain oracle: incoherent noise illumination, scattering, reception and
pairwise correlation at complex baseband.

Noise is synthesised block by block in the frequency domain (flat spectrum
over ``|f| <= bandwidth / 2``), so each block is a periodic band-limited
process and fractional delays are exact phase ramps. Every block of every
transmitter and receiver draws from its own ``SeedSequence`` substream keyed
by ``(stream, element, block)``, which makes results independent of how the
work is partitioned.

Propagation model (narrowband across the aperture): the envelope of a
scatterer's return is delayed by the transmitter->scatterer->array-centre
path at sample level; each receiver additionally sees the carrier phase
``exp(-j 2 pi f_c tau)`` of its true path length. Reflectivity is a power
quantity, so field amplitudes scale with its square root, and the incident
field at each scatterer has unit power.

The correlation for the ordered pair ``(a, b)`` is ``<ch_a conj(ch_b)>``;
it samples the visibility at the baseline ``r_a - r_b``, i.e. the
visibility of the directed baseline ``b -> a``.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (ConfigurationError, DegenerateInputError, DimensionError,
                     GridOverflowError, InvalidArgumentError)
from .geometry import SPEED_OF_LIGHT, ArrayLayout, baseline_arrays, wavelength
from .sampling import UVGrid
from .scenes import ScattererScene
from .visibility import VisibilityGrid

CAPTURE_MAGIC = b"AIMCAP01"
DEFAULT_BLOCK = 1 << 15

TX_STREAM = 0
RX_STREAM = 1
BEACON_STREAM = 2


@dataclass(frozen=True)
class NoiseConfig:
    n_transmitters: int = 4
    bandwidth: float = 50e6
    carrier: float = 38e9
    duration: float = 1e-3
    sample_rate: float = 100e6
    seed: int = 0
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.n_transmitters < 1:
            raise InvalidArgumentError("need at least one transmitter")
        if not self.bandwidth > 0 or not self.carrier > 0:
            raise InvalidArgumentError("bandwidth and carrier must be positive")
        if self.sample_rate < 2 * self.bandwidth:
            raise InvalidArgumentError("sample_rate must be at least 2 x bandwidth")
        if self.n_samples < 2:
            raise InvalidArgumentError("duration x sample_rate must give at least 2 samples")
        if self.block_size < 2:
            raise InvalidArgumentError("block_size must be at least 2")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def with_(self, **changes) -> "NoiseConfig":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return NoiseConfig(**fields)

    def blocks(self):
        """``(index, length)`` of each fixed-size block covering the capture."""
        n, b = self.n_samples, self.block_size
        return [(k, min(b, n - k * b)) for k in range(math.ceil(n / b))]


@dataclass(frozen=True, eq=False)
class SignalCapture:
    channels: np.ndarray
    config: NoiseConfig
    layout_ref: str = ""

    def __post_init__(self):
        ch = np.asarray(self.channels)
        if ch.ndim != 2:
            raise DimensionError("channels must be a (n_channels, n_samples) array")
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True, eq=False)
class VisibilityEstimate:
    """``values[a, b] = <ch_a conj(ch_b)>`` over ``integration_time`` seconds."""

    values: np.ndarray
    integration_time: float


# --- noise synthesis ------------------------------------------------------


def _rng(seed: int, stream: int, element: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, element, block)))


def band_mask(length: int, sample_rate: float, bandwidth: float) -> np.ndarray:
    f = np.fft.fftfreq(length, 1.0 / sample_rate)
    return np.abs(f) <= bandwidth / 2


def _noise_spectrum(seed, stream, element, block, length, mask):
    """Spectrum whose inverse FFT has unit expected power per sample."""
    rng = _rng(seed, stream, element, block)
    m = int(mask.sum())
    spec = np.zeros(length, dtype=complex)
    scale = length / math.sqrt(2 * m)
    spec[mask] = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * scale
    return spec


def generate_noise(config: NoiseConfig) -> np.ndarray:
    """Independent band-limited circular Gaussian series, ``(n_transmitters, n_samples)``."""
    out = np.empty((config.n_transmitters, config.n_samples), dtype=complex)
    for k, length in config.blocks():
        mask = band_mask(length, config.sample_rate, config.bandwidth)
        start = k * config.block_size
        for t in range(config.n_transmitters):
            spec = _noise_spectrum(config.seed, TX_STREAM, t, k, length, mask)
            out[t, start:start + length] = np.fft.ifft(spec)
    return out


def receiver_noise(config: NoiseConfig, n_channels: int, block: int, length: int,
                   stream: int = RX_STREAM) -> np.ndarray:
    """Unit-power white circular Gaussian noise for one block."""
    out = np.empty((n_channels, length), dtype=complex)
    for r in range(n_channels):
        rng = _rng(config.seed, stream, r, block)
        out[r] = (rng.standard_normal(length) + 1j * rng.standard_normal(length)) / math.sqrt(2)
    return out


def noise_autocorrelation(lag, length: int, sample_rate: float, bandwidth: float):
    """Normalised autocorrelation ``E[n(t + lag) conj n(t)]`` of the block noise model."""
    f = np.fft.fftfreq(length, 1.0 / sample_rate)[band_mask(length, sample_rate, bandwidth)]
    lag = np.asarray(lag, dtype=float)
    return np.exp(2j * np.pi * np.multiply.outer(lag, f)).mean(axis=-1)


# --- geometry of the propagation paths ------------------------------------


@dataclass(frozen=True)
class _Paths:
    tx_to_sc: np.ndarray   # (T, S) meters
    sc_to_rx: np.ndarray   # (S, R) meters
    sc_to_centre: np.ndarray  # (S,)


def _paths(layout: ArrayLayout, scene: ScattererScene) -> _Paths:
    if layout.n_transmitters == 0:
        raise ConfigurationError("layout has no transmitters")
    p = scene.positions()
    if np.any(p[:, 2] <= 0):
        raise InvalidArgumentError("scatterers must lie in front of the array (z > 0)")
    tx = np.column_stack([layout.transmitters, np.zeros(layout.n_transmitters)])
    rx = np.column_stack([layout.receivers, np.zeros(layout.n_receivers)])
    centre = rx.mean(axis=0)
    return _Paths(
        np.linalg.norm(tx[:, None, :] - p[None, :, :], axis=2),
        np.linalg.norm(p[:, None, :] - rx[None, :, :], axis=2),
        np.linalg.norm(p - centre, axis=1),
    )


def _check_tx(layout: ArrayLayout, config: NoiseConfig):
    if layout.n_transmitters == 0:
        raise ConfigurationError("layout has no transmitters")
    if layout.n_transmitters != config.n_transmitters:
        raise ConfigurationError(
            f"layout has {layout.n_transmitters} transmitters, config expects "
            f"{config.n_transmitters}")


def _snr_scales(snr_db: float, signal_power: float) -> tuple[float, float]:
    """``(signal_scale, noise_std)`` for a per-channel SNR in dB."""
    if snr_db == -math.inf:
        return 0.0, 1.0
    if snr_db == math.inf:
        return 1.0, 0.0
    return 1.0, math.sqrt(signal_power * 10 ** (-snr_db / 10))


def _scatter_block(config, paths, amplitude, rx_phase, block, length):
    """Signal-only received block, ``(R, length)``."""
    mask = band_mask(length, config.sample_rate, config.bandwidth)
    f = np.fft.fftfreq(length, 1.0 / config.sample_rate)
    k = 2 * np.pi * config.carrier / SPEED_OF_LIGHT
    specs = np.array([_noise_spectrum(config.seed, TX_STREAM, t, block, length, mask)
                      for t in range(config.n_transmitters)])
    n_sc = paths.tx_to_sc.shape[1]
    x = np.empty((n_sc, length), dtype=complex)
    for s in range(n_sc):
        tau = (paths.tx_to_sc[:, s] + paths.sc_to_centre[s]) / SPEED_OF_LIGHT
        ramp = np.exp(-2j * np.pi * np.outer(tau, f) - 1j * k * paths.tx_to_sc[:, s, None])
        x[s] = np.fft.ifft((specs * ramp).sum(axis=0))
    x /= math.sqrt(config.n_transmitters)
    return (amplitude[:, None] * rx_phase).T @ x


def expected_correlation(layout: ArrayLayout, scene: ScattererScene, config: NoiseConfig,
                         include_receiver_noise: float = 0.0) -> np.ndarray:
    """Ensemble mean of ``<ch_a conj(ch_b)>`` for the signal model, gains excluded.

    Includes the residual coherence between scatterers that share
    illumination from the same transmitters. ``include_receiver_noise`` adds
    that noise power on the diagonal.
    """
    paths = _paths(layout, scene)
    k = 2 * np.pi * config.carrier / SPEED_OF_LIGHT
    amp = np.sqrt(scene.reflectivities(config.carrier))
    field = amp[:, None] * np.exp(-1j * k * paths.sc_to_rx)  # (S, R)
    tau = (paths.tx_to_sc + paths.sc_to_centre[None, :]) / SPEED_OF_LIGHT  # (T, S)
    length = config.blocks()[0][1]
    gamma = np.zeros((tau.shape[1], tau.shape[1]), dtype=complex)
    for t in range(tau.shape[0]):
        lag = tau[t][None, :] - tau[t][:, None]  # tau_s' - tau_s
        phase = np.exp(-1j * k * (paths.tx_to_sc[t][:, None] - paths.tx_to_sc[t][None, :]))
        gamma += phase * noise_autocorrelation(lag, length, config.sample_rate, config.bandwidth)
    gamma /= tau.shape[0]
    out = field.T @ gamma @ field.conj()
    out[np.diag_indices_from(out)] += include_receiver_noise
    return out


def mean_signal_power(layout: ArrayLayout, scene: ScattererScene, config: NoiseConfig) -> float:
    return float(np.real(np.diag(expected_correlation(layout, scene, config))).mean())


def _gains(gains, n):
    if gains is None:
        return np.ones(n, dtype=complex)
    g = np.asarray(gains, dtype=complex)
    if g.shape != (n,):
        raise DimensionError(f"expected {n} channel gains, got shape {g.shape}")
    return g


def _capture_blocks(layout, scene, config, snr_db, gains):
    _check_tx(layout, config)
    paths = _paths(layout, scene)
    k = 2 * np.pi * config.carrier / SPEED_OF_LIGHT
    amp = np.sqrt(scene.reflectivities(config.carrier))
    rx_phase = np.exp(-1j * k * paths.sc_to_rx)
    sig_scale, noise_std = _snr_scales(snr_db, mean_signal_power(layout, scene, config))
    g = _gains(gains, layout.n_receivers)

    def block(item):
        idx, length = item
        y = np.zeros((layout.n_receivers, length), dtype=complex)
        if sig_scale:
            y += _scatter_block(config, paths, amp, rx_phase, idx, length)
        if noise_std:
            y += noise_std * receiver_noise(config, layout.n_receivers, idx, length)
        return g[:, None] * y

    return block


def simulate_capture(layout: ArrayLayout, scene: ScattererScene, config: NoiseConfig,
                     snr_db: float = math.inf, gains=None) -> SignalCapture:
    """Received complex baseband channels for every receiver of ``layout``.

    ``snr_db`` is per-channel mean signal power over receiver-noise power;
    ``-inf`` turns the signal off (unit-power noise only) and ``+inf``
    disables receiver noise. ``gains`` are optional per-channel complex
    factors applied after noise.
    """
    block = _capture_blocks(layout, scene, config, snr_db, gains)
    out = np.empty((layout.n_receivers, config.n_samples), dtype=complex)
    for idx, length in config.blocks():
        start = idx * config.block_size
        out[:, start:start + length] = block((idx, length))
    return SignalCapture(out, config, layout.label)


def _block_correlation(y: np.ndarray) -> np.ndarray:
    yr, yi = y.real, y.imag
    re = yr @ yr.T + yi @ yi.T
    im = yi @ yr.T - yr @ yi.T
    return re + 1j * im


def correlate_capture(capture: SignalCapture) -> VisibilityEstimate:
    """Time-averaged ``ch_a conj(ch_b)`` for all ordered channel pairs."""
    if capture.n_channels < 2:
        raise DimensionError("correlation needs at least two channels")
    if capture.n_samples == 0:
        raise DegenerateInputError("capture has zero length")
    cfg = capture.config
    acc = np.zeros((capture.n_channels, capture.n_channels), dtype=complex)
    for idx, length in _blocks_for(capture.n_samples, cfg.block_size):
        start = idx * cfg.block_size
        acc += _block_correlation(capture.channels[:, start:start + length].astype(complex))
    return VisibilityEstimate(acc / capture.n_samples, capture.n_samples / cfg.sample_rate)


def _blocks_for(n, size):
    return [(k, min(size, n - k * size)) for k in range(math.ceil(n / size))]


def simulate_correlation(layout: ArrayLayout, scene: ScattererScene, config: NoiseConfig,
                         snr_db: float = math.inf, gains=None, threads: int = 1
                         ) -> VisibilityEstimate:
    """Streaming equivalent of ``correlate_capture(simulate_capture(...))``.

    Blocks are generated and correlated independently, then summed in block
    order, so the result is bit-identical for any ``threads``.
    """
    block = _capture_blocks(layout, scene, config, snr_db, gains)
    items = config.blocks()

    def work(item):
        return _block_correlation(block(item))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, items))
    else:
        parts = [work(it) for it in items]
    acc = np.zeros((layout.n_receivers, layout.n_receivers), dtype=complex)
    for p in parts:
        acc += p
    return VisibilityEstimate(acc / config.n_samples, config.n_samples / config.sample_rate)


def pair_visibility(layout: ArrayLayout, scene: ScattererScene, frequency: float) -> np.ndarray:
    """Analytic visibility of the projected point scene at every pair's exact baseline.

    Entry ``[a, b]`` is ``sum rho exp(+j2pi(u alpha + v beta))`` at
    ``(u, v) = (r_a - r_b) / lambda``, directly comparable with the
    correlation ``<ch_a conj(ch_b)>``.
    """
    lam = wavelength(frequency)
    dc = scene.direction_cosines()
    rho = scene.reflectivities(frequency)
    rx = layout.receivers
    du = (rx[:, None, 0] - rx[None, :, 0]) / lam
    dv = (rx[:, None, 1] - rx[None, :, 1]) / lam
    phase = np.multiply.outer(du, dc[:, 0]) + np.multiply.outer(dv, dc[:, 1])
    return (rho * np.exp(2j * np.pi * phase)).sum(axis=-1)


def relative_rms_error(estimate: np.ndarray, reference: np.ndarray, off_diagonal: bool = True) -> float:
    mask = ~np.eye(len(reference), dtype=bool) if off_diagonal else np.ones(reference.shape, bool)
    diff = estimate[mask] - reference[mask]
    return float(np.sqrt(np.mean(np.abs(diff) ** 2) / np.mean(np.abs(reference[mask]) ** 2)))


def estimate_to_grid(est: VisibilityEstimate, layout: ArrayLayout, frequency: float,
                     grid: UVGrid, include_zero: bool = False) -> VisibilityGrid:
    """Deposit pair correlations in the u-v bins of their baselines.

    The directed baseline ``a -> b`` (``r_b - r_a``) receives ``values[b, a]``.
    Estimates sharing a bin are averaged. With ``include_zero`` the origin
    bin holds the mean autocorrelation.
    """
    n = layout.n_receivers
    if est.values.shape != (n, n):
        raise DimensionError(f"estimate is {est.values.shape}, layout has {n} receivers")
    lam = wavelength(frequency)
    dx, dy, a, b = baseline_arrays(layout, include_conjugates=True, include_zero=False)
    iu = grid.bin_index(dx / lam)
    iv = grid.bin_index(dy / lam)
    vals = est.values[b, a]
    if include_zero:
        iu = np.concatenate([[0], iu])
        iv = np.concatenate([[0], iv])
        vals = np.concatenate([[np.real(np.diag(est.values)).mean()], vals])
    H = grid.half_extent
    if np.any(np.abs(iu) > H) or np.any(np.abs(iv) > H):
        raise GridOverflowError("pair baseline outside the u-v grid")
    total = np.zeros(grid.shape, dtype=complex)
    count = np.zeros(grid.shape, dtype=np.int64)
    np.add.at(total, (iu + H, iv + H), vals)
    np.add.at(count, (iu + H, iv + H), 1)
    support = count > 0
    total[support] /= count[support]
    return VisibilityGrid(grid, total, "sampled", support)


# --- binary export --------------------------------------------------------


def write_capture(capture: SignalCapture, path) -> Path:
    """``AIMCAP01`` | u32 n_channels | u64 n_samples | f64 sample_rate | f64 carrier |
    channel-major little-endian float32 I/Q pairs."""
    cfg = capture.config
    header = CAPTURE_MAGIC + struct.pack("<IQdd", capture.n_channels, capture.n_samples,
                                         cfg.sample_rate, cfg.carrier)
    body = np.ascontiguousarray(capture.channels).astype("<c8").tobytes()
    path = Path(path)
    path.write_bytes(header + body)
    return path


def read_capture(path, config: NoiseConfig | None = None) -> SignalCapture:
    data = Path(path).read_bytes()
    if data[:8] != CAPTURE_MAGIC:
        raise InvalidArgumentError("not an AIMCAP01 file")
    n_ch, n_s, fs, fc = struct.unpack_from("<IQdd", data, 8)
    off = 8 + struct.calcsize("<IQdd")
    ch = np.frombuffer(data, "<c8", count=n_ch * n_s, offset=off).reshape(n_ch, n_s)
    if config is None:
        config = NoiseConfig(sample_rate=fs, carrier=fc, duration=n_s / fs,
                             bandwidth=fs / 2)
    return SignalCapture(ch.astype(complex), config)
