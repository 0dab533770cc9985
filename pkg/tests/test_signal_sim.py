import math

import numpy as np
import pytest

from aimfreq.errors import (ConfigurationError, DegenerateInputError, DimensionError,
                            InvalidArgumentError)
from aimfreq.geometry import ArrayLayout, build_circular_array, default_layout
from aimfreq.sampling import DEFAULT_SUBBANDS, UVGrid, sampling_function
from aimfreq.scenes import Scatterer, ScattererScene
from aimfreq.signal_sim import (NoiseConfig, SignalCapture, correlate_capture,
                                estimate_to_grid, expected_correlation, generate_noise,
                                noise_autocorrelation, pair_visibility, read_capture,
                                relative_rms_error, simulate_capture, simulate_correlation,
                                write_capture)

OFF_AXIS = ScattererScene((Scatterer(2.0, -1.0, 20.0),), 20.0)
THREE = ScattererScene((Scatterer(-0.2, 0.1, 2.0), Scatterer(0.15, 0.0, 2.0, 0.7),
                        Scatterer(0.0, -0.2, 2.0, 0.5)), 2.0)


def test_config_invariants():
    assert NoiseConfig(duration=1e-3, sample_rate=100e6).n_samples == 100_000
    with pytest.raises(InvalidArgumentError):
        NoiseConfig(sample_rate=60e6, bandwidth=50e6)
    with pytest.raises(InvalidArgumentError):
        NoiseConfig(duration=1e-9)
    with pytest.raises(InvalidArgumentError):
        NoiseConfig(n_transmitters=0)


def test_noise_reproducible_power_and_independence():
    cfg = NoiseConfig(n_transmitters=2, duration=1e-2, seed=11)
    x = generate_noise(cfg)
    np.testing.assert_array_equal(x, generate_noise(cfg))
    assert x.shape == (2, 1_000_000)
    p = np.mean(np.abs(x) ** 2, axis=1)
    np.testing.assert_allclose(p, 1.0, atol=0.01)
    rho = abs(np.vdot(x[1], x[0])) / math.sqrt(p[0] * p[1]) / x.shape[1]
    assert rho <= 3 / math.sqrt(1e6)


def test_noise_is_band_limited():
    cfg = NoiseConfig(n_transmitters=1, duration=1e-4, block_size=10_000)
    spec = np.abs(np.fft.fft(generate_noise(cfg)[0])) ** 2
    f = np.fft.fftfreq(10_000, 1 / cfg.sample_rate)
    assert spec[np.abs(f) > cfg.bandwidth / 2].max() < 1e-20 * spec.max()


def test_autocorrelation_model_is_unity_at_zero_lag():
    assert noise_autocorrelation(0.0, 1000, 100e6, 50e6) == pytest.approx(1.0)
    assert abs(noise_autocorrelation(1e-6, 1000, 100e6, 50e6)) < 0.05


def test_boresight_scatterer_gives_identical_channels():
    ring = build_circular_array(0.101, 24)
    from aimfreq.geometry import place_transmitters
    layout = place_transmitters(ring, 0.3, 1)
    cfg = NoiseConfig(n_transmitters=1, duration=2e-5, seed=2)
    cap = simulate_capture(layout, ScattererScene((Scatterer(0, 0, 3.0),), 3.0), cfg)
    np.testing.assert_allclose(cap.channels, np.broadcast_to(cap.channels[0], cap.channels.shape),
                               atol=1e-12)


def test_signal_off_correlations_vanish(layout):
    prev = None
    for duration in (1e-4, 1e-3):
        cfg = NoiseConfig(duration=duration, seed=5)
        est = simulate_correlation(layout, OFF_AXIS, cfg, snr_db=-math.inf)
        off = np.abs(est.values[~np.eye(24, dtype=bool)]).max()
        if prev is not None:
            assert off < prev
        prev = off
    assert prev < 5 / math.sqrt(1e5)


def test_off_axis_pair_phase_matches_geometry(layout):
    est = simulate_correlation(layout, OFF_AXIS, NoiseConfig(duration=2e-4, seed=3))
    ref = pair_visibility(layout, OFF_AXIS, 38e9)
    off = ~np.eye(24, dtype=bool)
    err = np.degrees(np.abs(np.angle(est.values[off] * np.conj(ref[off]))))
    assert err.max() < 2.0


def test_correlation_symmetry_and_autocorrelation(layout):
    cap = simulate_capture(layout, THREE, NoiseConfig(duration=1e-4, seed=8), snr_db=10)
    est = correlate_capture(cap)
    np.testing.assert_array_equal(est.values, est.values.conj().T)
    d = np.diag(est.values)
    assert np.all(d.imag == 0) and np.all(d.real > 0)
    assert est.integration_time == pytest.approx(1e-4)


def test_zero_length_capture_rejected():
    cap = SignalCapture(np.zeros((3, 0), complex), NoiseConfig())
    with pytest.raises(DegenerateInputError):
        correlate_capture(cap)


def test_streaming_matches_materialised_capture(layout):
    cfg = NoiseConfig(duration=1e-4, seed=4, block_size=4096)
    a = correlate_capture(simulate_capture(layout, THREE, cfg, snr_db=5)).values
    b = simulate_correlation(layout, THREE, cfg, snr_db=5).values
    c = simulate_correlation(layout, THREE, cfg, snr_db=5, threads=3).values
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(b, c)


def test_three_scatterers_match_ensemble_mean(layout):
    cfg = NoiseConfig(duration=1e-3, seed=9)
    est = simulate_correlation(layout, THREE, cfg)
    bound = 5 / math.sqrt(cfg.bandwidth * cfg.duration)
    assert relative_rms_error(est.values, expected_correlation(layout, THREE, cfg)) <= bound


@pytest.mark.xfail(strict=True, reason="shared illumination from 4 transmitters leaves "
                   "coherent cross terms between scatterers (see decisions ledger)")
def test_three_scatterers_match_point_visibility(layout):
    cfg = NoiseConfig(duration=1e-3, seed=9)
    est = simulate_correlation(layout, THREE, cfg)
    bound = 5 / math.sqrt(cfg.bandwidth * cfg.duration)
    assert relative_rms_error(est.values, pair_visibility(layout, THREE, 38e9)) <= bound


def test_single_scatterer_matches_point_visibility(layout):
    one = ScattererScene((Scatterer(0.3, 0.2, 3.0),), 3.0)
    cfg = NoiseConfig(duration=2e-4, seed=1)
    est = simulate_correlation(layout, one, cfg)
    assert relative_rms_error(est.values, pair_visibility(layout, one, 38e9)) < 0.05


def test_centre_transmitter_negative_control(layout):
    two = ScattererScene((Scatterer(-0.15, 0.0, 1.5), Scatterer(0.15, 0.05, 1.5)), 1.5)
    centre = ArrayLayout(layout.receivers, [[0.0, 0.0]], "centre tx",
                         require_outer_transmitters=False)
    ref_ring = pair_visibility(layout, two, 38e9)
    ring = simulate_correlation(layout, two, NoiseConfig(duration=2e-4, seed=1))
    lone = simulate_correlation(centre, two, NoiseConfig(n_transmitters=1, duration=2e-4, seed=1))
    err_ring = relative_rms_error(ring.values, ref_ring)
    err_lone = relative_rms_error(lone.values, pair_visibility(centre, two, 38e9))
    assert err_lone > 0.9 and err_lone > 2 * err_ring


def test_transmitter_configuration_errors(layout):
    ring = build_circular_array(0.101, 24)
    with pytest.raises(ConfigurationError):
        simulate_capture(ring, THREE, NoiseConfig(n_transmitters=1, duration=1e-5))
    with pytest.raises(ConfigurationError):
        simulate_capture(layout, THREE, NoiseConfig(n_transmitters=2, duration=1e-5))
    with pytest.raises(DimensionError):
        simulate_capture(layout, THREE, NoiseConfig(duration=1e-5), gains=np.ones(3))


def test_snr_sets_noise_power(layout):
    cfg = NoiseConfig(duration=5e-4, seed=6)
    clean = simulate_capture(layout, OFF_AXIS, cfg)
    noisy = simulate_capture(layout, OFF_AXIS, cfg, snr_db=3.0)
    ps = np.mean(np.abs(clean.channels) ** 2)
    pn = np.mean(np.abs(noisy.channels - clean.channels) ** 2)
    assert 10 * math.log10(ps / pn) == pytest.approx(3.0, abs=0.1)


def test_gains_scale_channels(layout):
    cfg = NoiseConfig(duration=2e-5, seed=6)
    g = np.full(24, 0.5 - 2j)
    base = simulate_capture(layout, OFF_AXIS, cfg, snr_db=10)
    scaled = simulate_capture(layout, OFF_AXIS, cfg, snr_db=10, gains=g)
    np.testing.assert_allclose(scaled.channels, g[:, None] * base.channels, rtol=1e-12)


def test_estimate_grid_support(layout, uv):
    est = simulate_correlation(layout, OFF_AXIS, NoiseConfig(duration=2e-5, seed=1))
    for f in DEFAULT_SUBBANDS:
        grid = estimate_to_grid(est, layout, f, uv)
        np.testing.assert_array_equal(grid.support, sampling_function(layout, f, uv).mask)
    pair = ArrayLayout([[0.0, 0.0], [0.05, 0.0]], np.empty((0, 2)))
    from aimfreq.signal_sim import VisibilityEstimate
    vg = estimate_to_grid(VisibilityEstimate(np.ones((2, 2), complex), 1.0), pair, 38e9,
                          UVGrid(0.5, 20))
    assert np.count_nonzero(vg.support) == 2


def test_grid_orientation_matches_visibility_convention(layout, uv):
    # a point source gridded from exact pair visibilities reproduces V = exp(+j2pi(u a + v b))
    from aimfreq.signal_sim import VisibilityEstimate
    one = ScattererScene((Scatterer(0.2, -0.1, 50.0),), 50.0)
    dc = one.direction_cosines()[0]
    vg = estimate_to_grid(VisibilityEstimate(pair_visibility(layout, one, 38e9), 1.0),
                          layout, 38e9, uv)
    u, v = np.meshgrid(uv.coords, uv.coords, indexing="ij")
    phase = np.angle(vg.values[vg.support] * np.exp(-2j * np.pi * (u * dc[0] + v * dc[1]))[vg.support])
    # residual comes only from rounding baselines to bin centres
    assert np.abs(phase).max() < np.pi / 2


def test_capture_binary_round_trip(tmp_path, layout):
    cfg = NoiseConfig(duration=1e-5, seed=2)
    cap = simulate_capture(layout, OFF_AXIS, cfg, snr_db=10)
    path = write_capture(cap, tmp_path / "c.bin")
    raw = path.read_bytes()
    assert raw[:8] == b"AIMCAP01"
    back = read_capture(path, cfg)
    np.testing.assert_allclose(back.channels, cap.channels, rtol=1e-6, atol=1e-6)
    with pytest.raises(InvalidArgumentError):
        (tmp_path / "bad.bin").write_bytes(b"XXXXXXXX")
        read_capture(tmp_path / "bad.bin")
