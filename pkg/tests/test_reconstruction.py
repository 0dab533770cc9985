import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aimfreq.errors import DegenerateInputError
from aimfreq.sampling import (DEFAULT_SUBBANDS, SamplingFunction, UVGrid, additive_sampling,
                              sampling_function)
from aimfreq.reconstruction import (ReconstructedImage, circular_convolution_direct,
                                    image_to_csv, lobe_statistics, local_peaks,
                                    parseval_constant, psf, psf_image, reconstruct,
                                    reconstruct_direct, write_image, write_psf_report)
from aimfreq.scenes import (DirectionGrid, IntensityGrid, scene_fractal_squares, scene_helmet,
                            scene_linear_squares, scene_smooth_blob)
from aimfreq.visibility import (VisibilityGrid, matched_uv_grid, point_source_visibility,
                                sample_visibility, visibility_of)


def pair_sampling(grid: UVGrid, k: int) -> SamplingFunction:
    occ = np.zeros(grid.shape, int)
    H = grid.half_extent
    occ[H + k, H] = occ[H - k, H] = 1
    return SamplingFunction(grid, occ, 1.0)


def test_full_visibility_round_trip_on_matched_grid():
    g = DirectionGrid(65, 65, 0.25, 0.25)
    uv = matched_uv_grid(g)
    for make in (scene_smooth_blob, scene_fractal_squares, scene_linear_squares, scene_helmet):
        scene = make(g)
        rec = reconstruct(visibility_of(scene, uv), g)
        err = np.linalg.norm(rec.complex_values - scene.values) / np.linalg.norm(scene.values)
        assert err <= 1e-6
        assert rec.residual_imag <= 1e-6


def test_fast_matches_direct_sum(layout, uv):
    g = DirectionGrid(32, 32, 0.25, 0.25)
    v = sample_visibility(visibility_of(scene_smooth_blob(g), uv), sampling_function(layout, 38e9, uv))
    fast = reconstruct(v, g).complex_values
    slow = reconstruct_direct(v, g)
    assert np.abs(fast - slow).max() / np.abs(slow).max() <= 1e-8


def test_point_source_reconstruction_is_shifted_psf(layout, uv):
    g = DirectionGrid(64, 64, 0.25, 0.25)
    s = sampling_function(layout, 38e9, uv)
    i0, j0 = 40, 25
    v = sample_visibility(point_source_visibility(uv, g.alpha[i0], g.beta[j0]), s)
    rec = reconstruct(v, g).complex_values
    kernel = psf_image(s, g).complex_values
    oi, oj = g.origin
    di, dj = i0 - oi, j0 - oj
    # rec[i, j] = kernel[i - di, j - dj] wherever both are on the raster
    np.testing.assert_allclose(rec[di:, :dj], kernel[:64 - di, -dj:], atol=1e-9)


def test_flat_psf_from_origin_bin():
    grid = UVGrid(0.5, 4)
    occ = np.zeros(grid.shape, int)
    occ[4, 4] = 1
    rep = psf(SamplingFunction(grid, occ, 1.0), DirectionGrid(16, 16))
    assert np.allclose(rep.psf.values, rep.psf.values[0, 0])
    assert rep.peak_sidelobe_db == -math.inf
    assert rep.main_lobe_width == pytest.approx(1.0)
    assert json.loads(json.dumps(rep.to_dict()))["peak_sidelobe_db"] is None


def test_two_bin_fringe_psf():
    grid = UVGrid(0.5, 20)
    k = 8  # u0 = 4 wavelengths
    g = DirectionGrid(256, 16, 0.5, 0.5)
    rep = psf(pair_sampling(grid, k), g)
    u0 = k * grid.bin_size
    a, _ = g.mesh()
    expected = 2 * grid.bin_size**2 * np.abs(np.cos(2 * np.pi * u0 * a))
    np.testing.assert_allclose(rep.psf.values, expected, atol=1e-12)
    # -3 dB full width of |cos| is a quarter period 1 / (4 u0), half the fringe period
    assert rep.main_lobe_width == pytest.approx(1 / (4 * u0), abs=g.d_alpha)


def test_delta_image_statistics():
    g = DirectionGrid(16, 16)
    vals = np.zeros(g.shape, complex)
    vals[g.origin] = 1.0
    width, side = lobe_statistics(ReconstructedImage(g, vals))
    assert width == pytest.approx(g.d_alpha) and side == -math.inf


def test_flat_image_is_degenerate():
    g = DirectionGrid(8, 8)
    with pytest.raises(DegenerateInputError):
        lobe_statistics(ReconstructedImage(g, np.ones(g.shape, complex)))


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-6, 1e6))
def test_statistics_scale_invariant(scale):
    from aimfreq.geometry import default_layout
    from aimfreq.sampling import default_uv_grid
    layout = default_layout()
    uv = default_uv_grid(layout, DEFAULT_SUBBANDS)
    g = DirectionGrid(48, 48, 0.25, 0.25)
    img = psf_image(sampling_function(layout, 37e9, uv), g)
    scaled = ReconstructedImage(g, img.complex_values * scale)
    w0, s0 = lobe_statistics(img)
    w1, s1 = lobe_statistics(scaled)
    assert w0 == w1 and s1 == pytest.approx(s0, abs=1e-9)


def test_psf_real_peak_at_origin_and_sidelobes_negative(layout, uv):
    g = DirectionGrid(65, 65, 0.25, 0.25)
    parts = [sampling_function(layout, f, uv) for f in DEFAULT_SUBBANDS]
    for s in parts + [additive_sampling(parts)]:
        rep = psf(s, g)
        assert rep.psf.residual_imag <= 1e-9
        assert np.unravel_index(np.argmax(rep.psf.values), g.shape) == g.origin
        assert rep.peak_sidelobe_db < 0


def test_additive_psf_has_lower_sidelobes(layout, uv):
    g = DirectionGrid(129, 129, 0.5, 0.5)
    parts = [sampling_function(layout, f, uv) for f in DEFAULT_SUBBANDS]
    singles = [psf(s, g).peak_sidelobe_db for s in parts]
    added = psf(additive_sampling(parts), g).peak_sidelobe_db
    # frozen own-pipeline values for this grid and layout
    np.testing.assert_allclose(singles, [-3.71, -3.91, -4.15, -4.36], atol=0.01)
    assert added == pytest.approx(-4.40, abs=0.01)
    assert added < np.mean(singles)


def test_convolution_identity_small_grid(layout, uv):
    g = DirectionGrid(32, 32, 1.0, 1.0)  # du * n * d_alpha = 1 for du = 0.5
    rng = np.random.default_rng(3)
    scene = IntensityGrid(g, rng.random(g.shape) * (rng.random(g.shape) > 0.7))
    s = sampling_function(layout, 38e9, uv)
    rec = reconstruct(sample_visibility(visibility_of(scene, uv, allow_aliasing=True), s), g)
    kernel = psf_image(s, g).complex_values
    conv = circular_convolution_direct(scene.values, kernel, g.origin) * g.d_alpha * g.d_beta
    assert np.abs(rec.complex_values - conv).max() / np.abs(conv).max() <= 1e-8


def test_parseval_on_matched_grid():
    g = DirectionGrid(33, 33, 0.25, 0.25)
    uv = matched_uv_grid(g)
    rng = np.random.default_rng(7)
    mask = rng.random(uv.shape) > 0.6
    mask = mask | mask[::-1, ::-1]
    occ = mask.astype(int)
    s = SamplingFunction(uv, occ, 1.0)
    vs = sample_visibility(visibility_of(IntensityGrid(g, rng.random(g.shape)), uv), s)
    rec = reconstruct(vs, g).complex_values
    lhs = np.sum(np.abs(vs.values) ** 2)
    rhs = parseval_constant(g, uv) * np.sum(np.abs(rec) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_local_peaks_orders_by_strength():
    g = DirectionGrid(32, 32)
    vals = np.zeros(g.shape, complex)
    vals[5, 5], vals[20, 10], vals[28, 28] = 1.0, 3.0, 2.0
    pk = local_peaks(ReconstructedImage(g, vals), 2)
    np.testing.assert_allclose(pk, [[g.alpha[20], g.beta[10]], [g.alpha[28], g.beta[28]]])


def test_exports(tmp_path, layout, uv):
    g = DirectionGrid(16, 16, 0.25, 0.25)
    rep = psf(sampling_function(layout, 38e9, uv), g)
    pgm, csv_path = write_image(rep.psf, tmp_path / "psf")
    assert pgm.read_bytes().startswith(b"P5\n16 16\n255\n")
    assert len(csv_path.read_text().splitlines()) == 1 + 256
    assert image_to_csv(rep.psf).startswith("alpha,beta,value\n")
    data = json.loads(write_psf_report(rep, tmp_path / "r.json").read_text())
    assert {"main_lobe_width", "peak_sidelobe_db", "residual_imag", "grid"} <= set(data)
