import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aimfreq.errors import (DegenerateInputError, DimensionError, IncompatibleGridError,
                            InvalidArgumentError)
from aimfreq.sampling import (DEFAULT_SUBBANDS, SamplingFunction, UVGrid, additive_sampling,
                              sampling_function, unique_sample_count)
from aimfreq.scenes import DirectionGrid, IntensityGrid, scene_smooth_blob
from aimfreq.visibility import (VisibilityGrid, additive_visibility, check_nyquist,
                                hermitian_error, matched_uv_grid, measure_subband_power,
                                point_source_visibility, read_visibility_binary,
                                sample_visibility, visibility_direct, visibility_of,
                                visibility_to_csv, write_visibility_binary)

SMALL = DirectionGrid(32, 32, 0.25, 0.25)
SMALL_UV = UVGrid(0.5, 20)


def delta(grid, i, j):
    vals = np.zeros(grid.shape)
    vals[i, j] = 1.0 / (grid.d_alpha * grid.d_beta)
    return IntensityGrid(grid, vals)


def test_point_source_at_origin_is_constant():
    v = visibility_of(delta(SMALL, *SMALL.origin), SMALL_UV)
    np.testing.assert_allclose(v.values, 1.0, atol=1e-12)


def test_shifted_point_source_follows_shift_theorem():
    i, j = 20, 9
    a0, b0 = SMALL.alpha[i], SMALL.beta[j]
    v = visibility_of(delta(SMALL, i, j), SMALL_UV)
    ref = point_source_visibility(SMALL_UV, a0, b0)
    np.testing.assert_allclose(v.values, ref.values, atol=1e-12)
    np.testing.assert_allclose(np.abs(v.values), 1.0, atol=1e-12)


def test_blob_visibility_real_positive_and_decreasing():
    scene = scene_smooth_blob(SMALL, (0, 0), 0.04)
    v = visibility_of(scene, SMALL_UV)
    o = SMALL_UV.half_extent
    assert abs(v.values[o, o].imag) < 1e-15 and v.values[o, o].real > 0
    radial = np.abs(v.values[o:, o])
    assert np.all(np.diff(radial) < 0)
    # brute-force oracle on the same bins
    bins = np.column_stack([np.arange(0, 21), np.zeros(21, int)])
    np.testing.assert_allclose(v.values[o:, o], visibility_direct(scene, SMALL_UV, bins),
                               rtol=1e-10)


def test_fast_path_matches_double_sum_oracle(rng):
    scene = IntensityGrid(SMALL, rng.random(SMALL.shape))
    fast = visibility_of(scene, SMALL_UV).values
    slow = visibility_direct(scene, SMALL_UV)
    assert np.abs(fast - slow).max() / np.abs(slow).max() < 1e-8


def test_nyquist_guard():
    with pytest.raises(DimensionError):
        visibility_of(scene_smooth_blob(SMALL), UVGrid(0.5, 80))
    check_nyquist(SMALL, SMALL_UV)


def test_matched_grid_requires_odd_square():
    assert matched_uv_grid(DirectionGrid(33, 33, 0.25, 0.25)) == UVGrid(2.0, 16)
    with pytest.raises(DimensionError):
        matched_uv_grid(DirectionGrid(32, 32, 0.25, 0.25))
    with pytest.raises(DimensionError):
        matched_uv_grid(DirectionGrid(33, 35, 0.25, 0.25))


scenes = arrays(float, (12, 12), elements=st.floats(0, 10, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(scenes, scenes)
def test_hermitian_and_linear(a, b):
    g = DirectionGrid(12, 12, 0.25, 0.25)
    uv = UVGrid(0.5, 10)
    va = visibility_of(IntensityGrid(g, a), uv)
    vb = visibility_of(IntensityGrid(g, b), uv)
    vab = visibility_of(IntensityGrid(g, a + b), uv)
    assert hermitian_error(va) <= 1e-9
    scale = max(np.abs(vab.values).max(), 1e-300)
    assert np.abs(vab.values - va.values - vb.values).max() <= 1e-12 * scale + 1e-300


def test_sampling_masks(layout, uv):
    v = point_source_visibility(uv, 0.01, -0.02)
    full = SamplingFunction(uv, np.ones(uv.shape, int), 1.0)
    np.testing.assert_array_equal(sample_visibility(v, full).values, v.values)
    empty = SamplingFunction(uv, np.zeros(uv.shape, int), 1.0)
    assert not np.any(sample_visibility(v, empty).values)
    s37 = sampling_function(layout, 37e9, uv, include_zero=True)
    vs = sample_visibility(v, s37)
    assert np.count_nonzero(vs.values) == unique_sample_count(s37) == 289
    weighted = sample_visibility(v, s37, "multiplicity")
    np.testing.assert_allclose(np.abs(weighted.values), s37.occupancy)
    with pytest.raises(IncompatibleGridError):
        sample_visibility(point_source_visibility(UVGrid(0.5, 10)), s37)


def test_values_must_vanish_outside_support(uv):
    sup = np.zeros(uv.shape, bool)
    with pytest.raises(InvalidArgumentError):
        VisibilityGrid(uv, np.ones(uv.shape), "sampled", sup)


def test_subband_power(layout, uv):
    s = sampling_function(layout, 38e9, uv)
    v = sample_visibility(point_source_visibility(uv, 0.02, 0.0), s)
    assert measure_subband_power(v) == pytest.approx(1.0)
    assert measure_subband_power(v.scaled(5)) == pytest.approx(5.0)
    g = DirectionGrid(64, 64, 0.25, 0.25)
    blob = visibility_of(scene_smooth_blob(g), uv)
    vb = sample_visibility(blob, s)
    occupied = [abs(blob.values[iu + uv.half_extent, iv + uv.half_extent]) ** 2
                for iu, iv in s.occupied_bins().tolist()]
    assert measure_subband_power(vb) == pytest.approx(np.sqrt(np.mean(occupied)), rel=1e-12)
    with pytest.raises(DegenerateInputError):
        measure_subband_power(VisibilityGrid(uv, np.zeros(uv.shape), "sampled",
                                             np.zeros(uv.shape, bool)))
    with pytest.raises(InvalidArgumentError):
        measure_subband_power(blob)


def test_additive_visibility_rules(layout, uv):
    s = sampling_function(layout, 38e9, uv)
    part = sample_visibility(point_source_visibility(uv, 0.02, 0.01), s).scaled(3.0)
    single = additive_visibility([part], normalize=False)
    np.testing.assert_array_equal(single.values, part.values)
    one = additive_visibility([part])
    two = additive_visibility([part, part])
    np.testing.assert_allclose(two.values, 2 * one.values)
    with pytest.raises(InvalidArgumentError):
        additive_visibility([])


def test_additive_support_equals_additive_sampling(layout, uv):
    v = point_source_visibility(uv)
    parts = [sampling_function(layout, f, uv, True) for f in DEFAULT_SUBBANDS]
    add = additive_visibility([sample_visibility(v, s) for s in parts])
    assert np.count_nonzero(add.support) == unique_sample_count(additive_sampling(parts)) == 941


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 3))
def test_normalised_additive_ignores_subband_gain(gain, which):
    from aimfreq.geometry import default_layout
    from aimfreq.sampling import default_uv_grid
    layout = default_layout()
    uv = default_uv_grid(layout, DEFAULT_SUBBANDS)
    v = point_source_visibility(uv, 0.03, -0.01)
    parts = [sample_visibility(v, sampling_function(layout, f, uv)) for f in DEFAULT_SUBBANDS]
    base = additive_visibility(parts)
    parts[which] = parts[which].scaled(gain)
    np.testing.assert_allclose(additive_visibility(parts).values, base.values, atol=1e-12)


def test_export_formats(tmp_path, layout, uv):
    v = sample_visibility(point_source_visibility(uv, 0.02, 0.01),
                          sampling_function(layout, 39e9, uv))
    text = visibility_to_csv(v)
    assert text.splitlines()[0] == "u_bin,v_bin,re,im"
    assert len(text.splitlines()) == 1 + np.count_nonzero(v.support)
    path = write_visibility_binary(v, tmp_path / "v.bin")
    assert path.read_bytes()[:8] == b"AIMVIS01"
    back = read_visibility_binary(path)
    np.testing.assert_array_equal(back.values, v.values)
    np.testing.assert_array_equal(back.support, v.support)
    assert back.kind == "sampled" and back.grid == v.grid
