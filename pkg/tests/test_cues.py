"""Motion-cue formulas: mean subtraction, momentum, intensity maps, blending."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camoseg.cues import (
    FlowEmaState,
    apply_momentum,
    bgs_intensity,
    blend_highlight,
    flow_intensity,
    normalize_intensity,
    subtract_mean_flow,
)
from camoseg.errors import DimensionMismatchError
from camoseg.video import FlowField, Frame, IntensityMap


def uniform_flow(dx: float, dy: float, w: int = 4, h: int = 4) -> FlowField:
    vec = np.empty((h, w, 2), dtype=np.float32)
    vec[:, :, 0] = dx
    vec[:, :, 1] = dy
    return FlowField(vec)


def random_flow(seed: int, w: int = 6, h: int = 6, scale: float = 5.0) -> FlowField:
    rng = np.random.default_rng(seed)
    return FlowField(rng.normal(0, scale, size=(h, w, 2)).astype(np.float32))


class TestSubtractMeanFlow:
    def test_uniform_field_zeroes_out(self):
        out = subtract_mean_flow(uniform_flow(3.0, 4.0))
        assert np.allclose(out.vectors, 0.0, atol=1e-6)

    def test_half_and_half(self):
        vec = np.zeros((2, 2, 2), dtype=np.float32)
        vec[:, 0, 0] = 2.0  # left half moves (2, 0), right half (0, 0)
        out = subtract_mean_flow(FlowField(vec))
        assert np.allclose(out.vectors[:, 0, 0], 1.0, atol=1e-6)
        assert np.allclose(out.vectors[:, 1, 0], -1.0, atol=1e-6)
        assert np.allclose(out.vectors[:, :, 1], 0.0, atol=1e-6)

    def test_idempotent_on_zero_mean(self):
        flow = random_flow(1)
        once = subtract_mean_flow(flow)
        twice = subtract_mean_flow(once)
        assert np.allclose(once.vectors, twice.vectors, atol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_output_mean_is_zero(self, seed):
        out = subtract_mean_flow(random_flow(seed))
        mean = out.vectors.reshape(-1, 2).mean(axis=0)
        assert abs(mean[0]) < 1e-6 and abs(mean[1]) < 1e-6


class TestApplyMomentum:
    def test_zero_momentum_passthrough(self):
        state = FlowEmaState(momentum=0.0)
        for i in range(1, 5):
            flow = random_flow(i)
            state, result = apply_momentum(state, flow, i)
            assert np.array_equal(result.vectors, flow.vectors)

    def test_direct_evaluation(self):
        state = FlowEmaState(momentum=0.9)
        state, r1 = apply_momentum(state, uniform_flow(1.0, 0.0), 1)
        assert np.allclose(r1.vectors[:, :, 0], 1.0)
        state, r2 = apply_momentum(state, uniform_flow(0.0, 0.0), 2)
        assert np.allclose(r2.vectors[:, :, 0], 0.9, atol=1e-6)
        assert np.allclose(r2.vectors[:, :, 1], 0.0)

    def test_constant_flow_fixed_point(self):
        state = FlowEmaState(momentum=0.7)
        for i in range(1, 8):
            state, result = apply_momentum(state, uniform_flow(2.0, -3.0), i)
            assert np.allclose(result.vectors[:, :, 0], 2.0, atol=1e-5)
            assert np.allclose(result.vectors[:, :, 1], -3.0, atol=1e-5)

    def test_dimension_mismatch(self):
        state = FlowEmaState(momentum=0.5)
        state, _ = apply_momentum(state, uniform_flow(1, 1, w=4, h=4), 1)
        with pytest.raises(DimensionMismatchError):
            apply_momentum(state, uniform_flow(1, 1, w=8, h=8), 2)

    def test_momentum_range_validated(self):
        with pytest.raises(ValueError):
            FlowEmaState(momentum=1.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**16), m=st.floats(0.0, 0.99))
    def test_convex_combination_bound(self, seed, m):
        state = FlowEmaState(momentum=m)
        prev = random_flow(seed)
        state, _ = apply_momentum(state, prev, 1)
        curr = random_flow(seed + 1)
        state, result = apply_momentum(state, curr, 2)
        lo = np.minimum(prev.vectors, curr.vectors) - 1e-5
        hi = np.maximum(prev.vectors, curr.vectors) + 1e-5
        assert (result.vectors >= lo).all() and (result.vectors <= hi).all()


class TestFlowIntensity:
    def test_two_value_field(self):
        vec = np.zeros((1, 2, 2), dtype=np.float32)
        vec[0, 1] = (3.0, 4.0)  # norms {0, 5}
        out = flow_intensity(FlowField(vec))
        assert out.values[0, 0] == 0.0
        assert out.values[0, 1] == 255.0

    def test_constant_field_degenerates_to_zero(self):
        out = flow_intensity(uniform_flow(3.0, 4.0))
        assert np.all(out.values == 0.0)

    def test_linear_scaling(self):
        vec = np.zeros((1, 3, 2), dtype=np.float32)
        vec[0, 1] = (5.0, 0.0)
        vec[0, 2] = (10.0, 0.0)
        out = flow_intensity(FlowField(vec))
        assert out.values[0, 0] == pytest.approx(0.0)
        assert out.values[0, 1] == pytest.approx(127.5)
        assert out.values[0, 2] == pytest.approx(255.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_range_and_extremes(self, seed):
        out = flow_intensity(random_flow(seed))
        assert out.values.min() >= 0.0 and out.values.max() <= 255.0
        assert out.values.min() == pytest.approx(0.0, abs=1e-4)
        assert out.values.max() == pytest.approx(255.0, abs=1e-4)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**16), cx=st.floats(-20, 20), cy=st.floats(-20, 20))
    def test_constant_offset_cancelled_by_mean_subtraction(self, seed, cx, cy):
        flow = random_flow(seed)
        shifted = FlowField(flow.vectors + np.array([cx, cy], dtype=np.float32))
        a = flow_intensity(subtract_mean_flow(flow))
        b = flow_intensity(subtract_mean_flow(shifted))
        assert np.allclose(a.values, b.values, atol=1e-3)


class TestBgsIntensity:
    def test_identical_frames_zero(self):
        f = Frame(np.full((4, 4, 3), 100, dtype=np.uint8))
        out = bgs_intensity(f, f)
        assert np.all(out.values == 0.0)

    def test_single_different_pixel(self):
        a = np.full((3, 3, 3), 50, dtype=np.uint8)
        b = a.copy()
        b[1, 1] = (60, 70, 80)  # L1 = 60, unique max
        out = bgs_intensity(Frame(b), Frame(a))
        assert out.values[1, 1] == 255.0
        assert np.count_nonzero(out.values) == 1

    def test_uniform_difference_degenerates(self):
        a = np.full((3, 3, 3), 50, dtype=np.uint8)
        b = np.full((3, 3, 3), 90, dtype=np.uint8)
        out = bgs_intensity(Frame(b), Frame(a))
        assert np.all(out.values == 0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            bgs_intensity(
                Frame(np.zeros((2, 2, 3), dtype=np.uint8)),
                Frame(np.zeros((4, 4, 3), dtype=np.uint8)),
            )


class TestBlendHighlight:
    def test_zero_intensity_is_identity(self):
        frame = Frame(np.random.default_rng(0).integers(0, 255, (4, 4, 3)).astype(np.uint8))
        out = blend_highlight(frame, IntensityMap.zeros(4, 4))
        assert np.array_equal(out.pixels, frame.pixels)

    def test_full_intensity_is_solid_color(self):
        frame = Frame(np.zeros((4, 4, 3), dtype=np.uint8))
        inten = IntensityMap(np.full((4, 4), 255.0, dtype=np.float32))
        out = blend_highlight(frame, inten, color=(0, 0, 255))
        assert np.all(out.pixels[:, :, 2] == 255)
        assert np.all(out.pixels[:, :, :2] == 0)

    def test_half_blend_on_white(self):
        frame = Frame(np.full((2, 2, 3), 255, dtype=np.uint8))
        inten = IntensityMap(np.full((2, 2), 127.5, dtype=np.float32))
        out = blend_highlight(frame, inten, color=(0, 0, 255))
        assert np.all(out.pixels[:, :, 0] == 128)
        assert np.all(out.pixels[:, :, 1] == 128)
        assert np.all(out.pixels[:, :, 2] == 255)


class TestNormalizeScope:
    def test_shared_bounds_scale_together(self):
        a = np.array([[0.0, 5.0]])
        b = np.array([[0.0, 10.0]])
        lo = 0.0
        hi = 10.0
        na = normalize_intensity(a, lo, hi)
        nb = normalize_intensity(b, lo, hi)
        assert na.values[0, 1] == pytest.approx(127.5)
        assert nb.values[0, 1] == pytest.approx(255.0)
