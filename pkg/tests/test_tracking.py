"""Prompt assembly, center of mass, propagation semantics, and OR merge."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camoseg.detection import Detection
from camoseg.synth.oracles import OracleKnobs, OracleTrackerProvider
from camoseg.tracking import (
    Direction,
    MaskPrompt,
    PromptMode,
    PromptTimeline,
    assemble_prompts,
    center_of_mass,
    merge_bidirectional,
    propagate,
    reverse_series,
)
from camoseg.video import BinaryMask, BoundingBox, IntensityMap, MaskSeries


def intensity_from(arr) -> IntensityMap:
    return IntensityMap(np.asarray(arr, dtype=np.float32))


def mask_of(points, size=8) -> BinaryMask:
    bits = np.zeros((size, size), dtype=bool)
    for x, y in points:
        bits[y, x] = True
    return BinaryMask(bits)


class TestCenterOfMass:
    def test_uniform_box_gives_center(self):
        inten = intensity_from(np.full((8, 8), 10.0))
        com = center_of_mass(inten, BoundingBox(0, 0, 4, 4))
        assert com == pytest.approx((1.5, 1.5))

    def test_single_pixel(self):
        arr = np.zeros((8, 8))
        arr[3, 2] = 42.0
        com = center_of_mass(intensity_from(arr), BoundingBox(0, 0, 8, 8))
        assert com == pytest.approx((2.0, 3.0))

    def test_weighted_mean(self):
        arr = np.zeros((4, 4))
        arr[0, 0] = 1.0
        arr[0, 3] = 3.0
        com = center_of_mass(intensity_from(arr), BoundingBox(0, 0, 4, 4))
        assert com == pytest.approx((2.25, 0.0))

    def test_zero_intensity_gives_none(self):
        inten = intensity_from(np.zeros((4, 4)))
        assert center_of_mass(inten, BoundingBox(0, 0, 4, 4)) is None

    def test_point_always_inside_box(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            arr = rng.random((10, 10))
            box = BoundingBox(2, 3, 7, 9)
            com = center_of_mass(intensity_from(arr), box)
            assert box.x0 <= com[0] <= box.x1
            assert box.y0 <= com[1] <= box.y1


class TestAssemblePrompts:
    def _detections(self, frames):
        return {
            i: (
                Detection(box=BoundingBox(1, 1, 5, 5), score=0.5, label_index=0)
                if i in frames
                else None
            )
            for i in range(10)
        }

    def test_no_detections_empty_timeline(self):
        timeline = assemble_prompts(self._detections(set()), {}, PromptMode.BOX_ONLY)
        assert len(timeline) == 0

    def test_indices_strictly_increasing(self):
        inten = {i: intensity_from(np.ones((8, 8))) for i in range(10)}
        timeline = assemble_prompts(self._detections({3, 7}), inten)
        assert [p.frame_index for p in timeline.prompts] == [3, 7]

    def test_box_only_mode_has_no_points(self):
        inten = {i: intensity_from(np.ones((8, 8))) for i in range(10)}
        timeline = assemble_prompts(self._detections({2}), inten, PromptMode.BOX_ONLY)
        assert timeline.prompts[0].point is None

    def test_point_mode_uses_center_of_mass(self):
        arr = np.zeros((8, 8))
        arr[2, 2] = 5.0
        timeline = assemble_prompts(
            self._detections({0}), {0: intensity_from(arr)}, PromptMode.BOX_PLUS_POINT
        )
        assert timeline.prompts[0].point == pytest.approx((2.0, 2.0))

    def test_point_falls_back_to_box_center(self):
        timeline = assemble_prompts(
            self._detections({0}),
            {0: intensity_from(np.zeros((8, 8)))},
            PromptMode.BOX_PLUS_POINT,
        )
        assert timeline.prompts[0].point == pytest.approx((3.0, 3.0))

    def test_timeline_validates_order(self):
        p = MaskPrompt(3, BoundingBox(0, 0, 2, 2))
        with pytest.raises(ValueError):
            PromptTimeline((p, p))


class TestPropagate:
    def test_forward_from_first_frame_covers_all(self, small_script, small_scene):
        tracker = OracleTrackerProvider(small_script, scene=small_scene)
        box = small_scene.ground_truth.boxes[0]
        timeline = PromptTimeline((MaskPrompt(0, box),))
        series = propagate(tracker, small_scene.sequence, timeline, Direction.FORWARD)
        assert series.frame_indices() == list(range(len(small_scene.sequence)))

    def test_last_frame_prompt_directionality(self, small_script, small_scene):
        tracker = OracleTrackerProvider(small_script, scene=small_scene)
        t = len(small_scene.sequence)
        box = small_scene.ground_truth.boxes[t - 1]
        timeline = PromptTimeline((MaskPrompt(t - 1, box),))
        fwd = propagate(tracker, small_scene.sequence, timeline, Direction.FORWARD)
        assert fwd.frame_indices() == [t - 1]
        bwd = propagate(tracker, small_scene.sequence, timeline, Direction.BACKWARD)
        assert bwd.frame_indices() == list(range(t))

    def test_backward_masks_match_ground_truth(self, small_script, small_scene):
        tracker = OracleTrackerProvider(small_script, scene=small_scene)
        t = len(small_scene.sequence)
        box = small_scene.ground_truth.boxes[t - 1]
        timeline = PromptTimeline((MaskPrompt(t - 1, box),))
        bwd = propagate(tracker, small_scene.sequence, timeline, Direction.BACKWARD)
        for i in bwd.frame_indices():
            assert np.array_equal(
                bwd.masks[i].bits, small_scene.ground_truth.masks[i].bits
            )

    def test_empty_timeline_empty_series(self, small_script, small_scene):
        tracker = OracleTrackerProvider(small_script, scene=small_scene)
        series = propagate(
            tracker, small_scene.sequence, PromptTimeline(()), Direction.FORWARD
        )
        assert len(series) == 0

    def test_prompt_outside_video_rejected(self, small_script, small_scene):
        tracker = OracleTrackerProvider(small_script, scene=small_scene)
        timeline = PromptTimeline((MaskPrompt(99, BoundingBox(0, 0, 2, 2)),))
        with pytest.raises(ValueError):
            propagate(tracker, small_scene.sequence, timeline, Direction.FORWARD)


class TestReverseSeries:
    def test_involution(self):
        rng = np.random.default_rng(0)
        series = MaskSeries(
            {i: BinaryMask(rng.random((4, 4)) < 0.5) for i in (0, 2, 5)}, video_id="v"
        )
        twice = reverse_series(reverse_series(series, 8), 8)
        assert twice.frame_indices() == series.frame_indices()
        for i in series.frame_indices():
            assert np.array_equal(twice.masks[i].bits, series.masks[i].bits)


class TestMergeBidirectional:
    def test_empty_side_is_identity(self):
        rng = np.random.default_rng(1)
        fwd = MaskSeries({0: BinaryMask(rng.random((4, 4)) < 0.5)}, video_id="v")
        out = merge_bidirectional(fwd, MaskSeries({}, video_id="v"))
        assert np.array_equal(out.masks[0].bits, fwd.masks[0].bits)

    def test_union_of_single_pixels(self):
        fwd = MaskSeries({0: mask_of([(1, 1)])}, video_id="v")
        bwd = MaskSeries({0: mask_of([(5, 5)])}, video_id="v")
        merged = merge_bidirectional(fwd, bwd)
        assert merged.masks[0].count() == 2
        assert bool(merged.masks[0].bits[1, 1]) and bool(merged.masks[0].bits[5, 5])

    def test_video_id_mismatch_rejected(self):
        a = MaskSeries({}, video_id="a")
        b = MaskSeries({}, video_id="b")
        with pytest.raises(ValueError):
            merge_bidirectional(a, b)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**20))
    def test_merge_properties(self, seed):
        rng = np.random.default_rng(seed)
        def series():
            frames = rng.choice(6, size=rng.integers(0, 5), replace=False)
            return MaskSeries(
                {int(i): BinaryMask(rng.random((5, 5)) < 0.4) for i in frames},
                video_id="v",
            )
        a, b = series(), series()
        merged = merge_bidirectional(a, b)
        flipped = merge_bidirectional(b, a)
        # superset per frame
        for src in (a, b):
            for i, m in src.masks.items():
                assert (merged.masks[i].bits | m.bits == merged.masks[i].bits).all()
        # commutative
        assert merged.frame_indices() == flipped.frame_indices()
        for i in merged.frame_indices():
            assert np.array_equal(merged.masks[i].bits, flipped.masks[i].bits)
        # idempotent
        again = merge_bidirectional(merged, merged)
        for i in merged.frame_indices():
            assert np.array_equal(again.masks[i].bits, merged.masks[i].bits)
