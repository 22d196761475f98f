"""Metric values, aggregation modes, detection success rate, dataset reports."""

from __future__ import annotations

import numpy as np
import pytest

from camoseg.errors import DimensionMismatchError, UnsupportedAggregationError
from camoseg.metrics import (
    AggregationMode,
    EvalFlags,
    FrameScore,
    aggregate,
    aggregate_metric,
    binarize,
    detection_success_rate,
    e_measure,
    evaluate_dataset,
    frame_dice,
    frame_iou,
    frame_mae,
    frame_scores,
    mask_to_box,
    s_measure,
    weighted_f,
)
from camoseg.video import BinaryMask, BoundingBox, GroundTruth, MaskSeries
from reference_metrics import ref_e_measure, ref_s_measure, ref_weighted_f


def bits(arr) -> BinaryMask:
    return BinaryMask(np.asarray(arr, dtype=bool))


def rect_mask(x0, y0, x1, y1, size=10) -> BinaryMask:
    m = np.zeros((size, size), dtype=bool)
    m[y0:y1, x0:x1] = True
    return BinaryMask(m)


def random_rect_gt(rng, size=8) -> np.ndarray:
    rw, rh = rng.integers(1, size - 1, size=2)
    x0 = rng.integers(0, size - rw)
    y0 = rng.integers(0, size - rh)
    gt = np.zeros((size, size), dtype=bool)
    gt[y0 : y0 + rh, x0 : x0 + rw] = True
    return gt


class TestBinarize:
    def test_above_threshold_true(self):
        out = binarize(np.full((2, 2), 0.6), 0.5)
        assert out.bits.all()

    def test_boundary_is_inclusive(self):
        out = binarize(np.full((2, 2), 0.5), 0.5)
        assert out.bits.all()

    def test_split_values(self):
        out = binarize(np.array([[0.49, 0.51]]), 0.5)
        assert out.bits.tolist() == [[False, True]]


class TestOverlapMetrics:
    def test_perfect_prediction(self):
        m = rect_mask(2, 2, 6, 6)
        assert frame_iou(m, m) == 1.0
        assert frame_dice(m, m) == 1.0
        assert frame_mae(m, m) == 0.0

    def test_disjoint_masks_pixel_counts(self):
        pred = rect_mask(0, 0, 5, 2)  # 10 px
        gt = rect_mask(5, 5, 10, 7)  # 10 px, disjoint; frame is 100 px
        assert frame_iou(pred, gt) == 0.0
        assert frame_dice(pred, gt) == 0.0
        assert frame_mae(pred, gt) == pytest.approx(0.2)

    def test_double_cover(self):
        gt = rect_mask(0, 0, 5, 2)  # n = 10
        pred = rect_mask(0, 0, 5, 4)  # 2n, superset
        assert frame_iou(pred, gt) == pytest.approx(0.5)
        assert frame_dice(pred, gt) == pytest.approx(2.0 / 3.0)

    def test_empty_gt_rules(self):
        empty = bits(np.zeros((4, 4)))
        some = rect_mask(0, 0, 2, 2, size=4)
        assert frame_iou(empty, empty) == 1.0
        assert frame_dice(empty, empty) == 1.0
        assert frame_iou(some, empty) == 0.0
        assert frame_dice(some, empty) == 0.0
        assert frame_mae(empty, empty) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            frame_iou(rect_mask(0, 0, 2, 2, size=4), rect_mask(0, 0, 2, 2, size=6))

    def test_iou_le_dice_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            pred = bits(rng.random((8, 8)) < rng.uniform(0.1, 0.9))
            gt = bits(rng.random((8, 8)) < rng.uniform(0.1, 0.9))
            i = frame_iou(pred, gt)
            d = frame_dice(pred, gt)
            assert i <= d + 1e-12
            if 0.0 < d < 1.0:
                assert i == pytest.approx(d / (2.0 - d))


class TestStructuralMetrics:
    def test_perfect_prediction_is_one(self):
        gt = random_rect_gt(np.random.default_rng(0))
        assert s_measure(gt.astype(float), gt) == pytest.approx(1.0, abs=1e-9)
        assert e_measure(gt, gt) == pytest.approx(1.0, abs=1e-9)
        assert weighted_f(gt.astype(float), gt) == pytest.approx(1.0, abs=1e-9)

    def test_inverted_scores_lower(self):
        gt = random_rect_gt(np.random.default_rng(1))
        inv = (~gt).astype(float)
        assert s_measure(inv, gt) < s_measure(gt.astype(float), gt)
        assert e_measure(~gt, gt) < e_measure(gt, gt)

    def test_empty_pred_nonempty_gt_weighted_f_zero(self):
        gt = random_rect_gt(np.random.default_rng(2))
        assert weighted_f(np.zeros_like(gt, dtype=float), gt) == 0.0

    def test_empty_gt_gate(self):
        empty = np.zeros((8, 8), dtype=bool)
        assert s_measure(np.zeros((8, 8)), empty) == 1.0
        assert s_measure(np.ones((8, 8)) * 0.3, empty) == 0.0
        assert e_measure(empty, empty) == 1.0
        assert e_measure(~empty, empty) == 0.0
        assert weighted_f(np.zeros((8, 8)), empty) == 1.0

    def test_match_reference_implementations(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            gt = random_rect_gt(rng)
            pred = rng.random((8, 8))
            pred_bin = pred >= 0.5
            assert s_measure(pred, gt) == pytest.approx(
                ref_s_measure(pred.tolist(), gt.tolist()), abs=1e-9
            )
            assert e_measure(pred_bin, gt) == pytest.approx(
                ref_e_measure(pred_bin.tolist(), gt.tolist()), abs=1e-9
            )
            assert weighted_f(pred, gt) == pytest.approx(
                ref_weighted_f(pred.tolist(), gt.tolist()), abs=1e-9
            )

    def test_all_values_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            gt = rng.random((8, 8)) < rng.uniform(0.05, 0.95)
            pred = rng.random((8, 8))
            for value in (
                s_measure(pred, gt),
                e_measure(pred >= 0.5, gt),
                weighted_f(pred, gt),
            ):
                assert 0.0 <= value <= 1.0


def scores_from_counts(inter, union, pred, gt, pixels) -> FrameScore:
    iou = 1.0 if gt == 0 and pred == 0 else (0.0 if gt == 0 else inter / union)
    dice = 1.0 if gt == 0 and pred == 0 else (0.0 if gt == 0 else 2 * inter / (pred + gt))
    return FrameScore(
        iou=iou,
        dice=dice,
        mae=(pred + gt - 2 * inter) / pixels,
        s_measure=0.5,
        e_measure=0.5,
        weighted_f=0.5,
        inter=inter,
        union=union,
        pred_count=pred,
        gt_count=gt,
        pixels=pixels,
    )


class TestAggregation:
    def test_single_frame_modes_coincide(self):
        score = scores_from_counts(3, 5, 4, 4, 64)
        by_video = {"v": [score]}
        values = [
            aggregate_metric(by_video, mode, "iou") for mode in AggregationMode
        ]
        assert values[0] == values[1] == values[2] == pytest.approx(0.6)

    def test_frame_then_video_vs_frame_pooled(self):
        a = [scores_from_counts(1, 1, 1, 1, 64)]  # iou 1.0
        b = [scores_from_counts(0, 1, 1, 0, 64), scores_from_counts(0, 1, 1, 0, 64)]
        by_video = {"a": a, "b": b}
        assert aggregate_metric(by_video, AggregationMode.FRAME_THEN_VIDEO, "iou") == pytest.approx(0.5)
        assert aggregate_metric(by_video, AggregationMode.FRAME_POOLED, "iou") == pytest.approx(1.0 / 3.0)

    def test_pixel_pooled_divergence(self):
        frame1 = scores_from_counts(1, 1, 1, 1, 64)  # iou 1
        frame2 = scores_from_counts(0, 9, 4, 5, 64)  # iou 0, union 9
        by_video = {"v": [frame1, frame2]}
        assert aggregate_metric(by_video, AggregationMode.FRAME_THEN_VIDEO, "iou") == pytest.approx(0.5)
        assert aggregate_metric(by_video, AggregationMode.PIXEL_POOLED, "iou") == pytest.approx(0.1)

    def test_pixel_pooled_rejects_structural_metrics(self):
        by_video = {"v": [scores_from_counts(1, 1, 1, 1, 64)]}
        for metric in ("s_measure", "e_measure", "weighted_f"):
            with pytest.raises(UnsupportedAggregationError):
                aggregate_metric(by_video, AggregationMode.PIXEL_POOLED, metric)

    def test_aggregate_skips_unsupported(self):
        by_video = {"v": [scores_from_counts(1, 2, 1, 2, 64)]}
        out = aggregate(by_video, AggregationMode.PIXEL_POOLED)
        assert set(out) == {"iou", "dice", "mae"}

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            aggregate_metric({}, AggregationMode.FRAME_THEN_VIDEO, "iou")


class TestDetectionSuccessRate:
    def test_perfect_boxes(self):
        gt = {i: BoundingBox(0, 0, 10, 10) for i in range(4)}
        assert detection_success_rate(gt, gt, 0.5) == 1.0

    def test_no_predictions(self):
        gt = {i: BoundingBox(0, 0, 10, 10) for i in range(4)}
        assert detection_success_rate({}, gt, 0.5) == 0.0

    def test_half_shifted_boxes(self):
        # dy=2.5 -> IoU 0.6 >= 0.5 ; dy=30/7 -> IoU 0.4 < 0.5
        gt = {i: BoundingBox(0, 0, 10, 10) for i in range(4)}
        preds = {
            0: BoundingBox(0, 2.5, 10, 12.5),
            1: BoundingBox(0, 2.5, 10, 12.5),
            2: BoundingBox(0, 30 / 7, 10, 10 + 30 / 7),
            3: BoundingBox(0, 30 / 7, 10, 10 + 30 / 7),
        }
        for i, expected in ((0, 0.6), (2, 0.4)):
            assert preds[i].iou(gt[i]) == pytest.approx(expected)
        assert detection_success_rate(preds, gt, 0.5) == pytest.approx(0.5)

    def test_monotone_in_tau(self):
        rng = np.random.default_rng(5)
        gt = {}
        preds = {}
        for i in range(40):
            x0, y0 = rng.uniform(0, 20, size=2)
            gt[i] = BoundingBox(x0, y0, x0 + 10, y0 + 10)
            dx, dy = rng.uniform(-8, 8, size=2)
            preds[i] = BoundingBox(x0 + dx, y0 + dy, x0 + 10 + dx, y0 + 10 + dy)
        taus = np.linspace(0.05, 1.0, 20)
        rates = [detection_success_rate(preds, gt, float(t)) for t in taus]
        assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))

    def test_tau_validated(self):
        gt = {0: BoundingBox(0, 0, 1, 1)}
        with pytest.raises(ValueError):
            detection_success_rate({}, gt, 0.0)
        with pytest.raises(ValueError):
            detection_success_rate({}, {}, 0.5)


class TestMaskToBox:
    def test_largest_component_wins(self):
        m = np.zeros((12, 12), dtype=bool)
        m[1:3, 1:3] = True  # 4 px
        m[5:10, 5:10] = True  # 25 px
        box = mask_to_box(BinaryMask(m))
        assert box.as_tuple() == (5.0, 5.0, 10.0, 10.0)

    def test_empty_mask_none(self):
        assert mask_to_box(BinaryMask(np.zeros((4, 4), dtype=bool))) is None


class TestEvaluateDataset:
    def _gt(self, size=10, frames=(0, 5)):
        mask = rect_mask(2, 2, 6, 6, size=size)
        boxes = {i: BoundingBox(2, 2, 6, 6) for i in frames}
        return GroundTruth(masks={i: mask for i in frames}, boxes=boxes, video_id="v")

    def test_perfect_predictions(self):
        gt_a, gt_b = self._gt(), self._gt()
        preds = {
            "a": MaskSeries(dict(gt_a.masks), video_id="a"),
            "b": MaskSeries(dict(gt_b.masks), video_id="b"),
        }
        report = evaluate_dataset(preds, {"a": gt_a, "b": gt_b})
        for mode, values in report.aggregates.items():
            for metric, value in values.items():
                expected = 0.0 if metric == "mae" else 1.0
                assert value == pytest.approx(expected), (mode, metric)
        assert report.sr == 1.0

    def test_missing_video_scores_zero_with_warning(self):
        gt = self._gt()
        report = evaluate_dataset({}, {"v": gt})
        assert report.per_video["v"]["iou"] == 0.0
        assert any("no prediction" in w for w in report.warnings)

    def test_unknown_video_rejected(self):
        gt = self._gt()
        preds = {"other": MaskSeries({}, video_id="other")}
        with pytest.raises(ValueError):
            evaluate_dataset(preds, {"v": gt})

    def test_omit_last_frame_changes_scores(self):
        gt = self._gt(frames=(0, 1, 2))
        masks = dict(gt.masks)
        masks[2] = BinaryMask(np.zeros((10, 10), dtype=bool))  # last frame wrong
        preds = {"v": MaskSeries(masks, video_id="v")}
        keep = evaluate_dataset(preds, {"v": gt}, EvalFlags(omit_last_frame=False))
        drop = evaluate_dataset(preds, {"v": gt}, EvalFlags(omit_last_frame=True))
        assert keep.aggregates["frame_then_video"]["iou"] == pytest.approx(2.0 / 3.0)
        assert drop.aggregates["frame_then_video"]["iou"] == pytest.approx(1.0)

    def test_sr_matches_brute_force(self):
        rng = np.random.default_rng(9)
        size = 24
        gts = {}
        preds = {}
        expected_hits = 0
        expected_total = 0
        tau = 0.5
        for v in range(3):
            masks, boxes, pmasks = {}, {}, {}
            for i in range(5):
                x0, y0 = rng.integers(0, 8, size=2)
                gt_box = (int(x0), int(y0), int(x0) + 8, int(y0) + 8)
                boxes[i] = BoundingBox(*map(float, gt_box))
                masks[i] = rect_mask(*gt_box, size=size)
                dx = int(rng.integers(-6, 7))
                px0 = min(max(0, x0 + dx), size - 8)
                pmasks[i] = rect_mask(px0, y0, px0 + 8, y0 + 8, size=size)
                # brute-force rectangle IoU
                ix = max(0, min(x0 + 8, px0 + 8) - max(x0, px0))
                inter = ix * 8
                union = 64 + 64 - inter
                expected_total += 1
                if inter / union >= tau:
                    expected_hits += 1
            vid = f"v{v}"
            gts[vid] = GroundTruth(masks=masks, boxes=boxes, video_id=vid)
            preds[vid] = MaskSeries(pmasks, video_id=vid)
        report = evaluate_dataset(preds, gts, EvalFlags(dsr_tau=tau))
        assert report.sr == pytest.approx(expected_hits / expected_total)

    def test_report_carries_rule_and_modes(self):
        gt = self._gt()
        preds = {"v": MaskSeries(dict(gt.masks), video_id="v")}
        report = evaluate_dataset(preds, {"v": gt})
        assert "empty gt" in report.empty_gt_rule
        assert set(report.aggregates) == {m.value for m in AggregationMode}
        payload = report.to_json_dict()
        assert payload["n_videos"] == 1 and payload["n_frames"] == 2
