"""Acceptance gate: one test per acceptance criterion, at stated tolerances.

Run with `pytest tests/test_acceptance.py`; a summary section prints one
PASS/FAIL line per criterion at the end of the session.
"""

from __future__ import annotations

import hashlib
import time
from pathlib import Path

import numpy as np
import pytest

from camoseg.camera import Route, classify_camera_motion, detect_features, estimate_affine, track_features
from camoseg.config import load_preset
from camoseg.cues import (
    FlowEmaState,
    apply_momentum,
    bgs_intensity,
    blend_highlight,
    flow_intensity,
    subtract_mean_flow,
)
from camoseg.metrics import (
    AggregationMode,
    aggregate_metric,
    detection_success_rate,
    e_measure,
    evaluate_dataset,
    frame_dice,
    frame_iou,
    frame_mae,
    frame_scores,
    s_measure,
    weighted_f,
)
from camoseg.pipeline import run_sweep, run_video
from camoseg.providers.base import ProviderEndpoint
from camoseg.providers.conformance import conformance_check
from camoseg.providers.http import HttpFlowProvider, HttpProviderClient
from camoseg.report import emit_report
from camoseg.synth.datasetgen import write_dataset
from camoseg.synth.mockserver import MockProviderServer
from camoseg.synth.oracles import OracleTrackerProvider
from camoseg.synth.scene import SceneScript, generate
from camoseg.tracking import Direction, MaskPrompt, PromptTimeline, merge_bidirectional, propagate
from camoseg.video import BinaryMask, BoundingBox, FlowField, Frame, GroundTruth, MaskSeries, VideoSequence
from conftest import textured_frame
from reference_metrics import ref_e_measure, ref_s_measure, ref_weighted_f

pytestmark = pytest.mark.acceptance

STANDARD_SIZE = 128
STANDARD_FRAMES = 30
STANDARD_VIDEOS = 10


@pytest.fixture(scope="module")
def standard_dataset(tmp_path_factory):
    """The acceptance fixture: 10 videos x 30 frames x 128x128."""
    root = tmp_path_factory.mktemp("acceptance_ds")
    write_dataset(
        root,
        videos=STANDARD_VIDEOS,
        frames=STANDARD_FRAMES,
        size=STANDARD_SIZE,
        seed=0,
        gt_stride=1,
    )
    return root


def dataset_miou(cfg, root: Path) -> float:
    """Frame-then-video mIoU of a single-threshold pipeline pass."""
    from camoseg.datasets import discover_videos, load_ground_truth

    preds: dict[str, MaskSeries] = {}
    gts: dict[str, GroundTruth] = {}
    for video_dir in discover_videos(root):
        result = run_video(cfg, video_dir)
        preds[result.video_id] = result.masks
        gts[result.video_id] = load_ground_truth(video_dir / "GT", video_id=result.video_id)
    report = evaluate_dataset(preds, gts)
    return report.aggregates["frame_then_video"]["iou"]


def test_formula_correctness():
    """Flow/momentum/background intensity formulas on 64x64 fixtures, < 1 s."""
    started = time.perf_counter()
    h = w = 64

    # mean subtraction: uniform field cancels; mean is zero within 1e-6
    uniform = FlowField(np.tile(np.float32([3.0, 4.0]), (h, w, 1)))
    assert np.allclose(subtract_mean_flow(uniform).vectors, 0.0, atol=1e-6)
    rng = np.random.default_rng(0)
    noisy = FlowField(rng.normal(0, 8, (h, w, 2)).astype(np.float32))
    mean = subtract_mean_flow(noisy).vectors.reshape(-1, 2).mean(axis=0)
    assert np.abs(mean).max() < 1e-6

    # momentum: passthrough at the first flow, direct evaluation, fixed point,
    # convex-combination bound
    state = FlowEmaState(momentum=0.9)
    one = FlowField(np.tile(np.float32([1.0, 0.0]), (h, w, 1)))
    zero = FlowField(np.zeros((h, w, 2), dtype=np.float32))
    state, r1 = apply_momentum(state, one, 1)
    assert np.array_equal(r1.vectors, one.vectors)
    state, r2 = apply_momentum(state, zero, 2)
    assert np.allclose(r2.vectors[:, :, 0], 0.9, atol=1e-6)
    state = FlowEmaState(momentum=0.7)
    const = FlowField(np.tile(np.float32([2.0, -3.0]), (h, w, 1)))
    for i in range(1, 6):
        state, rc = apply_momentum(state, const, i)
        assert np.allclose(rc.vectors, const.vectors, atol=1e-5)
    state = FlowEmaState(momentum=0.6)
    a = FlowField(rng.normal(0, 5, (h, w, 2)).astype(np.float32))
    b = FlowField(rng.normal(0, 5, (h, w, 2)).astype(np.float32))
    state, _ = apply_momentum(state, a, 1)
    state, blend = apply_momentum(state, b, 2)
    lo = np.minimum(a.vectors, b.vectors) - 1e-5
    hi = np.maximum(a.vectors, b.vectors) + 1e-5
    assert (blend.vectors >= lo).all() and (blend.vectors <= hi).all()

    # flow intensity: norms {0,5} -> {0,255}; 0/5/10 -> 0/127.5/255;
    # constant field -> zeros; range always [0,255] attaining both ends
    vec = np.zeros((h, w, 2), dtype=np.float32)
    vec[0, 1] = (3.0, 4.0)
    out = flow_intensity(FlowField(vec))
    assert out.values[0, 0] == 0.0 and out.values[0, 1] == 255.0
    vec3 = np.zeros((1, 3, 2), dtype=np.float32)
    vec3[0, 1] = (5.0, 0.0)
    vec3[0, 2] = (10.0, 0.0)
    assert flow_intensity(FlowField(vec3)).values.tolist() == [[0.0, 127.5, 255.0]]
    assert np.all(flow_intensity(uniform).values == 0.0)
    rnd = flow_intensity(noisy)
    assert rnd.values.min() == 0.0 and rnd.values.max() == 255.0

    # background-difference intensity: equal frames -> zeros; single
    # differing pixel -> 255 there, 0 elsewhere; uniform difference -> zeros
    base = np.full((h, w, 3), 50, dtype=np.uint8)
    bumped = base.copy()
    bumped[10, 20] = (60, 70, 80)
    assert np.all(bgs_intensity(Frame(base), Frame(base)).values == 0.0)
    single = bgs_intensity(Frame(bumped), Frame(base))
    assert single.values[10, 20] == 255.0 and np.count_nonzero(single.values) == 1
    assert np.all(
        bgs_intensity(Frame(np.full_like(base, 90)), Frame(base)).values == 0.0
    )

    # highlight blend: w=0 identity, w=1 solid color, half blend on white
    frame = Frame(rng.integers(0, 256, (h, w, 3)).astype(np.uint8))
    from camoseg.video import IntensityMap

    assert np.array_equal(
        blend_highlight(frame, IntensityMap.zeros(w, h)).pixels, frame.pixels
    )
    solid = blend_highlight(frame, IntensityMap(np.full((h, w), 255.0, np.float32)))
    assert np.all(solid.pixels == np.array([0, 0, 255]))
    white = Frame(np.full((h, w, 3), 255, dtype=np.uint8))
    half = blend_highlight(white, IntensityMap(np.full((h, w), 127.5, np.float32)))
    assert np.all(half.pixels == np.array([128, 128, 255]))

    assert time.perf_counter() - started < 1.0


def test_camera_routing():
    """Static -> BGS, 2 px/frame pan -> flow; affine 1e-6; LK within 0.5 px."""
    base = textured_frame(seed=1, size=STANDARD_SIZE)

    started = time.perf_counter()
    static = VideoSequence(
        tuple(Frame(base.pixels, index=i) for i in range(8)), source_id="static"
    )
    decision = classify_camera_motion(static)
    assert decision.route is Route.BACKGROUND_SUBTRACTION
    assert time.perf_counter() - started < 5.0

    started = time.perf_counter()
    pan = VideoSequence(
        tuple(
            Frame(np.roll(base.pixels, 2 * i, axis=1).copy(), index=i) for i in range(8)
        ),
        source_id="pan",
    )
    decision = classify_camera_motion(pan)
    assert decision.route is Route.OPTICAL_FLOW
    assert time.perf_counter() - started < 5.0

    # affine recovery on exact pairs
    rng = np.random.default_rng(2)
    true = np.array([[0.97, 0.03, 5.0], [-0.02, 1.01, -2.0]])
    src = rng.uniform(0, 100, size=(30, 2))
    dst = src @ true[:, :2].T + true[:, 2]
    fit = estimate_affine([((s[0], s[1]), (d[0], d[1])) for s, d in zip(src, dst)])
    assert np.abs(fit.matrix - true).max() < 1e-6

    # LK translation recovery within 0.5 px
    moved = Frame(np.roll(base.pixels, 3, axis=1).copy(), index=1)
    points = [
        p
        for p in detect_features(base, max_points=40)
        if 10 <= p.x < STANDARD_SIZE - 10 and 10 <= p.y < STANDARD_SIZE - 10
    ]
    pairs = track_features(base, moved, points)
    assert len(pairs) >= 5
    for (sx, sy), (dx, dy) in pairs:
        assert abs((dx - sx) - 3.0) <= 0.5
        assert abs(dy - sy) <= 0.5


def test_tracking_semantics(small_script, small_scene):
    """OR-merge properties over 1000 random cases; last-frame fixture exact."""
    rng = np.random.default_rng(3)
    for _ in range(1000):
        frames_a = rng.choice(5, size=rng.integers(0, 4), replace=False)
        frames_b = rng.choice(5, size=rng.integers(0, 4), replace=False)
        a = MaskSeries(
            {int(i): BinaryMask(rng.random((4, 4)) < 0.5) for i in frames_a}, video_id="v"
        )
        b = MaskSeries(
            {int(i): BinaryMask(rng.random((4, 4)) < 0.5) for i in frames_b}, video_id="v"
        )
        merged = merge_bidirectional(a, b)
        for src in (a, b):
            for i, m in src.masks.items():
                assert (merged.masks[i].bits | m.bits == merged.masks[i].bits).all()
        flipped = merge_bidirectional(b, a)
        assert merged.frame_indices() == flipped.frame_indices()
        for i in merged.frame_indices():
            assert np.array_equal(merged.masks[i].bits, flipped.masks[i].bits)
        again = merge_bidirectional(merged, merged)
        for i in merged.frame_indices():
            assert np.array_equal(again.masks[i].bits, merged.masks[i].bits)

    # last-frame detection: forward covers exactly one frame, bidirectional all
    tracker = OracleTrackerProvider(small_script, scene=small_scene)
    t = len(small_scene.sequence)
    timeline = PromptTimeline(
        (MaskPrompt(t - 1, small_scene.ground_truth.boxes[t - 1]),)
    )
    fwd = propagate(tracker, small_scene.sequence, timeline, Direction.FORWARD)
    bwd = propagate(tracker, small_scene.sequence, timeline, Direction.BACKWARD)
    both = merge_bidirectional(fwd, bwd)
    assert fwd.frame_indices() == [t - 1]
    assert both.frame_indices() == list(range(t))


def test_metrics():
    """Perfect scores, iou<=dice on 1000 masks, 1e-9 reference agreement on
    100 instances, the exact aggregation divergence, SR monotone in tau."""
    rng = np.random.default_rng(4)

    gt_bits = np.zeros((16, 16), dtype=bool)
    gt_bits[4:10, 5:12] = True
    gt = BinaryMask(gt_bits)
    assert frame_iou(gt, gt) == 1.0
    assert frame_dice(gt, gt) == 1.0
    assert frame_mae(gt, gt) == 0.0
    assert s_measure(gt_bits.astype(float), gt_bits) == pytest.approx(1.0, abs=1e-9)
    assert e_measure(gt_bits, gt_bits) == pytest.approx(1.0, abs=1e-9)
    assert weighted_f(gt_bits.astype(float), gt_bits) == pytest.approx(1.0, abs=1e-9)

    for _ in range(1000):
        pred = BinaryMask(rng.random((8, 8)) < rng.uniform(0.1, 0.9))
        truth = BinaryMask(rng.random((8, 8)) < rng.uniform(0.1, 0.9))
        assert frame_iou(pred, truth) <= frame_dice(pred, truth) + 1e-12

    for _ in range(100):
        rw, rh = rng.integers(1, 7, size=2)
        x0 = rng.integers(0, 8 - rw)
        y0 = rng.integers(0, 8 - rh)
        ref_gt = np.zeros((8, 8), dtype=bool)
        ref_gt[y0 : y0 + rh, x0 : x0 + rw] = True
        soft = rng.random((8, 8))
        hard = soft >= 0.5
        assert s_measure(soft, ref_gt) == pytest.approx(
            ref_s_measure(soft.tolist(), ref_gt.tolist()), abs=1e-9
        )
        assert e_measure(hard, ref_gt) == pytest.approx(
            ref_e_measure(hard.tolist(), ref_gt.tolist()), abs=1e-9
        )
        assert weighted_f(soft, ref_gt) == pytest.approx(
            ref_weighted_f(soft.tolist(), ref_gt.tolist()), abs=1e-9
        )

    # aggregation divergence: FrameThenVideo 0.5 vs PixelPooled 0.1 exactly
    size = 8
    frame1_pred = np.zeros((size, size), dtype=bool)
    frame1_pred[0, 0] = True
    frame1 = frame_scores(BinaryMask(frame1_pred), BinaryMask(frame1_pred))
    pred2 = np.zeros((size, size), dtype=bool)
    pred2[2, 2:6] = True  # 4 px
    gt2 = np.zeros((size, size), dtype=bool)
    gt2[5, 1:6] = True  # 5 px, disjoint -> union 9
    frame2 = frame_scores(BinaryMask(pred2), BinaryMask(gt2))
    assert (frame1.inter, frame1.union) == (1, 1)
    assert (frame2.inter, frame2.union) == (0, 9)
    by_video = {"v": [frame1, frame2]}
    assert aggregate_metric(by_video, AggregationMode.FRAME_THEN_VIDEO, "iou") == 0.5
    assert aggregate_metric(by_video, AggregationMode.PIXEL_POOLED, "iou") == 0.1

    # SR monotone in tau
    gt_boxes = {}
    pred_boxes = {}
    for i in range(50):
        x0, y0 = rng.uniform(0, 30, size=2)
        gt_boxes[i] = BoundingBox(x0, y0, x0 + 12, y0 + 12)
        dx, dy = rng.uniform(-9, 9, size=2)
        pred_boxes[i] = BoundingBox(x0 + dx, y0 + dy, x0 + 12 + dx, y0 + 12 + dy)
    rates = [
        detection_success_rate(pred_boxes, gt_boxes, float(t))
        for t in np.linspace(0.05, 1.0, 25)
    ]
    assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))


def test_oracle_end_to_end(standard_dataset):
    """Full preset, noiseless oracles, 10x30x128: mIoU >= 0.95 in < 60 s."""
    cfg = load_preset("ours").with_overrides({"run.workers": 1}).validated()
    started = time.perf_counter()
    miou = dataset_miou(cfg, standard_dataset)
    elapsed = time.perf_counter() - started
    assert miou >= 0.95, f"mIoU {miou:.4f} < 0.95"
    assert elapsed < 60.0, f"took {elapsed:.1f} s"


def test_ablation_ordering(standard_dataset):
    """Degraded fixture (miss 0.8, jitter 2): none < forward < bidirectional,
    and the no-cues analogue scores below the full preset."""
    degraded = {"synth.miss_rate": 0.8, "synth.jitter": 2.0}
    scores = {}
    for preset in ("ablation_g", "ablation_h", "ours", "ablation_a"):
        cfg = load_preset(preset).with_overrides(degraded).validated()
        scores[preset] = dataset_miou(cfg, standard_dataset)
    assert scores["ablation_g"] < scores["ablation_h"] < scores["ours"], scores
    assert scores["ablation_a"] < scores["ours"], scores


def test_determinism(tmp_path):
    """Two identical bench runs with mock providers are byte-identical."""
    root = tmp_path / "ds"
    write_dataset(root, videos=3, frames=10, size=64, seed=9)
    cfg = load_preset("ours").with_overrides({"detect.sweep": [0.05, 0.07]}).validated()

    def run(out: Path) -> dict[str, str]:
        emit_report(run_sweep(cfg, root), out)
        digests = {}
        for p in sorted(out.rglob("*")):
            if p.is_file() and p.name != "timings.json":
                digests[str(p.relative_to(out))] = hashlib.sha256(p.read_bytes()).hexdigest()
        return digests

    first = run(tmp_path / "a")
    second = run(tmp_path / "b")
    assert first == second
    assert len(first) >= 5


def test_protocol(small_script, small_scene):
    """Mock server passes the conformance golden suite; flow payloads
    round-trip bit-exactly over HTTP."""
    with MockProviderServer(small_script) as server:
        report = conformance_check(server.base_url)
        assert report.passed, report.summary()

        provider = HttpFlowProvider(
            HttpProviderClient(ProviderEndpoint(base_url=server.base_url))
        )
        flow = provider.compute(small_scene.sequence.frames[0], small_scene.sequence.frames[1])
        assert flow.vectors.tobytes() == small_scene.flows[0].vectors.tobytes()
