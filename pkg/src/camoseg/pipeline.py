"""Per-video pipeline orchestration and dataset sweeps.

One video flows through: camera-motion routing -> per-frame intensity cues
(flow or background subtraction) -> highlight blending -> per-frame
open-vocabulary detection -> prompt assembly -> propagation (none / forward
/ bidirectional with OR merge). A sweep repeats detection and tracking per
detector threshold, reusing the (threshold-independent) cues, and scores
each pass against ground truth.

Parallelism unit is the video; within-video stages are sequential because
momentum and background state are order-dependent.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .background import BackgroundModel, bgs_update
from .camera import classify_camera_motion
from .config import PipelineConfig
from .cues import (
    FlowEmaState,
    HighlightedFrame,
    apply_momentum,
    bgs_difference,
    blend_highlight,
    flow_magnitude,
    normalize_intensity,
    subtract_mean_flow,
)
from .datasets import discover_videos, load_ground_truth, load_sequence
from .detection import Detection, build_prompt_set, detect_frame, select_top_box
from .errors import ConfigError, ProviderError
from .metrics import AggregationMode, EvalFlags, EvalReport, evaluate_dataset
from .providers.base import (
    DetectorProvider,
    FlowProvider,
    ProviderCapabilities,
    ProviderEndpoint,
    SegmenterProvider,
)
from .providers.http import (
    HttpDetectorProvider,
    HttpFlowProvider,
    HttpProviderClient,
    HttpSegmenterProvider,
)
from .synth.oracles import OracleKnobs, make_oracle_providers
from .synth.scene import SceneScript
from .tracking import (
    Direction,
    PromptMode,
    assemble_prompts,
    merge_bidirectional,
    propagate,
)
from .video import GroundTruth, IntensityMap, MaskSeries, VideoSequence

MOCK_SCHEME = "mock:"


@dataclass(frozen=True)
class ProviderBundle:
    flow: FlowProvider
    detector: DetectorProvider
    segmenter: SegmenterProvider
    models: dict[str, str]


@dataclass(frozen=True)
class PreparedVideo:
    """Threshold-independent per-video state, reusable across a sweep."""

    seq: VideoSequence
    route: str
    excursion: float | None
    intensities: dict[int, IntensityMap]
    highlighted: dict[int, HighlightedFrame]


@dataclass
class VideoResult:
    video_id: str
    masks: MaskSeries
    route: str
    detections: dict[int, Detection | None] = field(default_factory=dict)
    error: str | None = None


@dataclass(frozen=True)
class RunRecord:
    """Everything a sweep produced; immutable once assembled."""

    version: str
    config_snapshot: dict
    provider_models: dict[str, str]
    thresholds: tuple[float, ...]
    reports: dict[str, EvalReport]
    failures: dict[str, dict[str, str]]
    routes: dict[str, dict]
    best_global: dict[str, dict]
    per_video_best: dict
    timings: dict[str, float]


def threshold_key(threshold: float) -> str:
    return format(threshold, "g")


def _oracle_knobs(config: PipelineConfig) -> OracleKnobs:
    s = config.synth
    return OracleKnobs(
        miss_rate=s.miss_rate,
        jitter=s.jitter,
        score=s.score,
        drift=s.drift,
        flow_sigma=s.flow_sigma,
        distractor_score=s.distractor_score,
        seed=s.seed,
    )


def build_providers(config: PipelineConfig, video_dir: str | Path | None) -> ProviderBundle:
    """Resolve the configured provider endpoints for one video.

    The ``mock:`` scheme builds scene oracles from the video's scene.json;
    http(s) URLs build wire clients, shared when they point at one base URL.
    """
    specs = {
        "flow": config.providers.flow,
        "detector": config.providers.detector,
        "segmenter": config.providers.segmenter,
    }
    oracles: dict[str, object] = {}
    oracle_caps: ProviderCapabilities | None = None
    if any(s == MOCK_SCHEME for s in specs.values()):
        if video_dir is None:
            raise ConfigError("mock providers need a video directory with scene.json")
        script_path = Path(video_dir) / "scene.json"
        if not script_path.is_file():
            raise ConfigError(
                f"mock providers need {script_path}; generate the dataset with 'camoseg synth'"
            )
        script = SceneScript.load(script_path)
        flow_o, det_o, seg_o = make_oracle_providers(script, _oracle_knobs(config))
        oracles = {"flow": flow_o, "detector": det_o, "segmenter": seg_o}
        oracle_caps = det_o.capabilities()

    clients: dict[str, HttpProviderClient] = {}

    def http_client(url: str) -> HttpProviderClient:
        if url not in clients:
            clients[url] = HttpProviderClient(
                ProviderEndpoint(
                    base_url=url,
                    timeout=config.providers.timeout,
                    max_retries=config.providers.max_retries,
                )
            )
        return clients[url]

    http_roles = {
        "flow": HttpFlowProvider,
        "detector": HttpDetectorProvider,
        "segmenter": HttpSegmenterProvider,
    }
    chosen: dict[str, object] = {}
    models: dict[str, str] = {}
    for role, spec in specs.items():
        if spec == MOCK_SCHEME:
            chosen[role] = oracles[role]
            assert oracle_caps is not None
            models[role] = (oracle_caps.models or {}).get(role, oracle_caps.model_name)
        elif spec.startswith("http://") or spec.startswith("https://"):
            client = http_client(spec)
            chosen[role] = http_roles[role](client)
            try:
                remote = client.capabilities()
                models[role] = (remote.models or {}).get(role, remote.model_name)
            except ProviderError:
                models[role] = "unknown"
        else:
            raise ConfigError(
                f"providers.{role} must be 'mock:' or an http(s) URL, got {spec!r}"
            )
    return ProviderBundle(
        flow=chosen["flow"],  # type: ignore[arg-type]
        detector=chosen["detector"],  # type: ignore[arg-type]
        segmenter=chosen["segmenter"],  # type: ignore[arg-type]
        models=models,
    )


def _normalize_all(
    raw_maps: list, scope: str
) -> list[IntensityMap]:
    if scope == "video":
        lo = min(float(m.min()) for m in raw_maps)
        hi = max(float(m.max()) for m in raw_maps)
        return [normalize_intensity(m, lo, hi) for m in raw_maps]
    return [normalize_intensity(m) for m in raw_maps]


def _flow_intensities(
    config: PipelineConfig, seq: VideoSequence, provider: FlowProvider
) -> dict[int, IntensityMap]:
    state = FlowEmaState(momentum=config.cues.momentum)
    raw_maps = []
    for i in range(len(seq) - 1):
        flow = provider.compute(seq.frames[i], seq.frames[i + 1])
        if config.cues.mean_subtract:
            flow = subtract_mean_flow(flow)
        if config.cues.use_momentum:
            state, flow = apply_momentum(state, flow, i + 1)
        raw_maps.append(flow_magnitude(flow))
    maps = _normalize_all(raw_maps, config.cues.normalize_scope)
    intensities = {i: m for i, m in enumerate(maps)}
    intensities[len(seq) - 1] = maps[-1]  # last frame reuses the final flow
    return intensities


def _bgs_intensities(
    config: PipelineConfig, seq: VideoSequence
) -> dict[int, IntensityMap]:
    model = BackgroundModel(
        width=seq.width,
        height=seq.height,
        k=config.bgs.k,
        alpha=config.bgs.alpha,
        var_floor=config.bgs.var_floor,
        init_var=config.bgs.init_var,
    )
    raw_maps = []
    for frame in seq.frames:
        model, background = bgs_update(model, frame)
        raw_maps.append(bgs_difference(frame, background))
    maps = _normalize_all(raw_maps, config.cues.normalize_scope)
    return dict(enumerate(maps))


def prepare_video(
    config: PipelineConfig, seq: VideoSequence, bundle: ProviderBundle
) -> PreparedVideo:
    """Route the video and compute its per-frame cues and highlighted frames."""
    motion = config.cues.motion
    excursion: float | None = None
    if motion == "none":
        route = "none"
        zeros = IntensityMap.zeros(seq.width, seq.height)
        intensities = {i: zeros for i in range(len(seq))}
    else:
        if motion == "flow":
            route = "optical_flow"
        else:
            decision = classify_camera_motion(
                seq,
                theta_frac=config.camera.theta_cam_frac,
                max_points=config.camera.max_points,
                min_distance=config.camera.min_distance,
                ransac_seed=config.camera.ransac_seed,
            )
            route = decision.route.value
            excursion = decision.max_excursion
        if route == "optical_flow":
            intensities = _flow_intensities(config, seq, bundle.flow)
        else:
            intensities = _bgs_intensities(config, seq)
    color = tuple(int(c) for c in config.cues.highlight_color)
    highlighted = {
        i: blend_highlight(seq.frames[i], intensities[i], color) for i in range(len(seq))
    }
    return PreparedVideo(
        seq=seq,
        route=route,
        excursion=excursion,
        intensities=intensities,
        highlighted=highlighted,
    )


def detect_video(
    config: PipelineConfig,
    prepared: PreparedVideo,
    detector: DetectorProvider,
    threshold: float,
) -> dict[int, Detection | None]:
    """Best positive box per frame at one detector threshold."""
    prompts = build_prompt_set(
        variant=config.detect.prompt_variant,
        positive=config.detect.positive or None,
        negatives=config.detect.negatives or None,
    )
    out: dict[int, Detection | None] = {}
    for i in range(len(prepared.seq)):
        dets = detect_frame(detector, prepared.highlighted[i], prompts, threshold)
        out[i] = select_top_box(dets)
    return out


def track_video(
    config: PipelineConfig,
    prepared: PreparedVideo,
    segmenter: SegmenterProvider,
    detections: dict[int, Detection | None],
) -> MaskSeries:
    """Prompt assembly plus the configured propagation mode."""
    timeline = assemble_prompts(
        detections, prepared.intensities, PromptMode(config.track.prompt_mode)
    )
    seq = prepared.seq
    if not timeline:
        return MaskSeries({}, video_id=seq.source_id)
    forward = propagate(segmenter, seq, timeline, Direction.FORWARD)
    mode = config.track.mode
    if mode == "none":
        detected = {p.frame_index for p in timeline.prompts}
        return MaskSeries(
            {i: m for i, m in forward.masks.items() if i in detected},
            video_id=seq.source_id,
        )
    if mode == "forward":
        return forward
    backward = propagate(segmenter, seq, timeline, Direction.BACKWARD)
    return merge_bidirectional(forward, backward)


def run_video(
    config: PipelineConfig,
    video_dir: str | Path,
    threshold: float | None = None,
    bundle: ProviderBundle | None = None,
) -> VideoResult:
    """The full pipeline for one video directory."""
    video_dir = Path(video_dir)
    seq = load_sequence(video_dir / config.io.imgs_subdir)
    if bundle is None:
        bundle = build_providers(config, video_dir)
    prepared = prepare_video(config, seq, bundle)
    thr = config.detect.threshold if threshold is None else threshold
    detections = detect_video(config, prepared, bundle.detector, thr)
    masks = track_video(config, prepared, bundle.segmenter, detections)
    return VideoResult(
        video_id=seq.source_id,
        masks=masks,
        route=prepared.route,
        detections=detections,
    )


def _eval_flags(config: PipelineConfig) -> EvalFlags:
    return EvalFlags(
        mode=AggregationMode(config.metrics.agg_mode),
        omit_last_frame=config.metrics.omit_last_frame,
        binarize_threshold=config.metrics.bin_threshold,
        dsr_tau=config.metrics.dsr_tau,
    )


def _process_video(
    config: PipelineConfig, video_dir: Path, thresholds: tuple[float, ...]
) -> tuple[str, GroundTruth | None, dict[float, MaskSeries], dict, str | None, float, dict]:
    """Worker body: prepare once, detect/track per threshold."""
    started = time.perf_counter()
    vid = video_dir.name
    try:
        seq = load_sequence(video_dir / config.io.imgs_subdir)
        gt = load_ground_truth(
            video_dir / config.io.gt_subdir,
            stride_hint=config.io.gt_stride,
            expect_size=(seq.width, seq.height),
            video_id=vid,
        )
        bundle = build_providers(config, video_dir)
        prepared = prepare_video(config, seq, bundle)
        preds: dict[float, MaskSeries] = {}
        for thr in thresholds:
            detections = detect_video(config, prepared, bundle.detector, thr)
            preds[thr] = track_video(config, prepared, bundle.segmenter, detections)
        route_info = {"route": prepared.route, "excursion": prepared.excursion}
        elapsed = time.perf_counter() - started
        return vid, gt, preds, route_info, None, elapsed, bundle.models
    except Exception as exc:  # per-video failures must not sink the run
        elapsed = time.perf_counter() - started
        return vid, None, {}, {}, f"{type(exc).__name__}: {exc}", elapsed, {}


def run_sweep(config: PipelineConfig, dataset_root: str | Path) -> RunRecord:
    """One full pipeline pass and evaluation per sweep threshold."""
    thresholds = tuple(config.detect.sweep)
    if not thresholds:
        raise ConfigError("detect.sweep must be non-empty")
    video_dirs = discover_videos(dataset_root, config.io.imgs_subdir)
    results = []
    if config.run.workers > 1:
        with ThreadPoolExecutor(max_workers=config.run.workers) as pool:
            results = list(
                pool.map(lambda d: _process_video(config, d, thresholds), video_dirs)
            )
    else:
        results = [_process_video(config, d, thresholds) for d in video_dirs]
    results.sort(key=lambda r: r[0])

    gts: dict[str, GroundTruth] = {}
    preds_by_thr: dict[float, dict[str, MaskSeries]] = {t: {} for t in thresholds}
    failures: dict[str, dict[str, str]] = {threshold_key(t): {} for t in thresholds}
    routes: dict[str, dict] = {}
    timings: dict[str, float] = {}
    models: dict[str, str] = {}
    for vid, gt, preds, route_info, error, seconds, video_models in results:
        timings[vid] = seconds
        if error is not None:
            for t in thresholds:
                failures[threshold_key(t)][vid] = error
            continue
        if not models:
            models = video_models
        gts[vid] = gt
        routes[vid] = route_info
        for t in thresholds:
            preds_by_thr[t][vid] = preds[t]
    if not gts:
        raise ConfigError(
            "every video failed; first error: "
            + next(iter(failures[threshold_key(thresholds[0])].values()), "none")
        )

    flags = _eval_flags(config)
    reports = {
        threshold_key(t): evaluate_dataset(preds_by_thr[t], gts, flags) for t in thresholds
    }
    best_global = _best_global(reports, config.metrics.agg_mode)
    per_video_best = _per_video_best(reports)
    return RunRecord(
        version=__version__,
        config_snapshot=config.snapshot(),
        provider_models=models,
        thresholds=thresholds,
        reports=reports,
        failures=failures,
        routes=routes,
        best_global=best_global,
        per_video_best=per_video_best,
        timings=timings,
    )


def _best_global(reports: dict[str, EvalReport], agg_mode: str) -> dict[str, dict]:
    """Single best sweep threshold per metric, under the declared aggregation."""
    best: dict[str, dict] = {}
    for metric in ("iou", "dice", "mae", "s_measure", "e_measure", "weighted_f"):
        entries = []
        for key, report in reports.items():
            value = report.aggregates.get(agg_mode, {}).get(metric)
            if value is not None:
                entries.append((key, value))
        if not entries:
            continue
        pick = min(entries, key=lambda e: e[1]) if metric == "mae" else max(
            entries, key=lambda e: e[1]
        )
        best[metric] = {"threshold": pick[0], "value": pick[1]}
    return best


def _per_video_best(reports: dict[str, EvalReport]) -> dict:
    """Alternative reading: the best threshold chosen per video (by IoU)."""
    videos: dict[str, dict] = {}
    all_vids = sorted({v for r in reports.values() for v in r.per_video})
    for vid in all_vids:
        entries = [
            (key, r.per_video[vid]["iou"]) for key, r in reports.items() if vid in r.per_video
        ]
        key, value = max(entries, key=lambda e: e[1])
        videos[vid] = {"threshold": key, "iou": value}
    mean = (
        sum(v["iou"] for v in videos.values()) / len(videos) if videos else None
    )
    return {"videos": videos, "mean_iou": mean}
