"""Camera-motion classification: route each video to background subtraction
(static camera) or optical flow (moving camera).

Sparse corner features are tracked between consecutive frames with a
pyramidal Lucas-Kanade solver, a per-pair affine transform is fit with
RANSAC, and the transforms are composed from frame 0 onward. The route is
decided by the furthest excursion of the image center under the cumulative
transforms: cameras that never stray more than a small fraction of the frame
diagonal keep a usable static background.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import cv2
import numpy as np
from scipy import ndimage

from .errors import DegenerateGeometryError
from .video import Frame, VideoSequence

MIN_FEATURE_SCORE = 1e-9
LK_WINDOW = (21, 21)
LK_PYRAMID_LEVELS = 2  # maxLevel; 3 levels total
LK_MAX_ITERS = 30
LK_EPSILON = 0.01
LK_FB_THRESHOLD = 1.0  # forward-backward residual, px

DEFAULT_THETA_FRAC = 0.02
DEFAULT_MAX_POINTS = 200
DEFAULT_MIN_DISTANCE = 7.0
DEFAULT_RANSAC_SEED = 7
DEFAULT_RANSAC_ITERS = 100
DEFAULT_RANSAC_THRESHOLD = 2.0


@dataclass(frozen=True)
class FeaturePoint:
    """A trackable corner: sub-pixel position plus its corner strength
    (minimum eigenvalue of the local structure tensor)."""

    x: float
    y: float
    score: float


class Route(Enum):
    OPTICAL_FLOW = "optical_flow"
    BACKGROUND_SUBTRACTION = "background_subtraction"


@dataclass(frozen=True)
class MotionRoute:
    route: Route
    max_excursion: float

    def __post_init__(self) -> None:
        if self.max_excursion < 0:
            raise ValueError("excursion cannot be negative")


@dataclass(frozen=True)
class AffineTransform:
    """2x3 coefficient matrix (a, b, tx; c, d, ty) mapping points in pixels."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.shape != (2, 3):
            raise ValueError(f"affine matrix must be 2x3, got {mat.shape}")
        if not np.isfinite(mat).all():
            raise ValueError("affine matrix has non-finite coefficients")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:, :2]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:, 2]

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.linear.T + self.translation

    def compose(self, inner: "AffineTransform") -> "AffineTransform":
        """Return self after inner: (self . inner)(p) = self(inner(p))."""
        lin = self.linear @ inner.linear
        t = self.linear @ inner.translation + self.translation
        return AffineTransform(np.column_stack([lin, t]))


def _min_eigenvalue_map(luma: np.ndarray) -> np.ndarray:
    """Min eigenvalue of the 3x3-window structure tensor of central-difference
    gradients, zero on the 2-pixel border where the window is undefined."""
    lum = luma.astype(np.float64)
    gx = np.zeros_like(lum)
    gy = np.zeros_like(lum)
    gx[:, 1:-1] = (lum[:, 2:] - lum[:, :-2]) / 2.0
    gy[1:-1, :] = (lum[2:, :] - lum[:-2, :]) / 2.0
    window = np.ones((3, 3))
    sxx = ndimage.convolve(gx * gx, window, mode="constant")
    syy = ndimage.convolve(gy * gy, window, mode="constant")
    sxy = ndimage.convolve(gx * gy, window, mode="constant")
    half_trace = (sxx + syy) / 2.0
    discr = np.sqrt(((sxx - syy) / 2.0) ** 2 + sxy**2)
    eig = half_trace - discr
    eig[:2, :] = 0.0
    eig[-2:, :] = 0.0
    eig[:, :2] = 0.0
    eig[:, -2:] = 0.0
    return eig


def detect_features(
    frame: Frame,
    max_points: int = DEFAULT_MAX_POINTS,
    min_distance: float = DEFAULT_MIN_DISTANCE,
) -> list[FeaturePoint]:
    """Strongest corners first, greedily thinned to the minimum spacing."""
    if max_points < 1:
        raise ValueError("max_points must be >= 1")
    if frame.width < 5 or frame.height < 5:
        raise ValueError(
            f"frame {frame.width}x{frame.height} too small for gradient windows (<5x5)"
        )
    eig = _min_eigenvalue_map(frame.luma())
    ys, xs = np.nonzero(eig > MIN_FEATURE_SCORE)
    if len(ys) == 0:
        return []
    scores = eig[ys, xs]
    order = np.lexsort((xs, ys, -scores))
    kept: list[FeaturePoint] = []
    kept_xy = np.empty((0, 2))
    min_d2 = min_distance * min_distance
    for idx in order:
        p = np.array([xs[idx], ys[idx]], dtype=np.float64)
        if kept_xy.size and (((kept_xy - p) ** 2).sum(axis=1) < min_d2).any():
            continue
        kept.append(FeaturePoint(float(p[0]), float(p[1]), float(scores[idx])))
        kept_xy = np.vstack([kept_xy, p])
        if len(kept) >= max_points:
            break
    return kept


def _gray_u8(frame: Frame) -> np.ndarray:
    return np.clip(np.rint(frame.luma()), 0, 255).astype(np.uint8)


def track_features(
    prev: Frame, curr: Frame, points: list[FeaturePoint]
) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Track points from prev to curr with pyramidal Lucas-Kanade.

    Points whose forward-backward residual exceeds the threshold, that the
    solver loses, or that leave the frame are dropped (no error raised).
    """
    if (prev.width, prev.height) != (curr.width, curr.height):
        raise ValueError("frames must share dimensions")
    if not points:
        return []
    g0 = _gray_u8(prev)
    g1 = _gray_u8(curr)
    p0 = np.array([[fp.x, fp.y] for fp in points], dtype=np.float32).reshape(-1, 1, 2)
    lk = dict(
        winSize=LK_WINDOW,
        maxLevel=LK_PYRAMID_LEVELS,
        criteria=(
            cv2.TERM_CRITERIA_EPS | cv2.TERM_CRITERIA_COUNT,
            LK_MAX_ITERS,
            LK_EPSILON,
        ),
    )
    p1, st_f, _ = cv2.calcOpticalFlowPyrLK(g0, g1, p0, None, **lk)
    p0r, st_b, _ = cv2.calcOpticalFlowPyrLK(g1, g0, p1, None, **lk)
    fb = np.linalg.norm((p0 - p0r).reshape(-1, 2), axis=1)
    ok = (
        (st_f.ravel() == 1)
        & (st_b.ravel() == 1)
        & (fb < LK_FB_THRESHOLD)
        & (p1[:, 0, 0] >= 0)
        & (p1[:, 0, 0] < curr.width)
        & (p1[:, 0, 1] >= 0)
        & (p1[:, 0, 1] < curr.height)
    )
    out = []
    for i, good in enumerate(ok):
        if good:
            out.append(
                (
                    (float(p0[i, 0, 0]), float(p0[i, 0, 1])),
                    (float(p1[i, 0, 0]), float(p1[i, 0, 1])),
                )
            )
    return out


def _fit_affine_lstsq(src: np.ndarray, dst: np.ndarray) -> AffineTransform:
    n = len(src)
    design = np.hstack([src, np.ones((n, 1))])
    coef, _, rank, _ = np.linalg.lstsq(design, dst, rcond=None)
    if rank < 3:
        raise DegenerateGeometryError("point pairs are collinear")
    mat = coef.T  # rows: (a, b, tx), (c, d, ty)
    if abs(np.linalg.det(mat[:, :2])) < 1e-12:
        raise DegenerateGeometryError("singular linear part")
    return AffineTransform(mat)


def estimate_affine(
    pairs: list[tuple[tuple[float, float], tuple[float, float]]],
    seed: int = DEFAULT_RANSAC_SEED,
    iterations: int = DEFAULT_RANSAC_ITERS,
    inlier_threshold: float = DEFAULT_RANSAC_THRESHOLD,
) -> AffineTransform:
    """RANSAC around a least-squares affine fit; returns the inlier refit.

    Needs at least three non-collinear pairs.
    """
    if len(pairs) < 3:
        raise DegenerateGeometryError(f"need >= 3 point pairs, got {len(pairs)}")
    src = np.array([p[0] for p in pairs], dtype=np.float64)
    dst = np.array([p[1] for p in pairs], dtype=np.float64)
    rng = np.random.default_rng(seed)
    best_inliers: np.ndarray | None = None
    best_count = 0
    for _ in range(max(iterations, 1)):
        sample = rng.choice(len(pairs), size=3, replace=False)
        try:
            model = _fit_affine_lstsq(src[sample], dst[sample])
        except DegenerateGeometryError:
            continue
        err = np.linalg.norm(model.apply(src) - dst, axis=1)
        inliers = err <= inlier_threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < 3:
        return _fit_affine_lstsq(src, dst)
    return _fit_affine_lstsq(src[best_inliers], dst[best_inliers])


def classify_camera_motion(
    seq: VideoSequence,
    theta_frac: float = DEFAULT_THETA_FRAC,
    max_points: int = DEFAULT_MAX_POINTS,
    min_distance: float = DEFAULT_MIN_DISTANCE,
    ransac_seed: int = DEFAULT_RANSAC_SEED,
) -> MotionRoute:
    """Compose per-pair affines from frame 0 and measure how far the image
    center ever strays; small excursions keep the background-subtraction
    route, anything else (or a collapsed track) goes to optical flow.
    """
    center = np.array([seq.width / 2.0, seq.height / 2.0])
    cumulative = AffineTransform.identity()
    excursion = 0.0
    degenerate = 0
    n_pairs = len(seq) - 1
    for i in range(n_pairs):
        prev, curr = seq.frames[i], seq.frames[i + 1]
        pair_transform = AffineTransform.identity()
        try:
            feats = detect_features(prev, max_points=max_points, min_distance=min_distance)
            pairs = track_features(prev, curr, feats)
            pair_transform = estimate_affine(pairs, seed=ransac_seed)
        except (DegenerateGeometryError, ValueError):
            degenerate += 1
        cumulative = pair_transform.compose(cumulative)
        moved = cumulative.apply(center)[0]
        excursion = max(excursion, float(np.linalg.norm(moved - center)))
    if degenerate * 2 > n_pairs:
        # feature tracking collapsed; flow degrades gracefully, BGS does not
        return MotionRoute(Route.OPTICAL_FLOW, excursion)
    diagonal = math.hypot(seq.width, seq.height)
    if excursion < theta_frac * diagonal:
        return MotionRoute(Route.BACKGROUND_SUBTRACTION, excursion)
    return MotionRoute(Route.OPTICAL_FLOW, excursion)
