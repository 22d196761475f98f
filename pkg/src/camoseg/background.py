"""Per-pixel Gaussian-mixture background model (MOG2-style).

Each pixel keeps up to K components with an RGB mean, an isotropic variance
on the per-channel scale, and a weight. The update rule, applied once per
frame in order:

1. A pixel matches its nearest active component when the mean per-channel
   squared distance is within (3 sigma)^2, i.e. dist2 <= 9 * variance.
2. Matched pixels: all active weights move toward the match indicator with
   rate alpha; the matched mean and variance move toward the observation
   with rate alpha; variance never drops below the floor.
3. Unmatched pixels replace their lowest-weight component with a fresh one
   centered on the observation (weight 1 when the pixel had no active
   component yet, else the fixed replacement weight).
4. Weights are renormalized to sum to one per pixel.

The background frame is the mean of the highest-weight component per pixel,
so a fresh model's first background equals the first frame exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .video import Frame

REPLACEMENT_WEIGHT = 0.05

DEFAULT_COMPONENTS = 5
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_VARIANCE_FLOOR = 4.0
DEFAULT_INITIAL_VARIANCE = 15.0


@dataclass
class BackgroundModel:
    """Mixture state for one video; strictly sequential, not shareable."""

    width: int
    height: int
    k: int = DEFAULT_COMPONENTS
    alpha: float = DEFAULT_LEARNING_RATE
    var_floor: float = DEFAULT_VARIANCE_FLOOR
    init_var: float = DEFAULT_INITIAL_VARIANCE
    means: np.ndarray = field(init=False)
    variances: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("need at least one mixture component")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"learning rate must be in (0, 1], got {self.alpha}")
        if self.init_var < self.var_floor:
            raise ValueError("initial variance below the variance floor")
        shape = (self.height, self.width, self.k)
        self.means = np.zeros(shape + (3,), dtype=np.float64)
        self.variances = np.full(shape, self.init_var, dtype=np.float64)
        self.weights = np.zeros(shape, dtype=np.float64)


def bgs_update(model: BackgroundModel, frame: Frame) -> tuple[BackgroundModel, Frame]:
    """Apply one observation; returns the (mutated) model and its background."""
    if (frame.width, frame.height) != (model.width, model.height):
        raise DimensionMismatchError(
            f"frame {frame.width}x{frame.height} vs model {model.width}x{model.height}"
        )
    x = frame.pixels.astype(np.float64)[:, :, None, :]  # (h, w, 1, 3)
    diff = x - model.means  # (h, w, k, 3)
    dist2 = (diff**2).mean(axis=3)  # per-channel scale
    active = model.weights > 0.0

    dist2_act = np.where(active, dist2, np.inf)
    nearest = np.argmin(dist2_act, axis=2)  # (h, w)
    near_oh = np.eye(model.k, dtype=bool)[nearest]  # (h, w, k)
    near_d2 = np.take_along_axis(dist2, nearest[:, :, None], axis=2)[:, :, 0]
    near_var = np.take_along_axis(model.variances, nearest[:, :, None], axis=2)[:, :, 0]
    matched = active.any(axis=2) & (near_d2 <= 9.0 * near_var)

    a = model.alpha
    upd = near_oh & matched[:, :, None]  # matched component per matched pixel
    # weights chase the match indicator at matched pixels
    model.weights = np.where(
        matched[:, :, None] & active,
        model.weights + a * (upd.astype(np.float64) - model.weights),
        model.weights,
    )
    model.means = np.where(upd[:, :, :, None], model.means + a * diff, model.means)
    model.variances = np.where(
        upd, np.maximum(model.var_floor, model.variances + a * (dist2 - model.variances)),
        model.variances,
    )

    # unmatched pixels seed a fresh component in place of the weakest one
    unmatched = ~matched
    if unmatched.any():
        victim = np.argmin(model.weights, axis=2)
        victim_oh = np.eye(model.k, dtype=bool)[victim] & unmatched[:, :, None]
        fresh_weight = np.where(active.any(axis=2), REPLACEMENT_WEIGHT, 1.0)
        model.means = np.where(victim_oh[:, :, :, None], x, model.means)
        model.variances = np.where(victim_oh, model.init_var, model.variances)
        model.weights = np.where(
            victim_oh, fresh_weight[:, :, None], model.weights
        )

    total = model.weights.sum(axis=2, keepdims=True)
    model.weights = model.weights / total

    lead = np.argmax(model.weights, axis=2)
    bg = np.take_along_axis(model.means, lead[:, :, None, None], axis=2)[:, :, 0, :]
    background = Frame(np.clip(np.rint(bg), 0, 255).astype(np.uint8), index=frame.index)
    return model, background
