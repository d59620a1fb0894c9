"""Kinematic motion prior for mask propagation.

Each tracked object carries a normalized state (center, size, velocity).
Observed masks update it with an exponential moving average; when the object
is not observed the center is extrapolated with the last velocity.  The state
is turned into a size-adaptive Gaussian map which is added to the raw
segmentation logits in log space::

    Z = Z_raw + beta * log(G + eps)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .masks import as_mask

Vec = tuple[float, float]


@dataclass(frozen=True)
class MpmConfig:
    alpha: float = 0.7          # EMA factor on center and size
    beta: float = 1.0           # prior weight in the logit fusion
    epsilon: float = 1e-6
    sigma_scale: float = 0.5    # sigma = sigma_scale * normalized object size
    # prior applied only when the tracker confidence is below this; None = always
    confidence_gate: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.sigma_scale <= 0:
            raise ValueError(f"sigma_scale must be positive, got {self.sigma_scale}")

    def prior_active(self, confidence: float | None = None) -> bool:
        if self.confidence_gate is None or confidence is None:
            return True
        return confidence < self.confidence_gate


@dataclass(frozen=True)
class KinematicState:
    center: Vec
    size: Vec
    velocity: Vec = (0.0, 0.0)
    last_update_frame: int = 0


def mask_geometry(mask) -> tuple[Vec, Vec]:
    """Normalized centroid and bounding-box extent of a non-empty mask.

    The centroid uses pixel centers, ``(col + 0.5) / W``, so a full-frame
    mask is centered exactly at 0.5.
    """
    m = as_mask(mask)
    h, w = m.shape
    rows, cols = np.nonzero(m)
    if rows.size == 0:
        raise ValueError("cannot initialize from absent object")
    cx = (cols.mean() + 0.5) / w
    cy = (rows.mean() + 0.5) / h
    bw = (cols.max() - cols.min() + 1) / w
    bh = (rows.max() - rows.min() + 1) / h
    return (float(cx), float(cy)), (float(bw), float(bh))


def init_state(mask, frame: int = 0) -> KinematicState:
    center, size = mask_geometry(mask)
    return KinematicState(center, size, (0.0, 0.0), frame)


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def update_state(state: KinematicState, observed, config: MpmConfig, frame: int) -> KinematicState:
    """Advance the state to ``frame``.

    ``observed`` is the predicted mask at ``frame``; None or an empty mask
    means the object is not visible, in which case the center is
    extrapolated by the last velocity (once per elapsed frame) and clamped to
    the image, while size and velocity are kept.
    """
    if frame <= state.last_update_frame:
        raise ValueError(f"frame {frame} does not follow last update at {state.last_update_frame}")
    m = None if observed is None else as_mask(observed)
    if m is None or not m.any():
        steps = frame - state.last_update_frame
        cx = _clamp01(state.center[0] + steps * state.velocity[0])
        cy = _clamp01(state.center[1] + steps * state.velocity[1])
        return KinematicState((cx, cy), state.size, state.velocity, frame)
    (ox, oy), (ow, oh) = mask_geometry(m)
    a = config.alpha
    cx = a * state.center[0] + (1 - a) * ox
    cy = a * state.center[1] + (1 - a) * oy
    w = a * state.size[0] + (1 - a) * ow
    h = a * state.size[1] + (1 - a) * oh
    velocity = (cx - state.center[0], cy - state.center[1])
    return KinematicState((cx, cy), (w, h), velocity, frame)


def predict_state(state: KinematicState, frame: int) -> KinematicState:
    """Extrapolated state at ``frame`` without an observation."""
    return update_state(state, None, MpmConfig(), frame)


def gaussian_map(state: KinematicState, width: int, height: int, config: MpmConfig) -> np.ndarray:
    """Gaussian spatial prior of shape ``(height, width)``, peak 1 at the center.

    Pixel ``(row, col)`` sits at normalized position ``((col + 0.5) / W,
    (row + 0.5) / H)``, the same convention as :func:`mask_geometry`.
    """
    if width < 1 or height < 1:
        raise ValueError(f"dimensions must be positive, got {width}x{height}")
    sx = config.sigma_scale * state.size[0]
    sy = config.sigma_scale * state.size[1]
    if sx <= 0 or sy <= 0:
        raise ValueError(f"degenerate object size {state.size} gives zero sigma")
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    gx = np.exp(-((xs - state.center[0]) ** 2) / (2 * sx * sx))
    gy = np.exp(-((ys - state.center[1]) ** 2) / (2 * sy * sy))
    return np.outer(gy, gx)


def fuse_logits(raw: np.ndarray, prior: np.ndarray, config: MpmConfig) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    prior = np.asarray(prior, dtype=np.float64)
    if raw.shape != prior.shape:
        raise ValueError(f"logit grid {raw.shape} and prior {prior.shape} differ in shape")
    if config.beta == 0:
        return raw.copy()
    return raw + config.beta * np.log(prior + config.epsilon)


@dataclass
class PriorTrack:
    """Output of :func:`track_with_prior` for one object."""

    masks: np.ndarray                     # (T, H, W) bool
    logits: np.ndarray                    # (T, H, W) fused logits
    states: list[KinematicState] = field(default_factory=list)   # state after each frame
    priors: list[KinematicState] = field(default_factory=list)   # state the prior was drawn from


def track_with_prior(raw_logits: np.ndarray, first_mask, config: MpmConfig,
                     confidences=None) -> PriorTrack:
    """Run the prior over a stack of raw logits, frame by frame.

    Frame 0 is the given mask.  At frame ``t`` the prior is drawn from the
    state extrapolated to ``t``, fused into ``raw_logits[t]``, thresholded at
    0, and the resulting mask updates the state.
    """
    raw_logits = np.asarray(raw_logits, dtype=np.float64)
    t_count, h, w = raw_logits.shape
    first = as_mask(first_mask)
    state = init_state(first, 0)
    masks = np.zeros((t_count, h, w), dtype=bool)
    fused = np.empty_like(raw_logits)
    masks[0] = first
    fused[0] = raw_logits[0]
    track = PriorTrack(masks, fused, [state], [state])
    for t in range(1, t_count):
        predicted = predict_state(state, t)
        conf = None if confidences is None else confidences[t]
        if config.prior_active(conf):
            fused[t] = fuse_logits(raw_logits[t], gaussian_map(predicted, w, h, config), config)
        else:
            fused[t] = raw_logits[t]
        masks[t] = fused[t] > 0
        state = update_state(state, masks[t], config, t)
        track.priors.append(predicted)
        track.states.append(state)
    return track


# -- binary logit rasters ---------------------------------------------------

_LOGIT_MAGIC = b"LGT1"


def dumps_logits(grid: np.ndarray) -> bytes:
    """``LGT1`` + little-endian uint32 width, height + float32 row-major values."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError(f"logit grid must be 2-D, got shape {grid.shape}")
    if not np.isfinite(grid).all():
        raise ValueError("logit grid holds non-finite values")
    h, w = grid.shape
    return _LOGIT_MAGIC + struct.pack("<II", w, h) + grid.astype("<f4").tobytes()


def loads_logits(data: bytes) -> np.ndarray:
    if data[:4] != _LOGIT_MAGIC:
        raise ValueError("not a logit raster (bad magic)")
    w, h = struct.unpack("<II", data[4:12])
    body = data[12:]
    if len(body) != 4 * w * h:
        raise ValueError(f"logit raster body has {len(body)} bytes, expected {4 * w * h}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float32)


def write_logits(path, grid: np.ndarray) -> None:
    Path(path).write_bytes(dumps_logits(grid))


def read_logits(path) -> np.ndarray:
    return loads_logits(Path(path).read_bytes())
