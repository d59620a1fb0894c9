"""Region similarity (J), boundary accuracy (F), adaptive boundary accuracy
and their per-sequence and dataset aggregates.

Conventions:

* When ground truth and prediction are both empty every score is 1.0
  (``MetricConfig.empty_score``); exactly one empty scores 0.0.
* Boundaries use 4-connectivity; a boundary pixel matches when some boundary
  pixel of the other mask lies within the Euclidean tolerance.
* Frame 0 carries the given annotation and is not evaluated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .masks import VideoSequence, as_mask, boundary_pixels, bounding_box, check_same_shape


@dataclass(frozen=True)
class MetricConfig:
    tolerance_frac: float = 0.008   # classic F tolerance, fraction of the image diagonal
    k_adapt: float = 0.1            # adaptive tolerance = k_adapt * sqrt(object area)
    empty_score: float = 1.0        # score for a frame where gt and prediction are both empty

    def __post_init__(self):
        if self.tolerance_frac < 0 or self.k_adapt < 0:
            raise ValueError("tolerance fractions must be non-negative")
        if not 0.0 <= self.empty_score <= 1.0:
            raise ValueError("empty_score must lie in [0, 1]")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def default_tolerance(width: int, height: int, frac: float = 0.008) -> int:
    """Classic boundary tolerance in pixels: ``round(frac * diagonal)``, at least 1."""
    if width < 1 or height < 1:
        raise ValueError(f"dimensions must be positive, got {width}x{height}")
    return max(1, round_half_up(frac * math.hypot(width, height)))


def adaptive_tolerance(area: int, k_adapt: float = 0.1) -> int:
    return max(1, round_half_up(k_adapt * math.sqrt(area)))


def region_similarity(gt, pred, empty: float = 1.0) -> float:
    """Intersection over union of two masks."""
    g, p = as_mask(gt), as_mask(pred)
    check_same_shape(g, p)
    union = np.count_nonzero(g | p)
    if union == 0:
        return empty
    return np.count_nonzero(g & p) / union


def _points(mask: np.ndarray) -> np.ndarray:
    return np.argwhere(mask)


def boundary_match_distances(gt_b: np.ndarray, pred_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-boundary distances in both directions.

    Returns ``(d_pred, d_gt)``: for each predicted boundary pixel the distance
    to the closest ground-truth boundary pixel, and vice versa.  Both inputs
    must be non-empty.  Thresholding these at ``r`` is the same as testing
    membership in ``dilate(other_boundary, r)``.
    """
    gp, pp = _points(gt_b), _points(pred_b)
    d_pred, _ = cKDTree(gp).query(pp)
    d_gt, _ = cKDTree(pp).query(gp)
    return d_pred, d_gt


def _f_measure(d_pred: np.ndarray, d_gt: np.ndarray, tolerance: float) -> float:
    # tiny slack so sqrt round-off never drops a pixel sitting exactly on the tolerance
    limit = tolerance + 1e-9
    precision = np.count_nonzero(d_pred <= limit) / d_pred.size
    recall = np.count_nonzero(d_gt <= limit) / d_gt.size
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def boundary_accuracy(gt, pred, tolerance: float, empty: float = 1.0) -> float:
    """Boundary F-measure at a fixed pixel tolerance."""
    if tolerance < 0:
        raise ValueError(f"tolerance must be non-negative, got {tolerance}")
    g, p = as_mask(gt), as_mask(pred)
    check_same_shape(g, p)
    g_any, p_any = g.any(), p.any()
    if not g_any and not p_any:
        return empty
    if not g_any or not p_any:
        return 0.0
    d_pred, d_gt = boundary_match_distances(boundary_pixels(g), boundary_pixels(p))
    return _f_measure(d_pred, d_gt, tolerance)


def adaptive_boundary_accuracy(gt, pred, k_adapt: float = 0.1, empty: float = 1.0) -> float:
    """Boundary F-measure with the tolerance scaled to the object's size.

    The tolerance is ``max(1, round(k_adapt * sqrt(area)))`` where ``area`` is
    the ground-truth foreground area, or the prediction's when gt is empty.
    """
    g, p = as_mask(gt), as_mask(pred)
    check_same_shape(g, p)
    area = np.count_nonzero(g) or np.count_nonzero(p)
    return boundary_accuracy(g, p, adaptive_tolerance(area, k_adapt), empty)


# -- sequence scoring -------------------------------------------------------

@dataclass(frozen=True)
class FrameScore:
    frame: int
    j: float
    f: float
    f_adapt: float
    gt_present: bool
    pred_present: bool

    @property
    def jf(self) -> float:
        return (self.j + self.f) / 2

    @property
    def jf_adapt(self) -> float:
        return (self.j + self.f_adapt) / 2


@dataclass(frozen=True)
class SequenceReport:
    """Scores of one (sequence, object) row, or of a whole dataset.

    ``jf_adapt_d`` / ``jf_adapt_r`` are None when the row has no
    disappearance / reappearance frames.
    """

    sequence: str
    object_id: int | None
    j: float
    f: float
    f_adapt: float
    jf_adapt_d: float | None
    jf_adapt_r: float | None
    n_frames: int
    n_disappear: int = 0
    n_reappear: int = 0
    n_rows: int = 1
    frames: tuple[FrameScore, ...] = field(default=(), repr=False, compare=False)

    @property
    def jf(self) -> float:
        return (self.j + self.f) / 2

    @property
    def jf_adapt(self) -> float:
        return (self.j + self.f_adapt) / 2


def score_frame(gt: np.ndarray, pred: np.ndarray, tolerance: float,
                k_adapt: float = 0.1, empty: float = 1.0, frame: int = 0) -> FrameScore:
    """J, F and adaptive F for one object in one frame.

    Work is restricted to the bounding box of ``gt | pred``; nothing outside
    it can change any of the three scores.
    """
    box = bounding_box(gt | pred)
    if box is None:
        return FrameScore(frame, empty, empty, empty, False, False)
    r0, r1, c0, c1 = box
    return _score_crop(gt[r0:r1, c0:c1], pred[r0:r1, c0:c1], tolerance, k_adapt, frame)


def _score_crop(g: np.ndarray, p: np.ndarray, tolerance: float, k_adapt: float,
                frame: int) -> FrameScore:
    g_area = np.count_nonzero(g)
    p_area = np.count_nonzero(p)
    if g_area == 0 or p_area == 0:
        return FrameScore(frame, 0.0, 0.0, 0.0, g_area > 0, p_area > 0)
    j = np.count_nonzero(g & p) / np.count_nonzero(g | p)
    d_pred, d_gt = boundary_match_distances(boundary_pixels(g), boundary_pixels(p))
    f = _f_measure(d_pred, d_gt, tolerance)
    f_adapt = _f_measure(d_pred, d_gt, adaptive_tolerance(g_area, k_adapt))
    return FrameScore(frame, float(j), f, f_adapt, True, True)


def _object_frame_scores(gt: VideoSequence, pred: VideoSequence, ids: Sequence[int],
                         config: MetricConfig) -> dict[int, list[FrameScore]]:
    """Per-frame scores for several objects, frames 1..T-1."""
    tol = default_tolerance(gt.width, gt.height, config.tolerance_frac)
    e = config.empty_score
    out: dict[int, list[FrameScore]] = {k: [] for k in ids}
    for t in range(1, gt.frame_count):
        g_frame, p_frame = gt.frames[t], pred.frames[t]
        for k in ids:
            g, p = g_frame == k, p_frame == k
            u = g | p
            rows = np.flatnonzero(u.any(axis=1))
            if rows.size == 0:
                out[k].append(FrameScore(t, e, e, e, False, False))
                continue
            cols = np.flatnonzero(u.any(axis=0))
            box = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
            out[k].append(_score_crop(g[box], p[box], tol, config.k_adapt, t))
    return out


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def summarize_frames(scores: Sequence[FrameScore], sequence: str = "",
                     object_id: int | None = None) -> SequenceReport:
    """Fold per-frame scores into one row, including the disappearance and
    reappearance subsets.

    A frame is a reappearance frame when gt is present and was absent in some
    earlier frame of ``scores``.
    """
    if not scores:
        raise ValueError("no evaluated frames")
    disappear, reappear = [], []
    seen_absent = False
    for s in scores:
        if not s.gt_present:
            disappear.append(s)
            seen_absent = True
        elif seen_absent:
            reappear.append(s)
    return SequenceReport(
        sequence=sequence,
        object_id=object_id,
        j=_mean([s.j for s in scores]),
        f=_mean([s.f for s in scores]),
        f_adapt=_mean([s.f_adapt for s in scores]),
        jf_adapt_d=_mean([s.jf_adapt for s in disappear]) if disappear else None,
        jf_adapt_r=_mean([s.jf_adapt for s in reappear]) if reappear else None,
        n_frames=len(scores),
        n_disappear=len(disappear),
        n_reappear=len(reappear),
        frames=tuple(scores),
    )


def _check_pair(gt: VideoSequence, pred: VideoSequence) -> None:
    if gt.frame_count != pred.frame_count:
        raise ValueError(f"{gt.name or 'sequence'}: gt has {gt.frame_count} frames, "
                         f"prediction has {pred.frame_count}")
    if gt.frames.shape[1:] != pred.frames.shape[1:]:
        raise ValueError(f"{gt.name or 'sequence'}: frame size differs, gt "
                         f"{gt.frames.shape[1:]} vs prediction {pred.frames.shape[1:]}")
    if gt.frame_count < 2:
        raise ValueError(f"{gt.name or 'sequence'}: need at least 2 frames (frame 0 is not scored)")


def sequence_scores(gt: VideoSequence, pred: VideoSequence, obj_id: int,
                    config: MetricConfig = MetricConfig()) -> SequenceReport:
    """Score one object over frames 1..T-1 of a sequence."""
    _check_pair(gt, pred)
    if obj_id < 1:
        raise ValueError(f"object IDs start at 1, got {obj_id}")
    if not (gt.frames[0] == obj_id).any():
        warnings.warn(f"{gt.name or 'sequence'}: object {obj_id} is absent from frame 0",
                      stacklevel=2)
    scores = _object_frame_scores(gt, pred, [obj_id], config)[obj_id]
    return summarize_frames(scores, gt.name, obj_id)


def evaluate_sequence(gt: VideoSequence, pred: VideoSequence,
                      config: MetricConfig = MetricConfig(),
                      object_ids: Iterable[int] | None = None) -> list[SequenceReport]:
    """One row per ground-truth object, ordered by object ID."""
    _check_pair(gt, pred)
    ids = gt.object_ids() if object_ids is None else sorted(object_ids)
    for k in ids:
        if k < 1:
            raise ValueError(f"object IDs start at 1, got {k}")
        if not (gt.frames[0] == k).any():
            warnings.warn(f"{gt.name or 'sequence'}: object {k} is absent from frame 0",
                          stacklevel=2)
    per_object = _object_frame_scores(gt, pred, ids, config)
    return [summarize_frames(per_object[k], gt.name, k) for k in ids]


def dataset_aggregate(reports: Sequence[SequenceReport], name: str = "*") -> SequenceReport:
    """Unweighted mean over (sequence, object) rows.

    Subset scores average only the rows where they are defined.
    """
    if not reports:
        raise ValueError("cannot aggregate an empty list of reports")
    if len(reports) == 1:
        return replace(reports[0], frames=())
    d = [r.jf_adapt_d for r in reports if r.jf_adapt_d is not None]
    r_ = [r.jf_adapt_r for r in reports if r.jf_adapt_r is not None]
    return SequenceReport(
        sequence=name,
        object_id=None,
        j=_mean([r.j for r in reports]),
        f=_mean([r.f for r in reports]),
        f_adapt=_mean([r.f_adapt for r in reports]),
        jf_adapt_d=_mean(d) if d else None,
        jf_adapt_r=_mean(r_) if r_ else None,
        n_frames=sum(r.n_frames for r in reports),
        n_disappear=sum(r.n_disappear for r in reports),
        n_reappear=sum(r.n_reappear for r in reports),
        n_rows=sum(r.n_rows for r in reports),
    )
