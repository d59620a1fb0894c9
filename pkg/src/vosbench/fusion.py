"""Combining predictions from several sources into one labeling.

Two families are covered: confidence aggregation with per-pixel ID voting
(hard or soft multi-object predictions), and weighted averaging of binary
masks or logits (selective averaging, fixed-weight logit fusion, flip
test-time averaging).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .masks import as_labels, as_mask, check_same_shape


@dataclass
class SourcePrediction:
    """Per-object foreground probabilities (or logits) from one source.

    ``grids`` maps object ID to a ``(T, H, W)`` array; ``(H, W)`` is accepted
    for single-frame use.
    """

    source: str
    grids: Mapping[int, np.ndarray]
    weight: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"{self.source}: weight must be finite and non-negative")
        self.grids = {int(k): np.asarray(v) for k, v in self.grids.items()}

    def grid(self, obj_id: int, frame: int) -> np.ndarray | None:
        g = self.grids.get(obj_id)
        if g is None:
            return None
        return g if g.ndim == 2 else g[frame]

    @classmethod
    def from_labels(cls, source: str, frames: np.ndarray, weight: float = 1.0,
                    object_ids: Sequence[int] | None = None) -> "SourcePrediction":
        """Hard predictions: probability 1 where the label equals the object."""
        frames = np.asarray(frames)
        if object_ids is None:
            object_ids = [int(i) for i in np.unique(frames) if i != 0]
        return cls(source, {k: (frames == k) for k in object_ids}, weight)


@dataclass
class FusionConfig:
    threshold: float | None = None        # None: half the total source weight
    weights: dict[str, float] = field(default_factory=dict)

    def pixel_threshold(self, sources: Sequence[SourcePrediction]) -> float:
        if self.threshold is not None:
            if self.threshold < 0:
                raise ValueError("pixel threshold must be non-negative")
            return self.threshold
        return 0.5 * sum(self._weight(s) for s in sources)

    def _weight(self, s: SourcePrediction) -> float:
        return self.weights.get(s.source, s.weight)


def _frame_shape(sources: Sequence[SourcePrediction], frame: int) -> tuple[int, int]:
    shape = None
    for s in sources:
        for k in s.grids:
            g = s.grid(k, frame)
            if shape is None:
                shape = g.shape
            elif g.shape != shape:
                raise ValueError(f"frame {frame}: source {s.source} object {k} has shape "
                                 f"{g.shape}, expected {shape}")
    if shape is None:
        raise ValueError("sources hold no object grids")
    return shape


def confidence_foreground(sources: Sequence[SourcePrediction], obj_id: int, frame: int = 0,
                          config: FusionConfig = FusionConfig()) -> np.ndarray:
    """Foreground where the weighted sum of source probabilities exceeds the threshold."""
    if not sources:
        raise ValueError("need at least one source")
    shape = _frame_shape(sources, frame)
    total = np.zeros(shape)
    for s in sources:
        g = s.grid(obj_id, frame)
        if g is not None:
            total += config._weight(s) * g
    return total > config.pixel_threshold(sources)


def id_vote(claims: Sequence[tuple[str, int]], weights: Mapping[str, float] | None = None) -> int:
    """Weighted plurality over ``(source, object ID)`` claims; ties go to the lower ID."""
    if not claims:
        raise ValueError("no claims to vote on")
    tally: dict[int, float] = {}
    for source, obj in claims:
        w = 1.0 if weights is None else weights.get(source, 1.0)
        tally[obj] = tally.get(obj, 0.0) + w
    return min(tally, key=lambda k: (-tally[k], k))


def resolve_frame(sources: Sequence[SourcePrediction], frame: int = 0,
                  config: FusionConfig = FusionConfig()) -> np.ndarray:
    """Fuse all objects of one frame into a labeled frame.

    An object is a candidate at a pixel when it passes
    :func:`confidence_foreground`.  Where several candidates compete, each
    source votes for the object it labels there (its most probable object
    above 0.5), weighted by source weight; ties go to the lower ID.  If no
    source votes for any candidate, the candidate with the larger aggregate
    confidence wins.
    """
    if not sources:
        raise ValueError("need at least one source")
    shape = _frame_shape(sources, frame)
    ids = sorted({k for s in sources for k in s.grids})
    tau = config.pixel_threshold(sources)
    conf = np.zeros((len(ids),) + shape)
    votes = np.zeros((len(ids),) + shape)
    for s in sources:
        w = config._weight(s)
        probs = np.zeros((len(ids),) + shape)
        for i, k in enumerate(ids):
            g = s.grid(k, frame)
            if g is not None:
                probs[i] = g
        conf += w * probs
        # the object this source labels at each pixel
        best = probs.argmax(axis=0)
        claimed = np.take_along_axis(probs, best[None], axis=0)[0] > 0.5
        np.add.at(votes, (best[claimed],) + np.nonzero(claimed), w)
    passing = conf > tau
    votes = np.where(passing, votes, -1.0)
    # argmax returns the first maximum, i.e. the lowest ID on ties
    winner = votes.argmax(axis=0)
    no_vote = votes.max(axis=0) <= 0
    fallback = np.where(passing, conf, -np.inf).argmax(axis=0)
    winner = np.where(no_vote, fallback, winner)
    labels = np.asarray(ids)[winner]
    labels[~passing.any(axis=0)] = 0
    dtype = np.uint8 if not ids or max(ids) <= 255 else np.uint16
    return labels.astype(dtype)


def resolve_sequence(sources: Sequence[SourcePrediction], frame_count: int,
                     config: FusionConfig = FusionConfig()) -> np.ndarray:
    return np.stack([resolve_frame(sources, t, config) for t in range(frame_count)])


def selective_average(masks: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Pixels whose weighted mean vote strictly exceeds 0.5."""
    if not masks:
        raise ValueError("need at least one mask")
    arrays = [as_mask(m) for m, _ in masks]
    weights = [float(w) for _, w in masks]
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    total = sum(weights)
    if total <= 0:
        raise ValueError("total mask weight must be positive")
    for a in arrays[1:]:
        check_same_shape(arrays[0], a)
    acc = np.zeros(arrays[0].shape)
    for a, w in zip(arrays, weights):
        acc += w * a
    # compare 2*sum > total instead of dividing, so exact halves stay background
    return 2.0 * acc > total


def shallow_fuse(sources: Sequence[SourcePrediction], weights: Mapping[str, float],
                 frame: int = 0) -> tuple[list[int], np.ndarray]:
    """Fixed-weight logit fusion into ``(N + 1, H, W)`` channels.

    Channel ``i + 1`` is the weighted sum of every source's logits for
    object ``ids[i]``; channel 0 (background) is the negated maximum of the
    object channels.  Every source named in ``weights`` must be present.
    """
    by_name = {s.source: s for s in sources}
    missing = [name for name in weights if name not in by_name]
    if missing:
        raise ValueError(f"configured source {missing[0]!r} is missing")
    if not weights:
        raise ValueError("no fusion weights configured")
    used = [by_name[name] for name in weights]
    shape = _frame_shape(used, frame)
    ids = sorted({k for s in used for k in s.grids})
    out = np.zeros((len(ids) + 1,) + shape)
    for i, k in enumerate(ids):
        for s in used:
            g = s.grid(k, frame)
            if g is not None:
                out[i + 1] += weights[s.source] * g
    out[0] = -out[1:].max(axis=0) if ids else 0.0
    return ids, out


def mirror(grid: np.ndarray) -> np.ndarray:
    return np.asarray(grid)[..., ::-1]


def flip_average(pred_normal: np.ndarray, pred_flipped: np.ndarray) -> np.ndarray:
    """Average a prediction with the un-mirrored prediction on the mirrored frame."""
    a = np.asarray(pred_normal, dtype=np.float64)
    b = np.asarray(pred_flipped, dtype=np.float64)
    check_same_shape(a, b, "logit grids")
    return (a + mirror(b)) / 2


def label_sources(frames_by_source: Mapping[str, np.ndarray],
                  weights: Mapping[str, float] | None = None) -> list[SourcePrediction]:
    """Hard-label sources over a shared object-ID set, in mapping order."""
    ids = sorted({int(i) for f in frames_by_source.values() for i in np.unique(f) if i != 0})
    out = []
    for name, frames in frames_by_source.items():
        w = 1.0 if weights is None else weights.get(name, 1.0)
        out.append(SourcePrediction.from_labels(name, as_labels_stack(frames), w, ids))
    return out


def as_labels_stack(frames) -> np.ndarray:
    frames = np.asarray(frames)
    if frames.ndim == 2:
        return as_labels(frames)[None]
    for f in frames:
        as_labels(f)
    return frames
