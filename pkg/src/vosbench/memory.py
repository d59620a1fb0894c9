"""Memory-bank bookkeeping policies for mask propagation.

Nothing here reads neural features: entries carry generic descriptor
vectors, so the same policies work with color histograms or synthetic
features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class MemoryEntry:
    frame: int
    feature: np.ndarray
    mask: np.ndarray | None = None
    uncertainty: float = 0.0
    pinned: bool = False

    def __post_init__(self):
        feat = np.asarray(self.feature, dtype=np.float64)
        if feat.ndim != 1:
            raise ValueError(f"feature must be a vector, got shape {feat.shape}")
        if not math.isfinite(self.uncertainty) or self.uncertainty < 0:
            raise ValueError(f"uncertainty must be finite and non-negative, got {self.uncertainty}")
        object.__setattr__(self, "feature", feat)


@dataclass(frozen=True)
class MemoryBank:
    """First-in-first-out bank with an optional permanently pinned entry.

    ``capacity`` bounds the unpinned entries only.
    """

    capacity: int
    entries: tuple[MemoryEntry, ...] = ()
    pinned: MemoryEntry | None = None

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"capacity must be at least 1, got {self.capacity}")
        if len(self.entries) > self.capacity:
            raise ValueError("more unpinned entries than capacity")

    def __len__(self) -> int:
        return len(self.entries) + (self.pinned is not None)

    def all_entries(self) -> tuple[MemoryEntry, ...]:
        head = (self.pinned,) if self.pinned is not None else ()
        return head + self.entries

    def frames(self) -> list[int]:
        return [e.frame for e in self.all_entries()]


def fifo_admit(bank: MemoryBank, entry: MemoryEntry) -> MemoryBank:
    """Return ``bank`` with ``entry`` admitted.

    A pinned entry fills the pinned slot (once).  Unpinned entries must
    arrive in increasing frame order; past capacity the oldest unpinned entry
    is dropped.
    """
    if entry.pinned:
        if bank.pinned is not None:
            raise ValueError(f"bank already pins frame {bank.pinned.frame}")
        return MemoryBank(bank.capacity, bank.entries, entry)
    if bank.entries and entry.frame <= bank.entries[-1].frame:
        raise ValueError(f"frame {entry.frame} admitted after frame {bank.entries[-1].frame}")
    entries = bank.entries + (entry,)
    if len(entries) > bank.capacity:
        entries = entries[len(entries) - bank.capacity:]
    return MemoryBank(bank.capacity, entries, bank.pinned)


def long_term_bank(window: int = 22) -> MemoryBank:
    """Empty bank for a window of the first frame plus the last ``window - 1`` frames."""
    if window < 2:
        raise ValueError("window must cover the first frame and at least one recent frame")
    return MemoryBank(capacity=window - 1)


class MemoryPreset(NamedTuple):
    max_mem_frames: int
    min_mem_frames: int
    topk: int


LONG_VIDEO_PRESET = MemoryPreset(45, 40, 50)
SHORT_VIDEO_PRESET = MemoryPreset(15, 14, 40)


def capacity_preset(sequence_length: int, long_after: int = 200) -> MemoryPreset:
    """Memory sizing by video length; exactly ``long_after`` frames counts as short."""
    if sequence_length < 1:
        raise ValueError(f"sequence length must be positive, got {sequence_length}")
    return LONG_VIDEO_PRESET if sequence_length > long_after else SHORT_VIDEO_PRESET


# -- distractor filtering ---------------------------------------------------

def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero-norm vector")
    return float(np.dot(a, b) / (na * nb))


def distractor_score(candidate, bank: MemoryBank) -> float:
    """Best cosine similarity between ``candidate`` and any stored feature."""
    entries = bank.all_entries()
    if not entries:
        raise ValueError("distractor score needs a non-empty bank")
    return max(cosine_similarity(candidate, e.feature) for e in entries)


def is_distractor(candidate, bank: MemoryBank, threshold: float = 0.5) -> bool:
    return distractor_score(candidate, bank) < threshold


# -- uncertainty-weighted aggregation ---------------------------------------

def uncertainty_weights(sigmas: Sequence[float], scale: float = 1.0) -> np.ndarray:
    """Softmax of ``-scale * sigma``."""
    s = scale * np.asarray(sigmas, dtype=np.float64)
    if s.size == 0:
        raise ValueError("no memory entries to weight")
    e = np.exp(-(s - s.min()))
    return e / e.sum()


def uncertainty_aggregate(entries: Sequence[MemoryEntry], scale: float = 1.0) -> np.ndarray:
    if not entries:
        raise ValueError("no memory entries to aggregate")
    w = uncertainty_weights([e.uncertainty for e in entries], scale)
    feats = np.stack([e.feature for e in entries])
    return w @ feats


# -- pathway tree -----------------------------------------------------------

@dataclass(frozen=True)
class PathwayNode:
    index: int
    parent: int | None
    entry: MemoryEntry
    score: float
    cumulative: float
    ordinal: int = 0      # candidate position among its siblings
    depth: int = 0


@dataclass(frozen=True)
class PathwayTree:
    nodes: tuple[PathwayNode, ...]
    leaves: tuple[int, ...]

    @classmethod
    def start(cls, entry: MemoryEntry, score: float = 0.0) -> "PathwayTree":
        root = PathwayNode(0, None, entry, score, score)
        return cls((root,), (0,))

    def path(self, node: PathwayNode | int) -> list[PathwayNode]:
        """Nodes from the root down to ``node``."""
        i = node.index if isinstance(node, PathwayNode) else node
        out = []
        while i is not None:
            n = self.nodes[i]
            out.append(n)
            i = n.parent
        return out[::-1]

    def dump(self) -> str:
        """Indented text trace; active leaves are starred."""
        children: dict[int, list[int]] = {}
        for n in self.nodes[1:]:
            children.setdefault(n.parent, []).append(n.index)
        active = set(self.leaves)
        lines = []

        def walk(i: int, depth: int) -> None:
            n = self.nodes[i]
            mark = " *" if i in active else ""
            lines.append(f"{'  ' * depth}#{n.index} frame={n.entry.frame} "
                         f"score={n.score:.4f} cum={n.cumulative:.4f}{mark}")
            for c in children.get(i, []):
                walk(c, depth + 1)

        walk(0, 0)
        return "\n".join(lines)


def _rank_key(n: PathwayNode):
    return (-n.cumulative, n.entry.frame, n.ordinal, n.index)


def pathway_step(tree: PathwayTree, candidates: Sequence[tuple[MemoryEntry, float]],
                 num_pathway: int = 3, iou_thre: float = 0.1) -> PathwayTree:
    """Grow every active leaf by the candidates and keep the best pathways.

    Each leaf spawns one child per candidate scoring at least ``iou_thre``;
    if none qualifies the single best candidate is kept so the tree never
    dies.  The top ``num_pathway`` children by cumulative score stay active
    (ties: lower frame, then lower candidate ordinal).
    """
    if num_pathway < 1:
        raise ValueError(f"num_pathway must be at least 1, got {num_pathway}")
    if not candidates:
        raise ValueError("pathway step needs at least one candidate")
    scores = [float(s) for _, s in candidates]
    if not all(math.isfinite(s) for s in scores):
        raise ValueError("candidate scores must be finite")
    keep = [i for i, s in enumerate(scores) if s >= iou_thre]
    if not keep:
        keep = [max(range(len(scores)), key=lambda i: (scores[i], -i))]
    nodes = list(tree.nodes)
    children = []
    for leaf in tree.leaves:
        parent = nodes[leaf]
        for i in keep:
            entry = candidates[i][0]
            child = PathwayNode(len(nodes), leaf, entry, scores[i], parent.cumulative + scores[i],
                                ordinal=i, depth=parent.depth + 1)
            nodes.append(child)
            children.append(child)
    survivors = sorted(children, key=_rank_key)[:num_pathway]
    return PathwayTree(tuple(nodes), tuple(sorted(n.index for n in survivors)))


def pathway_select(tree: PathwayTree) -> PathwayNode:
    """Active leaf with the highest cumulative score."""
    if not tree.nodes:
        raise ValueError("empty pathway tree")
    return min((tree.nodes[i] for i in tree.leaves), key=_rank_key)


# -- scene-change gate ------------------------------------------------------

def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB (uint8 or [0, 1] float) to HSV with every channel in [0, 1]."""
    rgb = np.asarray(rgb)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected an RGB raster, got shape {rgb.shape}")
    x = rgb.astype(np.float64)
    if np.issubdtype(rgb.dtype, np.integer):
        x = x / 255.0
    r, g, b = x[..., 0], x[..., 1], x[..., 2]
    v = x.max(axis=-1)
    c = v - x.min(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(v > 0, c / v, 0.0)
        rc = np.where(c > 0, (v - r) / c, 0.0)
        gc = np.where(c > 0, (v - g) / c, 0.0)
        bc = np.where(c > 0, (v - b) / c, 0.0)
    h = np.where(r == v, bc - gc, np.where(g == v, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(c > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_histogram(rgb: np.ndarray, bins: tuple[int, int] = (32, 32)) -> np.ndarray:
    """Joint hue/saturation pixel counts; value is ignored."""
    hsv = rgb_to_hsv(rgb)
    hb = np.minimum((hsv[..., 0] * bins[0]).astype(np.int64), bins[0] - 1)
    sb = np.minimum((hsv[..., 1] * bins[1]).astype(np.int64), bins[1] - 1)
    counts = np.bincount((hb * bins[1] + sb).ravel(), minlength=bins[0] * bins[1])
    return counts.reshape(bins)


def bhattacharyya_distance(p_counts: np.ndarray, q_counts: np.ndarray) -> float:
    """``sqrt(1 - sum(sqrt(p * q)))`` over normalized histograms.

    Takes raw counts so identical histograms give exactly 0.
    """
    p = np.asarray(p_counts, dtype=np.float64).ravel()
    q = np.asarray(q_counts, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise ValueError("histograms differ in bin count")
    total = math.sqrt(p.sum() * q.sum())
    if total == 0:
        raise ValueError("empty histogram")
    coeff = float(np.sqrt(p * q).sum()) / total
    return math.sqrt(max(0.0, 1.0 - coeff))


def frame_distance(prev_frame: np.ndarray, cur_frame: np.ndarray,
                   bins: tuple[int, int] = (32, 32)) -> float:
    prev_frame, cur_frame = np.asarray(prev_frame), np.asarray(cur_frame)
    if prev_frame.shape != cur_frame.shape:
        raise ValueError(f"frames differ in shape: {prev_frame.shape} vs {cur_frame.shape}")
    return bhattacharyya_distance(hsv_histogram(prev_frame, bins), hsv_histogram(cur_frame, bins))


def scene_change(prev_frame: np.ndarray, cur_frame: np.ndarray, threshold: float = 0.35,
                 bins: tuple[int, int] = (32, 32)) -> bool:
    return frame_distance(prev_frame, cur_frame, bins) > threshold


@dataclass
class MemoryPolicyConfig:
    capacity: int = 6
    concept_capacity: int = 7
    long_term_window: int = 22
    distractor_threshold: float = 0.5
    num_pathway: int = 3
    iou_thre: float = 0.1
    uncertainty_scale: float = 1.0
    scene_threshold: float = 0.35
    hist_bins: tuple[int, int] = field(default=(32, 32))
