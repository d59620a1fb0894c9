"""Frame-sampling plans: clip partitioning, key-frame compression layout and
the inference sampling strategies.

All plans are pure index arithmetic; nothing here touches pixels except the
optional :func:`compress_clip` helper, which renders a key-frame-compression
grid with block averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

STRATEGIES = ("uniform", "uniform+", "wraparound", "wraparound+", "head", "qframe")


@dataclass(frozen=True)
class ClipPlan:
    grid: int
    clips: tuple[tuple[int, ...], ...]

    @property
    def clip_size(self) -> int:
        return self.grid * self.grid + 1

    @property
    def key_frames(self) -> tuple[int, ...]:
        return tuple(c[0] for c in self.clips)


def partition_clips(total: int, grid: int) -> ClipPlan:
    """Split ``total`` frames into consecutive clips of ``grid**2 + 1`` frames."""
    if grid < 1:
        raise ValueError(f"grid side must be at least 1, got {grid}")
    c = grid * grid + 1
    if total < 1 or total % c:
        raise ValueError(f"{total} frames do not split into clips of {c}")
    return ClipPlan(grid, tuple(tuple(range(i, i + c)) for i in range(0, total, c)))


@dataclass(frozen=True)
class TileLayout:
    key_frame: int
    tiles: tuple[tuple[int, tuple[int, int, int, int]], ...]   # (frame, (x0, y0, x1, y1))
    canvas: tuple[int, int]                                     # (width, height)
    scale: tuple[float, float]                                  # resize factor back to W x H


def kfc_tile_layout(clip: Sequence[int], frame_w: int, frame_h: int) -> TileLayout:
    """Where each non-key frame of a clip lands in the compression grid.

    Frames 2..c fill a ``g x g`` grid of ``frame_w x frame_h`` cells in
    row-major order; the canvas is later scaled by ``1/g`` per axis.
    """
    n = len(clip) - 1
    g = math.isqrt(n) if n > 0 else 0
    if n < 1 or g * g != n:
        raise ValueError(f"clip of {len(clip)} frames is not g*g + 1")
    tiles = []
    for k, frame in enumerate(clip[1:]):
        r, c = divmod(k, g)
        tiles.append((frame, (c * frame_w, r * frame_h, (c + 1) * frame_w, (r + 1) * frame_h)))
    return TileLayout(clip[0], tuple(tiles), (g * frame_w, g * frame_h), (1 / g, 1 / g))


def compress_clip(images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Key frame and grid-compressed image for a clip of ``(c, H, W[, C])`` images.

    The grid is shrunk back to ``H x W`` by averaging ``g x g`` blocks, which
    needs H and W divisible by g.
    """
    images = np.asarray(images)
    h, w = images.shape[1:3]
    layout = kfc_tile_layout(list(range(len(images))), w, h)
    g = int(round(1 / layout.scale[0]))
    if h % g or w % g:
        raise ValueError(f"frame size {w}x{h} is not divisible by grid side {g}")
    canvas = np.zeros((g * h, g * w) + images.shape[3:], dtype=np.float64)
    for frame, (x0, y0, x1, y1) in layout.tiles:
        canvas[y0:y1, x0:x1] = images[frame]
    small = canvas.reshape(h, g, w, g, *images.shape[3:]).mean(axis=(1, 3))
    return images[0], small.astype(images.dtype) if np.issubdtype(images.dtype, np.floating) \
        else np.rint(small).astype(images.dtype)


@dataclass(frozen=True)
class SamplePlan:
    """Selected frame indices grouped into clips.

    ``clips[i]`` lists the original frame indices sent as clip ``i``;
    ``shared`` maps a frame sampled by more than one clip to those clips.
    """

    strategy: str
    t_ori: int
    clips: tuple[tuple[int, ...], ...]
    shared: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def indices(self) -> list[int]:
        return sorted(i for clip in self.clips for i in clip)

    @property
    def total(self) -> int:
        return sum(len(c) for c in self.clips)

    @property
    def n_clips(self) -> int:
        return len(self.clips)

    @property
    def clip_size(self) -> int:
        return len(self.clips[0]) if self.clips else 0

    def decode_clip(self) -> list[int]:
        """Clip used to decode each original frame.

        Ori-clip ``i`` spans ``[floor(i*T/N), floor((i+1)*T/N))``; the spans
        partition the video, so every frame gets exactly one clip.
        """
        n, t = self.n_clips, self.t_ori
        owner = [0] * t
        for i in range(n):
            for f in range((i * t) // n, ((i + 1) * t) // n):
                owner[f] = i
        return owner


def _check(t_ori: int, n_clips: int = 1, clip_size: int = 1) -> None:
    if t_ori < 1:
        raise ValueError(f"video length must be positive, got {t_ori}")
    if n_clips < 1 or clip_size < 1:
        raise ValueError("clip count and clip size must be positive")


def _uniform_clips(t_ori: int, n_clips: int, clip_size: int) -> tuple[tuple[int, ...], ...]:
    # clip i, position k -> floor((i*c + k) * T_ori / (N*c)); for N dividing T_ori
    # this is start_i + floor(k * len_i / c) within each ori-clip
    total = n_clips * clip_size
    return tuple(
        tuple(((i * clip_size + k) * t_ori) // total for k in range(clip_size))
        for i in range(n_clips)
    )


def plan_uniform(t_ori: int, n_clips: int, clip_size: int) -> SamplePlan:
    _check(t_ori, n_clips, clip_size)
    return SamplePlan("uniform", t_ori, _uniform_clips(t_ori, n_clips, clip_size))


def shared_frames(clips: Sequence[Sequence[int]]) -> dict[int, tuple[int, ...]]:
    owners: dict[int, list[int]] = {}
    for i, clip in enumerate(clips):
        for f in clip:
            if i not in owners.setdefault(f, []):
                owners[f].append(i)
    return {f: tuple(c) for f, c in sorted(owners.items()) if len(c) > 1}


def plan_uniform_plus(t_ori: int, n_clips: int, clip_size: int) -> SamplePlan:
    """Uniform plan where frames sampled by two adjacent clips are tagged with both.

    Only short videos (``t_ori < n_clips * clip_size``) can produce such
    frames; their masks are later averaged over the tagged clips.
    """
    _check(t_ori, n_clips, clip_size)
    clips = _uniform_clips(t_ori, n_clips, clip_size)
    return SamplePlan("uniform+", t_ori, clips, shared_frames(clips))


def _split(indices: Sequence[int], n_clips: int) -> tuple[tuple[int, ...], ...]:
    size = len(indices) // n_clips
    if size * n_clips != len(indices):
        raise ValueError(f"{len(indices)} frames do not split into {n_clips} clips")
    return tuple(tuple(indices[i * size:(i + 1) * size]) for i in range(n_clips))


def plan_wraparound(t_ori: int, total: int, n_clips: int = 1) -> SamplePlan:
    """Indices ``i mod t_ori`` for ``i < total``, sorted."""
    _check(t_ori, n_clips)
    if total < 1:
        raise ValueError(f"target frame count must be positive, got {total}")
    indices = sorted(i % t_ori for i in range(total))
    return SamplePlan("wraparound", t_ori, _split(indices, n_clips))


def plan_wraparound_plus(t_ori: int, n_clips: int, clip_size: int) -> SamplePlan:
    """Wrap-around for videos shorter than ``n_clips * clip_size``, otherwise uniform."""
    _check(t_ori, n_clips, clip_size)
    total = n_clips * clip_size
    if t_ori < total:
        plan = plan_wraparound(t_ori, total, n_clips)
    else:
        plan = plan_uniform(t_ori, n_clips, clip_size)
    return SamplePlan("wraparound+", t_ori, plan.clips, plan.shared)


def _take_unused(pos: int, used: set[int], t_ori: int) -> int:
    for p in range(pos, t_ori):
        if p not in used:
            return p
    for p in range(pos - 1, -1, -1):
        if p not in used:
            return p
    raise ValueError("no unused frame left")


def plan_head_hybrid(t_ori: int, total: int, head: int, n_clips: int = 1) -> SamplePlan:
    """Consecutive head frames followed by uniform sampling of the rest.

    The first ``min(head, t_ori)`` frames are taken as-is; the remaining
    slots are spread evenly over the frames after the head.  A collision moves
    to the nearest unused frame, searching forward first.  Videos with fewer
    than ``total`` frames repeat frames uniformly once all are used.
    """
    _check(t_ori, n_clips)
    if not 0 <= head <= total:
        raise ValueError(f"head must lie in [0, {total}], got {head}")
    if t_ori <= total:
        extra = total - t_ori
        indices = sorted(list(range(t_ori)) + [(k * t_ori) // extra for k in range(extra)]
                         if extra else list(range(t_ori)))
        return SamplePlan("head", t_ori, _split(indices, n_clips))
    h = min(head, t_ori)
    picked = list(range(h))
    used = set(picked)
    rest = total - h
    span = t_ori - h
    for k in range(rest):
        p = _take_unused(h + (k * span) // rest, used, t_ori)
        used.add(p)
        picked.append(p)
    return SamplePlan("head", t_ori, _split(sorted(picked), n_clips))


def plan_ranked(ranking: Sequence[int], t_ori: int, n_clips: int, clip_size: int) -> SamplePlan:
    """Plan from an externally computed relevance ranking (best first).

    The top ``n_clips * clip_size`` distinct frames are sorted in time; when
    fewer are available, the uniform+ rule is applied over the ranked frames.
    """
    _check(t_ori, n_clips, clip_size)
    total = n_clips * clip_size
    chosen: list[int] = []
    for f in ranking:
        f = int(f)
        if not 0 <= f < t_ori:
            raise ValueError(f"ranked frame {f} outside 0..{t_ori - 1}")
        if f not in chosen:
            chosen.append(f)
        if len(chosen) == total:
            break
    if not chosen:
        raise ValueError("ranking is empty")
    chosen.sort()
    local = _uniform_clips(len(chosen), n_clips, clip_size)
    clips = tuple(tuple(chosen[i] for i in clip) for clip in local)
    return SamplePlan("qframe", t_ori, clips, shared_frames(clips))


# -- text format ------------------------------------------------------------

def dumps_plan(plan: SamplePlan) -> str:
    """``strategy T_ori T N c`` header, then one line of indices per clip.

    A frame shared with other clips carries ``+clip`` suffixes naming them.
    """
    lines = [f"{plan.strategy} {plan.t_ori} {plan.total} {plan.n_clips} {plan.clip_size}"]
    for i, clip in enumerate(plan.clips):
        parts = []
        for f in clip:
            others = [c for c in plan.shared.get(f, ()) if c != i]
            parts.append(str(f) + "".join(f"+{c}" for c in others))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def loads_plan(text: str) -> SamplePlan:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 5:
        raise ValueError("plan header must be 'strategy T_ori T N c'")
    strategy, t_ori, total, n, c = rows[0][0], *(int(v) for v in rows[0][1:])
    clips, shared = [], {}
    for i, row in enumerate(rows[1:]):
        clip = []
        for tok in row:
            frame, *others = tok.split("+")
            f = int(frame)
            clip.append(f)
            if others:
                shared[f] = tuple(sorted({i, *(int(o) for o in others)}))
        clips.append(tuple(clip))
    if len(clips) != n or sum(len(cl) for cl in clips) != total or any(len(cl) != c for cl in clips):
        raise ValueError("plan body does not match its header")
    return SamplePlan(strategy, t_ori, tuple(clips), shared)
