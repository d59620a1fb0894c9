"""Mask rasters, labeled frames, morphology and the on-disk mask formats.

Binary masks are 2-D boolean numpy arrays indexed ``[row, col]``; labeled
frames are 2-D non-negative integer arrays where 0 is background and every
other value is an object ID.  A :class:`VideoSequence` stacks labeled frames
into a ``(T, H, W)`` array.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from PIL import Image
from scipy import ndimage

FRAME_NAME = "{:05d}.png"
_FRAME_RE = re.compile(r"^(\d{5})\.(png|bmp|tif|tiff)$", re.IGNORECASE)


class RleError(ValueError):
    """Raised when a run-length fragment or manifest is malformed."""


def as_mask(mask) -> np.ndarray:
    """Validate and return ``mask`` as a 2-D boolean array."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2-D raster, got shape {arr.shape}")
    if arr.dtype != bool:
        arr = arr.astype(bool)
    return arr


def as_labels(frame) -> np.ndarray:
    arr = np.asarray(frame)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"labeled frame must be a non-empty 2-D raster, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        else:
            raise ValueError(f"labeled frame must hold integer IDs, got dtype {arr.dtype}")
    if arr.size and arr.min() < 0:
        raise ValueError("labeled frame contains negative IDs")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "masks") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} differ in shape: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class VideoSequence:
    """Ordered labeled frames of one video, all sharing one raster size."""

    frames: np.ndarray
    name: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 3:
            raise ValueError(f"sequence frames must be (T, H, W), got shape {frames.shape}")
        if frames.shape[0] < 1 or frames.shape[1] < 1 or frames.shape[2] < 1:
            raise ValueError(f"sequence must hold at least one non-empty frame, got {frames.shape}")
        if not np.issubdtype(frames.dtype, np.integer):
            raise ValueError(f"sequence frames must hold integer IDs, got dtype {frames.dtype}")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_frames(cls, frames: Iterable, name: str = "") -> "VideoSequence":
        stack = [as_labels(f) for f in frames]
        if not stack:
            raise ValueError("sequence must hold at least one frame")
        shape = stack[0].shape
        for t, f in enumerate(stack):
            if f.shape != shape:
                raise ValueError(f"frame {t} has shape {f.shape}, expected {shape}")
        return cls(np.stack(stack), name)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def __len__(self) -> int:
        return self.frame_count

    def __getitem__(self, t: int) -> np.ndarray:
        return self.frames[t]

    def object_ids(self) -> list[int]:
        """IDs present in any frame, ascending."""
        f = self.frames
        top = int(f.max()) if f.size else 0
        if top <= 8:
            # a few whole-video comparisons beat sorting or counting
            present = [k for k in range(1, top + 1) if (f == k).any()]
        else:
            present = np.unique(f)
        return [int(i) for i in present if i != 0]

    def extract(self, obj_id: int) -> np.ndarray:
        """``(T, H, W)`` boolean stack for one object."""
        return self.frames == obj_id


def extract_object(frame, obj_id: int) -> np.ndarray:
    """Binary mask of ``obj_id`` in ``frame``; all-background when absent."""
    if obj_id < 1:
        raise ValueError(f"object IDs start at 1, got {obj_id}")
    return as_labels(frame) == obj_id


def boundary_pixels(mask) -> np.ndarray:
    """Foreground pixels with a background (or out-of-bounds) 4-neighbor."""
    m = as_mask(mask)
    padded = np.pad(m, 1)
    interior = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return m & ~interior


def distance_to(mask) -> np.ndarray:
    """Exact Euclidean distance from every pixel to the nearest foreground pixel.

    Returns ``inf`` everywhere when the mask is empty.
    """
    m = as_mask(mask)
    if not m.any():
        return np.full(m.shape, np.inf)
    return ndimage.distance_transform_edt(~m)


def dilate(mask, radius: float) -> np.ndarray:
    """Pixels within Euclidean distance ``radius`` of some foreground pixel."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    m = as_mask(mask)
    if radius == 0 or not m.any():
        return m.copy()
    return distance_to(m) <= radius


def bounding_box(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """``(row0, row1, col0, col1)`` half-open extent of the foreground, or None."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


# -- run-length codec -------------------------------------------------------

def mask_runs(mask) -> list[int]:
    """Alternating background/foreground run lengths in row-major order.

    The first run is always background and may be zero.
    """
    flat = as_mask(mask).ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return runs


def runs_to_mask(runs, width: int, height: int) -> np.ndarray:
    runs = np.asarray(runs, dtype=np.int64)
    if runs.ndim != 1 or runs.size == 0:
        raise RleError("run list is empty")
    if (runs < 0).any():
        raise RleError("negative run length")
    total = int(runs.sum())
    if total != width * height:
        raise RleError(f"runs sum to {total}, expected {width}x{height}={width * height}")
    values = np.arange(runs.size) % 2 == 1
    return np.repeat(values, runs).reshape(height, width)


def encode_rle(frame, ids: Iterable[int] | None = None) -> dict[int, list[int]]:
    """Per-object run lists for one labeled frame.

    ``ids`` defaults to the IDs present in the frame; listed IDs that are
    absent encode as a single background run.
    """
    labels = as_labels(frame)
    if ids is None:
        ids = [int(i) for i in np.unique(labels) if i != 0]
    return {int(k): mask_runs(labels == k) for k in ids}


def decode_rle(fragment: Mapping[int, list[int]], width: int, height: int,
               frame_index: int | None = None) -> np.ndarray:
    """Rebuild a labeled frame from per-object run lists."""
    where = "" if frame_index is None else f"frame {frame_index}, "
    labels = np.zeros((height, width), dtype=np.uint16)
    for obj_id, runs in sorted(fragment.items()):
        if obj_id < 1:
            raise RleError(f"{where}object {obj_id}: object IDs start at 1")
        try:
            m = runs_to_mask(runs, width, height)
        except RleError as exc:
            raise RleError(f"{where}object {obj_id}: {exc}") from None
        if (labels[m] != 0).any():
            raise RleError(f"{where}object {obj_id}: overlaps another object")
        labels[m] = obj_id
    return _narrow(labels)


def _narrow(labels: np.ndarray) -> np.ndarray:
    if labels.size and labels.max() <= 255:
        return labels.astype(np.uint8)
    return labels


def dumps_manifest(seq: VideoSequence, ids: Iterable[int] | None = None) -> str:
    """Serialize a sequence as a text RLE manifest.

    Header ``W H T ids...`` followed by ``frame object runs...`` lines for
    every frame and every header ID.
    """
    ids = seq.object_ids() if ids is None else sorted(int(i) for i in ids)
    out = io.StringIO()
    out.write(" ".join(str(v) for v in (seq.width, seq.height, seq.frame_count, *ids)) + "\n")
    for t in range(seq.frame_count):
        frag = encode_rle(seq.frames[t], ids)
        for k in ids:
            out.write(f"{t} {k} " + " ".join(map(str, frag[k])) + "\n")
    return out.getvalue()


def loads_manifest(text: str, name: str = "") -> VideoSequence:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise RleError("manifest is empty")
    try:
        header = [int(v) for v in lines[0]]
    except ValueError:
        raise RleError(f"bad manifest header: {' '.join(lines[0])}") from None
    if len(header) < 3:
        raise RleError("manifest header needs at least W H T")
    width, height, count, ids = header[0], header[1], header[2], header[3:]
    fragments: list[dict[int, list[int]]] = [{} for _ in range(count)]
    for lineno, parts in enumerate(lines[1:], start=2):
        try:
            t, k, *runs = (int(v) for v in parts)
        except ValueError:
            raise RleError(f"line {lineno}: non-integer field") from None
        if not 0 <= t < count:
            raise RleError(f"line {lineno}: frame {t} outside 0..{count - 1}")
        if k not in ids:
            raise RleError(f"line {lineno}: object {k} not declared in header")
        if k in fragments[t]:
            raise RleError(f"line {lineno}: duplicate record for frame {t}, object {k}")
        fragments[t][k] = runs
    frames = []
    for t, frag in enumerate(fragments):
        missing = [k for k in ids if k not in frag]
        if missing:
            raise RleError(f"frame {t}, object {missing[0]}: no run record")
        frames.append(decode_rle(frag, width, height, frame_index=t))
    return VideoSequence.from_frames(frames, name)


def write_manifest(path, seq: VideoSequence, ids: Iterable[int] | None = None) -> None:
    Path(path).write_text(dumps_manifest(seq, ids))


def read_manifest(path) -> VideoSequence:
    path = Path(path)
    return loads_manifest(path.read_text(), name=path.stem)


# -- indexed image frames ---------------------------------------------------

def read_frame(path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode not in ("L", "P", "1", "I", "I;16"):
            raise ValueError(f"{path}: expected a single-channel indexed image, got mode {img.mode}")
        arr = np.array(img)
    return as_labels(arr)


def write_frame(path, frame) -> None:
    labels = as_labels(frame)
    if labels.size and labels.max() > 255:
        raise ValueError(f"{path}: object IDs above 255 do not fit an 8-bit frame")
    Image.fromarray(labels.astype(np.uint8)).save(path, format="PNG")


def frame_files(directory) -> list[Path]:
    """Frame images in ``directory`` ordered by their 5-digit index."""
    directory = Path(directory)
    found = sorted(p for p in directory.iterdir() if _FRAME_RE.match(p.name))
    return found


def read_sequence(directory, name: str | None = None) -> VideoSequence:
    directory = Path(directory)
    files = frame_files(directory)
    if not files:
        raise FileNotFoundError(f"no frame images in {directory}")
    indices = [int(_FRAME_RE.match(p.name).group(1)) for p in files]
    if indices != list(range(len(files))):
        raise ValueError(f"{directory}: frame indices are not contiguous from 00000")
    return VideoSequence.from_frames((read_frame(p) for p in files), name or directory.name)


def write_sequence(directory, seq: VideoSequence) -> None:
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    for t in range(seq.frame_count):
        write_frame(directory / FRAME_NAME.format(t), seq.frames[t])
