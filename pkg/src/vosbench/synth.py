"""Scripted synthetic scenes and simulated trackers.

A scene script (JSON) places flat-colored rectangles and ellipses on a flat
background and moves them along piecewise-linear trajectories.  Rendering
gives the ground-truth label sequence and RGB frames.  Simulated trackers
turn the ground truth into signed-distance logits with seeded noise and
scripted failures (dropout, jitter, identity swap, confusion with a
look-alike).

Randomness comes from ``numpy.random.default_rng`` (PCG64) seeded with
``[seed, crc32(tracker name)]``; the committed golden files, not this
choice, are the reference for regression.
"""

from __future__ import annotations

import copy
import json
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
from scipy import ndimage

from .masks import VideoSequence

SCENARIOS = ("linear-occlusion", "twin-distractor", "scene-cut", "reappear-far")


# -- scripts ----------------------------------------------------------------

@dataclass
class ObjectScript:
    id: int
    shape: str
    size: tuple[float, float]
    color: tuple[int, int, int]
    motion: list[dict]                 # [{"frame", "center", "velocity"}], sorted by frame
    hidden: list[tuple[int, int]] = field(default_factory=list)   # inclusive frame ranges
    target: bool = True

    def center(self, t: int) -> tuple[float, float]:
        """Analytic center ``(x, y)`` in pixels at frame ``t``."""
        seg = self.motion[0]
        for m in self.motion:
            if m["frame"] <= t:
                seg = m
        dt = t - seg["frame"]
        vx, vy = seg.get("velocity", (0.0, 0.0))
        return seg["center"][0] + vx * dt, seg["center"][1] + vy * dt

    def visible(self, t: int) -> bool:
        return not any(a <= t <= b for a, b in self.hidden)


@dataclass
class SceneScript:
    name: str
    width: int
    height: int
    frames: int
    background: tuple[int, int, int]
    objects: list[ObjectScript]
    occluders: list[dict] = field(default_factory=list)
    cuts: list[dict] = field(default_factory=list)
    trackers: list[dict] = field(default_factory=list)
    mpm: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    def object(self, obj_id: int) -> ObjectScript:
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise KeyError(f"{self.name}: no object {obj_id}")

    def background_at(self, t: int) -> tuple[int, int, int]:
        color = self.background
        for cut in sorted(self.cuts, key=lambda c: c["frame"]):
            if cut["frame"] <= t:
                color = tuple(cut["background"])
        return color

    def target_ids(self) -> list[int]:
        return sorted(o.id for o in self.objects if o.target)


_SCRIPT_KEYS = {"name", "width", "height", "frames", "background", "objects", "occluders",
                "cuts", "trackers", "mpm", "seed", "description"}
_OBJECT_KEYS = {"id", "shape", "size", "color", "motion", "hidden", "target"}


def parse_script(data: dict[str, Any]) -> SceneScript:
    unknown = set(data) - _SCRIPT_KEYS
    if unknown:
        raise ValueError(f"unknown scene keys: {sorted(unknown)}")
    objects = []
    for o in data.get("objects", []):
        bad = set(o) - _OBJECT_KEYS
        if bad:
            raise ValueError(f"object {o.get('id')}: unknown keys {sorted(bad)}")
        if o.get("shape", "rect") not in ("rect", "ellipse"):
            raise ValueError(f"object {o['id']}: shape must be rect or ellipse")
        motion = sorted(o["motion"], key=lambda m: m["frame"])
        if not motion or motion[0]["frame"] != 0:
            raise ValueError(f"object {o['id']}: motion must start at frame 0")
        objects.append(ObjectScript(
            id=int(o["id"]), shape=o.get("shape", "rect"), size=tuple(o["size"]),
            color=tuple(o["color"]), motion=motion,
            hidden=[tuple(h) for h in o.get("hidden", [])], target=bool(o.get("target", True)),
        ))
    ids = [o.id for o in objects]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate object IDs")
    if any(i < 1 or (o.target and i > 255) for i, o in zip(ids, objects)):
        raise ValueError("target object IDs must lie in 1..255")
    script = SceneScript(
        name=data["name"], width=int(data["width"]), height=int(data["height"]),
        frames=int(data["frames"]), background=tuple(data["background"]), objects=objects,
        occluders=data.get("occluders", []), cuts=data.get("cuts", []),
        trackers=data.get("trackers", []), mpm=data.get("mpm", {}),
        seed=int(data.get("seed", 0)), raw=copy.deepcopy(data),
    )
    if script.width < 1 or script.height < 1 or script.frames < 1:
        raise ValueError(f"{script.name}: canvas and frame count must be positive")
    return script


def load_script(path) -> SceneScript:
    return parse_script(json.loads(Path(path).read_text()))


def builtin_script(name: str) -> SceneScript:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    text = resources.files("vosbench.scenarios").joinpath(f"{name}.json").read_text()
    return parse_script(json.loads(text))


# -- rendering --------------------------------------------------------------

def _shape_mask(shape: str, center, size, width: int, height: int) -> np.ndarray:
    """Pixels whose centers fall inside the shape; clipped to the canvas."""
    cx, cy = center
    w, h = size
    out = np.zeros((height, width), dtype=bool)
    # pixel col c covers [c, c+1); its center c+0.5 is inside when
    # cx - w/2 <= c + 0.5 < cx + w/2
    c0 = max(0, int(np.ceil(cx - w / 2 - 0.5)))
    c1 = min(width, int(np.ceil(cx + w / 2 - 0.5)))
    r0 = max(0, int(np.ceil(cy - h / 2 - 0.5)))
    r1 = min(height, int(np.ceil(cy + h / 2 - 0.5)))
    if c0 >= c1 or r0 >= r1:
        return out
    if shape == "rect":
        out[r0:r1, c0:c1] = True
        return out
    ys = (np.arange(r0, r1) + 0.5 - cy) / (h / 2)
    xs = (np.arange(c0, c1) + 0.5 - cx) / (w / 2)
    out[r0:r1, c0:c1] = ys[:, None] ** 2 + xs[None, :] ** 2 <= 1.0
    return out


@dataclass
class Scene:
    script: SceneScript
    gt: VideoSequence
    rgb: np.ndarray                           # (T, H, W, 3) uint8
    visible: dict[int, np.ndarray]            # per object, (T, H, W) visible pixels


def render_script(script: SceneScript) -> Scene:
    """Rasterize a script into labels and RGB frames.

    Later objects are drawn over earlier ones; active occluders clear labels
    and paint over everything.  Non-target objects appear in RGB only.
    """
    T, H, W = script.frames, script.height, script.width
    labels = np.zeros((T, H, W), dtype=np.uint8)
    rgb = np.empty((T, H, W, 3), dtype=np.uint8)
    owner = np.zeros((T, H, W), dtype=np.int32)     # object ID drawn on top, 0 = none
    for t in range(T):
        rgb[t] = script.background_at(t)
        for o in script.objects:
            if not o.visible(t):
                continue
            m = _shape_mask(o.shape, o.center(t), o.size, W, H)
            owner[t][m] = o.id
            rgb[t][m] = o.color
        for occ in script.occluders:
            a, b = occ["frames"]
            if a <= t <= b:
                x0, y0, x1, y1 = occ["rect"]
                owner[t, y0:y1, x0:x1] = 0
                rgb[t, y0:y1, x0:x1] = occ.get("color", (128, 128, 128))
    visible = {o.id: owner == o.id for o in script.objects}
    for i in script.target_ids():
        labels[visible[i]] = i
    return Scene(script, VideoSequence(labels, script.name), rgb, visible)


# -- simulated trackers -----------------------------------------------------

def signed_distance(mask: np.ndarray, clip: float) -> np.ndarray:
    """Positive inside (distance to background), negative outside, clipped."""
    if not mask.any():
        return np.full(mask.shape, -clip, dtype=np.float64)
    if mask.all():
        return np.full(mask.shape, clip, dtype=np.float64)
    inside = ndimage.distance_transform_edt(mask)
    outside = ndimage.distance_transform_edt(~mask)
    return np.clip(np.where(mask, inside, -outside), -clip, clip)


def _shift(mask: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.zeros_like(mask)
    h, w = mask.shape
    src = mask[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    out[max(0, dy):max(0, dy) + src.shape[0], max(0, dx):max(0, dx) + src.shape[1]] = src
    return out


def _in_ranges(t: int, ranges) -> bool:
    return any(a <= t <= b for a, b in ranges)


def region_feature(rgb: np.ndarray, mask: np.ndarray, color_bins: int = 4,
                   grid: int = 4) -> np.ndarray | None:
    """L2-normalized color histogram + coarse position histogram of a region."""
    if not mask.any():
        return None
    pix = rgb[mask].astype(np.int64) * color_bins // 256
    codes = (pix[:, 0] * color_bins + pix[:, 1]) * color_bins + pix[:, 2]
    color = np.bincount(codes, minlength=color_bins ** 3).astype(np.float64)
    h, w = mask.shape
    rows, cols = np.nonzero(mask)
    cells = (rows * grid // h) * grid + cols * grid // w
    pos = np.bincount(cells, minlength=grid * grid).astype(np.float64)
    feat = np.concatenate([color / color.sum(), pos / pos.sum()])
    return feat / np.linalg.norm(feat)


@dataclass
class TrackerOutput:
    name: str
    logits: dict[int, np.ndarray]                 # (T, H, W) float32 per target object
    features: dict[int, list[np.ndarray | None]]

    def labels(self) -> np.ndarray:
        """Hard labeling: per pixel the object with the largest positive logit."""
        ids = sorted(self.logits)
        stack = np.stack([self.logits[k] for k in ids])
        best = stack.argmax(axis=0)
        out = np.asarray(ids, dtype=np.uint8)[best]
        out[stack.max(axis=0) <= 0] = 0
        return out


_TRACKER_KEYS = {"name", "noise", "logit_clip", "jitter", "dropout", "swap", "confusion"}


def tracker_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def simulate_tracker(scene: Scene, config: dict | None = None, seed: int = 0) -> TrackerOutput:
    """Simulated per-object logits and region features for a rendered scene.

    ``config`` keys: ``name``, ``noise`` (logit noise std), ``logit_clip``,
    ``jitter`` (max per-frame shift, px), ``dropout`` (frame ranges where the
    output collapses to background), ``swap`` (``{"frames", "objects"}``
    identity exchanges), ``confusion`` (``{"frames", "object", "source"}``:
    the object's logits also fire on another object's region).
    """
    config = dict(config or {})
    bad = set(config) - _TRACKER_KEYS
    if bad:
        raise ValueError(f"unknown tracker keys: {sorted(bad)}")
    name = config.get("name", "tracker")
    noise = float(config.get("noise", 0.0))
    clip = float(config.get("logit_clip", 6.0))
    jitter = int(config.get("jitter", 0))
    rng = tracker_rng(seed, name)
    T, H, W = scene.gt.frames.shape
    ids = scene.script.target_ids()
    logits = {k: np.empty((T, H, W), dtype=np.float32) for k in ids}
    for t in range(T):
        shifts = {k: (rng.integers(-jitter, jitter + 1, size=2) if jitter else (0, 0)) for k in ids}
        for k in ids:
            m = scene.visible[k][t]
            if t > 0 and (shifts[k][0] or shifts[k][1]):
                m = _shift(m, int(shifts[k][0]), int(shifts[k][1]))
            z = signed_distance(m, clip)
            for c in config.get("confusion", []):
                if c["object"] == k and _in_ranges(t, [c["frames"]]):
                    z = np.maximum(z, signed_distance(scene.visible[c["source"]][t], clip))
            if t > 0 and _in_ranges(t, config.get("dropout", [])):
                z = np.full((H, W), -clip)
            if noise > 0 and t > 0:
                z = z + rng.normal(0.0, noise, size=(H, W))
            logits[k][t] = z
        for s in config.get("swap", []):
            if _in_ranges(t, [s["frames"]]):
                a, b = s["objects"]
                la, lb = logits[a][t].copy(), logits[b][t].copy()
                logits[a][t], logits[b][t] = lb, la
    out = TrackerOutput(name, logits, {})
    hard = out.labels()
    out.features = {k: [region_feature(scene.rgb[t], hard[t] == k) for t in range(T)] for k in ids}
    return out


# -- scenario suite ---------------------------------------------------------

@dataclass
class Scenario:
    name: str
    scene: Scene
    trackers: list[TrackerOutput]
    seed: int


def run_scenario(script: SceneScript, seed: int | None = None) -> Scenario:
    seed = script.seed if seed is None else seed
    scene = render_script(script)
    trackers = [simulate_tracker(scene, cfg, seed) for cfg in (script.trackers or [{}])]
    return Scenario(script.name, scene, trackers, seed)


def occlusion_benchmark(seed: int | None = None) -> dict[str, Scenario]:
    """The fixed named scenarios, rendered and tracked."""
    return {name: run_scenario(builtin_script(name), seed) for name in SCENARIOS}


# -- bulk random scenes (throughput checks) ---------------------------------

def random_script(rng: np.random.Generator, width: int, height: int, frames: int,
                  n_objects: int, name: str = "random") -> SceneScript:
    objects = []
    for k in range(1, n_objects + 1):
        w, h = rng.uniform(0.08, 0.25) * width, rng.uniform(0.08, 0.25) * height
        cx, cy = rng.uniform(0.2, 0.8) * width, rng.uniform(0.2, 0.8) * height
        vx, vy = rng.uniform(-2, 2, size=2)
        hidden = []
        if rng.random() < 0.5:
            a = int(rng.integers(1, frames))
            hidden.append((a, min(frames - 1, a + int(rng.integers(1, 8)))))
        objects.append(ObjectScript(k, str(rng.choice(["rect", "ellipse"])), (w, h),
                                    tuple(int(c) for c in rng.integers(0, 256, 3)),
                                    [{"frame": 0, "center": [cx, cy], "velocity": [vx, vy]}],
                                    hidden))
    return SceneScript(name, width, height, frames, (30, 30, 30), objects)


def perturbed(script: SceneScript, rng: np.random.Generator, shift: float = 3.0,
              scale: float = 0.1) -> SceneScript:
    """A plausible imperfect prediction: nudged trajectories and sizes."""
    out = copy.deepcopy(script)
    for o in out.objects:
        o.size = tuple(s * (1 + rng.uniform(-scale, scale)) for s in o.size)
        for m in o.motion:
            m["center"] = [c + rng.uniform(-shift, shift) for c in m["center"]]
    return out


def random_pair(seed: int, width: int = 854, height: int = 480, frames: int = 100,
                n_objects: int = 3) -> tuple[VideoSequence, VideoSequence]:
    """Ground truth and a perturbed prediction rendered from one random script."""
    rng = np.random.default_rng(seed)
    script = random_script(rng, width, height, frames, n_objects, name=f"seq{seed:04d}")
    gt = _labels_only(script)
    pred = _labels_only(perturbed(script, rng))
    return VideoSequence(gt, script.name), VideoSequence(pred, script.name)


def _labels_only(script: SceneScript) -> np.ndarray:
    T, H, W = script.frames, script.height, script.width
    labels = np.zeros((T, H, W), dtype=np.uint8)
    for t in range(T):
        for o in script.objects:
            if o.visible(t):
                m = _shape_mask(o.shape, o.center(t), o.size, W, H)
                labels[t][m] = o.id if o.target else 0
    return labels
