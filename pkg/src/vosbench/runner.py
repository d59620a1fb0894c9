"""Directory-level drivers behind the command line: evaluate, fuse, simulate."""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from . import __version__
from .config import RunConfig
from .fusion import FusionConfig, label_sources, resolve_sequence, selective_average
from .kinematics import MpmConfig, track_with_prior
from .masks import VideoSequence, frame_files, read_manifest, read_sequence, write_manifest, write_sequence
from .memory import frame_distance
from .metrics import MetricConfig, SequenceReport, dataset_aggregate, evaluate_sequence
from .report import build_report, write_report
from .synth import Scenario, SceneScript, run_scenario

log = logging.getLogger(__name__)


class InputError(Exception):
    """Unreadable or inconsistent input; the message names the offending file."""


# -- loading ----------------------------------------------------------------

def list_sequences(root) -> dict[str, Path]:
    """Sequences under ``root``: frame directories or ``.rle`` manifests."""
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"{root}: not a directory")
    found: dict[str, Path] = {}
    for p in sorted(root.iterdir()):
        if p.is_dir() and frame_files(p):
            found[p.name] = p
        elif p.is_file() and p.suffix == ".rle":
            found.setdefault(p.stem, p)
    return found


def load_sequence(path: Path, name: str) -> VideoSequence:
    try:
        if path.suffix == ".rle":
            seq = read_manifest(path)
            return VideoSequence(seq.frames, name)
        return read_sequence(path, name)
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


# -- evaluate ---------------------------------------------------------------

def _evaluate_one(job: tuple[str, str, str | None, MetricConfig]) -> list[SequenceReport]:
    name, gt_path, pred_path, metric_cfg = job
    gt = load_sequence(Path(gt_path), name)
    if pred_path is None:
        pred = VideoSequence(np.zeros_like(gt.frames), name)
    else:
        pred = load_sequence(Path(pred_path), name)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            return evaluate_sequence(gt, pred, metric_cfg)
        except ValueError as exc:
            raise InputError(f"{pred_path}: {exc}") from None


def evaluate_dirs(gt_dir, pred_dir, config: RunConfig = RunConfig()) -> dict[str, Any]:
    """Score every ground-truth sequence against its prediction.

    A sequence missing from ``pred_dir`` is scored as an all-empty
    prediction.  Rows come out in sequence-name order whatever ``jobs`` is.
    """
    gt_seqs = list_sequences(gt_dir)
    if not gt_seqs:
        raise InputError(f"{gt_dir}: no sequences found")
    pred_seqs = list_sequences(pred_dir)
    jobs = []
    for name, path in gt_seqs.items():
        pred = pred_seqs.get(name)
        if pred is None:
            log.warning("sequence %r missing from predictions; scored as empty", name)
        jobs.append((name, str(path), None if pred is None else str(pred), config.metrics))
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_evaluate_one, jobs))
    else:
        results = [_evaluate_one(j) for j in jobs]
    rows = [r for rs in results for r in rs]
    if not rows:
        raise InputError(f"{gt_dir}: ground truth holds no objects")
    meta = {
        "tool": "vosbench",
        "version": __version__,
        "metrics": asdict(config.metrics),
        "sequences": len(gt_seqs),
        "missing_predictions": sorted(set(gt_seqs) - set(pred_seqs)),
    }
    return build_report(rows, dataset_aggregate(rows), meta)


# -- fuse -------------------------------------------------------------------

def load_fusion_manifest(path) -> dict[str, Any]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg})") from None
    unknown = set(doc) - {"sources", "threshold", "mode", "output"}
    if unknown:
        raise InputError(f"{path}: unknown manifest keys {sorted(unknown)}")
    sources = doc.get("sources") or []
    if not sources:
        raise InputError(f"{path}: manifest lists no sources")
    base = path.parent
    out = []
    for i, s in enumerate(sources):
        if "path" not in s:
            raise InputError(f"{path}: source {i} has no path")
        p = Path(s["path"])
        out.append({"name": s.get("name", f"source{i}"),
                    "path": p if p.is_absolute() else base / p,
                    "weight": float(s.get("weight", 1.0))})
    mode = doc.get("mode", "vote")
    if mode not in ("vote", "average"):
        raise InputError(f"{path}: mode must be 'vote' or 'average'")
    output = doc.get("output")
    if output is not None and not Path(output).is_absolute():
        output = base / output
    return {"sources": out, "threshold": doc.get("threshold"), "mode": mode, "output": output}


def fuse_frames(frames_by_source: dict[str, np.ndarray], weights: dict[str, float],
                threshold: float | None = None, mode: str = "vote") -> np.ndarray:
    """Fused ``(T, H, W)`` labels from hard label stacks of equal shape."""
    ids = sorted({int(i) for f in frames_by_source.values() for i in np.unique(f) if i != 0})
    first = next(iter(frames_by_source.values()))
    if not ids:
        return np.zeros_like(first, dtype=np.uint8)
    if mode == "vote":
        sources = label_sources(frames_by_source, weights)
        return resolve_sequence(sources, first.shape[0], FusionConfig(threshold=threshold))
    out = np.zeros(first.shape, dtype=np.uint8)
    for t in range(first.shape[0]):
        for k in ids:
            m = selective_average([(f[t] == k, weights[n]) for n, f in frames_by_source.items()])
            out[t][m & (out[t] == 0)] = k
    return out


def fuse_manifest(path, out_dir=None, threshold: float | None = None) -> list[str]:
    """Fuse the sources listed in a manifest; returns the sequence names written."""
    man = load_fusion_manifest(path)
    out_dir = out_dir or man["output"]
    if out_dir is None:
        raise InputError(f"{path}: no output directory given")
    if threshold is None:
        threshold = man["threshold"]
    listings = {s["name"]: list_sequences(s["path"]) for s in man["sources"]}
    names = None
    for src, seqs in listings.items():
        if names is None:
            names = set(seqs)
        elif set(seqs) != names:
            diff = sorted(names.symmetric_difference(seqs))
            raise InputError(f"source {src!r} disagrees on sequences: {', '.join(diff)}")
    weights = {s["name"]: s["weight"] for s in man["sources"]}
    written = []
    for name in sorted(names or ()):
        stacks: dict[str, np.ndarray] = {}
        for src, seqs in listings.items():
            seq = load_sequence(seqs[name], name)
            if stacks:
                ref = next(iter(stacks.values()))
                if seq.frames.shape[0] != ref.shape[0]:
                    raise InputError(f"sequence {name}: source {src!r} has {seq.frames.shape[0]} "
                                     f"frames, expected {ref.shape[0]}")
                if seq.frames.shape[1:] != ref.shape[1:]:
                    raise InputError(f"sequence {name}, frame 0: source {src!r} is "
                                     f"{seq.width}x{seq.height}, expected {ref.shape[2]}x{ref.shape[1]}")
            stacks[src] = np.asarray(seq.frames)
        fused = fuse_frames(stacks, weights, threshold, man["mode"])
        write_sequence(Path(out_dir) / name, VideoSequence(fused, name))
        written.append(name)
    return written


# -- simulate ---------------------------------------------------------------

def labels_from_logits(logits: dict[int, np.ndarray]) -> np.ndarray:
    """Per pixel the object with the largest positive logit, else background."""
    ids = sorted(logits)
    stack = np.stack([logits[k] for k in ids])
    out = np.asarray(ids, dtype=np.uint8)[stack.argmax(axis=0)]
    out[stack.max(axis=0) <= 0] = 0
    return out


def prior_labels(scenario: Scenario, mpm: MpmConfig, tracker: int = 0) -> tuple[np.ndarray, dict]:
    """Labels from one tracker's logits after the motion prior, plus the tracks."""
    gt = scenario.scene.gt
    out = scenario.trackers[tracker]
    fused, tracks = {}, {}
    for k, raw in out.logits.items():
        first = gt.frames[0] == k
        if not first.any():
            fused[k] = raw
            continue
        tracks[k] = track_with_prior(raw, first, mpm)
        fused[k] = tracks[k].logits
    return labels_from_logits(fused), tracks


def scene_change_log(rgb: np.ndarray, threshold: float, bins=(32, 32)) -> tuple[str, list[int]]:
    lines = ["frame distance change"]
    cuts = []
    for t in range(1, rgb.shape[0]):
        d = frame_distance(rgb[t - 1], rgb[t], bins)
        flag = d > threshold
        if flag:
            cuts.append(t)
        lines.append(f"{t} {d:.6f} {'yes' if flag else 'no'}")
    return "\n".join(lines) + "\n", cuts


def reappearance_j(row: SequenceReport) -> float | None:
    vals = [s.j for s, r in zip(row.frames, _reappear_flags(row)) if r]
    return float(np.mean(vals)) if vals else None


def _reappear_flags(row: SequenceReport) -> list[bool]:
    seen_absent = False
    flags = []
    for s in row.frames:
        if not s.gt_present:
            seen_absent = True
        flags.append(s.gt_present and seen_absent)
    return flags


def simulate(script: SceneScript, out_dir, config: RunConfig = RunConfig(),
             mpm_mode: str = "auto") -> dict[str, Any]:
    """Render a scenario, run its trackers, evaluate, and write everything.

    ``mpm_mode``: ``on`` / ``off`` add one motion-prior variant (``off``
    runs the same tracking with the prior weight at zero), ``both`` adds
    the two, ``auto`` means ``both`` when the script carries an ``mpm``
    section and neither otherwise.
    """
    if mpm_mode not in ("auto", "on", "off", "both"):
        raise ValueError(f"unknown mpm mode {mpm_mode!r}")
    out = Path(out_dir)
    scenario = run_scenario(script, config.seed)
    scene = scenario.scene
    name = script.name
    gt = scene.gt

    write_sequence(out / "gt" / name, gt)
    write_manifest(out / "gt" / f"{name}.rle", gt)
    (out / "rgb" / name).mkdir(parents=True, exist_ok=True)
    for t in range(scene.rgb.shape[0]):
        Image.fromarray(scene.rgb[t]).save(out / "rgb" / name / f"{t:05d}.png", format="PNG")

    variants: dict[str, np.ndarray] = {}
    for tr in scenario.trackers:
        variants[tr.name] = tr.labels()
    if len(scenario.trackers) > 1:
        variants["fused"] = fuse_frames({tr.name: variants[tr.name] for tr in scenario.trackers},
                                        {tr.name: 1.0 for tr in scenario.trackers},
                                        config.fusion_threshold)
        manifest = {"sources": [{"name": tr.name, "path": f"pred/{tr.name}", "weight": 1.0}
                                for tr in scenario.trackers],
                    "threshold": config.fusion_threshold, "mode": "vote", "output": "fused"}
        (out / "fusion.json").write_text(json.dumps(manifest, indent=1) + "\n")

    mode = mpm_mode
    if mode == "auto":
        mode = "both" if script.mpm else None
    mpm_cfg = MpmConfig(**{**asdict(config.mpm), **script.mpm})
    if mode in ("off", "both"):
        off_cfg = MpmConfig(**{**asdict(mpm_cfg), "beta": 0.0})
        variants["mpm-off"], _ = prior_labels(scenario, off_cfg)
    if mode in ("on", "both"):
        variants["mpm-on"], _ = prior_labels(scenario, mpm_cfg)

    rows: list[SequenceReport] = []
    for variant, labels in variants.items():
        pred = VideoSequence(labels, name)
        write_sequence(out / "pred" / variant / name, pred)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for r in evaluate_sequence(gt, pred, config.metrics):
                rows.append(SequenceReport(**{**r.__dict__, "sequence": f"{name}:{variant}"}))

    log_text, cuts = scene_change_log(scene.rgb, config.memory.scene_threshold, config.memory.hist_bins)
    (out / "scene_changes.log").write_text(log_text)

    meta: dict[str, Any] = {
        "tool": "vosbench",
        "version": __version__,
        "scenario": name,
        "seed": scenario.seed,
        "metrics": asdict(config.metrics),
        "variants": list(variants),
        "scene_changes": cuts,
    }
    if mode is not None:
        comparison = {}
        for variant in ("mpm-off", "mpm-on"):
            if variant in variants:
                comparison[variant] = {
                    str(r.object_id): reappearance_j(r)
                    for r in rows if r.sequence == f"{name}:{variant}"
                }
        meta["mpm"] = {"config": asdict(mpm_cfg), "reappearance_J": comparison}
        lines = ["object " + " ".join(comparison)]
        for obj in next(iter(comparison.values())):
            lines.append(f"{obj} " + " ".join(_fmt(c[obj]) for c in comparison.values()))
        (out / "mpm.txt").write_text("\n".join(lines) + "\n")
    doc = build_report(rows, dataset_aggregate(rows), meta)
    write_report(out, doc)
    return doc


def _fmt(v: float | None) -> str:
    return "n/a" if v is None else f"{100 * v:.2f}"
