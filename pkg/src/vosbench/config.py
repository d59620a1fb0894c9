"""Run configuration: defaults, overridden by a JSON file, overridden by flags."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .kinematics import MpmConfig
from .memory import MemoryPolicyConfig
from .metrics import MetricConfig

JOBS_ENV = "VOSBENCH_JOBS"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    metrics: MetricConfig = field(default_factory=MetricConfig)
    mpm: MpmConfig = field(default_factory=MpmConfig)
    memory: MemoryPolicyConfig = field(default_factory=MemoryPolicyConfig)
    fusion_threshold: float | None = None
    jobs: int = 1
    seed: int | None = None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["memory"]["hist_bins"] = list(d["memory"]["hist_bins"])
        return d


def _section(cls, values: dict, name: str):
    if not isinstance(values, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(sorted(unknown))}")
    return values


_TOP_KEYS = {"metrics", "mpm", "memory", "fusion", "jobs", "seed"}


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV)
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ConfigError(f"{JOBS_ENV} must be at least 1")
    return jobs


def load_config(path=None, **overrides) -> RunConfig:
    """Build a :class:`RunConfig`.

    ``overrides`` use flat names (``k_adapt``, ``tolerance_frac``,
    ``empty_score``, ``jobs``, ``seed``); None values are ignored.
    """
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")

    metrics = dict(_section(MetricConfig, data.get("metrics", {}), "metrics"))
    mpm = dict(_section(MpmConfig, data.get("mpm", {}), "mpm"))
    memory = dict(_section(MemoryPolicyConfig, data.get("memory", {}), "memory"))
    fusion = data.get("fusion", {})
    if set(fusion) - {"threshold"}:
        raise ConfigError(f"unknown keys in 'fusion': {', '.join(sorted(set(fusion) - {'threshold'}))}")

    for key in ("tolerance_frac", "k_adapt", "empty_score"):
        if overrides.get(key) is not None:
            metrics[key] = overrides[key]
    if "hist_bins" in memory:
        memory["hist_bins"] = tuple(memory["hist_bins"])
    jobs = overrides.get("jobs") or data.get("jobs") or default_jobs()
    seed = overrides.get("seed", None)
    if seed is None:
        seed = data.get("seed")
    try:
        cfg = RunConfig(
            metrics=MetricConfig(**metrics),
            mpm=MpmConfig(**mpm),
            memory=MemoryPolicyConfig(**memory),
            fusion_threshold=fusion.get("threshold"),
            jobs=int(jobs),
            seed=None if seed is None else int(seed),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.jobs < 1:
        raise ConfigError("jobs must be at least 1")
    return cfg
