"""Run configuration: YAML loading, schema checks and the reproducibility hash.

A run file is a YAML mapping with these top-level keys (all optional)::

    seed, num_envs, num_workers, output_dir, checkpoint_every, warm_start,
    record_wall_time, sim, skateboard, robot, ppo, stages

``sim``, ``skateboard``, ``robot`` and ``ppo`` override the corresponding
parameter dataclasses field by field.  ``stages`` is an ordered list; each
entry names a stage ``id`` and overrides that stage's built-in defaults, so
``[{id: above_board}, {id: square_60cm}]`` is a complete two-stage curriculum.
Unknown keys are errors.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dynamics import ContactParams, InertialParams
from .env import SimParams
from .ppo import PpoConfig
from .quadruped import QuadrupedParams
from .skateboard import SkateboardParams
from .stages import STAGE_IDS, ConfigError, StageConfig, default_stages, validate_stage

DEFAULT_CONFIG = "default_config.yaml"
# fields that change how a run executes but not what it computes
_UNHASHED = ("num_workers", "output_dir", "record_wall_time")


@dataclass
class RunConfig:
    sim: SimParams = field(default_factory=SimParams)
    skateboard: SkateboardParams = field(default_factory=SkateboardParams)
    robot: QuadrupedParams = field(default_factory=QuadrupedParams)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    stages: list = field(default_factory=lambda: [default_stages()[s] for s in ("above_board", "square_60cm",
                                                                                 "adjacent", "free_board")])
    seed: int = 0
    num_envs: int = 64
    num_workers: int = 1
    output_dir: str | None = None
    checkpoint_every: int = 50
    warm_start: str | None = None
    # off gives wall_s = 0 so that repeated runs write identical metrics
    record_wall_time: bool = True

    def stage(self, stage_id: str) -> StageConfig:
        for s in self.stages:
            if s.id == stage_id:
                return s
        raise KeyError(f"stage {stage_id!r} is not in this configuration "
                       f"(configured: {', '.join(s.id for s in self.stages)})")


# --------------------------------------------------------------------------
# dict <-> dataclass
# --------------------------------------------------------------------------

def to_plain(obj):
    """Dataclasses, tuples and arrays to JSON/YAML-friendly builtins."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.init}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(default, value, path, errors, annotation=""):
    """Convert ``value`` to the type of ``default``; record a problem and return the default on failure."""
    def bad(expected):
        errors.append((path, f"expected {expected}, got {value!r}"))
        return default

    if dataclasses.is_dataclass(default):
        if not isinstance(value, dict):
            return bad("a mapping")
        return _override(default, value, path, errors)
    if default is None:
        if value is None:
            return None
        if "str" in str(annotation):
            return value if isinstance(value, str) else bad("a string")
        return float(value) if _is_number(value) else bad("a number")
    if isinstance(default, bool):
        return value if isinstance(value, bool) else bad("true/false")
    if isinstance(default, int):
        return value if isinstance(value, int) and not isinstance(value, bool) else bad("an integer")
    if isinstance(default, float):
        return float(value) if _is_number(value) else bad("a number")
    if isinstance(default, str):
        return value if isinstance(value, str) else bad("a string")
    if isinstance(default, np.ndarray):
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            return bad("a numeric array")
        if arr.shape != default.shape:
            errors.append((path, f"expected shape {default.shape}, got {arr.shape}"))
            return default
        return arr
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            return bad("a list")
        if default and isinstance(default[0], str):
            return tuple(value) if all(isinstance(v, str) for v in value) else bad("a list of strings")
        if not all(_is_number(v) for v in value):
            return bad("a list of numbers")
        if default and isinstance(default[0], int):
            return tuple(value) if all(isinstance(v, int) for v in value) else bad("a list of integers")
        if len(value) != len(default):
            return bad(f"{len(default)} values")
        return tuple(float(v) for v in value)
    return value


def _override(obj, data: dict, path: str, errors):
    names = {f.name: f for f in dataclasses.fields(obj) if f.init}
    kw = {}
    for key, value in data.items():
        p = f"{path}.{key}" if path else key
        if key not in names:
            errors.append((p, f"unknown key; expected one of {sorted(names)}"))
            continue
        default = getattr(obj, key)
        if isinstance(obj, InertialParams) and key == "inertia":
            default = np.diag(default) if np.allclose(default, np.diag(np.diag(default))) else default
            arr = np.asarray(value, dtype=float)
            if arr.shape not in ((3,), (3, 3)):
                errors.append((p, f"expected 3 diagonal entries or a 3x3 matrix, got shape {arr.shape}"))
                continue
            kw[key] = arr
            continue
        kw[key] = _coerce(default, value, p, errors, names[key].type)
    try:
        return dataclasses.replace(obj, **kw)
    except (ValueError, TypeError) as exc:
        errors.append((path or "<root>", str(exc)))
        return obj


def _load_stage(entry, path, errors):
    if not isinstance(entry, dict) or "id" not in entry:
        errors.append((path, "each stage needs an 'id'"))
        return None
    sid = entry["id"]
    if sid not in STAGE_IDS:
        errors.append((f"{path}.id", f"unknown stage id {sid!r}; expected one of {STAGE_IDS}"))
        return None
    rest = {k: v for k, v in entry.items() if k != "id"}
    return _override(default_stages()[sid], rest, path, errors)


def config_from_dict(data) -> tuple:
    """Build a ``RunConfig``; returns ``(config, errors)`` without raising."""
    errors = []
    if data is None:
        data = {}
    if not isinstance(data, dict):
        return RunConfig(), [("<root>", "the configuration must be a mapping")]
    data = dict(data)
    stages_data = data.pop("stages", None)
    cfg = _override(RunConfig(), data, "", errors)
    if stages_data is not None:
        if not isinstance(stages_data, list):
            errors.append(("stages", "expected a list of stages"))
        else:
            stages = [_load_stage(e, f"stages[{i}]", errors) for i, e in enumerate(stages_data)]
            cfg.stages = [s for s in stages if s is not None]
    return cfg, errors


def validate_config(cfg: RunConfig, base_dir: Path | None = None):
    """Cross-field checks; returns ``(errors, warnings)`` as ``(path, message)`` lists."""
    errors, warns = [], []
    if not cfg.stages:
        errors.append(("stages", "at least one stage is required"))
    seen = set()
    for i, stage in enumerate(cfg.stages):
        e, w = validate_stage(stage, f"stages[{i}]")
        errors += e
        warns += w
        if stage.id in seen:
            errors.append((f"stages[{i}].id", f"stage {stage.id!r} appears twice"))
        seen.add(stage.id)
    if cfg.num_envs < 1:
        errors.append(("num_envs", "must be >= 1"))
    if cfg.num_workers < 1:
        errors.append(("num_workers", "must be >= 1"))
    if cfg.seed < 0:
        errors.append(("seed", "must be >= 0"))
    if cfg.checkpoint_every < 0:
        errors.append(("checkpoint_every", "must be >= 0"))
    errors += cfg.ppo.validate(cfg.ppo.steps_per_env * max(cfg.num_envs, 1))
    if not cfg.sim.dt > 0:
        errors.append(("sim.dt", "must be > 0"))
    if cfg.sim.substeps < 1:
        errors.append(("sim.substeps", "must be >= 1"))
    if cfg.warm_start is not None:
        p = Path(cfg.warm_start)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            errors.append(("warm_start", f"checkpoint file {str(p)!r} does not exist"))
    for name in ("ground_contact", "deck_contact"):
        c = getattr(cfg.robot, name)
        if not isinstance(c, ContactParams):
            errors.append((f"robot.{name}", "malformed contact parameters"))
    if not math.isfinite(cfg.sim.action_clip) or cfg.sim.action_clip <= 0:
        errors.append(("sim.action_clip", "must be a positive finite number"))
    return errors, warns


def read_config(path):
    """Load and validate a run file; raises ``ConfigError`` listing every violation."""
    cfg, errors, warns = check_config_file(path)
    if errors:
        raise ConfigError(errors)
    return cfg, warns


def check_config_file(path):
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        return RunConfig(), [("<file>", f"cannot read {path}: {exc.strerror}")], []
    except yaml.YAMLError as exc:
        return RunConfig(), [("<file>", f"invalid YAML: {exc}")], []
    cfg, errors = config_from_dict(data)
    e2, warns = validate_config(cfg, path.parent)
    return cfg, errors + e2, warns


def default_config_text() -> str:
    return resources.files(__package__).joinpath(DEFAULT_CONFIG).read_text()


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_plain(cfg), sort_keys=False)


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 over the canonical JSON of everything that affects results."""
    plain = to_plain(cfg)
    for k in _UNHASHED:
        plain.pop(k, None)
    blob = json.dumps(plain, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()
