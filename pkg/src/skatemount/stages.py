"""Curriculum stage definitions and spawn samplers."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

STAGE_IDS = ("gait_pretrain", "forward_baseline", "above_board", "square_60cm", "adjacent", "free_board")
TERMINATIONS = ("timeout", "fell", "board_flipped")
SAMPLERS = ("point", "square", "annulus")


class ConfigError(ValueError):
    """Raised for an invalid configuration; ``errors`` lists ``(path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


@dataclass(frozen=True)
class RewardConfig:
    feet_on_board: float = 2.5
    orientation: float = 1.0
    distance: float = 1.5
    flip: float = -10.0
    skate_velocity: float = -0.5
    track_lin_vel: float = 1.0
    track_ang_vel: float = 0.5
    flat_orientation: float = -2.5
    action_rate: float = -0.01
    joint_torques: float = -2.0e-4
    sigma: float = 0.5
    distance_threshold: float = 0.5
    tracking_sigma: float = 0.5
    # horizontal (True) or full 3D (False) trunk-to-deck distance
    planar_distance: bool = True

    TERMS = ("feet_on_board", "orientation", "distance", "flip", "skate_velocity",
             "track_lin_vel", "track_ang_vel", "flat_orientation", "action_rate", "joint_torques")

    def weights(self):
        return {t: getattr(self, t) for t in self.TERMS}


@dataclass(frozen=True)
class SpawnConfig:
    """Initial robot base placement relative to the deck centre.

    ``square`` samples uniformly in an axis-aligned square of side ``side``;
    ``annulus`` samples uniformly by area between ``radius_min`` and
    ``radius_max``; ``point`` places the base at ``center`` plus
    ``uniform(-jitter, jitter)`` per axis.  Yaw is uniform in
    ``[-yaw_range, yaw_range]`` around the board heading, or around the bearing
    to the board when ``face_board`` is set.
    """

    kind: str = "point"
    center: tuple = (0.0, 0.0)
    jitter: float = 0.0
    side: float = 0.6
    radius_min: float = 0.45
    radius_max: float = 0.8
    yaw_range: float = 0.0
    face_board: bool = False


@dataclass(frozen=True)
class StageConfig:
    id: str
    spawn: SpawnConfig = field(default_factory=SpawnConfig)
    board_fixed: bool = True
    board_offset: tuple = (0.0, 0.0)
    joint_pos_noise: float = 0.0
    joint_vel_noise: float = 0.0
    push_force: float = 0.0
    push_torque: float = 0.0
    push_interval_s: float = 1.5
    terminations: tuple = ("timeout", "fell")
    episode_length_s: float = 5.0
    fell_height: float = 0.2
    fell_gravity_z: float = -0.5
    # velocity command ranges (vx, vy, yaw rate); zero means no command
    command_range: tuple = (0.0, 0.0, 0.0)
    reward: RewardConfig = field(default_factory=RewardConfig)
    iterations: int = 300

    def episode_steps(self, control_dt: float) -> int:
        return int(round(self.episode_length_s / control_dt))


def validate_stage(stage: StageConfig, path: str = "stage"):
    """Return ``(errors, warnings)`` as lists of ``(path, message)``."""
    errors, warns = [], []
    if stage.id not in STAGE_IDS:
        errors.append((f"{path}.id", f"unknown stage id {stage.id!r}; expected one of {STAGE_IDS}"))
    s = stage.spawn
    if s.kind not in SAMPLERS:
        errors.append((f"{path}.spawn.kind", f"unknown sampler {s.kind!r}"))
    for name in ("jitter", "side", "radius_min", "radius_max", "yaw_range"):
        if getattr(s, name) < 0:
            errors.append((f"{path}.spawn.{name}", "must be >= 0"))
    if s.radius_min > s.radius_max:
        errors.append((f"{path}.spawn.radius_min", "must not exceed radius_max"))
    for name in ("joint_pos_noise", "joint_vel_noise", "push_force", "push_torque"):
        if getattr(stage, name) < 0:
            errors.append((f"{path}.{name}", "must be >= 0"))
    if any(c < 0 for c in stage.command_range):
        errors.append((f"{path}.command_range", "ranges must be >= 0"))
    if not stage.episode_length_s > 0:
        errors.append((f"{path}.episode_length_s", "must be > 0"))
    if not stage.push_interval_s > 0:
        errors.append((f"{path}.push_interval_s", "must be > 0"))
    if stage.iterations < 0:
        errors.append((f"{path}.iterations", "must be >= 0"))
    for t in stage.terminations:
        if t not in TERMINATIONS:
            errors.append((f"{path}.terminations", f"unknown termination {t!r}"))
    r = stage.reward
    if not r.sigma > 0:
        errors.append((f"{path}.reward.sigma", "must be > 0"))
    if not r.distance_threshold > 0:
        errors.append((f"{path}.reward.distance_threshold", "must be > 0"))
    if not r.tracking_sigma > 0:
        errors.append((f"{path}.reward.tracking_sigma", "must be > 0"))
    if stage.id == "square_60cm" and (s.kind != "square" or not math.isclose(s.side, 0.6)):
        warns.append((f"{path}.spawn.side",
                      "the square_60cm stage spawns in a 60 x 60 cm square centred on the board; "
                      f"configured {s.kind} with side {s.side}"))
    if stage.id == "free_board" and stage.board_fixed:
        warns.append((f"{path}.board_fixed", "free_board stage normally runs with a free board"))
    return errors, warns


def check_stage(stage: StageConfig) -> StageConfig:
    errors, warns = validate_stage(stage)
    if errors:
        raise ConfigError(errors)
    for p, m in warns:
        warnings.warn(f"{p}: {m}", stacklevel=2)
    return stage


def default_stages():
    """Reverse curriculum preceded by gait pretraining and the forward-curriculum baseline."""
    mount_terms = ("timeout", "fell")
    return {
        "gait_pretrain": StageConfig(
            "gait_pretrain",
            spawn=SpawnConfig("square", center=(-3.0, 0.0), side=1.0, yaw_range=math.pi),
            joint_pos_noise=0.2, joint_vel_noise=0.5, push_force=20.0, push_torque=2.0,
            command_range=(1.0, 0.5, 1.0),
            reward=RewardConfig(feet_on_board=0.0, orientation=0.0, distance=0.0, flip=0.0, skate_velocity=0.0),
            terminations=mount_terms, iterations=500),
        "forward_baseline": StageConfig(
            "forward_baseline",
            spawn=SpawnConfig("square", side=2.0, yaw_range=math.pi),
            joint_pos_noise=0.2, joint_vel_noise=0.5, push_force=20.0, push_torque=2.0,
            terminations=mount_terms, iterations=500),
        "above_board": StageConfig(
            "above_board", spawn=SpawnConfig("point"),
            joint_pos_noise=0.02, joint_vel_noise=0.05,
            terminations=mount_terms, iterations=300),
        "square_60cm": StageConfig(
            "square_60cm", spawn=SpawnConfig("square", side=0.6, yaw_range=0.3),
            joint_pos_noise=0.1, joint_vel_noise=0.3, push_force=10.0, push_torque=1.0,
            terminations=mount_terms, iterations=500),
        "adjacent": StageConfig(
            "adjacent", spawn=SpawnConfig("annulus", radius_min=0.45, radius_max=0.8, yaw_range=0.5, face_board=True),
            joint_pos_noise=0.1, joint_vel_noise=0.3, push_force=10.0, push_torque=1.0,
            terminations=mount_terms, iterations=500),
        "free_board": StageConfig(
            "free_board", board_fixed=False,
            spawn=SpawnConfig("annulus", radius_min=0.45, radius_max=0.8, yaw_range=0.5, face_board=True),
            joint_pos_noise=0.1, joint_vel_noise=0.3, push_force=10.0, push_torque=1.0,
            terminations=("timeout", "fell", "board_flipped"), iterations=500),
    }


def sample_spawn_xy_yaw(spawn: SpawnConfig, rng: np.random.Generator, board_xy=(0.0, 0.0), board_yaw=0.0):
    """Draw one base position (x, y) and yaw for ``spawn``; the sampler is in the board frame."""
    if spawn.kind == "point":
        local = np.asarray(spawn.center, dtype=float) + rng.uniform(-spawn.jitter, spawn.jitter, size=2)
    elif spawn.kind == "square":
        local = np.asarray(spawn.center, dtype=float) + rng.uniform(-0.5 * spawn.side, 0.5 * spawn.side, size=2)
    elif spawn.kind == "annulus":
        r = math.sqrt(rng.uniform(spawn.radius_min ** 2, spawn.radius_max ** 2))
        phi = rng.uniform(-math.pi, math.pi)
        local = np.asarray(spawn.center, dtype=float) + r * np.array([math.cos(phi), math.sin(phi)])
    else:
        raise ConfigError([("spawn.kind", f"unknown sampler {spawn.kind!r}")])
    c, s = math.cos(board_yaw), math.sin(board_yaw)
    xy = np.array([board_xy[0] + c * local[0] - s * local[1], board_xy[1] + s * local[0] + c * local[1]])
    heading = math.atan2(board_xy[1] - xy[1], board_xy[0] - xy[0]) if spawn.face_board else board_yaw
    yaw = heading + rng.uniform(-spawn.yaw_range, spawn.yaw_range)
    return xy, float((yaw + math.pi) % (2 * math.pi) - math.pi)


def with_overrides(stage: StageConfig, **kw) -> StageConfig:
    return replace(stage, **kw)
