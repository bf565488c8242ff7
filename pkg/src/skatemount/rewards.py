"""Mounting reward terms and the baseline locomotion terms.

Each term is returned unweighted; ``total_reward`` applies the weights from a
``RewardConfig`` and sums them.  All functions broadcast over a batch axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stages import RewardConfig


def reward_feet_on_board(contact_flags):
    flags = np.asarray(contact_flags)
    return np.sum(flags.astype(np.int64), axis=-1)


def reward_orientation(theta_rel, d, cfg: RewardConfig):
    """Heading alignment, active only within ``cfg.distance_threshold`` of the board."""
    theta_rel = np.asarray(theta_rel, dtype=float)
    d = np.asarray(d, dtype=float)
    value = np.exp(-(theta_rel / np.pi) / cfg.sigma ** 2)
    return np.where(d < cfg.distance_threshold, value, 0.0)


def reward_distance(d, cfg: RewardConfig):
    return np.exp(-np.asarray(d, dtype=float) / cfg.sigma ** 2)


def reward_flip(g_z):
    return (np.asarray(g_z) > 0).astype(float)


def reward_skate_velocity(v_skate):
    v = np.asarray(v_skate, dtype=float)
    return np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2)


@dataclass
class RewardInputs:
    contact_flags: np.ndarray      # (..., 4)
    theta_rel: np.ndarray          # wrapped |yaw difference| in [0, pi]
    distance: np.ndarray
    board_gravity_z: np.ndarray
    skate_velocity: np.ndarray     # (..., 2) horizontal deck velocity
    command: np.ndarray            # (..., 3) vx, vy, yaw rate
    base_lin_vel: np.ndarray       # (..., 3) base frame
    base_ang_vel: np.ndarray       # (..., 3) base frame
    projected_gravity: np.ndarray  # (..., 3)
    action: np.ndarray             # (..., 12)
    last_action: np.ndarray        # (..., 12)
    joint_torques: np.ndarray      # (..., 12)


@dataclass
class RewardBreakdown:
    terms: dict
    weighted: dict
    total: np.ndarray


def baseline_terms(inp: RewardInputs, cfg: RewardConfig):
    """Velocity tracking, flat posture, action-rate and torque terms."""
    s2 = cfg.tracking_sigma ** 2
    lin_err = (inp.command[..., 0] - inp.base_lin_vel[..., 0]) ** 2 + (inp.command[..., 1] - inp.base_lin_vel[..., 1]) ** 2
    ang_err = (inp.command[..., 2] - inp.base_ang_vel[..., 2]) ** 2
    g = inp.projected_gravity
    da = inp.action - inp.last_action
    return {
        "track_lin_vel": np.exp(-lin_err / s2),
        "track_ang_vel": np.exp(-ang_err / s2),
        "flat_orientation": g[..., 0] ** 2 + g[..., 1] ** 2,
        "action_rate": np.sum(da * da, axis=-1),
        "joint_torques": np.sum(inp.joint_torques ** 2, axis=-1),
    }


def total_reward(inp: RewardInputs, cfg: RewardConfig) -> RewardBreakdown:
    terms = {
        "feet_on_board": reward_feet_on_board(inp.contact_flags).astype(float),
        "orientation": reward_orientation(inp.theta_rel, inp.distance, cfg),
        "distance": reward_distance(inp.distance, cfg),
        "flip": reward_flip(inp.board_gravity_z),
        "skate_velocity": reward_skate_velocity(inp.skate_velocity),
    }
    terms.update(baseline_terms(inp, cfg))
    weights = cfg.weights()
    weighted = {k: weights[k] * v for k, v in terms.items()}
    total = np.zeros(np.shape(terms["distance"]))
    for k in cfg.TERMS:
        total = total + weighted[k]
    return RewardBreakdown(terms, weighted, total)
