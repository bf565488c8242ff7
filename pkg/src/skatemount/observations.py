"""Policy and critic observation vectors.

Policy layout (90 values with the default 16 edge points)::

    joint pos - stance (12) | joint vel (12) | base ang vel (3) | projected gravity (3)
    | command (3) | board position in base frame (3) | board yaw rel. (sin, cos)
    | deck edge points in base frame (16 x 3) | foot-on-deck flags (4)

The critic vector appends the base linear velocity in the base frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import quat_rotate, quat_rotate_inv, wrap_angle, yaw_from_quat
from .quadruped import QuadrupedParams, QuadrupedState, project_gravity
from .skateboard import SkateboardParams, SkateboardState

JOINT_VEL_SCALE = 0.05
ANG_VEL_SCALE = 0.25
LIN_VEL_SCALE = 2.0


@dataclass
class Observation:
    policy: np.ndarray
    critic: np.ndarray


def edge_point_count(length: float, width: float, spacing: float = 0.1) -> int:
    perimeter = 2.0 * (length + width)
    return max(4, int(math.floor(perimeter / spacing + 1e-9)))


def deck_edge_points(length: float, width: float, spacing: float = 0.1):
    """Points evenly spaced along the deck-top perimeter, in the deck frame.

    The count is ``floor(perimeter / spacing)`` and the points are spread
    uniformly by arc length, starting at the rear-right corner and walking
    counter-clockwise.
    """
    n = edge_point_count(length, width, spacing)
    perimeter = 2.0 * (length + width)
    hx, hy = 0.5 * length, 0.5 * width
    pts = np.zeros((n, 3))
    for i in range(n):
        s = i * perimeter / n
        if s < length:
            pts[i, :2] = (-hx + s, -hy)
        elif s < length + width:
            pts[i, :2] = (hx, -hy + (s - length))
        elif s < 2 * length + width:
            pts[i, :2] = (hx - (s - length - width), hy)
        else:
            pts[i, :2] = (-hx, hy - (s - 2 * length - width))
    return pts


def observation_dims(n_edge: int = 16):
    policy = 12 + 12 + 3 + 3 + 3 + 3 + 2 + 3 * n_edge + 4
    return policy, policy + 3


def board_features(robot: QuadrupedState, board: SkateboardState, edge_points):
    """Board position, heading (sin, cos) and edge points seen from the robot base."""
    q_base = robot.base.orientation
    rel = quat_rotate_inv(q_base, board.deck.position - robot.base.position)
    dyaw = wrap_angle(yaw_from_quat(board.deck.orientation) - yaw_from_quat(q_base))
    q_surf = board.surface_orientation()[..., None, :]
    world_edges = board.deck.position[..., None, :] + quat_rotate(q_surf, edge_points)
    edges = quat_rotate_inv(q_base[..., None, :], world_edges - robot.base.position[..., None, :])
    return rel, dyaw, edges


def build_observation(robot: QuadrupedState, board: SkateboardState, contact_flags, command,
                      params: QuadrupedParams, board_params: SkateboardParams, edge_points=None) -> Observation:
    if edge_points is None:
        edge_points = deck_edge_points(board_params.deck_length, board_params.deck_width)
    base = robot.base
    rel, dyaw, edges = board_features(robot, board, edge_points)
    lin_vel_b = quat_rotate_inv(base.orientation, base.linear_velocity)
    batch = base.position.shape[:-1]
    policy = np.concatenate([
        robot.q - params.default_stance,
        robot.qd * JOINT_VEL_SCALE,
        base.angular_velocity * ANG_VEL_SCALE,
        project_gravity(base.orientation),
        np.broadcast_to(command, batch + (3,)),
        rel,
        np.sin(dyaw)[..., None],
        np.cos(dyaw)[..., None],
        edges.reshape(batch + (-1,)),
        np.asarray(contact_flags, dtype=float),
    ], axis=-1)
    critic = np.concatenate([policy, lin_vel_b * LIN_VEL_SCALE], axis=-1)
    return Observation(policy, critic)
