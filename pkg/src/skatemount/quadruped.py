"""Simplified A1-like quadruped.

A floating-base trunk carries four massless 3-joint legs (hip abduction about
body x, hip flexion and knee about the leg's y axis).  Joint angles follow PD
targets through a first-order joint model; the trunk feels only gravity, foot
contact forces and external pushes.  Leg order is FL, FR, RL, RR and joint
order within a leg is hip, thigh, calf.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    GRAVITY, ContactParams, ContactPoint, InertialParams, RigidBodyState, _ArrayRecord,
    compute_contact_force, cross, integrate_body, quat_rotate, quat_rotate_inv,
)

LEG_NAMES = ("FL", "FR", "RL", "RR")
NUM_JOINTS = 12


def _default_limits():
    leg = [(-0.80, 0.80), (-1.05, 4.19), (-2.70, -0.92)]
    return np.array(leg * 4)


def _default_stance():
    # hips rolled inward so the stance fits on a 25 cm deck
    return np.array([-0.1, 0.8, -1.5, 0.1, 0.8, -1.5, -0.1, 0.8, -1.5, 0.1, 0.8, -1.5])


@dataclass(frozen=True)
class QuadrupedParams:
    # whole-robot mass and inertia lumped into the trunk (legs are massless)
    trunk: InertialParams = field(default_factory=lambda: InertialParams(12.0, [0.22, 0.34, 0.32]))
    hip_offsets: np.ndarray = field(default_factory=lambda: np.array(
        [[0.18, 0.13, 0.0], [0.18, -0.13, 0.0], [-0.18, 0.13, 0.0], [-0.18, -0.13, 0.0]]))
    thigh_length: float = 0.2
    calf_length: float = 0.2
    joint_limits: np.ndarray = field(default_factory=_default_limits)
    pd_kp: float = 25.0
    pd_kd: float = 0.5
    torque_limit: float = 33.5
    # reflected rotor damping of the first-order joint model, N*m*s/rad
    joint_damping: float = 0.5
    max_joint_velocity: float = 21.0
    default_stance: np.ndarray = field(default_factory=_default_stance)
    foot_radius: float = 0.02
    action_scale: float = 0.25
    ground_contact: ContactParams = field(default_factory=lambda: ContactParams(5000.0, 60.0, 1.0, 100.0))
    deck_contact: ContactParams = field(default_factory=lambda: ContactParams(5000.0, 60.0, 0.8, 100.0))

    def __post_init__(self):
        for name in ("hip_offsets", "joint_limits", "default_stance"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        lim = self.joint_limits
        if lim.shape != (NUM_JOINTS, 2) or np.any(lim[:, 0] >= lim[:, 1]):
            raise ValueError("joint_limits must be 12 ordered (min, max) pairs")
        if self.thigh_length <= 0 or self.calf_length <= 0:
            raise ValueError("leg segment lengths must be positive")
        if not self.max_joint_velocity > 0:
            raise ValueError("max_joint_velocity must be positive")
        q = self.default_stance
        if q.shape != (NUM_JOINTS,) or np.any(q < lim[:, 0]) or np.any(q > lim[:, 1]):
            raise ValueError("default_stance must lie within joint_limits")

    def standing_height(self) -> float:
        """Trunk height above a flat support with feet at the default stance."""
        feet = foot_positions_body(self.default_stance, self)
        return float(-feet[..., 2].mean()) + self.foot_radius


@dataclass
class QuadrupedState(_ArrayRecord):
    base: RigidBodyState
    q: np.ndarray
    qd: np.ndarray

    def __getitem__(self, idx):
        return QuadrupedState(self.base[idx], self.q[idx], self.qd[idx])

    def copy(self):
        return QuadrupedState(self.base.copy(), self.q.copy(), self.qd.copy())

    def assign(self, idx, other) -> None:
        self.base.assign(idx, other.base)
        self.q[idx] = other.q
        self.qd[idx] = other.qd

    @classmethod
    def concatenate(cls, parts):
        return cls(RigidBodyState.concatenate([p.base for p in parts]),
                   np.concatenate([p.q for p in parts]), np.concatenate([p.qd for p in parts]))


def _leg_terms(q, params):
    q = np.asarray(q, dtype=float)
    legs = q.reshape(q.shape[:-1] + (4, 3))
    return legs[..., 0], legs[..., 1], legs[..., 2]


def foot_positions_body(q, params: QuadrupedParams):
    """Foot centres in the trunk frame, shape ``(..., 4, 3)``."""
    a, t, k = _leg_terms(q, params)
    l1, l2 = params.thigh_length, params.calf_length
    x = -l1 * np.sin(t) - l2 * np.sin(t + k)
    z = -l1 * np.cos(t) - l2 * np.cos(t + k)
    h = params.hip_offsets
    return np.stack([h[:, 0] + x, h[:, 1] - np.sin(a) * z, h[:, 2] + np.cos(a) * z], axis=-1)


def foot_velocities_body(q, qd, params: QuadrupedParams):
    """Foot velocities in the trunk frame due to joint motion (leg Jacobian times qd)."""
    a, t, k = _leg_terms(q, params)
    ad, td, kd = _leg_terms(qd, params)
    l1, l2 = params.thigh_length, params.calf_length
    z = -l1 * np.cos(t) - l2 * np.cos(t + k)
    xd = -l1 * np.cos(t) * td - l2 * np.cos(t + k) * (td + kd)
    zd = l1 * np.sin(t) * td + l2 * np.sin(t + k) * (td + kd)
    yd = -np.cos(a) * z * ad - np.sin(a) * zd
    zzd = -np.sin(a) * z * ad + np.cos(a) * zd
    return np.stack([xd, yd, zzd], axis=-1)


def forward_kinematics(q, base: RigidBodyState, params: QuadrupedParams):
    """World-frame foot positions, shape ``(..., 4, 3)``."""
    feet = foot_positions_body(q, params)
    return base.position[..., None, :] + quat_rotate(base.orientation[..., None, :], feet)


def foot_velocities_world(state: QuadrupedState, params: QuadrupedParams):
    feet_b = foot_positions_body(state.q, params)
    rel_b = cross(state.base.angular_velocity[..., None, :], feet_b) + foot_velocities_body(state.q, state.qd, params)
    return state.base.linear_velocity[..., None, :] + quat_rotate(state.base.orientation[..., None, :], rel_b)


def pd_joint_torques(q, qd, targets, params: QuadrupedParams):
    tau = params.pd_kp * (np.asarray(targets) - np.asarray(q)) - params.pd_kd * np.asarray(qd)
    return np.clip(tau, -params.torque_limit, params.torque_limit)


def actions_to_targets(actions, params: QuadrupedParams):
    """Policy outputs are offsets from the default stance, scaled then clamped to the limits."""
    targets = params.default_stance + params.action_scale * np.asarray(actions, dtype=float)
    return np.clip(targets, params.joint_limits[:, 0], params.joint_limits[:, 1])


def project_gravity(orientation, gravity=GRAVITY):
    g = np.asarray(gravity, dtype=float)
    g = np.broadcast_to(g / np.linalg.norm(g), np.shape(orientation)[:-1] + (3,))
    return quat_rotate_inv(np.asarray(orientation, dtype=float), g)


def step_joints(q, qd, targets, params: QuadrupedParams, dt: float):
    """First-order joint model ``b * qd = tau(q, qd)`` solved implicitly in ``qd``.

    Returns ``(q_new, qd_new, tau)``.
    """
    lo, hi = params.joint_limits[:, 0], params.joint_limits[:, 1]
    err = np.clip(targets, lo, hi) - q
    b = params.joint_damping
    qd_new = params.pd_kp * err / (b + params.pd_kd)
    tau = pd_joint_torques(q, qd_new, np.clip(targets, lo, hi), params)
    saturated = np.abs(params.pd_kp * err - params.pd_kd * qd_new) > params.torque_limit
    qd_new = np.where(saturated, tau / b, qd_new)
    qd_new = np.clip(qd_new, -params.max_joint_velocity, params.max_joint_velocity)
    q_new = q + dt * qd_new
    at_limit = (q_new < lo) | (q_new > hi)
    q_new = np.clip(q_new, lo, hi)
    qd_new = np.where(at_limit, 0.0, qd_new)
    return q_new, qd_new, tau


@dataclass
class FootContacts:
    """Per-foot contact forces in the world frame, shape ``(..., 4, 3)``."""

    ground_force: np.ndarray
    deck_force: np.ndarray
    points: np.ndarray
    on_deck: np.ndarray
    deck_normal_force: np.ndarray


def foot_contacts(feet, feet_vel, params: QuadrupedParams, board=None, board_params=None):
    """Contact forces on the feet from the ground plane and the deck top.

    A foot touches the deck when its centre is inside the deck rectangle
    (deck frame) and less than one foot radius above, and no deeper than the
    deck thickness below, the top surface.
    """
    r = params.foot_radius
    up = np.zeros_like(feet)
    up[..., 2] = 1.0
    ground = ContactPoint(feet - r * up, up, r - feet[..., 2], feet_vel)
    gf = compute_contact_force(ground, params.ground_contact)
    ground_force = gf.world(up)

    deck_force = np.zeros_like(feet)
    on_deck = np.zeros(feet.shape[:-1], dtype=bool)
    deck_fn = np.zeros(feet.shape[:-1])
    if board is not None:
        q_surf = board.surface_orientation()[..., None, :]
        origin = board.deck.position[..., None, :]
        local = quat_rotate_inv(q_surf, feet - origin)
        hx, hy = 0.5 * board_params.deck_length, 0.5 * board_params.deck_width
        inside = ((np.abs(local[..., 0]) <= hx) & (np.abs(local[..., 1]) <= hy)
                  & (local[..., 2] > -board_params.deck_thickness))
        normal = quat_rotate(q_surf, np.broadcast_to(np.array([0.0, 0.0, 1.0]), feet.shape))
        deck_vel = (board.deck.linear_velocity[..., None, :]
                    + cross(board.deck.angular_velocity_world()[..., None, :], feet - origin))
        pen = np.where(inside, r - local[..., 2], 0.0)
        cf = compute_contact_force(ContactPoint(feet - r * normal, normal, pen, feet_vel - deck_vel),
                                   params.deck_contact)
        deck_force = cf.world(normal)
        deck_fn = cf.normal_force
        on_deck = inside & (local[..., 2] < r + 0.01) & (deck_fn > 0)
    return FootContacts(ground_force, deck_force, feet, on_deck, deck_fn)


def step_robot(state: QuadrupedState, targets, params: QuadrupedParams, dt: float, board=None,
               board_params=None, external_force=None, external_torque=None, gravity=GRAVITY):
    """Advance the robot by one physics step.

    Returns ``(new_state, contacts, tau)``.  ``contacts.deck_force`` is the
    force the deck exerts on each foot; the deck receives its negative.
    """
    state.base.check_finite()
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.qd))):
        raise ValueError("non-finite joint state")
    q, qd, tau = step_joints(state.q, state.qd, targets, params, dt)
    moved = QuadrupedState(state.base, q, qd)
    feet = forward_kinematics(q, state.base, params)
    feet_vel = foot_velocities_world(moved, params)
    contacts = foot_contacts(feet, feet_vel, params, board, board_params)

    total = contacts.ground_force + contacts.deck_force
    force = params.trunk.mass * np.asarray(gravity, dtype=float) + total.sum(axis=-2)
    torque_w = cross(feet - state.base.position[..., None, :], total).sum(axis=-2)
    if external_force is not None:
        force = force + external_force
    if external_torque is not None:
        torque_w = torque_w + external_torque
    torque_b = quat_rotate_inv(state.base.orientation, torque_w)
    base = integrate_body(state.base, params.trunk, force, torque_b, dt)
    return QuadrupedState(base, q, qd), contacts, tau
