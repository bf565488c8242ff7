"""Skateboard model: deck body, truck steering, bushing spring and wheel contacts.

The board is one rigid body (the ``deck`` state, at neutral truck lean) plus a
sprung roll degree of freedom ``roll_angle`` that tilts the deck top relative to
the trucks.  The lean drives both trucks' steering angles kinematically.  Each
of the four wheels is a point contact with the ground whose friction acts only
across the wheel's rolling direction.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .dynamics import (
    GRAVITY, ContactParams, ContactPoint, InertialParams, RigidBodyState, _ArrayRecord,
    clamp_to_cone, compute_contact_force, cross, dot, integrate_body, quat_from_axis_angle,
    quat_mul, quat_rotate, quat_rotate_inv,
)

X_AXIS = np.array([1.0, 0.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class SkateboardParams:
    mass: float = 2.1
    deck_length: float = 0.575
    deck_width: float = 0.250
    deck_thickness: float = 0.015
    deck_height: float = 0.10
    wheelbase: float = 0.44
    track_width: float = 0.18
    wheel_radius: float = 0.028
    bushing_stiffness: float = 2.0
    bushing_damping: float = 0.1
    wheel_friction: float = 0.8
    max_tilt: float = 0.35
    wheel_stiffness: float = 1.0e4
    wheel_damping: float = 40.0
    wheel_lateral_damping: float = 40.0
    # longitudinal rolling drag, N*s/m per wheel; zero means free rolling
    rolling_damping: float = 0.0
    # let the deck lean in fixed mode
    tilt_when_fixed: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                continue
            if f.name in ("rolling_damping", "bushing_damping") and v >= 0:
                continue
            if not v > 0:
                raise ValueError(f"SkateboardParams.{f.name} must be positive, got {v}")
        if not self.deck_length > self.deck_width:
            raise ValueError("deck_length must exceed deck_width")

    @property
    def inertial(self) -> InertialParams:
        return InertialParams.box(self.mass, (self.deck_length, self.deck_width, self.deck_thickness))

    @property
    def roll_inertia(self) -> float:
        return float(self.inertial.inertia[0, 0])

    @property
    def wheel_contact(self) -> ContactParams:
        return ContactParams(self.wheel_stiffness, self.wheel_damping, self.wheel_friction, 0.0)

    def wheel_offsets(self):
        """Wheel centres in the board frame, ordered front-left, front-right, rear-left, rear-right."""
        hx, hy = 0.5 * self.wheelbase, 0.5 * self.track_width
        z = -(self.deck_height - self.wheel_radius)
        return np.array([[hx, hy, z], [hx, -hy, z], [-hx, hy, z], [-hx, -hy, z]])

    def rest_height(self, gravity=GRAVITY) -> float:
        """Height of the deck top at which the wheel springs carry the board's weight."""
        sag = self.mass * abs(float(gravity[2])) / (4.0 * self.wheel_stiffness)
        return self.deck_height - sag


@dataclass
class SkateboardState(_ArrayRecord):
    deck: RigidBodyState
    roll_angle: np.ndarray
    roll_rate: np.ndarray
    steer_front: np.ndarray
    steer_rear: np.ndarray
    fixed: np.ndarray

    def __getitem__(self, idx):
        return SkateboardState(self.deck[idx], self.roll_angle[idx], self.roll_rate[idx],
                               self.steer_front[idx], self.steer_rear[idx], self.fixed[idx])

    def copy(self):
        return SkateboardState(self.deck.copy(), self.roll_angle.copy(), self.roll_rate.copy(),
                               self.steer_front.copy(), self.steer_rear.copy(), self.fixed.copy())

    def assign(self, idx, other) -> None:
        self.deck.assign(idx, other.deck)
        for name in ("roll_angle", "roll_rate", "steer_front", "steer_rear", "fixed"):
            getattr(self, name)[idx] = getattr(other, name)

    @classmethod
    def concatenate(cls, parts):
        return cls(RigidBodyState.concatenate([p.deck for p in parts]),
                   *[np.concatenate([getattr(p, n) for p in parts])
                     for n in ("roll_angle", "roll_rate", "steer_front", "steer_rear", "fixed")])

    @classmethod
    def resting(cls, n: int, params: SkateboardParams, fixed=True, position_xy=(0.0, 0.0), yaw=0.0):
        pos = np.zeros((n, 3))
        pos[:, 0], pos[:, 1] = position_xy
        pos[:, 2] = params.rest_height()
        deck = RigidBodyState.at_rest(pos)
        deck.orientation[:] = quat_from_axis_angle(Z_AXIS, np.full(n, float(yaw)))
        z = np.zeros(n)
        return cls(deck, z.copy(), z.copy(), z.copy(), z.copy(), np.full(n, bool(fixed)))

    def surface_orientation(self):
        """Orientation of the deck top, including the bushing lean."""
        lean = quat_from_axis_angle(X_AXIS, self.roll_angle)
        return quat_mul(self.deck.orientation, lean)


def truck_steering(alpha, max_tilt: float | None = None):
    """Steering angles of the front and rear truck for deck lean ``alpha``.

    A 45 degree kingpin turns the wheels by the lean angle; the rear truck is
    mounted reversed, so it steers the other way.  Positive lean lowers the
    deck's -y edge and positive steer points the wheels that way, so the
    front truck steers into the lean.  Returns
    ``(front, rear, clamped)`` where ``clamped`` flags inputs beyond ``max_tilt``.
    """
    alpha = np.asarray(alpha, dtype=float)
    clamped = np.zeros(alpha.shape, dtype=bool)
    if max_tilt is not None:
        clamped = np.abs(alpha) > max_tilt
        alpha = np.clip(alpha, -max_tilt, max_tilt)
    return alpha, -alpha, clamped


def bushing_torque(alpha, alpha_rate, params: SkateboardParams):
    return -params.bushing_stiffness * np.asarray(alpha) - params.bushing_damping * np.asarray(alpha_rate)


def board_up_vector_flip(state: SkateboardState, gravity=GRAVITY):
    """Normalized vertical component of gravity seen from the deck, and the flip flag."""
    g = np.asarray(gravity, dtype=float)
    g_dir = np.broadcast_to(g / np.linalg.norm(g), state.deck.position.shape)
    g_local = quat_rotate_inv(state.surface_orientation(), g_dir)
    g_z = g_local[..., 2]
    return g_z, g_z > 0


def _roll_step(state, params, foot_forces, foot_points, dt):
    """Integrate the lean DoF. Returns (roll, rate, bushing torque, roll torque from feet)."""
    axis = quat_rotate(state.deck.orientation, np.broadcast_to(X_AXIS, state.deck.position.shape))
    if foot_forces is None:
        feet_roll = np.zeros_like(state.roll_angle)
    else:
        arm = foot_points - state.deck.position[..., None, :]
        moment = cross(arm, foot_forces).sum(axis=-2)
        feet_roll = dot(moment, axis)
    tau = bushing_torque(state.roll_angle, state.roll_rate, params)
    rate = state.roll_rate + dt * (tau + feet_roll) / params.roll_inertia
    roll = state.roll_angle + dt * rate
    hit = np.abs(roll) > params.max_tilt
    roll = np.clip(roll, -params.max_tilt, params.max_tilt)
    rate = np.where(hit, 0.0, rate)
    return roll, rate, tau, feet_roll


def wheel_forces(deck: RigidBodyState, steer_front, steer_rear, params: SkateboardParams):
    """World-frame ground reaction forces and contact points for the four wheels."""
    q = deck.orientation[..., None, :]
    offsets = params.wheel_offsets()
    centers = deck.position[..., None, :] + quat_rotate(q, offsets)
    points = centers - params.wheel_radius * Z_AXIS
    normal = np.broadcast_to(Z_AXIS, points.shape)
    vel = (deck.linear_velocity[..., None, :]
           + cross(deck.angular_velocity_world()[..., None, :], points - deck.position[..., None, :]))
    # squeeze the ground plane only; friction is handled per wheel direction below
    contact = ContactPoint(points, normal, -points[..., 2], vel)
    f_n = compute_contact_force(contact, params.wheel_contact).normal_force

    steer = np.stack([steer_front, steer_front, steer_rear, steer_rear], axis=-1)
    heading = quat_rotate(q, np.broadcast_to(X_AXIS, offsets.shape))
    heading[..., 2] = 0.0
    heading = heading / np.sqrt(dot(heading, heading))[..., None]
    c, s = np.cos(steer)[..., None], np.sin(steer)[..., None]
    # positive steer points the wheels toward the deck's -y side, the low side under positive lean
    lateral0 = cross(np.broadcast_to(Z_AXIS, heading.shape), heading)
    roll_dir = c * heading - s * lateral0
    lateral = cross(np.broadcast_to(Z_AXIS, roll_dir.shape), roll_dir)

    f_lat = clamp_to_cone(-params.wheel_lateral_damping * dot(vel, lateral)[..., None], f_n, params.wheel_friction)
    f_lon = clamp_to_cone(-params.rolling_damping * dot(vel, roll_dir)[..., None], f_n, params.wheel_friction)
    force = f_n[..., None] * normal + f_lat * lateral + f_lon * roll_dir
    return force, points


def step_skateboard(state: SkateboardState, params: SkateboardParams, foot_forces=None, foot_points=None,
                    dt: float = 1.0 / 200.0, gravity=GRAVITY, ground: bool = True):
    """Advance the board by one physics step.

    ``foot_forces`` and ``foot_points`` are world-frame arrays of shape
    ``(..., k, 3)``: the forces the robot's feet exert on the deck and where.
    Fixed boards keep their pose bit-for-bit; their lean stays frozen unless
    ``params.tilt_when_fixed`` is set.  Returns ``(new_state, diagnostics)``.
    """
    if foot_forces is not None:
        foot_forces = np.asarray(foot_forces, dtype=float)
        foot_points = np.asarray(foot_points, dtype=float)
        if not (np.all(np.isfinite(foot_forces)) and np.all(np.isfinite(foot_points))):
            raise ValueError("non-finite foot force or application point")

    fixed = np.asarray(state.fixed, dtype=bool)
    roll, rate, tau_bushing, feet_roll = _roll_step(state, params, foot_forces, foot_points, dt)
    if not params.tilt_when_fixed:
        roll = np.where(fixed, state.roll_angle, roll)
        rate = np.where(fixed, state.roll_rate, rate)
    front, rear, _ = truck_steering(roll, params.max_tilt)
    clamped = (np.abs(roll) >= params.max_tilt) & (roll != state.roll_angle)

    deck = state.deck.copy()
    if np.any(~fixed):
        mass = params.mass
        force = np.broadcast_to(mass * np.asarray(gravity, dtype=float), deck.position.shape).copy()
        torque_w = np.zeros_like(force)
        if ground:
            fw, pw = wheel_forces(deck, state.steer_front, state.steer_rear, params)
            force += fw.sum(axis=-2)
            torque_w += cross(pw - deck.position[..., None, :], fw).sum(axis=-2)
        if foot_forces is not None:
            force += foot_forces.sum(axis=-2)
            torque_w += cross(foot_points - deck.position[..., None, :], foot_forces).sum(axis=-2)
        torque_b = quat_rotate_inv(deck.orientation, torque_w)
        # the lean joint absorbs the feet's roll moment and passes the bushing reaction back
        torque_b[..., 0] += -feet_roll - tau_bushing
        moved = integrate_body(deck, params.inertial, force, torque_b, dt)
        deck = RigidBodyState(*[np.where(fixed[..., None], getattr(deck, n), getattr(moved, n))
                                for n in ("position", "orientation", "linear_velocity", "angular_velocity")])

    new = SkateboardState(deck, roll, rate, front, rear, state.fixed)
    return new, {"tilt_clamped": clamped, "bushing_torque": tau_bushing}
