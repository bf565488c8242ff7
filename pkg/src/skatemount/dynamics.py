"""Rigid-body integration and point-contact forces.

All functions operate on arrays with arbitrary leading batch dimensions and a
trailing component axis.  Quaternions are stored as ``(w, x, y, z)`` and map
body coordinates to world coordinates.

Everything here is written with explicit per-component arithmetic rather than
``matmul``/``einsum`` so that results for one environment do not depend on how
many other environments share the batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

GRAVITY = np.array([0.0, 0.0, -9.81])


# --------------------------------------------------------------------------
# Small vector / quaternion helpers
# --------------------------------------------------------------------------

def cross(a, b):
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def norm(a):
    return np.sqrt(dot(a, a))


def matvec(m, v):
    """``m @ v`` for a (possibly batched) 3x3 matrix and 3-vector."""
    m = np.asarray(m)
    return (m[..., :, 0] * v[..., 0, None]
            + m[..., :, 1] * v[..., 1, None]
            + m[..., :, 2] * v[..., 2, None])


def quat_mul(p, q):
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ], axis=-1)


def quat_conj(q):
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q, v):
    """Rotate ``v`` from the body frame of ``q`` into the world frame."""
    w = q[..., 0:1]
    u = q[..., 1:4]
    t = 2.0 * cross(u, v)
    return v + w * t + cross(u, t)


def quat_rotate_inv(q, v):
    """Express world vector ``v`` in the body frame of ``q``."""
    w = q[..., 0:1]
    u = -q[..., 1:4]
    t = 2.0 * cross(u, v)
    return v + w * t + cross(u, t)


def quat_normalize(q):
    return q / norm4(q)[..., None]


def norm4(q):
    return np.sqrt(q[..., 0] ** 2 + q[..., 1] ** 2 + q[..., 2] ** 2 + q[..., 3] ** 2)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    s = np.sin(half)[..., None]
    return np.concatenate([np.cos(half)[..., None], axis * s], axis=-1)


def quat_from_yaw(yaw):
    yaw = np.asarray(yaw, dtype=float)
    z = np.zeros_like(yaw)
    return np.stack([np.cos(0.5 * yaw), z, z, np.sin(0.5 * yaw)], axis=-1)


def quat_exp(rotvec):
    """Unit quaternion for a rotation vector (axis * angle)."""
    angle = norm(rotvec)
    half = 0.5 * angle
    # sin(half)/angle, with the small-angle series to avoid 0/0
    small = angle < 1e-8
    safe = np.where(small, 1.0, angle)
    k = np.where(small, 0.5 - angle * angle / 48.0, np.sin(half) / safe)
    return np.concatenate([np.cos(half)[..., None], rotvec * k[..., None]], axis=-1)


def yaw_from_quat(q):
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


# --------------------------------------------------------------------------
# Rigid bodies
# --------------------------------------------------------------------------

class _ArrayRecord:
    """Mixin for dataclasses whose fields are arrays sharing a batch axis."""

    def __getitem__(self, idx):
        return replace(self, **{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def copy(self):
        return replace(self, **{f.name: np.array(getattr(self, f.name), copy=True) for f in fields(self)})

    def assign(self, idx, other) -> None:
        for f in fields(self):
            getattr(self, f.name)[idx] = getattr(other, f.name)

    @classmethod
    def concatenate(cls, parts):
        return cls(**{f.name: np.concatenate([getattr(p, f.name) for p in parts], axis=0)
                      for f in fields(cls)})


@dataclass
class RigidBodyState(_ArrayRecord):
    """Pose and twist of a free body.

    ``linear_velocity`` is in the world frame and ``angular_velocity`` in the
    body frame.
    """

    position: np.ndarray
    orientation: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray

    @classmethod
    def at_rest(cls, position, orientation=None) -> "RigidBodyState":
        position = np.array(position, dtype=float)
        if orientation is None:
            orientation = np.zeros(position.shape[:-1] + (4,))
            orientation[..., 0] = 1.0
        return cls(position, np.array(orientation, dtype=float),
                   np.zeros_like(position), np.zeros_like(position))

    def angular_velocity_world(self):
        return quat_rotate(self.orientation, self.angular_velocity)

    def point_velocity(self, point):
        """World velocity of a world-frame point rigidly attached to the body."""
        return self.linear_velocity + cross(self.angular_velocity_world(), point - self.position)

    def check_finite(self) -> None:
        for f in fields(self):
            if not np.all(np.isfinite(getattr(self, f.name))):
                raise ValueError(f"non-finite value in RigidBodyState.{f.name}")


@dataclass(frozen=True)
class InertialParams:
    mass: float
    inertia: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        inertia = np.array(self.inertia, dtype=float)
        if inertia.ndim == 1:
            inertia = np.diag(inertia)
        object.__setattr__(self, "inertia", inertia)
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T):
            raise ValueError("inertia must be a symmetric 3x3 tensor")
        if np.min(np.linalg.eigvalsh(inertia)) <= 0:
            raise ValueError("inertia must be positive definite")
        object.__setattr__(self, "inertia_inv", np.linalg.inv(inertia))

    @classmethod
    def box(cls, mass, size) -> "InertialParams":
        a, b, c = size
        return cls(mass, np.diag([mass * (b * b + c * c) / 12.0,
                                  mass * (a * a + c * c) / 12.0,
                                  mass * (a * a + b * b) / 12.0]))


def integrate_body(state: RigidBodyState, inertial: InertialParams, force, torque, dt: float) -> RigidBodyState:
    """Advance one body by one semi-implicit Euler step.

    ``force`` is in the world frame, ``torque`` in the body frame.

    Velocities are updated first.  Translation is integrated in the world
    frame, where the transport term ``omega x (m v)`` of the body-frame Newton
    equation vanishes identically.  Rotation is integrated in momentum form:
    the body-frame angular momentum receives the torque impulse, the body
    rotates by ``exp(omega dt)`` and the momentum is carried into the new body
    frame by the inverse rotation.  That last step is the exact flow of the
    gyroscopic term ``-omega x (I omega)`` over the step, so torque-free motion
    conserves world angular momentum to round-off.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    state.check_finite()
    force = np.asarray(force, dtype=float)
    torque = np.asarray(torque, dtype=float)
    if not np.all(np.isfinite(force)):
        raise ValueError("non-finite value in force")
    if not np.all(np.isfinite(torque)):
        raise ValueError("non-finite value in torque")

    lin_vel = state.linear_velocity + force * (dt / inertial.mass)

    momentum = matvec(inertial.inertia, state.angular_velocity) + torque * dt
    omega = matvec(inertial.inertia_inv, momentum)
    step_rot = quat_exp(omega * dt)
    momentum = quat_rotate_inv(step_rot, momentum)
    ang_vel = matvec(inertial.inertia_inv, momentum)

    return RigidBodyState(
        position=state.position + lin_vel * dt,
        orientation=quat_normalize(quat_mul(state.orientation, step_rot)),
        linear_velocity=lin_vel,
        angular_velocity=ang_vel,
    )


def angular_momentum_world(state: RigidBodyState, inertial: InertialParams):
    return quat_rotate(state.orientation, matvec(inertial.inertia, state.angular_velocity))


# --------------------------------------------------------------------------
# Contacts
# --------------------------------------------------------------------------

@dataclass
class ContactPoint:
    position: np.ndarray
    normal: np.ndarray
    penetration: np.ndarray
    # velocity of the body point relative to the surface it touches
    relative_velocity: np.ndarray


@dataclass
class ContactForce:
    normal_force: np.ndarray
    # components along tangent_basis(normal)
    tangential_force: np.ndarray

    def world(self, normal):
        t1, t2 = tangent_basis(normal)
        tf = self.tangential_force
        return (self.normal_force[..., None] * normal
                + tf[..., 0:1] * t1 + tf[..., 1:2] * t2)


@dataclass(frozen=True)
class ContactParams:
    normal_stiffness: float = 5000.0
    normal_damping: float = 150.0
    friction_coefficient: float = 1.0
    # viscous slope of the regularized friction law below the Coulomb limit
    tangential_damping: float = 100.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"ContactParams.{f.name} must be >= 0")


def tangent_basis(normal):
    """Two unit tangents completing ``normal`` to a right-handed frame."""
    n = np.asarray(normal, dtype=float)
    use_x = np.abs(n[..., 0]) < 0.9
    a = np.zeros_like(n)
    a[..., 0] = np.where(use_x, 1.0, 0.0)
    a[..., 1] = np.where(use_x, 0.0, 1.0)
    t1 = a - dot(a, n)[..., None] * n
    t1 = t1 / norm(t1)[..., None]
    return t1, cross(n, t1)


def clamp_to_cone(tangential, normal_force, mu):
    """Scale tangential force vectors so that ``|f_t| <= mu * f_n``."""
    tangential = np.asarray(tangential, dtype=float)
    mag = np.sqrt(np.sum(tangential * tangential, axis=-1))
    limit = mu * np.asarray(normal_force, dtype=float)
    scale = np.where(mag > limit, limit / np.where(mag > 0, mag, 1.0), 1.0)
    return tangential * scale[..., None]


def compute_contact_force(contact: ContactPoint, params: ContactParams) -> ContactForce:
    """Penalty normal force with a Coulomb-clamped viscous friction force."""
    n = np.asarray(contact.normal, dtype=float)
    pen = np.asarray(contact.penetration, dtype=float)
    vel = np.asarray(contact.relative_velocity, dtype=float)
    v_n = dot(vel, n)
    active = pen > 0
    f_n = np.where(active, np.maximum(0.0, params.normal_stiffness * pen - params.normal_damping * v_n), 0.0)

    t1, t2 = tangent_basis(n)
    v_t = np.stack([dot(vel, t1), dot(vel, t2)], axis=-1)
    demand = -params.tangential_damping * v_t
    f_t = clamp_to_cone(demand, f_n, params.friction_coefficient)
    return ContactForce(normal_force=f_n, tangential_force=f_t)
