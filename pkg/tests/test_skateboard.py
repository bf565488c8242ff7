import math

import numpy as np
import pytest

from skatemount.dynamics import quat_from_axis_angle, quat_from_yaw
from skatemount.skateboard import (
    SkateboardParams, SkateboardState, board_up_vector_flip, bushing_torque, step_skateboard, truck_steering,
    wheel_forces,
)

P = SkateboardParams()


def run(state, steps, params=P, **kw):
    for _ in range(steps):
        state, _ = step_skateboard(state, params, **kw)
    return state


# --- nominal board ------------------------------------------------------------

def test_nominal_dimensions_and_mass():
    assert P.mass == 2.1
    assert (P.deck_length, P.deck_width) == (0.575, 0.250)
    assert P.bushing_stiffness == 2.0


# --- truck steering -------------------------------------------------------------

@pytest.mark.parametrize("alpha, expected", [(0.0, (0.0, 0.0)), (0.1, (0.1, -0.1)), (-0.2, (-0.2, 0.2))])
def test_truck_steering_examples(alpha, expected):
    front, rear, clamped = truck_steering(alpha, P.max_tilt)
    assert (float(front), float(rear)) == expected
    assert not clamped


def test_truck_steering_antisymmetric(rng):
    a = rng.uniform(-0.35, 0.35, 1000)
    f1, r1, _ = truck_steering(a)
    f2, r2, _ = truck_steering(-a)
    np.testing.assert_array_equal(f2, -f1)
    np.testing.assert_array_equal(r2, -r1)


def test_truck_steering_clamps_and_flags():
    front, rear, clamped = truck_steering(np.array([0.5, -0.4, 0.1]), 0.35)
    np.testing.assert_array_equal(front, [0.35, -0.35, 0.1])
    np.testing.assert_array_equal(clamped, [True, True, False])


# --- bushing ----------------------------------------------------------------------

def test_bushing_examples():
    assert bushing_torque(0.0, 0.0, P) == 0.0
    assert bushing_torque(0.5, 0.0, P) == -1.0
    assert bushing_torque(0.0, 1.0, P) == pytest.approx(-0.1, abs=1e-15)


def test_bushing_passive_for_aligned_motion(rng):
    a, r = rng.uniform(-1, 1, (2, 10_000))
    keep = a * r >= 0
    assert np.all(bushing_torque(a[keep], r[keep], P) * r[keep] <= 0)


def test_free_lean_oscillates_at_spring_frequency():
    params = SkateboardParams(bushing_damping=0.0, tilt_when_fixed=True)
    s = SkateboardState.resting(1, params, fixed=True)
    s.roll_angle[:] = 0.1
    period = 2 * math.pi * math.sqrt(params.roll_inertia / params.bushing_stiffness)
    dt = 1e-4
    s = run(s, int(round(period / dt)), params, dt=dt)
    # one full period later the lean is back where it started
    assert s.roll_angle[0] == pytest.approx(0.1, abs=2e-3)


# --- flip detection -----------------------------------------------------------------

def deck_with(q):
    s = SkateboardState.resting(1, P, fixed=False)
    s.deck.orientation[:] = q
    return s


def test_flip_upright():
    g_z, flipped = board_up_vector_flip(deck_with([1, 0, 0, 0]))
    assert g_z[0] == pytest.approx(-1.0) and not flipped[0]


def test_flip_inverted():
    q = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), math.pi)
    g_z, flipped = board_up_vector_flip(deck_with(q))
    assert g_z[0] == pytest.approx(1.0) and flipped[0]


def test_flip_on_edge_is_not_flipped():
    q = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), math.pi / 2)
    g_z, flipped = board_up_vector_flip(deck_with(q))
    assert abs(g_z[0]) < 1e-15 and not flipped[0]


# --- stepping -------------------------------------------------------------------------

def test_fixed_mode_pose_is_bit_identical(rng):
    s = SkateboardState.resting(4, P, fixed=True, position_xy=(0.3, -0.2), yaw=0.4)
    before = s.copy()
    forces = rng.standard_normal((4, 4, 3)) * 50
    points = s.deck.position[:, None, :] + rng.uniform(-0.1, 0.1, (4, 4, 3))
    for _ in range(50):
        s, _ = step_skateboard(s, P, forces, points)
    for name in ("position", "orientation", "linear_velocity", "angular_velocity"):
        np.testing.assert_array_equal(getattr(s.deck, name), getattr(before.deck, name))
    np.testing.assert_array_equal(s.roll_angle, 0.0)


def test_fixed_mode_can_lean_when_enabled():
    params = SkateboardParams(tilt_when_fixed=True)
    s = SkateboardState.resting(1, params, fixed=True)
    pos0 = s.deck.position.copy()
    # push down on one side of the deck
    points = s.deck.position[:, None, :] + np.array([[[0.0, 0.1, 0.0]]])
    s = run(s, 100, params, foot_forces=np.array([[[0.0, 0.0, -20.0]]]), foot_points=points)
    assert s.roll_angle[0] != 0.0
    np.testing.assert_array_equal(s.deck.position, pos0)


def test_free_board_at_rest_stays_at_rest():
    s = SkateboardState.resting(1, P, fixed=False)
    p0 = s.deck.position.copy()
    s = run(s, 400)
    np.testing.assert_allclose(s.deck.position, p0, atol=2e-4)
    assert np.linalg.norm(s.deck.linear_velocity) < 1e-3


def test_wheel_normals_carry_the_weight_at_rest():
    s = SkateboardState.resting(1, P, fixed=False)
    f, _ = wheel_forces(s.deck, s.steer_front, s.steer_rear, P)
    assert f[0, :, 2].sum() == pytest.approx(P.mass * 9.81, rel=1e-9)


def test_straight_rolling_distance():
    yaw = 0.7
    s = SkateboardState.resting(1, P, fixed=False, yaw=yaw)
    heading = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    s.deck.linear_velocity[0] = 0.5 * heading
    p0 = s.deck.position[0].copy()
    t = 1.0
    s = run(s, int(round(t / 0.005)))
    d = s.deck.position[0] - p0
    assert d @ heading == pytest.approx(0.5 * t, abs=1e-3)
    assert abs(d @ np.array([-heading[1], heading[0], 0.0])) < 1e-3


def test_free_body_momentum_conserved_without_contacts():
    s = SkateboardState.resting(1, P, fixed=False)
    s.deck.linear_velocity[0] = (0.3, -0.2, 0.1)
    s.deck.angular_velocity[0] = (0.0, 0.5, 1.0)
    m0 = P.mass * s.deck.linear_velocity.copy()
    s = run(s, 200, gravity=np.zeros(3), ground=False)
    np.testing.assert_allclose(P.mass * s.deck.linear_velocity, m0, rtol=1e-12)


def test_non_finite_foot_force_rejected():
    s = SkateboardState.resting(1, P, fixed=False)
    with pytest.raises(ValueError):
        step_skateboard(s, P, np.full((1, 1, 3), np.nan), np.zeros((1, 1, 3)))


def test_lean_turns_the_board():
    params = SkateboardParams(tilt_when_fixed=False)
    s = SkateboardState.resting(1, params, fixed=False, yaw=0.0)
    s.deck.linear_velocity[0] = (1.0, 0.0, 0.0)
    # hold a leftward lean with a steady roll moment from a rider's weight
    for _ in range(200):
        points = s.deck.position[:, None, :] + np.array([[[0.0, 0.1, 0.0]]])
        s, _ = step_skateboard(s, params, np.array([[[0.0, 0.0, -15.0]]]), points)
    assert s.roll_angle[0] < 0  # left (+y) edge down
    assert s.deck.position[0, 1] > 0.01  # the board curves toward the lean


def test_params_validation():
    with pytest.raises(ValueError):
        SkateboardParams(deck_length=0.2, deck_width=0.25)
    with pytest.raises(ValueError):
        SkateboardParams(mass=-1.0)


def test_resting_pose_orientation():
    s = SkateboardState.resting(2, P, yaw=0.3)
    np.testing.assert_allclose(s.deck.orientation, np.tile(quat_from_yaw(np.array(0.3)), (2, 1)))
