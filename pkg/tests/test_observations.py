import math

import numpy as np

from skatemount.dynamics import RigidBodyState, quat_from_axis_angle, quat_from_yaw, quat_mul, quat_rotate
from skatemount.observations import (
    LIN_VEL_SCALE, build_observation, deck_edge_points, edge_point_count, observation_dims,
)
from skatemount.quadruped import QuadrupedParams, QuadrupedState
from skatemount.skateboard import SkateboardParams, SkateboardState

RP, BP = QuadrupedParams(), SkateboardParams()
EDGES = deck_edge_points(BP.deck_length, BP.deck_width)
# policy layout offsets
BOARD_POS, BOARD_YAW, EDGE, FLAGS, GRAV = slice(33, 36), slice(36, 38), slice(38, 86), slice(86, 90), slice(27, 30)


def random_unit_quat(rng, n):
    q = rng.standard_normal((n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def random_scene(rng, n):
    base = RigidBodyState(rng.uniform(-2, 2, (n, 3)), random_unit_quat(rng, n), rng.standard_normal((n, 3)),
                          rng.standard_normal((n, 3)))
    robot = QuadrupedState(base, RP.default_stance + rng.uniform(-0.3, 0.3, (n, 12)), rng.standard_normal((n, 12)))
    board = SkateboardState.resting(n, BP, fixed=False)
    board.deck.position = rng.uniform(-2, 2, (n, 3))
    board.deck.orientation = random_unit_quat(rng, n)
    board.roll_angle = rng.uniform(-0.3, 0.3, n)
    flags = rng.integers(0, 2, (n, 4)).astype(bool)
    return robot, board, flags


def transformed(robot, board, q_rot, shift):
    def move(body):
        return RigidBodyState(quat_rotate(q_rot, body.position) + shift, quat_mul(q_rot, body.orientation),
                              quat_rotate(q_rot, body.linear_velocity), body.angular_velocity.copy())
    b2 = board.copy()
    b2.deck = move(board.deck)
    return QuadrupedState(move(robot.base), robot.q.copy(), robot.qd.copy()), b2


def observe(robot, board, flags):
    return build_observation(robot, board, flags, np.zeros(3), RP, BP, EDGES)


def test_edge_point_count_for_standard_deck():
    assert edge_point_count(0.575, 0.250, 0.10) == 16
    assert len(EDGES) == 16


def test_edge_points_lie_on_perimeter_and_are_evenly_spaced():
    hx, hy = BP.deck_length / 2, BP.deck_width / 2
    on_edge = np.isclose(np.abs(EDGES[:, 0]), hx) | np.isclose(np.abs(EDGES[:, 1]), hy)
    assert on_edge.all()
    # arc length between consecutive points is the perimeter over the count
    perim = 2 * (BP.deck_length + BP.deck_width)
    walk = []
    for x, y, _ in EDGES:
        if np.isclose(y, -hy):
            walk.append(x + hx)
        elif np.isclose(x, hx):
            walk.append(BP.deck_length + y + hy)
        elif np.isclose(y, hy):
            walk.append(BP.deck_length + BP.deck_width + hx - x)
        else:
            walk.append(2 * BP.deck_length + BP.deck_width + hy - y)
    np.testing.assert_allclose(np.diff(walk), perim / 16, atol=1e-12)


def test_dimensions():
    assert observation_dims(16) == (90, 93)
    robot, board, flags = random_scene(np.random.default_rng(0), 5)
    obs = observe(robot, board, flags)
    assert obs.policy.shape == (5, 90) and obs.critic.shape == (5, 93)
    assert np.all(np.isfinite(obs.critic))


def test_contact_flags_are_binary(rng):
    robot, board, flags = random_scene(rng, 20)
    obs = observe(robot, board, flags)
    np.testing.assert_array_equal(obs.policy[:, FLAGS], flags.astype(float))


def test_critic_appends_base_linear_velocity_only(rng):
    robot, board, flags = random_scene(rng, 4)
    robot.base.orientation[:] = (1, 0, 0, 0)
    obs = observe(robot, board, flags)
    np.testing.assert_array_equal(obs.critic[:, :90], obs.policy)
    np.testing.assert_allclose(obs.critic[:, 90:], robot.base.linear_velocity * LIN_VEL_SCALE, atol=1e-15)


def test_identity_base_frame_gives_world_values(rng):
    robot, board, flags = random_scene(rng, 3)
    robot.base.position[:] = 0.0
    robot.base.orientation[:] = (1, 0, 0, 0)
    board.deck.orientation[:] = quat_from_yaw(np.array([0.3, -1.0, 2.0]))
    board.roll_angle[:] = 0.0
    obs = observe(robot, board, flags)
    np.testing.assert_allclose(obs.policy[:, BOARD_POS], board.deck.position, atol=1e-15)
    np.testing.assert_allclose(obs.policy[:, BOARD_YAW], np.stack([np.sin([0.3, -1.0, 2.0]),
                                                                   np.cos([0.3, -1.0, 2.0])], 1), atol=1e-14)
    world_edges = board.deck.position[:, None, :] + quat_rotate(board.deck.orientation[:, None, :], EDGES)
    np.testing.assert_allclose(obs.policy[:, EDGE].reshape(3, 16, 3), world_edges, atol=1e-14)


def test_invariant_to_yaw_and_translation(rng):
    n = 1000
    robot, board, flags = random_scene(rng, n)
    q_rot = quat_from_yaw(rng.uniform(-math.pi, math.pi, n))
    shift = rng.uniform(-100, 100, (n, 3))
    r2, b2 = transformed(robot, board, q_rot, shift)
    a, b = observe(robot, board, flags), observe(r2, b2, flags)
    np.testing.assert_allclose(b.critic, a.critic, atol=1e-9, rtol=0)


def test_board_geometry_invariant_to_any_rigid_motion(rng):
    n = 1000
    robot, board, flags = random_scene(rng, n)
    r2, b2 = transformed(robot, board, random_unit_quat(rng, n), rng.uniform(-100, 100, (n, 3)))
    a, b = observe(robot, board, flags), observe(r2, b2, flags)
    for sl in (BOARD_POS, EDGE):
        np.testing.assert_allclose(b.policy[:, sl], a.policy[:, sl], atol=1e-9, rtol=0)
    # projected gravity is the one slot that sees a tilt of the whole scene
    tilt = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), 0.5)
    r3, b3 = transformed(robot, board, np.tile(tilt, (n, 1)), np.zeros(3))
    assert not np.allclose(observe(r3, b3, flags).policy[:, GRAV], a.policy[:, GRAV])


def test_velocity_command_occupies_its_slot(rng):
    robot, board, flags = random_scene(rng, 2)
    obs = build_observation(robot, board, flags, np.array([0.5, -0.2, 0.1]), RP, BP, EDGES)
    np.testing.assert_array_equal(obs.policy[:, 30:33], [[0.5, -0.2, 0.1]] * 2)
