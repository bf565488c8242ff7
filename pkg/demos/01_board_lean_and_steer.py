"""A free skateboard rolling forward while a rider presses one edge.

Run with ``python3 demos/01_board_lean_and_steer.py``.

The board starts at 1 m/s.  After half a second a constant downward push is
applied near the -y edge of the deck.  The bushing lets the deck lean into
the push, both trucks steer with the lean (front one way, rear the other),
and the board curves toward the pressed side.  The printout shows lean,
front steering angle, heading and lateral position every 0.25 s.
"""
import math

import numpy as np

from skatemount.dynamics import quat_rotate, yaw_from_quat
from skatemount.skateboard import SkateboardParams, SkateboardState, bushing_torque, step_skateboard

params = SkateboardParams()
dt = 1.0 / 200.0
board = SkateboardState.resting(1, params, fixed=False)
board.deck.linear_velocity[:, 0] = 1.0

# one "foot" pressing near the -y edge, halfway between the trucks
press_local = np.array([0.0, -0.10, 0.0])
press_force = np.array([[[0.0, 0.0, -25.0]]])

print(f"bushing: k = {params.bushing_stiffness} N*m/rad, c = {params.bushing_damping} N*m*s/rad; "
      f"torque at 0.5 rad lean = {float(bushing_torque(0.5, 0.0, params)):.2f} N*m")
print(f"{'t (s)':>6} {'lean (deg)':>11} {'steer (deg)':>12} {'heading (deg)':>14} {'y (m)':>8} {'speed':>7}")
for step in range(int(3.0 / dt) + 1):
    t = step * dt
    if step % 50 == 0:
        speed = float(np.linalg.norm(board.deck.linear_velocity[0, :2]))
        print(f"{t:6.2f} {math.degrees(board.roll_angle[0]):11.2f} {math.degrees(board.steer_front[0]):12.2f} "
              f"{math.degrees(yaw_from_quat(board.deck.orientation)[0]):14.2f} {board.deck.position[0, 1]:8.3f} "
              f"{speed:7.3f}")
    if t >= 0.5:
        point = board.deck.position[:, None, :] + quat_rotate(board.surface_orientation()[:, None, :], press_local)
        board, _ = step_skateboard(board, params, press_force, point, dt)
    else:
        board, _ = step_skateboard(board, params, dt=dt)

print("\nThe deck leans toward the pressed edge, and the heading turns toward it as well.")
