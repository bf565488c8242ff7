"""Shared independent oracles for the test suite.

Nothing here calls into the package's numerical core: each helper is a
separate, plain re-derivation used to check the vectorized implementation.
"""
import math

import numpy as np
import pytest


# --------------------------------------------------------------------------
# rigid body reference: RK4 on (q, omega_body) with Euler's equations
# --------------------------------------------------------------------------

def _qmul(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                     w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                     w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                     w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2])


def rotation_matrix(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([[1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                     [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                     [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)]])


def rk4_torque_free(q0, w0, inertia, t_end, dt):
    """Reference attitude after ``t_end`` seconds of torque-free motion."""
    inertia = np.asarray(inertia, dtype=float)
    inv = np.linalg.inv(inertia)

    def deriv(y):
        q, w = y[:4], y[4:]
        dq = 0.5 * _qmul(q, np.array([0.0, *w]))
        dw = inv @ (-np.cross(w, inertia @ w))
        return np.concatenate([dq, dw])

    y = np.concatenate([q0, w0]).astype(float)
    for _ in range(int(round(t_end / dt))):
        k1 = deriv(y)
        k2 = deriv(y + 0.5 * dt * k1)
        k3 = deriv(y + 0.5 * dt * k2)
        k4 = deriv(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        y[:4] /= np.linalg.norm(y[:4])
    return y[:4], y[4:]


# --------------------------------------------------------------------------
# leg kinematics oracle: chain of 4x4 homogeneous transforms
# --------------------------------------------------------------------------

def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1.0]])


def _rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s, 0], [0, 1, 0, 0], [-s, 0, c, 0], [0, 0, 0, 1.0]])


def _trans(x, y, z):
    t = np.eye(4)
    t[:3, 3] = (x, y, z)
    return t


def homogeneous_foot(hip_offset, abduction, hip, knee, thigh, calf):
    """Foot centre in the trunk frame: abduct about x, flex hip and knee about y,
    links hanging along -z."""
    chain = (_trans(*hip_offset) @ _rot_x(abduction) @ _rot_y(hip) @ _trans(0, 0, -thigh)
             @ _rot_y(knee) @ _trans(0, 0, -calf))
    return chain[:3, 3]


# --------------------------------------------------------------------------
# GAE oracle: lambda-weighted average of n-step advantages
# --------------------------------------------------------------------------

def brute_force_gae(rewards, values, dones, bootstrap, gamma, lam):
    """Expand A_t = (1 - lam) sum_n lam^(n-1) A_t^(n) with the tail weight
    on the longest available return; episodes cut the sums at ``done``."""
    T = len(rewards)
    v_next = np.append(values[1:], bootstrap)
    adv = np.zeros(T)
    for t in range(T):
        # find how far the episode continues from t (inclusive of the terminal step)
        horizon = T - t
        for k in range(t, T):
            if dones[k]:
                horizon = k - t + 1
                break
        terminal = dones[t + horizon - 1] if horizon > 0 else False

        def n_step(n):
            ret = sum(gamma ** i * rewards[t + i] for i in range(n))
            last = t + n - 1
            if not (last == t + horizon - 1 and terminal):
                ret += gamma ** n * v_next[last]
            return ret - values[t]

        total = 0.0
        for n in range(1, horizon):
            total += (1 - lam) * lam ** (n - 1) * n_step(n)
        total += lam ** (horizon - 1) * n_step(horizon)
        adv[t] = total
    return adv


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --------------------------------------------------------------------------
# acceptance report: one line per criterion, repeated after the run
# --------------------------------------------------------------------------

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
