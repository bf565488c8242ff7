"""Vectorized skateboard-mounting environment.

Every environment owns a ``numpy.random.Generator`` spawned from the master
seed; resets and push perturbations draw only from their own stream, and the
physics is element-wise over environments.  Stepping the batch in one piece or
in chunks on a thread pool therefore gives bit-identical results.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RigidBodyState, quat_from_yaw, quat_rotate_inv, wrap_angle, yaw_from_quat
from .observations import Observation, build_observation, deck_edge_points, observation_dims
from .quadruped import (
    QuadrupedParams, QuadrupedState, actions_to_targets, foot_positions_body, project_gravity, step_robot,
)
from .rewards import RewardInputs, total_reward
from .skateboard import SkateboardParams, SkateboardState, board_up_vector_flip, step_skateboard
from .stages import StageConfig, check_stage, sample_spawn_xy_yaw

RUNNING, TIMEOUT, FELL, BOARD_FLIPPED = 0, 1, 2, 3
CAUSES = {RUNNING: "running", TIMEOUT: "timeout", FELL: "fell", BOARD_FLIPPED: "board_flipped"}


@dataclass(frozen=True)
class SimParams:
    dt: float = 1.0 / 200.0
    substeps: int = 4
    gravity: tuple = (0.0, 0.0, -9.81)
    action_clip: float = 5.0
    # per-step reward is the weighted sum times this factor; None means control_dt
    reward_scale: float | None = None

    @property
    def control_dt(self) -> float:
        return self.dt * self.substeps

    @property
    def reward_factor(self) -> float:
        return self.control_dt if self.reward_scale is None else self.reward_scale


@dataclass
class EnvState:
    robot: QuadrupedState
    board: SkateboardState
    step: np.ndarray
    command: np.ndarray
    last_action: np.ndarray
    push_countdown: np.ndarray
    contact_flags: np.ndarray
    joint_torques: np.ndarray

    _ARRAYS = ("step", "command", "last_action", "push_countdown", "contact_flags", "joint_torques")

    def __getitem__(self, idx):
        return EnvState(self.robot[idx], self.board[idx], *[getattr(self, n)[idx] for n in self._ARRAYS])

    def assign(self, idx, other) -> None:
        self.robot.assign(idx, other.robot)
        self.board.assign(idx, other.board)
        for n in self._ARRAYS:
            getattr(self, n)[idx] = getattr(other, n)

    @classmethod
    def concatenate(cls, parts):
        return cls(QuadrupedState.concatenate([p.robot for p in parts]),
                   SkateboardState.concatenate([p.board for p in parts]),
                   *[np.concatenate([getattr(p, n) for p in parts]) for n in cls._ARRAYS])

    @property
    def num_envs(self) -> int:
        return self.step.shape[0]


def _push_interval_steps(stage: StageConfig, sim: SimParams) -> int:
    return max(1, int(round(stage.push_interval_s / sim.control_dt)))


def reset_env(stage: StageConfig, rng: np.random.Generator, robot_params: QuadrupedParams,
              board_params: SkateboardParams, sim: SimParams = SimParams()) -> EnvState:
    """Sample one fresh environment (batch of one) for ``stage``."""
    board = SkateboardState.resting(1, board_params, fixed=stage.board_fixed, position_xy=stage.board_offset)
    board_xy = np.asarray(stage.board_offset, dtype=float)
    xy, yaw = sample_spawn_xy_yaw(stage.spawn, rng, board_xy)
    lo, hi = robot_params.joint_limits[:, 0], robot_params.joint_limits[:, 1]
    q = np.clip(robot_params.default_stance
                + rng.uniform(-stage.joint_pos_noise, stage.joint_pos_noise, size=12), lo, hi)
    qd = rng.uniform(-stage.joint_vel_noise, stage.joint_vel_noise, size=12)
    rng_cmd = np.asarray(stage.command_range, dtype=float)
    command = rng.uniform(-rng_cmd, rng_cmd)

    # lowest foot rests on the ground, or on the deck top if any foot is over it
    feet = foot_positions_body(q, robot_params)
    c, s = math.cos(yaw), math.sin(yaw)
    fx = xy[0] + c * feet[:, 0] - s * feet[:, 1] - board_xy[0]
    fy = xy[1] + s * feet[:, 0] + c * feet[:, 1] - board_xy[1]
    on_deck = (np.abs(fx) <= 0.5 * board_params.deck_length) & (np.abs(fy) <= 0.5 * board_params.deck_width)
    support = board.deck.position[0, 2] if np.any(on_deck) else 0.0
    sag = robot_params.trunk.mass * abs(sim.gravity[2]) / (4.0 * robot_params.ground_contact.normal_stiffness)
    height = support - float(feet[:, 2].min()) + robot_params.foot_radius - sag

    base = RigidBodyState.at_rest(np.array([[xy[0], xy[1], height]]), quat_from_yaw(np.array([yaw])))
    robot = QuadrupedState(base, q[None], qd[None])
    return EnvState(robot, board, np.zeros(1, dtype=np.int64), command[None], np.zeros((1, 12)),
                    np.full(1, _push_interval_steps(stage, sim), dtype=np.int64),
                    np.zeros((1, 4), dtype=bool), np.zeros((1, 12)))


def apply_push_perturbation(state: EnvState, stage: StageConfig, rngs, sim: SimParams = SimParams()):
    """Count down each environment's push timer and sample pushes that fall due.

    Returns world-frame ``(force, torque)`` arrays to hold on the trunk for this
    control step.  Stages with zero push ranges never push and draw nothing.
    """
    n = state.num_envs
    force = np.zeros((n, 3))
    torque = np.zeros((n, 3))
    if stage.push_force <= 0 and stage.push_torque <= 0:
        return force, torque
    state.push_countdown -= 1
    due = np.flatnonzero(state.push_countdown <= 0)
    for i in due:
        force[i] = rngs[i].uniform(-stage.push_force, stage.push_force, size=3)
        torque[i] = rngs[i].uniform(-stage.push_torque, stage.push_torque, size=3)
        state.push_countdown[i] = _push_interval_steps(stage, sim)
    return force, torque


def check_termination(state: EnvState, stage: StageConfig, sim: SimParams = SimParams()):
    """Termination cause per environment (``RUNNING``, ``TIMEOUT``, ``FELL`` or ``BOARD_FLIPPED``)."""
    n = state.num_envs
    codes = np.full(n, RUNNING, dtype=np.int64)
    if "timeout" in stage.terminations:
        codes = np.where(state.step >= stage.episode_steps(sim.control_dt), TIMEOUT, codes)
    if "fell" in stage.terminations:
        base = state.robot.base
        g = project_gravity(base.orientation, sim.gravity)
        fell = (base.position[:, 2] < stage.fell_height) | (g[:, 2] > stage.fell_gravity_z)
        codes = np.where(fell, FELL, codes)
    if "board_flipped" in stage.terminations:
        _, flipped = board_up_vector_flip(state.board, sim.gravity)
        codes = np.where(flipped, BOARD_FLIPPED, codes)
    return codes


def simulate(state: EnvState, targets, push_force, push_torque, robot_params: QuadrupedParams,
             board_params: SkateboardParams, sim: SimParams):
    """Run the physics substeps of one control step; returns the new robot, board and contacts."""
    robot, board = state.robot, state.board
    gravity = np.asarray(sim.gravity, dtype=float)
    for _ in range(sim.substeps):
        robot_new, contacts, tau = step_robot(robot, targets, robot_params, sim.dt, board, board_params,
                                              push_force, push_torque, gravity)
        board, _ = step_skateboard(board, board_params, -contacts.deck_force, contacts.points, sim.dt, gravity)
        robot = robot_new
    return robot, board, contacts.on_deck, tau


def reward_inputs(state: EnvState, action, robot_params: QuadrupedParams, cfg, sim: SimParams) -> RewardInputs:
    base, board = state.robot.base, state.board
    diff = board.deck.position - base.position
    if cfg.planar_distance:
        d = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2)
    else:
        d = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2)
    theta = np.abs(wrap_angle(yaw_from_quat(base.orientation) - yaw_from_quat(board.deck.orientation)))
    g_z, _ = board_up_vector_flip(board, sim.gravity)
    return RewardInputs(
        contact_flags=state.contact_flags,
        theta_rel=theta,
        distance=d,
        board_gravity_z=g_z,
        skate_velocity=board.deck.linear_velocity[:, :2],
        command=state.command,
        base_lin_vel=quat_rotate_inv(base.orientation, base.linear_velocity),
        base_ang_vel=base.angular_velocity,
        projected_gravity=project_gravity(base.orientation, sim.gravity),
        action=action,
        last_action=state.last_action,
        joint_torques=state.joint_torques,
    )


@dataclass
class EpisodeTracker:
    """Per-environment running statistics for the current episode."""

    n: int
    ret: np.ndarray = field(init=False)
    length: np.ndarray = field(init=False)
    feet_sum: np.ndarray = field(init=False)
    first_contact: np.ndarray = field(init=False)
    first_mount: np.ndarray = field(init=False)
    streak: np.ndarray = field(init=False)
    best_streak: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ret = np.zeros(self.n)
        self.length = np.zeros(self.n, dtype=np.int64)
        self.feet_sum = np.zeros(self.n)
        self.first_contact = np.full(self.n, -1, dtype=np.int64)
        self.first_mount = np.full(self.n, -1, dtype=np.int64)
        self.streak = np.zeros(self.n, dtype=np.int64)
        self.best_streak = np.zeros(self.n, dtype=np.int64)

    def update(self, reward, flags):
        count = flags.sum(axis=1)
        self.ret += reward
        self.length += 1
        self.feet_sum += count
        step = self.length - 1
        self.first_contact = np.where((self.first_contact < 0) & (count > 0), step, self.first_contact)
        full = count == 4
        self.first_mount = np.where((self.first_mount < 0) & full, step, self.first_mount)
        self.streak = np.where(full, self.streak + 1, 0)
        self.best_streak = np.maximum(self.best_streak, self.streak)

    def clear(self, i):
        self.ret[i] = 0.0
        self.length[i] = 0
        self.feet_sum[i] = 0.0
        self.first_contact[i] = -1
        self.first_mount[i] = -1
        self.streak[i] = 0
        self.best_streak[i] = 0


class VecEnv:
    """Batch of independent skateboard-mounting environments for one curriculum stage."""

    def __init__(self, stage: StageConfig, num_envs: int, seed: int = 0,
                 robot_params: QuadrupedParams | None = None, board_params: SkateboardParams | None = None,
                 sim: SimParams | None = None, num_workers: int = 1):
        if num_envs < 1:
            raise ValueError("num_envs must be >= 1")
        self.stage = check_stage(stage)
        self.num_envs = num_envs
        self.robot_params = robot_params or QuadrupedParams()
        self.board_params = board_params or SkateboardParams()
        self.sim = sim or SimParams()
        self.num_workers = max(1, int(num_workers))
        self.edge_points = deck_edge_points(self.board_params.deck_length, self.board_params.deck_width)
        self.policy_dim, self.critic_dim = observation_dims(len(self.edge_points))
        self.action_dim = 12
        self.max_episode_steps = stage.episode_steps(self.sim.control_dt)
        seeds = np.random.SeedSequence(seed).spawn(num_envs)
        self.rngs = [np.random.Generator(np.random.PCG64(s)) for s in seeds]
        self._pool = ThreadPoolExecutor(self.num_workers) if self.num_workers > 1 else None
        self.state = EnvState.concatenate([self._reset_one(i) for i in range(num_envs)])
        self.tracker = EpisodeTracker(num_envs)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _reset_one(self, i) -> EnvState:
        return reset_env(self.stage, self.rngs[i], self.robot_params, self.board_params, self.sim)

    def observe(self) -> Observation:
        s = self.state
        return build_observation(s.robot, s.board, s.contact_flags, s.command, self.robot_params,
                                 self.board_params, self.edge_points)

    def _simulate(self, targets, force, torque):
        args = (self.robot_params, self.board_params, self.sim)
        if self._pool is None or self.num_envs < 2:
            return simulate(self.state, targets, force, torque, *args)
        chunks = [c for c in np.array_split(np.arange(self.num_envs), self.num_workers) if len(c)]
        jobs = [self._pool.submit(simulate, self.state[c], targets[c], force[c], torque[c], *args) for c in chunks]
        parts = [j.result() for j in jobs]
        return (QuadrupedState.concatenate([p[0] for p in parts]),
                SkateboardState.concatenate([p[1] for p in parts]),
                np.concatenate([p[2] for p in parts]), np.concatenate([p[3] for p in parts]))

    def step(self, actions):
        """Advance every environment by one control step.

        Returns ``(observation, reward, done, info)``.  Finished environments
        are reset before returning; ``info["terminal_critic"]`` holds their
        last critic observation and ``info["episodes"]`` their summaries.
        """
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (self.num_envs, self.action_dim):
            raise ValueError(f"expected actions of shape {(self.num_envs, self.action_dim)}, got {actions.shape}")
        actions = np.clip(actions, -self.sim.action_clip, self.sim.action_clip)
        targets = actions_to_targets(actions, self.robot_params)
        force, torque = apply_push_perturbation(self.state, self.stage, self.rngs, self.sim)

        robot, board, flags, tau = self._simulate(targets, force, torque)
        s = self.state
        s.robot, s.board = robot, board
        s.contact_flags = flags
        s.joint_torques = tau
        s.step = s.step + 1

        breakdown = total_reward(reward_inputs(s, actions, self.robot_params, self.stage.reward, self.sim),
                                 self.stage.reward)
        reward = breakdown.total * self.sim.reward_factor
        s.last_action = actions.copy()
        codes = check_termination(s, self.stage, self.sim)
        self.tracker.update(reward, flags)

        obs = self.observe()
        done = codes != RUNNING
        info = {"breakdown": breakdown, "causes": codes, "time_outs": codes == TIMEOUT,
                "terminal_critic": obs.critic.copy(), "episodes": []}
        for i in np.flatnonzero(done):
            info["episodes"].append(self._summarize(i, codes[i]))
            self.tracker.clear(i)
            s.assign(slice(i, i + 1), self._reset_one(i))
        if np.any(done):
            fresh = self.observe()
            obs.policy[done] = fresh.policy[done]
            obs.critic[done] = fresh.critic[done]
        return obs, reward, done, info

    def _summarize(self, i, code):
        t = self.tracker
        dt = self.sim.control_dt
        mounted = t.first_mount[i] >= 0 and t.first_contact[i] >= 0
        return {
            "env": int(i),
            "return": float(t.ret[i]),
            "length": int(t.length[i]),
            "cause": CAUSES[int(code)],
            "feet_on_board_mean": float(t.feet_sum[i] / max(1, t.length[i])),
            "success": bool(t.best_streak[i] * dt >= 1.0),
            "mount_time": float((t.first_mount[i] - t.first_contact[i]) * dt) if mounted else math.nan,
        }
