"""Policy evaluation over a fixed number of episodes."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import SimParams, VecEnv
from .ppo import GaussianPolicy
from .quadruped import QuadrupedParams
from .skateboard import SkateboardParams
from .stages import StageConfig


@dataclass
class EvalSummary:
    episodes: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.episodes)

    def _mean(self, key):
        vals = [e[key] for e in self.episodes if not math.isnan(e[key])]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def success_rate(self) -> float:
        return self._mean("success") if self.episodes else math.nan

    @property
    def mean_mount_time(self) -> float:
        return self._mean("mount_time")

    @property
    def mean_reward(self) -> float:
        return self._mean("return")

    @property
    def mean_feet_on_board(self) -> float:
        return self._mean("feet_on_board_mean")

    @property
    def mean_length(self) -> float:
        return self._mean("length")

    def as_dict(self) -> dict:
        return {"episodes": self.count, "success_rate": self.success_rate,
                "mean_mount_time_s": self.mean_mount_time, "mean_episode_reward": self.mean_reward,
                "mean_feet_on_board": self.mean_feet_on_board, "mean_episode_length": self.mean_length}


def evaluate_policy(policy: GaussianPolicy, stage: StageConfig, episodes: int, seed: int = 0,
                    deterministic: bool = True, num_envs: int = 64,
                    robot_params: QuadrupedParams | None = None, board_params: SkateboardParams | None = None,
                    sim: SimParams | None = None, trajectory_dir=None) -> EvalSummary:
    """Run exactly ``episodes`` episodes and summarize them.

    Episode ``k`` is the ``k // n``-th episode of environment ``k % n``, so
    short episodes do not crowd out long ones.  With ``trajectory_dir`` set,
    each episode's per-step base pose, joint angles, deck pose and deck-contact
    flags are written to ``episode_<k>.npz``.
    """
    summary = EvalSummary()
    if episodes <= 0:
        return summary
    n = min(num_envs, episodes)
    ss = np.random.SeedSequence(seed)
    env_seed = int(ss.spawn(1)[0].generate_state(1)[0])
    rng = np.random.default_rng(ss.spawn(1)[0])
    env = VecEnv(stage, n, env_seed, robot_params, board_params, sim)
    record = trajectory_dir is not None
    if record:
        trajectory_dir = Path(trajectory_dir)
        trajectory_dir.mkdir(parents=True, exist_ok=True)
    traj = [[] for _ in range(n)]
    counts = np.zeros(n, dtype=np.int64)
    results = {}
    try:
        obs = env.observe()
        while len(results) < episodes:
            if record:
                s = env.state
                for i in range(n):
                    traj[i].append((s.robot.base.position[i].copy(), s.robot.base.orientation[i].copy(),
                                    s.robot.q[i].copy(), s.board.deck.position[i].copy(),
                                    s.board.deck.orientation[i].copy(), s.contact_flags[i].copy()))
            mean = policy.mean(obs.policy)
            actions = mean if deterministic else mean + np.exp(policy.log_std) * rng.standard_normal(mean.shape)
            obs, _, _, info = env.step(actions)
            for ep in info["episodes"]:
                i = ep["env"]
                k = int(counts[i]) * n + i
                counts[i] += 1
                if k < episodes:
                    results[k] = ep
                    if record:
                        _write_trajectory(trajectory_dir / f"episode_{k}.npz", traj[i], ep)
                traj[i] = []
    finally:
        env.close()
    summary.episodes = [results[k] for k in range(episodes)]
    return summary


def _write_trajectory(path: Path, steps, episode):
    cols = list(zip(*steps))
    np.savez(path, base_position=np.array(cols[0]), base_orientation=np.array(cols[1]),
             joint_positions=np.array(cols[2]), deck_position=np.array(cols[3]),
             deck_orientation=np.array(cols[4]), feet_on_deck=np.array(cols[5]),
             summary=json.dumps(episode))
