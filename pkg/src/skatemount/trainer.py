"""Rollout collection and staged PPO training."""
from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .env import BOARD_FLIPPED, FELL, TIMEOUT, SimParams, VecEnv
from .ppo import GaussianPolicy, NonFiniteLossError, PpoConfig, PpoLearner, RolloutBuffer, gaussian_log_prob
from .quadruped import QuadrupedParams
from .skateboard import SkateboardParams
from .stages import StageConfig

log = logging.getLogger(__name__)


class DimensionMismatchError(ValueError):
    pass


@dataclass
class TrainStats:
    iteration: int
    mean_ep_reward: float
    mean_ep_len: float
    term_timeout: int
    term_fell: int
    term_flip: int
    surrogate: float
    value: float
    entropy: float
    kl: float
    learning_rate: float
    wall_s: float = 0.0


def _seeds(seed: int, stream: int = 0):
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    env_ss, init_ss, act_ss, upd_ss = ss.spawn(4)
    return (int(env_ss.generate_state(1)[0]), np.random.default_rng(init_ss),
            np.random.default_rng(act_ss), np.random.default_rng(upd_ss))


def check_dims(policy: GaussianPolicy, env: VecEnv):
    have = policy.dims
    want = (env.policy_dim, env.critic_dim, env.action_dim)
    if tuple(have) != want:
        raise DimensionMismatchError(
            f"checkpoint dims (policy, critic, action) = {tuple(have)} but the environment needs {want}")


def collect_rollout(env: VecEnv, policy: GaussianPolicy, buffer: RolloutBuffer, obs, rng, gamma):
    """Fill ``buffer`` with one rollout; returns (next observation, finished episodes)."""
    episodes = []
    buffer.log_std = policy.log_std.copy()
    for _ in range(buffer.steps):
        mean = policy.mean(obs.policy)
        actions = mean + np.exp(policy.log_std) * rng.standard_normal(mean.shape)
        logp = gaussian_log_prob(actions, mean, policy.log_std)
        values = policy.value(obs.critic)
        next_obs, reward, done, info = env.step(actions)
        reward = reward.copy()
        if np.any(info["time_outs"]):
            t_out = info["time_outs"]
            reward[t_out] += gamma * policy.value(info["terminal_critic"][t_out])
        buffer.add(obs.policy, obs.critic, actions, logp, values, reward, done, mean, info["causes"])
        episodes += info["episodes"]
        obs = next_obs
    return obs, episodes


def train_stage(stage: StageConfig, cfg: PpoConfig, num_envs: int = 64, seed: int = 0, stream: int = 0,
                warm_start: Checkpoint | None = None, iterations: int | None = None,
                robot_params: QuadrupedParams | None = None, board_params: SkateboardParams | None = None,
                sim: SimParams | None = None, num_workers: int = 1, on_iteration=None,
                checkpoint_every: int = 0, on_checkpoint=None, record_wall_time: bool = True):
    """Train one curriculum stage.

    Returns ``(checkpoint, history)``.  ``on_iteration(stats)`` is called after
    every update and ``on_checkpoint(checkpoint)`` every ``checkpoint_every``
    iterations (if positive) and once at the end.  ``stream`` separates the
    random streams of different stages that share one master ``seed``.
    """
    env_seed, init_rng, act_rng, upd_rng = _seeds(seed, stream)
    env = VecEnv(stage, num_envs, env_seed, robot_params, board_params, sim, num_workers)
    try:
        if warm_start is not None:
            check_dims(warm_start.policy, env)
            policy = warm_start.policy.copy()
            learner = PpoLearner(policy, cfg, warm_start.learning_rate)
        else:
            policy = GaussianPolicy.create(env.policy_dim, env.critic_dim, env.action_dim, init_rng,
                                           cfg.actor_hidden, cfg.critic_hidden, cfg.init_log_std)
            learner = PpoLearner(policy, cfg)
        errors = cfg.validate(cfg.steps_per_env * num_envs)
        if errors:
            raise ValueError("; ".join(f"{p}: {m}" for p, m in errors))

        n_iter = stage.iterations if iterations is None else iterations
        buffer = RolloutBuffer(cfg.steps_per_env, num_envs, env.policy_dim, env.critic_dim, env.action_dim)
        recent = deque(maxlen=100)
        history = []
        obs = env.observe()
        start = time.perf_counter()

        def snapshot(it):
            return Checkpoint(policy.copy(), learner.learning_rate, it, seed)

        for it in range(n_iter):
            obs, episodes = collect_rollout(env, policy, buffer, obs, act_rng, cfg.gamma)
            buffer.finish(policy.value(obs.critic), cfg.gamma, cfg.lam)
            recent.extend(episodes)
            try:
                upd = learner.update(buffer, upd_rng)
                losses = (upd.surrogate, upd.value, upd.entropy, upd.kl)
            except NonFiniteLossError as exc:
                log.warning("iteration %d skipped: %s", it, exc)
                losses = (math.nan,) * 4
            causes = buffer.causes[buffer.dones.astype(bool)]
            stats = TrainStats(
                iteration=it,
                mean_ep_reward=float(np.mean([e["return"] for e in recent])) if recent else math.nan,
                mean_ep_len=float(np.mean([e["length"] for e in recent])) if recent else math.nan,
                term_timeout=int(np.sum(causes == TIMEOUT)),
                term_fell=int(np.sum(causes == FELL)),
                term_flip=int(np.sum(causes == BOARD_FLIPPED)),
                surrogate=losses[0], value=losses[1], entropy=losses[2], kl=losses[3],
                learning_rate=learner.learning_rate,
                wall_s=time.perf_counter() - start if record_wall_time else 0.0,
            )
            history.append(stats)
            if on_iteration is not None:
                on_iteration(stats)
            if on_checkpoint is not None and checkpoint_every > 0 and (it + 1) % checkpoint_every == 0:
                on_checkpoint(snapshot(it + 1))
        final = snapshot(n_iter if warm_start is None else warm_start.iteration + n_iter)
        if on_checkpoint is not None:
            on_checkpoint(final)
        return final, history
    finally:
        env.close()
